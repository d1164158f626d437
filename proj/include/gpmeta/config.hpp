/*
 * Copyright 2026 The gpmeta Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpmeta/experiment.hpp"

namespace gpmeta {

// Flat UTF-8 "key = value" files. A "[section]" line prefixes the keys that
// follow it with "section."; '#' and ';' start comments. Unknown keys are
// rejected with their line number.
struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

std::vector<ConfigEntry> parse_config(std::istream& is, const std::string& source = "<config>");
std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path);

/// Value of experiment.preset, if present.
std::optional<std::string> config_preset(const std::vector<ConfigEntry>& entries);

/// Applies every entry (except experiment.preset) on top of `cfg`.
void apply_config(experiment::ExperimentConfig& cfg, const std::vector<ConfigEntry>& entries,
                  const std::string& source = "<config>");

/// Applies a single "section.key" / value pair.
void apply_config_value(experiment::ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Description of every accepted key, for --help.
std::string config_help();

} // namespace gpmeta

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

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "gpmeta/error.hpp"

// Little-endian record helpers shared by the checkpoint and cache formats.
namespace gpmeta::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, std::string_view what) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        fail(ErrorCode::TruncatedStream, std::string(what) + ": stream ended early");
    return value;
}

void write_magic(std::ostream& os, std::string_view magic);
void expect_magic(std::istream& is, std::string_view magic, std::string_view what);
void write_string(std::ostream& os, const std::string& s);
std::string read_string(std::istream& is, std::string_view what);

} // namespace gpmeta::binio

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

#include "gpmeta/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace gpmeta {

using experiment::ExperimentConfig;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) fail(ErrorCode::ParseError, key + ": expected a number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) fail(ErrorCode::ParseError, key + ": expected an integer, got '" + v + "'");
    return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const long long n = to_int(key, v);
    if (n < 0) fail(ErrorCode::ParseError, key + ": must be non-negative");
    return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorCode::ParseError, key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::optional<double> to_optional(const std::string& key, const std::string& v) {
    if (v == "none" || v == "off") return std::nullopt;
    return to_double(key, v);
}

ParamGroups to_groups(const std::string& key, const std::string& v) {
    ParamGroups g = ParamGroups::none();
    if (v == "none") return g;
    for (const auto& item : split_list(v)) {
        if (item == "mean") g.mean = true;
        else if (item == "kernel") g.kernel = true;
        else if (item == "noise") g.noise = true;
        else fail(ErrorCode::ParseError, key + ": unknown parameter group '" + item + "'");
    }
    return g;
}

struct KeyDef {
    const char* key;
    const char* help;
    std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
};

const std::vector<KeyDef>& key_table() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<KeyDef> table = {
        {"experiment.preset", "base preset: step, sinusoid, mnist or icu", [](C&, S, S) {}},
        {"experiment.name", "label used in logs and output file names", [](C& c, S, S v) { c.name = v; }},
        {"experiment.family", "task family: step, sinusoid, mnist or csv",
         [](C& c, S, S v) { c.family = experiment::family_from_string(v); }},
        {"experiment.model",
         "vanilla, learned_kernel, learned_mean, learned_both, mean_on_target, nn_direct or true_mean",
         [](C& c, S, S v) { c.model = experiment::model_from_string(v); }},
        {"experiment.seed", "master seed", [](C& c, S k, S v) { c.seed = to_count(k, v); }},
        {"experiment.meta_tasks", "number of meta-training tasks (or images)",
         [](C& c, S k, S v) { c.meta_tasks = to_count(k, v); }},
        {"experiment.eval_tasks", "number of evaluation tasks (or images)",
         [](C& c, S k, S v) { c.eval_tasks = to_count(k, v); }},
        {"experiment.n_tilde", "comma-separated context sizes to evaluate; 'all' keeps every context point",
         [](C& c, S k, S v) {
             c.n_tilde.clear();
             for (const auto& item : split_list(v))
                 c.n_tilde.push_back(item == "all" ? experiment::kAllContext : static_cast<int>(to_int(k, item)));
         }},
        {"experiment.verbose", "log per-epoch meta-loss to stderr",
         [](C& c, S k, S v) { c.verbose = to_bool(k, v); }},

        {"sinusoid.amplitude", "mean amplitude a in a sin(b x)",
         [](C& c, S k, S v) { c.sinusoid.amplitude = to_double(k, v); }},
        {"sinusoid.frequency", "mean frequency b", [](C& c, S k, S v) { c.sinusoid.frequency = to_double(k, v); }},
        {"sinusoid.lengthscale", "generating RBF lengthscale",
         [](C& c, S k, S v) { c.sinusoid.lengthscale = to_double(k, v); }},
        {"sinusoid.signal_var", "generating RBF signal variance",
         [](C& c, S k, S v) { c.sinusoid.signal_var = to_double(k, v); }},
        {"sinusoid.noise_var", "observation noise variance",
         [](C& c, S k, S v) { c.sinusoid.noise_var = to_double(k, v); }},
        {"sinusoid.x_min", "left end of the input grid", [](C& c, S k, S v) { c.sinusoid.x_min = to_double(k, v); }},
        {"sinusoid.x_max", "right end of the input grid", [](C& c, S k, S v) { c.sinusoid.x_max = to_double(k, v); }},

        {"mnist.dir", "directory holding the four IDX files", [](C& c, S, S v) { c.mnist_dir = v; }},
        {"mnist.meta_points", "random pixels per meta-training image",
         [](C& c, S k, S v) { c.mnist_meta_points = to_int(k, v); }},
        {"mnist.eval_context", "context pool per evaluation image (largest n_tilde)",
         [](C& c, S k, S v) { c.mnist_eval_context = to_int(k, v); }},
        {"mnist.normalize", "scale pixel coordinates to [0, 1]",
         [](C& c, S k, S v) { c.mnist_normalize = to_bool(k, v); }},

        {"csv.path", "long-format CSV file (entity, time, value columns)", [](C& c, S, S v) { c.csv_path = v; }},
        {"csv.entity_column", "entity id column name", [](C& c, S, S v) { c.csv.entity_column = v; }},
        {"csv.time_column", "time column name", [](C& c, S, S v) { c.csv.time_column = v; }},
        {"csv.value_column", "value column name", [](C& c, S, S v) { c.csv.value_column = v; }},
        {"csv.split_time", "observations with time < split_time are context, the rest test",
         [](C& c, S k, S v) { c.csv.split_time = to_double(k, v); }},
        {"csv.eval_fraction", "fraction of entities held out for evaluation (the last ones in file order)",
         [](C& c, S k, S v) { c.csv_eval_fraction = to_double(k, v); }},
        {"csv.time_scale", "times are divided by this before entering the model",
         [](C& c, S k, S v) { c.time_scale = to_double(k, v); }},

        {"model.hidden", "comma-separated hidden layer widths of the mean and kernel networks",
         [](C& c, S k, S v) {
             c.hidden.clear();
             for (const auto& item : split_list(v)) c.hidden.push_back(to_int(k, item));
         }},
        {"model.activation", "sigmoid or relu",
         [](C& c, S, S v) { c.activation = nn::activation_from_string(v); }},
        {"model.init_lengthscale", "initial RBF lengthscale",
         [](C& c, S k, S v) { c.init_lengthscale = to_double(k, v); }},
        {"model.init_embedding_lengthscale", "initial deep-kernel lengthscale (embedding space)",
         [](C& c, S k, S v) { c.init_embedding_lengthscale = to_double(k, v); }},
        {"model.init_signal_var", "initial RBF signal variance",
         [](C& c, S k, S v) { c.init_signal_var = to_double(k, v); }},
        {"model.init_noise_var", "initial noise variance",
         [](C& c, S k, S v) { c.init_noise_var = to_double(k, v); }},
        {"model.kernel_from_generator", "sinusoid family: start RBF and noise at the generating values",
         [](C& c, S k, S v) { c.kernel_from_generator = to_bool(k, v); }},
        {"model.trainable", "override trained groups: comma list of mean, kernel, noise, or none",
         [](C& c, S k, S v) { c.trainable_override = to_groups(k, v); }},

        {"train.learning_rate", "SGD step size", [](C& c, S k, S v) { c.train.learning_rate = to_double(k, v); }},
        {"train.epochs", "passes over the meta-training tasks",
         [](C& c, S k, S v) { c.train.epochs = static_cast<int>(to_int(k, v)); }},
        {"train.shuffle", "reshuffle the task order every epoch",
         [](C& c, S k, S v) { c.train.shuffle_each_epoch = to_bool(k, v); }},
        {"train.grad_clip", "per-task gradient norm cap, or none",
         [](C& c, S k, S v) { c.train.grad_clip = to_optional(k, v); }},
        {"train.keep_best_epoch", "return the epoch with the lowest meta-loss rather than the last",
         [](C& c, S k, S v) { c.keep_best_epoch = to_bool(k, v); }},
        {"train.checkpoint_every", "write a prior checkpoint every k epochs (0 disables)",
         [](C& c, S k, S v) { c.checkpoint_every = static_cast<int>(to_int(k, v)); }},

        {"mean_on_target.steps", "gradient steps on the target context",
         [](C& c, S k, S v) { c.mean_on_target.steps = static_cast<int>(to_int(k, v)); }},
        {"mean_on_target.learning_rate", "step size",
         [](C& c, S k, S v) { c.mean_on_target.learning_rate = to_double(k, v); }},
        {"mean_on_target.grad_clip", "gradient norm cap, or none",
         [](C& c, S k, S v) { c.mean_on_target.grad_clip = to_optional(k, v); }},
    };
    return table;
}

} // namespace

std::vector<ConfigEntry> parse_config(std::istream& is, const std::string& source) {
    std::vector<ConfigEntry> out;
    std::string section, raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        if (line_no == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.erase(0, 3);
        const auto comment = raw.find_first_of("#;");
        const std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorCode::ParseError, where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(ErrorCode::ParseError, where + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorCode::ParseError, where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail(ErrorCode::ParseError, where + ": empty key");
        if (!section.empty()) key = section + "." + key;
        out.push_back({key, trim(line.substr(eq + 1)), line_no});
    }
    return out;
}

std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config file " + path.string());
    return parse_config(in, path.string());
}

std::optional<std::string> config_preset(const std::vector<ConfigEntry>& entries) {
    std::optional<std::string> preset;
    for (const auto& e : entries)
        if (e.key == "experiment.preset") preset = e.value;
    return preset;
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& def : key_table()) {
        if (key == def.key) {
            def.set(cfg, key, value);
            return;
        }
    }
    fail(ErrorCode::ParseError, "unknown config key '" + key + "'");
}

void apply_config(ExperimentConfig& cfg, const std::vector<ConfigEntry>& entries, const std::string& source) {
    for (const auto& e : entries) {
        try {
            apply_config_value(cfg, e.key, e.value);
        } catch (const Error& err) {
            throw Error(err.code(), source + ":" + std::to_string(e.line) + ": " + err.what());
        }
    }
}

std::string config_help() {
    std::ostringstream os;
    os << "Config file keys ([section] headers prefix the keys below; CLI flags override file values):\n";
    std::string current;
    for (const auto& def : key_table()) {
        const std::string key = def.key;
        const std::string section = key.substr(0, key.find('.'));
        if (section != current) {
            os << "  [" << section << "]\n";
            current = section;
        }
        os << "    " << key.substr(key.find('.') + 1);
        for (std::size_t pad = key.size() - section.size(); pad < 24; ++pad) os << ' ';
        os << def.help << '\n';
    }
    return os.str();
}

} // namespace gpmeta

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

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpmeta/config.hpp"
#include "gpmeta/experiment.hpp"
#include "gpmeta/gp.hpp"
#include "gpmeta/metatrain.hpp"
#include "gpmeta/tasks.hpp"
#include "gpmeta/verify.hpp"

namespace fs = std::filesystem;
using namespace gpmeta;
using namespace gpmeta::experiment;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfigError = 2;

// Options shared by the experiment subcommands.
struct CommonOptions {
    std::string preset;
    std::string scale = "desk";
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string model;
    std::string mnist_dir;
    std::string out_dir = "gpmeta_out";
    std::string tasks_dir;
    std::optional<int> epochs;
    std::optional<double> learning_rate;
    std::vector<std::string> overrides;
    bool verbose = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--preset", o.preset, "step, sinusoid, mnist or icu (default: experiment.preset, else step)");
    app->add_option("--scale", o.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "master seed");
    app->add_option("--model", o.model,
                    "vanilla, learned_kernel, learned_mean, learned_both, mean_on_target, nn_direct, true_mean");
    app->add_option("--mnist-dir", o.mnist_dir, "directory with the MNIST IDX files");
    app->add_option("--out-dir", o.out_dir, "output directory");
    app->add_option("--tasks-dir", o.tasks_dir, "use meta.gptk / eval.gptk written by gen-tasks");
    app->add_option("--epochs", o.epochs, "meta-training epochs");
    app->add_option("--lr", o.learning_rate, "meta-training learning rate");
    app->add_option("--set", o.overrides, "section.key=value override (repeatable)");
    app->add_flag("-v,--verbose", o.verbose, "log training progress");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
    std::vector<ConfigEntry> entries;
    if (!o.config.empty()) entries = read_config_file(o.config);
    std::string preset = o.preset;
    if (preset.empty()) preset = config_preset(entries).value_or("step");
    ExperimentConfig cfg = preset_config(preset, scale_from_string(o.scale));
    apply_config(cfg, entries, o.config);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorCode::ParseError, "--set expects section.key=value, got '" + kv + "'");
        apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (!o.model.empty()) cfg.model = model_from_string(o.model);
    if (!o.mnist_dir.empty()) cfg.mnist_dir = o.mnist_dir;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
    if (o.verbose) cfg.verbose = true;
    cfg.validate();
    return cfg;
}

TaskData resolve_tasks(const CommonOptions& o, const ExperimentConfig& cfg) {
    if (o.tasks_dir.empty()) return load_tasks(cfg);
    const fs::path dir = o.tasks_dir;
    for (const char* f : {"meta.gptk", "eval.gptk"})
        if (!fs::exists(dir / f)) fail(ErrorCode::MissingData, "task cache not found: " + (dir / f).string());
    return {load_task_cache(dir / "meta.gptk"), load_task_cache(dir / "eval.gptk")};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

std::string rows_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_results_csv(os, rows);
    return os.str();
}

TrainResult train_with_checkpoints(const ExperimentConfig& cfg, const TaskSet& meta, const fs::path& out) {
    EpochObserver observer;
    if (cfg.checkpoint_every > 0) {
        observer = [&](int epoch, const GpPrior& p, double) {
            if ((epoch + 1) % cfg.checkpoint_every == 0)
                save_prior(out / ("checkpoint_epoch_" + std::to_string(epoch + 1) + ".gppr"), p);
        };
    }
    auto result = train_prior(cfg, meta, observer);
    save_prior(out / "prior.gppr", result.prior);
    std::ofstream trace(out / "loss_trace.csv");
    write_loss_trace_csv(trace, result.trace);
    return result;
}

int cmd_gen_tasks(const CommonOptions& o) {
    const auto cfg = resolve_config(o);
    const auto data = load_tasks(cfg);
    const fs::path out = o.out_dir;
    fs::create_directories(out);
    save_task_cache(out / "meta.gptk", data.meta);
    save_task_cache(out / "eval.gptk", data.eval);
    std::cout << "wrote " << data.meta.size() << " meta-training and " << data.eval.size() << " evaluation tasks to "
              << out.string() << '\n';
    return 0;
}

int cmd_meta_train(const CommonOptions& o) {
    const auto cfg = resolve_config(o);
    const auto data = resolve_tasks(o, cfg);
    const fs::path out = o.out_dir;
    fs::create_directories(out);
    const auto result = train_with_checkpoints(cfg, data.meta, out);
    std::cout << "trained " << to_string(cfg.model) << " for " << result.trace.size() << " epochs";
    if (!result.trace.empty()) std::cout << ", final meta-loss " << result.trace.back();
    std::cout << "\nprior written to " << (out / "prior.gppr").string() << '\n';
    return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& prior_path) {
    const auto cfg = resolve_config(o);
    const auto data = resolve_tasks(o, cfg);
    const fs::path out = o.out_dir;
    fs::create_directories(out);
    const GpPrior prior =
        prior_path.empty() ? train_with_checkpoints(cfg, data.meta, out).prior : load_prior(prior_path);
    std::vector<ResultRow> rows;
    switch (cfg.model) {
    case ModelPreset::MeanOnTarget: rows = evaluate_mean_on_target(cfg, prior, data.eval); break;
    case ModelPreset::NnDirect: rows = evaluate_nn_direct(cfg, prior, data.eval); break;
    default: rows = evaluate_prior(cfg, to_string(cfg.model), prior, data.eval); break;
    }
    const std::string md = results_markdown(rows, cfg.name + " / " + to_string(cfg.model));
    write_text(out / "results.csv", rows_csv(rows));
    write_text(out / "results.md", md);
    std::cout << md;
    return 0;
}

int cmd_reproduce(const std::string& table_name, const CommonOptions& o) {
    ReproduceOptions opts;
    opts.scale = scale_from_string(o.scale);
    opts.seed = o.seed.value_or(42);
    opts.verbose = o.verbose;
    if (!o.mnist_dir.empty()) opts.mnist_dir = o.mnist_dir;
    const Table table = table_from_string(table_name);
    const auto report = reproduce_table(table, opts);
    const fs::path out = o.out_dir;
    fs::create_directories(out);
    const std::string stem = to_string(table) + "_" + o.scale;
    write_text(out / (stem + ".csv"), report.csv);
    write_text(out / (stem + ".md"), report.markdown);
    std::cout << report.markdown;
    return 0;
}

int cmd_verify(std::uint64_t seed) {
    const auto report = verify::verify_suite(seed);
    verify::write_report(std::cout, report);
    return report.passed() ? 0 : kExitVerifyFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-learned Gaussian process priors: experiments, table reproduction and self-checks"};
    app.require_subcommand(1);
    app.footer(config_help());

    CommonOptions gen_opts, train_opts, eval_opts, repro_opts;
    auto* gen = app.add_subcommand("gen-tasks", "generate or load task sets and write them as task caches");
    add_common(gen, gen_opts);

    auto* train = app.add_subcommand("meta-train", "meta-train a prior; writes prior.gppr and loss_trace.csv");
    add_common(train, train_opts);

    std::string prior_path;
    auto* eval = app.add_subcommand("evaluate", "evaluate a prior on target tasks; writes results.csv and results.md");
    add_common(eval, eval_opts);
    eval->add_option("--prior", prior_path, "prior checkpoint (default: meta-train first)")->check(CLI::ExistingFile);

    std::string table = "table1";
    auto* repro = app.add_subcommand("reproduce", "run every method of a comparison table");
    add_common(repro, repro_opts);
    repro->add_option("--table", table, "table1, tableS1 or tableS2");

    std::uint64_t verify_seed = 0;
    auto* ver = app.add_subcommand("verify", "gradient, equivalence and linear-algebra self-checks");
    ver->add_option("--seed", verify_seed, "seed for the random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (*gen) return cmd_gen_tasks(gen_opts);
        if (*train) return cmd_meta_train(train_opts);
        if (*eval) return cmd_evaluate(eval_opts, prior_path);
        if (*repro) return cmd_reproduce(table, repro_opts);
        if (*ver) return cmd_verify(verify_seed);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
    return 0;
}

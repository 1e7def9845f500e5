// cablesoup: run, validate and list the named experiments.
//
// Exit codes: 0 all asserted verdicts pass, 1 some verdict failed, 2 invalid
// config, 3 calibration failure, 4 any other error (capacity, numerics, I/O).

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cable/experiment.hpp"

namespace {

enum Exit { kPass = 0, kFail = 1, kBadConfig = 2, kCalibration = 3, kOther = 4 };

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::uint64_t> samples,
            unsigned threads, const std::string& out_path, const std::string& csv_path)
{
    auto j = cable::read_json_file(path);
    if (seed) {
        j["seed"] = *seed;
    }
    if (samples) {
        j["samples"] = *samples;
    }
    if (!out_path.empty()) {
        j["output"] = out_path;
    }
    if (!csv_path.empty()) {
        j["per_sample_csv"] = csv_path;
    }
    const auto cfg = cable::parse_config(j);
    cable::RunOptions opt;
    if (threads > 0) {
        opt.threads = threads;
    }
    const auto res = cable::run(cfg, opt);

    if (cfg.output.empty() || cfg.output == "-") {
        cable::write_jsonl(std::cout, res.records);
    } else {
        std::ofstream os(cfg.output);
        if (!os) {
            throw cable::Error("cannot write " + cfg.output);
        }
        cable::write_jsonl(os, res.records);
    }
    if (!cfg.per_sample_csv.empty()) {
        if (res.per_sample_csv.empty()) {
            std::cerr << "note: " << cfg.experiment << " has no per-sample table\n";
        } else {
            std::ofstream os(cfg.per_sample_csv);
            if (!os) {
                throw cable::Error("cannot write " + cfg.per_sample_csv);
            }
            os << res.per_sample_csv;
        }
    }
    for (const auto& r : res.records) {
        std::cerr << r["experiment"].get<std::string>() << " [" << r["route"].get<std::string>() << "] "
                  << r["fixture"].dump() << ": " << (r["pass"].get<bool>() ? "PASS" : "FAIL");
        for (const auto& v : r["verdicts"]) {
            if (!v["pass"].get<bool>()) {
                std::cerr << (v["asserted"].get<bool>() ? "  failed: " : "  (reported) ") << v["name"].get<std::string>();
            }
        }
        for (const auto& n : r["notices"]) {
            std::cerr << "\n  notice: " << n.get<std::string>();
        }
        std::cerr << "  (" << r["wall_clock_s"].get<double>() << " s)\n";
    }
    return res.pass ? kPass : kFail;
}

int cmd_validate(const std::string& path)
{
    const auto res = cable::validate(cable::read_json_file(path));
    if (!res.ok()) {
        std::cerr << "invalid config " << path << ":\n";
        for (const auto& e : res.errors) {
            std::cerr << "  - " << e << '\n';
        }
        return kBadConfig;
    }
    std::cout << res.config->to_json().dump(2) << '\n';
    return kPass;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cable-graph GFF and loop-soup cluster experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment config; JSON-lines records go to --out or stdout");
    std::string config;
    std::uint64_t seed = 0;
    std::uint64_t samples = 0;
    unsigned threads = 0;
    std::string out;
    std::string csv;
    run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "Override the master seed");
    auto* samples_opt = run->add_option("--samples", samples, "Override the sample count")->check(CLI::PositiveNumber);
    run->add_option("--threads", threads,
                    std::string("Worker threads (default: $") + cable::kThreadsEnv + " or all cores)")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", out, "JSON-lines output path ('-' for stdout)");
    run->add_option("--csv", csv, "Per-sample CSV path (highdim-scan)");

    auto* val = app.add_subcommand("validate", "Check a config and print it normalised");
    std::string val_config;
    val->add_option("config", val_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

    app.add_subcommand("list-experiments", "List experiment names");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(config, *seed_opt ? std::optional(seed) : std::nullopt,
                           *samples_opt ? std::optional(samples) : std::nullopt, threads, out, csv);
        }
        if (*val) {
            return cmd_validate(val_config);
        }
        for (const auto& n : cable::experiment_names()) {
            std::cout << n << '\n';
        }
        return kPass;
    } catch (const cable::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kBadConfig;
    } catch (const cable::CalibrationError& e) {
        std::cerr << "calibration failure: " << e.what() << '\n';
        return kCalibration;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
}

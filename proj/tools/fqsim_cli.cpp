// Copyright 2026 The fqsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fqsim/experiment.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

int run_command(const std::string &path, std::optional<std::uint64_t> seed, std::optional<int> trials,
                std::optional<int> threads, const std::string &out) {
    fqsim::ExperimentConfig cfg = fqsim::load_experiment_config(path);
    if (seed) {
        cfg.seed = *seed;
    }
    if (trials) {
        if (*trials < 1) {
            throw fqsim::ConfigError("--trials", "must be >= 1");
        }
        cfg.trials = *trials;
    }
    if (threads) {
        cfg.threads = *threads;
    }
    if (!out.empty()) {
        cfg.output = out;
    }
    const fqsim::ResolvedConfig resolved = fqsim::resolve_config(cfg);
    const fqsim::ExperimentResult result = fqsim::run_experiment(resolved);
    if (cfg.output.empty() || cfg.output == "-") {
        fqsim::write_csv(std::cout, resolved, result);
    } else {
        std::ofstream f(cfg.output, std::ios::binary);
        if (!f) {
            throw fqsim::ConfigError("output", "cannot open '" + cfg.output + "'");
        }
        fqsim::write_csv(f, resolved, result);
    }
    for (const auto &a : result.assertions) {
        std::cerr << (a.passed ? "PASS " : "FAIL ") << a.name << " " << a.detail << "\n";
    }
    return result.passed() ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"fast-forwarded query simulation experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> threads;
    std::string out;
    auto *run = app.add_subcommand("run", "run the experiment described by a JSON config");
    run->add_option("config", config_path, "config path")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--trials", trials, "override the trial count");
    run->add_option("--threads", threads, "worker threads, 0 for all");
    run->add_option("--out", out, "CSV output path, - for stdout");

    auto *list = app.add_subcommand("list-experiments", "print experiment names and summaries");
    auto *schema = app.add_subcommand("print-schema", "print the config format as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitPass : kExitConfig;
    }

    try {
        if (*list) {
            for (const auto &e : fqsim::experiment_registry()) {
                std::cout << e.name << "\t" << e.summary << "\n";
            }
            return kExitPass;
        }
        if (*schema) {
            std::cout << fqsim::experiment_schema().dump(2) << "\n";
            return kExitPass;
        }
        return run_command(config_path, seed, trials, threads, out);
    } catch (const fqsim::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fqsim::InfeasibleParams &e) {
        std::cerr << "infeasible parameters: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
}

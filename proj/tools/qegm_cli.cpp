// SPDX-License-Identifier: Apache-2.0
//
// qegm — experiment driver for the quantum-enhanced generative model.
//
//   qegm generate-data --config cfg.json [--seed N] [--force] [--out DIR]
//   qegm train         --config cfg.json [--seed N] [--out DIR]
//   qegm evaluate      --config cfg.json [--checkpoint FILE] [--out DIR]
//   qegm compare       --config compare.json [--out DIR]
//
// Relative output_dir values resolve against $QEGM_OUT_ROOT when it is set.
// Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qegm/commands.hpp"
#include "qegm/config.hpp"
#include "qegm/error.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
    bool force = false;
    bool quiet = false;
};

qegm::CommandOptions to_options(const CliArgs& args) {
    qegm::CommandOptions options;
    options.seed_override = args.seed;
    options.out_override = args.out;
    options.force = args.force;
    options.quiet = args.quiet;
    return options;
}

void add_common(CLI::App* cmd, CliArgs& args, bool with_force, bool with_checkpoint) {
    cmd->add_option("--config", args.config_path, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", args.seed, "Override training.seed");
    cmd->add_option("--out", args.out, "Override output_dir");
    cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
    if (with_force) {
        cmd->add_flag("--force", args.force, "Overwrite existing output files");
    }
    if (with_checkpoint) {
        cmd->add_option("--checkpoint", args.checkpoint,
                        "Checkpoint file (default: <output_dir>/checkpoint.json)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum-enhanced generative model experiments"};
    app.require_subcommand(1);

    CliArgs args;
    auto* generate = app.add_subcommand("generate-data", "Sample and label a dataset");
    add_common(generate, args, /*with_force=*/true, /*with_checkpoint=*/false);
    auto* train = app.add_subcommand("train", "Train a model on an existing dataset");
    add_common(train, args, /*with_force=*/false, /*with_checkpoint=*/false);
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
    add_common(evaluate, args, /*with_force=*/false, /*with_checkpoint=*/true);
    auto* compare = app.add_subcommand("compare", "Train and evaluate several models across seeds");
    add_common(compare, args, /*with_force=*/false, /*with_checkpoint=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const auto options = to_options(args);
        if (generate->parsed()) {
            qegm::cmd_generate_data(qegm::ExperimentConfig::from_json_file(args.config_path),
                                    options);
        } else if (train->parsed()) {
            qegm::cmd_train(qegm::ExperimentConfig::from_json_file(args.config_path), options);
        } else if (evaluate->parsed()) {
            qegm::cmd_evaluate(qegm::ExperimentConfig::from_json_file(args.config_path), options,
                               args.checkpoint);
        } else if (compare->parsed()) {
            qegm::cmd_compare(qegm::CompareConfig::from_json_file(args.config_path), options);
        }
    } catch (const qegm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

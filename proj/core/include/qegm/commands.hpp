// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "qegm/checkpoint.hpp"
#include "qegm/config.hpp"
#include "qegm/data.hpp"
#include "qegm/metrics.hpp"
#include "qegm/model.hpp"

namespace qegm {

struct CommandOptions {
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    bool force = false;
    bool quiet = false;
};

/// Applies --seed / --out overrides to a loaded config.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommandOptions& options);

/// Writes dataset.csv + manifest.json into the run directory. Refuses to
/// overwrite an existing dataset unless options.force is set.
void cmd_generate_data(const ExperimentConfig& cfg, const CommandOptions& options);

/// Trains per the config on the dataset files in the run directory; writes
/// checkpoint.json, train_report.json and resolved_config.json.
void cmd_train(const ExperimentConfig& cfg, const CommandOptions& options);

/// Evaluates a checkpoint on the test split; writes metrics_report.json.
MetricsReport cmd_evaluate(const ExperimentConfig& cfg, const CommandOptions& options,
                           const std::optional<std::string>& checkpoint_path = std::nullopt);

struct CompareRow {
    std::string model;
    std::uint64_t seed = 0;
    double tail_kl = 0.0;
    double rare_recall = 0.0;
    double coverage_error = 0.0;
    double wasserstein = 0.0;
};

struct CompareResult {
    std::vector<CompareRow> per_seed;
    std::vector<CompareRow> medians;  // one row per model, seed field unused
};

/// Runs generate-data -> train -> evaluate for every (model, seed) pair and
/// writes comparison.csv plus a JSON summary. All model configs must share
/// identical dataset and metrics sections.
CompareResult cmd_compare(const CompareConfig& cfg, const CommandOptions& options);

/// Dataset file round-trip used by the commands and their tests.
void write_dataset_files(const std::string& dir, const LabeledDataset& dataset,
                         const ExperimentConfig& cfg, bool force);
LabeledDataset load_dataset_files(const std::string& dir, std::string* dataset_hash = nullptr);

/// Builds the LabeledDataset described by the config's dataset section
/// (sampling a mixture or ingesting a CSV), labeling and splitting with
/// streams derived from the experiment seed.
LabeledDataset build_dataset(const ExperimentConfig& cfg);

}  // namespace qegm

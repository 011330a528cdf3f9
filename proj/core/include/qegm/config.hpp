// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qegm/data.hpp"
#include "qegm/metrics.hpp"
#include "qegm/model.hpp"

namespace qegm {

enum class DatasetKind { Mixture, Csv };

struct LabelingConfig {
    ThresholdKind rule = ThresholdKind::Quantile;
    double kappa = 2.5;           // kappa_sigma rule
    double quantile_level = 0.01; // quantile rule
};

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Mixture;
    MixtureSpec mixture = MixtureSpec::benchmark();
    std::size_t n_samples = 5000;
    std::string csv_path;
    std::vector<std::string> csv_categorical;
    std::string csv_label_column;
    LabelingConfig labeling;
    std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
};

struct MetricsConfig {
    int bins = 32;
    double smoothing_eps = 1e-9;
    std::vector<double> alphas{0.5, 0.8, 0.9, 0.95};
    double tail_fraction = 0.05;
    std::size_t generation_count = 2000;
    bool sample_heads = false;
    std::size_t generation_shots = 0;
};

/// Fully resolved experiment description. Parsing is strict: unknown keys
/// anywhere in the file are an error, so a typo cannot silently fall back
/// to a default.
struct ExperimentConfig {
    DatasetConfig dataset;
    ModelConfig model;
    bool model_input_dim_given = false;
    LossConfig loss;
    TrainConfig training;
    MetricsConfig metrics;
    std::string output_dir;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_json_file(const std::string& path);

    nlohmann::json to_json() const;
    /// FNV-1a of the canonical JSON dump of the resolved config.
    std::string hash() const;

    void validate() const;

    /// output_dir resolved against the QEGM_OUT_ROOT environment variable
    /// when relative and the variable is set.
    std::string resolved_output_dir() const;
};

struct CompareConfig {
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> model_configs;  // (name, path)
    std::string output_dir;

    static CompareConfig from_json_file(const std::string& path);
};

}  // namespace qegm

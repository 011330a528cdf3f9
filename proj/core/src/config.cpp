// SPDX-License-Identifier: Apache-2.0
#include "qegm/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "qegm/error.hpp"
#include "qegm/io.hpp"

namespace qegm {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
    if (!j.is_object()) {
        throw Error::validation("config section '" + context + "' must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (allowed.find(key) == allowed.end()) {
            throw Error::validation("unknown key '" + key + "' in config section '" + context +
                                    "'");
        }
    }
}

const json& require(const json& j, const std::string& key, const std::string& context) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw Error::validation("missing key '" + key + "' in config section '" + context + "'");
    }
    return *it;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    return it->get<T>();
}

DatasetConfig parse_dataset(const json& j) {
    reject_unknown_keys(j, {"kind", "mixture", "n_samples", "csv", "labeling", "split_ratios"},
                        "dataset");
    DatasetConfig cfg;
    const auto kind = require(j, "kind", "dataset").get<std::string>();
    if (kind == "mixture") {
        cfg.kind = DatasetKind::Mixture;
        const auto& m = require(j, "mixture", "dataset");
        reject_unknown_keys(m, {"weights", "means", "variances"}, "dataset.mixture");
        cfg.mixture.weights = require(m, "weights", "dataset.mixture").get<std::vector<double>>();
        cfg.mixture.means = require(m, "means", "dataset.mixture").get<std::vector<double>>();
        cfg.mixture.variances =
            require(m, "variances", "dataset.mixture").get<std::vector<double>>();
        cfg.n_samples = require(j, "n_samples", "dataset").get<std::size_t>();
    } else if (kind == "csv") {
        cfg.kind = DatasetKind::Csv;
        const auto& c = require(j, "csv", "dataset");
        reject_unknown_keys(c, {"path", "categorical_columns", "label_column"}, "dataset.csv");
        cfg.csv_path = require(c, "path", "dataset.csv").get<std::string>();
        cfg.csv_categorical = get_or<std::vector<std::string>>(c, "categorical_columns", {});
        cfg.csv_label_column = require(c, "label_column", "dataset.csv").get<std::string>();
    } else {
        throw Error::validation("dataset.kind must be 'mixture' or 'csv', got '" + kind + "'");
    }
    const auto& l = require(j, "labeling", "dataset");
    reject_unknown_keys(l, {"rule", "kappa", "level"}, "dataset.labeling");
    const auto rule = require(l, "rule", "dataset.labeling").get<std::string>();
    if (rule == "kappa_sigma") {
        cfg.labeling.rule = ThresholdKind::KappaSigma;
        cfg.labeling.kappa = require(l, "kappa", "dataset.labeling").get<double>();
    } else if (rule == "quantile") {
        cfg.labeling.rule = ThresholdKind::Quantile;
        cfg.labeling.quantile_level = require(l, "level", "dataset.labeling").get<double>();
    } else {
        throw Error::validation("dataset.labeling.rule must be 'kappa_sigma' or 'quantile'");
    }
    if (j.contains("split_ratios")) {
        const auto ratios = j["split_ratios"].get<std::vector<double>>();
        if (ratios.size() != 3) {
            throw Error::validation("dataset.split_ratios needs exactly 3 entries");
        }
        cfg.split_ratios = {ratios[0], ratios[1], ratios[2]};
    }
    return cfg;
}

std::pair<ModelConfig, bool> parse_model(const json& j) {
    reject_unknown_keys(j,
                        {"mode", "input_dim", "latent_dim", "n_qubits", "depth", "encoding",
                         "noise_sigma", "encoder_hidden", "decoder_hidden", "quantum_input_grad"},
                        "model");
    ModelConfig cfg;
    const auto mode = require(j, "mode", "model").get<std::string>();
    if (mode == "quantum") {
        cfg.mode = ModelMode::Quantum;
    } else if (mode == "baseline") {
        cfg.mode = ModelMode::ClassicalBaseline;
    } else {
        throw Error::validation("model.mode must be 'quantum' or 'baseline', got '" + mode + "'");
    }
    const bool input_given = j.contains("input_dim");
    if (input_given) {
        cfg.input_dim = j["input_dim"].get<int>();
    }
    cfg.latent_dim = require(j, "latent_dim", "model").get<int>();
    cfg.n_qubits = get_or<int>(j, "n_qubits", cfg.latent_dim);
    cfg.depth = get_or<int>(j, "depth", 3);
    const auto encoding = get_or<std::string>(j, "encoding", "feature_map");
    if (encoding == "feature_map") {
        cfg.encoding = Encoding::FeatureMap;
    } else if (encoding == "amplitude") {
        cfg.encoding = Encoding::Amplitude;
    } else {
        throw Error::validation("model.encoding must be 'feature_map' or 'amplitude'");
    }
    cfg.noise_sigma = get_or<double>(j, "noise_sigma", 0.1);
    cfg.encoder_hidden = get_or<std::vector<int>>(j, "encoder_hidden", {32, 32});
    cfg.decoder_hidden = get_or<std::vector<int>>(j, "decoder_hidden", {32, 32});
    cfg.quantum_input_grad = get_or<bool>(j, "quantum_input_grad", true);
    return {cfg, input_given};
}

LossConfig parse_loss(const json& j) {
    reject_unknown_keys(j, {"lambda_rec", "lambda_tail"}, "loss");
    LossConfig cfg;
    cfg.lambda_rec = get_or<double>(j, "lambda_rec", 1.0);
    cfg.lambda_tail = get_or<double>(j, "lambda_tail", 0.0);
    return cfg;
}

TrainConfig parse_training(const json& j) {
    reject_unknown_keys(
        j, {"epochs", "batch_size", "learning_rate", "patience", "seed", "randomness"},
        "training");
    TrainConfig cfg;
    cfg.epochs = require(j, "epochs", "training").get<int>();
    cfg.batch_size = get_or<int>(j, "batch_size", 64);
    cfg.learning_rate = get_or<double>(j, "learning_rate", 1e-3);
    cfg.patience = get_or<int>(j, "patience", 20);
    cfg.seed = require(j, "seed", "training").get<std::uint64_t>();
    if (j.contains("randomness")) {
        const auto& r = j["randomness"];
        reject_unknown_keys(r, {"kind", "path"}, "training.randomness");
        const auto kind = require(r, "kind", "training.randomness").get<std::string>();
        if (kind == "prng") {
            cfg.randomness.kind = RandomnessKind::SeededPrng;
        } else if (kind == "simulated_qrng") {
            cfg.randomness.kind = RandomnessKind::SimulatedQrng;
        } else if (kind == "entropy_file") {
            cfg.randomness.kind = RandomnessKind::EntropyFile;
            cfg.randomness.file_path = require(r, "path", "training.randomness").get<std::string>();
        } else {
            throw Error::validation(
                "training.randomness.kind must be 'prng', 'simulated_qrng' or 'entropy_file'");
        }
    }
    return cfg;
}

MetricsConfig parse_metrics(const json& j) {
    reject_unknown_keys(j,
                        {"bins", "smoothing_eps", "alphas", "tail_fraction", "generation_count",
                         "sample_heads", "generation_shots"},
                        "metrics");
    MetricsConfig cfg;
    cfg.bins = get_or<int>(j, "bins", 32);
    cfg.smoothing_eps = get_or<double>(j, "smoothing_eps", 1e-9);
    cfg.alphas = get_or<std::vector<double>>(j, "alphas", {0.5, 0.8, 0.9, 0.95});
    cfg.tail_fraction = get_or<double>(j, "tail_fraction", 0.05);
    cfg.generation_count = get_or<std::size_t>(j, "generation_count", 2000);
    cfg.sample_heads = get_or<bool>(j, "sample_heads", false);
    cfg.generation_shots = get_or<std::size_t>(j, "generation_shots", 0);
    return cfg;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown_keys(j, {"dataset", "model", "loss", "training", "metrics", "output_dir"},
                        "<top level>");
    ExperimentConfig cfg;
    cfg.dataset = parse_dataset(require(j, "dataset", "<top level>"));
    auto [model, input_given] = parse_model(require(j, "model", "<top level>"));
    cfg.model = model;
    cfg.model_input_dim_given = input_given;
    cfg.loss = j.contains("loss") ? parse_loss(j["loss"]) : LossConfig{};
    cfg.training = parse_training(require(j, "training", "<top level>"));
    cfg.metrics = j.contains("metrics") ? parse_metrics(j["metrics"]) : MetricsConfig{};
    cfg.output_dir = require(j, "output_dir", "<top level>").get<std::string>();
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error::io("cannot parse config " + path + ": " + e.what());
    }
    return from_json(j);
}

void ExperimentConfig::validate() const {
    if (dataset.kind == DatasetKind::Mixture) {
        dataset.mixture.validate();
        if (dataset.n_samples < 10) {
            throw Error::validation("dataset.n_samples must be at least 10");
        }
        if (model_input_dim_given && model.input_dim != 1) {
            throw Error::validation("mixture datasets are 1-D; model.input_dim must be 1");
        }
    }
    if (dataset.labeling.rule == ThresholdKind::KappaSigma && !(dataset.labeling.kappa > 0.0)) {
        throw Error::validation("labeling kappa must be positive");
    }
    if (dataset.labeling.rule == ThresholdKind::Quantile &&
        !(dataset.labeling.quantile_level > 0.0 && dataset.labeling.quantile_level < 1.0)) {
        throw Error::validation("labeling quantile level must lie in (0, 1)");
    }
    const double ratio_sum =
        dataset.split_ratios[0] + dataset.split_ratios[1] + dataset.split_ratios[2];
    if (std::abs(ratio_sum - 1.0) > 1e-12) {
        throw Error::validation("dataset.split_ratios must sum to 1");
    }
    loss.validate();
    training.validate();
    if (metrics.bins < 2) {
        throw Error::validation("metrics.bins must be >= 2");
    }
    if (!(metrics.smoothing_eps > 0.0)) {
        throw Error::validation("metrics.smoothing_eps must be positive");
    }
    if (!(metrics.tail_fraction > 0.0 && metrics.tail_fraction < 1.0)) {
        throw Error::validation("metrics.tail_fraction must lie in (0, 1)");
    }
    for (std::size_t k = 0; k < metrics.alphas.size(); ++k) {
        if (!(metrics.alphas[k] > 0.0 && metrics.alphas[k] < 1.0)) {
            throw Error::validation("metrics.alphas must lie in (0, 1)");
        }
        if (k > 0 && metrics.alphas[k] <= metrics.alphas[k - 1]) {
            throw Error::validation("metrics.alphas must be strictly increasing");
        }
    }
    if (metrics.generation_count < 1) {
        throw Error::validation("metrics.generation_count must be >= 1");
    }
    if (output_dir.empty()) {
        throw Error::validation("output_dir must not be empty");
    }
    // Model geometry checks that do not need the dataset.
    ModelConfig probe = model;
    if (!model_input_dim_given) {
        probe.input_dim = 1;
    }
    probe.validate();
}

json ExperimentConfig::to_json() const {
    json j;
    json d;
    if (dataset.kind == DatasetKind::Mixture) {
        d["kind"] = "mixture";
        d["mixture"] = {{"weights", dataset.mixture.weights},
                        {"means", dataset.mixture.means},
                        {"variances", dataset.mixture.variances}};
        d["n_samples"] = dataset.n_samples;
    } else {
        d["kind"] = "csv";
        d["csv"] = {{"path", dataset.csv_path},
                    {"categorical_columns", dataset.csv_categorical},
                    {"label_column", dataset.csv_label_column}};
    }
    if (dataset.labeling.rule == ThresholdKind::KappaSigma) {
        d["labeling"] = {{"rule", "kappa_sigma"}, {"kappa", dataset.labeling.kappa}};
    } else {
        d["labeling"] = {{"rule", "quantile"}, {"level", dataset.labeling.quantile_level}};
    }
    d["split_ratios"] = dataset.split_ratios;
    j["dataset"] = d;

    json m;
    m["mode"] = model.mode == ModelMode::Quantum ? "quantum" : "baseline";
    if (model_input_dim_given) {
        m["input_dim"] = model.input_dim;
    }
    m["latent_dim"] = model.latent_dim;
    m["n_qubits"] = model.n_qubits;
    m["depth"] = model.depth;
    m["encoding"] = model.encoding == Encoding::FeatureMap ? "feature_map" : "amplitude";
    m["noise_sigma"] = model.noise_sigma;
    m["encoder_hidden"] = model.encoder_hidden;
    m["decoder_hidden"] = model.decoder_hidden;
    m["quantum_input_grad"] = model.quantum_input_grad;
    j["model"] = m;

    j["loss"] = {{"lambda_rec", loss.lambda_rec}, {"lambda_tail", loss.lambda_tail}};

    json t;
    t["epochs"] = training.epochs;
    t["batch_size"] = training.batch_size;
    t["learning_rate"] = training.learning_rate;
    t["patience"] = training.patience;
    t["seed"] = training.seed;
    switch (training.randomness.kind) {
        case RandomnessKind::SeededPrng:
            t["randomness"] = {{"kind", "prng"}};
            break;
        case RandomnessKind::SimulatedQrng:
            t["randomness"] = {{"kind", "simulated_qrng"}};
            break;
        case RandomnessKind::EntropyFile:
            t["randomness"] = {{"kind", "entropy_file"}, {"path", training.randomness.file_path}};
            break;
    }
    j["training"] = t;

    j["metrics"] = {{"bins", metrics.bins},
                    {"smoothing_eps", metrics.smoothing_eps},
                    {"alphas", metrics.alphas},
                    {"tail_fraction", metrics.tail_fraction},
                    {"generation_count", metrics.generation_count},
                    {"sample_heads", metrics.sample_heads},
                    {"generation_shots", metrics.generation_shots}};
    j["output_dir"] = output_dir;
    return j;
}

std::string ExperimentConfig::hash() const {
    // The hash covers the experiment semantics; where the run is written
    // (output_dir) does not change what is computed.
    auto j = to_json();
    j.erase("output_dir");
    return fnv1a_hex(j.dump());
}

std::string ExperimentConfig::resolved_output_dir() const {
    std::filesystem::path p(output_dir);
    if (p.is_absolute()) {
        return output_dir;
    }
    if (const char* root = std::getenv("QEGM_OUT_ROOT")) {
        return (std::filesystem::path(root) / p).string();
    }
    return output_dir;
}

CompareConfig CompareConfig::from_json_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error::io("cannot parse compare config " + path + ": " + e.what());
    }
    reject_unknown_keys(j, {"seeds", "models", "output_dir"}, "<compare top level>");
    CompareConfig cfg;
    cfg.seeds = require(j, "seeds", "<compare top level>").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) {
        throw Error::validation("compare config needs at least one seed");
    }
    const auto& models = require(j, "models", "<compare top level>");
    if (!models.is_object() || models.size() < 2) {
        throw Error::validation("compare config needs at least two named model configs");
    }
    const auto base = std::filesystem::path(path).parent_path();
    for (const auto& [name, value] : models.items()) {
        auto model_path = std::filesystem::path(value.get<std::string>());
        if (model_path.is_relative()) {
            model_path = base / model_path;
        }
        cfg.model_configs.emplace_back(name, model_path.string());
    }
    cfg.output_dir = require(j, "output_dir", "<compare top level>").get<std::string>();
    return cfg;
}

}  // namespace qegm

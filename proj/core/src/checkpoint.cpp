// SPDX-License-Identifier: Apache-2.0
#include "qegm/checkpoint.hpp"

#include <json.hpp>

#include "qegm/error.hpp"
#include "qegm/io.hpp"

namespace qegm {

namespace {

using nlohmann::json;

json mlp_to_json(const Mlp& net) {
    json j;
    j["layer_dims"] = net.layer_dims();
    json weights = json::array();
    json biases = json::array();
    for (std::size_t layer = 0; layer < net.layer_count(); ++layer) {
        weights.push_back(net.weight(layer).data);
        biases.push_back(net.bias(layer));
    }
    j["weights"] = weights;
    j["biases"] = biases;
    return j;
}

void mlp_from_json(const json& j, Mlp& net) {
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    net = Mlp(dims);
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != net.layer_count() || biases.size() != net.layer_count()) {
        throw Error::io("checkpoint: layer count mismatch");
    }
    for (std::size_t layer = 0; layer < net.layer_count(); ++layer) {
        auto w = weights[layer].get<std::vector<double>>();
        if (w.size() != net.weight(layer).data.size()) {
            throw Error::io("checkpoint: weight tensor size mismatch in layer " +
                            std::to_string(layer));
        }
        net.weight(layer).data = std::move(w);
        auto b = biases[layer].get<std::vector<double>>();
        if (b.size() != net.bias(layer).size()) {
            throw Error::io("checkpoint: bias size mismatch in layer " + std::to_string(layer));
        }
        net.bias(layer) = std::move(b);
    }
}

json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["mode"] = cfg.mode == ModelMode::Quantum ? "quantum" : "baseline";
    j["input_dim"] = cfg.input_dim;
    j["latent_dim"] = cfg.latent_dim;
    j["n_qubits"] = cfg.n_qubits;
    j["depth"] = cfg.depth;
    j["encoding"] = cfg.encoding == Encoding::FeatureMap ? "feature_map" : "amplitude";
    j["noise_sigma"] = cfg.noise_sigma;
    j["encoder_hidden"] = cfg.encoder_hidden;
    j["decoder_hidden"] = cfg.decoder_hidden;
    j["quantum_input_grad"] = cfg.quantum_input_grad;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.mode = j.at("mode").get<std::string>() == "quantum" ? ModelMode::Quantum
                                                            : ModelMode::ClassicalBaseline;
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.n_qubits = j.at("n_qubits").get<int>();
    cfg.depth = j.at("depth").get<int>();
    cfg.encoding = j.at("encoding").get<std::string>() == "feature_map" ? Encoding::FeatureMap
                                                                        : Encoding::Amplitude;
    cfg.noise_sigma = j.at("noise_sigma").get<double>();
    cfg.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
    cfg.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
    cfg.quantum_input_grad = j.at("quantum_input_grad").get<bool>();
    return cfg;
}

json threshold_to_json(const ThresholdMeta& meta) {
    json j;
    j["kind"] = meta.kind == ThresholdKind::KappaSigma ? "kappa_sigma" : "quantile";
    j["parameter"] = meta.parameter;
    j["mean"] = meta.mean;
    j["stddev"] = meta.stddev;
    j["cutoff"] = meta.cutoff;
    j["side"] = meta.side == TailSide::Lower ? "lower" : "upper";
    return j;
}

ThresholdMeta threshold_from_json(const json& j) {
    ThresholdMeta meta;
    meta.kind = j.at("kind").get<std::string>() == "kappa_sigma" ? ThresholdKind::KappaSigma
                                                                 : ThresholdKind::Quantile;
    meta.parameter = j.at("parameter").get<double>();
    meta.mean = j.at("mean").get<double>();
    meta.stddev = j.at("stddev").get<double>();
    meta.cutoff = j.at("cutoff").get<double>();
    meta.side = j.at("side").get<std::string>() == "lower" ? TailSide::Lower : TailSide::Upper;
    return meta;
}

}  // namespace

std::string Checkpoint::to_json_text() const {
    json j;
    j["format_version"] = kFormatVersion;
    j["model_config"] = model_config_to_json(model_config);
    j["encoder"] = mlp_to_json(model.encoder());
    j["decoder"] = mlp_to_json(model.decoder());
    if (model_config.mode == ModelMode::Quantum) {
        j["quantum_angles"] = model.quantum_params().flat();
    }
    j["adam"] = {{"learning_rate", adam.config().learning_rate},
                 {"beta1", adam.config().beta1},
                 {"beta2", adam.config().beta2},
                 {"epsilon", adam.config().epsilon},
                 {"first_moment", adam.first_moment()},
                 {"second_moment", adam.second_moment()},
                 {"step_count", adam.step_count()}};
    j["standardizer"] = {{"mean", standardizer.mean}, {"stddev", standardizer.stddev}};
    j["threshold"] = threshold_to_json(threshold);
    j["label_column"] = label_column;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["dataset_hash"] = dataset_hash;
    return j.dump(2) + "\n";
}

Checkpoint Checkpoint::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error::io(std::string("cannot parse checkpoint: ") + e.what());
    }
    try {
        return from_parsed(j);
    } catch (const json::exception& e) {
        throw Error::io(std::string("malformed checkpoint: ") + e.what());
    }
}

Checkpoint Checkpoint::from_parsed(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kFormatVersion) {
        throw Error::io("unsupported checkpoint format version " +
                        j.at("format_version").dump());
    }
    Checkpoint cp;
    cp.model_config = model_config_from_json(j.at("model_config"));
    cp.model = QegmModel::initialize(cp.model_config, 0);
    mlp_from_json(j.at("encoder"), cp.model.encoder());
    mlp_from_json(j.at("decoder"), cp.model.decoder());
    if (cp.model_config.mode == ModelMode::Quantum) {
        auto angles = j.at("quantum_angles").get<std::vector<double>>();
        if (angles.size() != cp.model.quantum_params().size()) {
            throw Error::io("checkpoint: quantum angle tensor size mismatch");
        }
        cp.model.quantum_params().flat() = std::move(angles);
    }
    const auto& a = j.at("adam");
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = a.at("learning_rate").get<double>();
    adam_cfg.beta1 = a.at("beta1").get<double>();
    adam_cfg.beta2 = a.at("beta2").get<double>();
    adam_cfg.epsilon = a.at("epsilon").get<double>();
    cp.adam = AdamState(cp.model.parameter_count(), adam_cfg);
    cp.adam.restore(a.at("first_moment").get<std::vector<double>>(),
                    a.at("second_moment").get<std::vector<double>>(),
                    a.at("step_count").get<std::uint64_t>());
    cp.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    cp.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
    cp.threshold = threshold_from_json(j.at("threshold"));
    cp.label_column = j.at("label_column").get<std::size_t>();
    cp.seed = j.at("seed").get<std::uint64_t>();
    cp.config_hash = j.at("config_hash").get<std::string>();
    cp.dataset_hash = j.at("dataset_hash").get<std::string>();
    return cp;
}

void Checkpoint::save(const std::string& path) const {
    write_text_file(path, to_json_text());
}

Checkpoint Checkpoint::load(const std::string& path) {
    return from_json_text(read_text_file(path));
}

}  // namespace qegm

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "qegm/data.hpp"
#include "qegm/mlp.hpp"
#include "qegm/model.hpp"

namespace qegm {

/// Versioned structured-text (JSON) dump of a trained model: all parameters,
/// the Adam state, the standardizer and rare rule it was trained under, and
/// the provenance hashes. Doubles round-trip exactly.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    ModelConfig model_config;
    QegmModel model;
    AdamState adam;
    Standardizer standardizer;
    ThresholdMeta threshold;
    std::size_t label_column = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string dataset_hash;

    std::string to_json_text() const;
    static Checkpoint from_json_text(const std::string& text);
    static Checkpoint from_parsed(const nlohmann::json& j);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace qegm

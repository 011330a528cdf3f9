// SPDX-License-Identifier: Apache-2.0
#include "qegm/vqc.hpp"

#include <cmath>
#include <numbers>

#include "qegm/error.hpp"

namespace qegm {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;

void check_params_match(const AnsatzSpec& spec, const QuantumParams& params) {
    if (params.depth() != spec.depth || params.n_qubits() != spec.n_qubits) {
        throw Error::validation("quantum params shaped " + std::to_string(params.depth()) + "x" +
                                std::to_string(params.n_qubits()) +
                                "x2 do not match ansatz spec " + std::to_string(spec.depth) + "x" +
                                std::to_string(spec.n_qubits) + "x2");
    }
}

std::vector<double> measure_all_z(const Statevector& state) {
    std::vector<double> values(static_cast<std::size_t>(state.n_qubits()));
    for (int q = 0; q < state.n_qubits(); ++q) {
        values[static_cast<std::size_t>(q)] = state.expectation_z(q);
    }
    return values;
}

Statevector encode_for(const AnsatzSpec& spec, const LatentVector& z) {
    return spec.encoding == Encoding::FeatureMap ? encode_feature_map(z) : encode_amplitude(z);
}

double weighted_sum(std::span<const double> upstream, const std::vector<double>& values) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        total += upstream[i] * values[i];
    }
    return total;
}
}  // namespace

int AnsatzSpec::qubits_for_amplitude_dim(std::size_t d) {
    if (d == 0) {
        throw Error::validation("amplitude encoding needs at least one dimension");
    }
    int n = 0;
    while ((std::size_t{1} << n) < d) {
        ++n;
    }
    return std::max(n, 1);
}

void AnsatzSpec::validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw Error::validation("ansatz n_qubits must be between 1 and " +
                                std::to_string(kMaxQubits) + ", got " + std::to_string(n_qubits));
    }
    if (depth < 1) {
        throw Error::validation("ansatz depth must be >= 1, got " + std::to_string(depth));
    }
}

void AnsatzSpec::validate_input(const LatentVector& z) const {
    validate();
    if (encoding == Encoding::FeatureMap) {
        if (static_cast<int>(z.size()) != n_qubits) {
            throw Error::validation("feature-map encoding needs one qubit per latent dimension: " +
                                    std::to_string(z.size()) + " dims vs " +
                                    std::to_string(n_qubits) + " qubits");
        }
    } else {
        if (qubits_for_amplitude_dim(z.size()) != n_qubits) {
            throw Error::validation("amplitude encoding of " + std::to_string(z.size()) +
                                    " dims needs " +
                                    std::to_string(qubits_for_amplitude_dim(z.size())) +
                                    " qubits, spec has " + std::to_string(n_qubits));
        }
    }
}

QuantumParams::QuantumParams(int depth, int n_qubits)
    : depth_(depth), n_qubits_(n_qubits),
      angles_(static_cast<std::size_t>(depth) * static_cast<std::size_t>(n_qubits) * 2, 0.0) {
    if (depth < 1 || n_qubits < 1) {
        throw Error::validation("quantum params need depth >= 1 and n_qubits >= 1");
    }
}

QuantumParams QuantumParams::random_init(int depth, int n_qubits, RandomnessSource& rng,
                                         double scale) {
    QuantumParams params(depth, n_qubits);
    for (auto& angle : params.angles_) {
        angle = scale * (2.0 * rng.uniform() - 1.0);
    }
    return params;
}

std::size_t QuantumParams::flat_index(int layer, int qubit, int slot) const {
    if (layer < 0 || layer >= depth_ || qubit < 0 || qubit >= n_qubits_ || slot < 0 || slot > 1) {
        throw Error::validation("quantum params index (" + std::to_string(layer) + "," +
                                std::to_string(qubit) + "," + std::to_string(slot) +
                                ") out of range");
    }
    return (static_cast<std::size_t>(layer) * static_cast<std::size_t>(n_qubits_) +
            static_cast<std::size_t>(qubit)) * 2 + static_cast<std::size_t>(slot);
}

void QuantumParams::validate_finite() const {
    for (const auto angle : angles_) {
        if (!std::isfinite(angle)) {
            throw Error::numeric("quantum params contain a non-finite angle");
        }
    }
}

Statevector encode_feature_map(const LatentVector& z) {
    if (z.empty()) {
        throw Error::validation("feature-map encoding needs a nonempty latent vector");
    }
    for (const auto value : z) {
        if (!std::isfinite(value)) {
            throw Error::numeric("feature-map encoding input contains a non-finite value");
        }
    }
    Statevector state(static_cast<int>(z.size()));
    for (std::size_t q = 0; q < z.size(); ++q) {
        state.apply(GateOp::rot_y(static_cast<int>(q), z[q]));
    }
    return state;
}

Statevector encode_amplitude(const LatentVector& z) {
    if (z.empty()) {
        throw Error::validation("amplitude encoding needs a nonempty latent vector");
    }
    double norm_sq = 0.0;
    for (const auto value : z) {
        if (!std::isfinite(value)) {
            throw Error::numeric("amplitude encoding input contains a non-finite value");
        }
        norm_sq += value * value;
    }
    if (norm_sq == 0.0) {
        throw Error::validation("amplitude encoding cannot normalize an all-zero vector");
    }
    const int n = AnsatzSpec::qubits_for_amplitude_dim(z.size());
    std::vector<Statevector::Amplitude> amps(std::size_t{1} << n, {0.0, 0.0});
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (std::size_t i = 0; i < z.size(); ++i) {
        amps[i] = {z[i] * inv_norm, 0.0};
    }
    return Statevector::from_amplitudes(n, std::move(amps));
}

void apply_ansatz_in_place(Statevector& state, const QuantumParams& params) {
    if (params.n_qubits() != state.n_qubits()) {
        throw Error::validation("ansatz parameters cover " + std::to_string(params.n_qubits()) +
                                " qubits but the state has " + std::to_string(state.n_qubits()));
    }
    const int n = params.n_qubits();
    for (int layer = 0; layer < params.depth(); ++layer) {
        for (int q = 0; q < n; ++q) {
            state.apply(GateOp::rot_y(q, params.at(layer, q, 0)));
            state.apply(GateOp::rot_z(q, params.at(layer, q, 1)));
        }
        for (int q = 0; q + 1 < n; ++q) {
            state.apply(GateOp::cnot(q, q + 1));
        }
    }
}

Statevector apply_ansatz(Statevector state, const QuantumParams& params) {
    apply_ansatz_in_place(state, params);
    return state;
}

QuantumLatent quantum_forward(const LatentVector& z, const QuantumParams& params,
                              const AnsatzSpec& spec, CircuitEvalCounter* counter) {
    spec.validate_input(z);
    check_params_match(spec, params);
    Statevector state = encode_for(spec, z);
    apply_ansatz_in_place(state, params);
    if (counter != nullptr) {
        counter->bump();
    }
    return QuantumLatent{measure_all_z(state)};
}

QuantumLatent quantum_forward_sampled(const LatentVector& z, const QuantumParams& params,
                                      const AnsatzSpec& spec, std::size_t shots,
                                      RandomnessSource& rng, CircuitEvalCounter* counter) {
    if (shots < 1) {
        throw Error::validation("shot-based forward requires shots >= 1");
    }
    spec.validate_input(z);
    check_params_match(spec, params);
    Statevector state = encode_for(spec, z);
    apply_ansatz_in_place(state, params);
    if (counter != nullptr) {
        counter->bump();
    }
    const auto draws = state.sample_indices(shots, rng);
    std::vector<double> values(static_cast<std::size_t>(spec.n_qubits), 0.0);
    for (const auto index : draws) {
        for (int q = 0; q < spec.n_qubits; ++q) {
            values[static_cast<std::size_t>(q)] += (index & (std::size_t{1} << q)) ? -1.0 : 1.0;
        }
    }
    for (auto& value : values) {
        value /= static_cast<double>(shots);
    }
    return QuantumLatent{values};
}

QuantumParams parameter_shift_grad(const LatentVector& z, const QuantumParams& params,
                                   const AnsatzSpec& spec, std::span<const double> upstream,
                                   CircuitEvalCounter* counter) {
    spec.validate_input(z);
    check_params_match(spec, params);
    if (upstream.size() != static_cast<std::size_t>(spec.n_qubits)) {
        throw Error::validation("upstream gradient has " + std::to_string(upstream.size()) +
                                " entries, expected " + std::to_string(spec.n_qubits));
    }
    // The encoded state does not depend on the ansatz angles, so it is
    // prepared once and reused by every shifted evaluation.
    const Statevector encoded = encode_for(spec, z);
    QuantumParams grads(params.depth(), params.n_qubits());
    QuantumParams shifted = params;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double original = shifted.flat()[k];

        shifted.flat()[k] = original + kHalfPi;
        Statevector plus = encoded;
        apply_ansatz_in_place(plus, shifted);
        if (counter != nullptr) counter->bump();
        const auto z_plus = measure_all_z(plus);

        shifted.flat()[k] = original - kHalfPi;
        Statevector minus = encoded;
        apply_ansatz_in_place(minus, shifted);
        if (counter != nullptr) counter->bump();
        const auto z_minus = measure_all_z(minus);

        shifted.flat()[k] = original;
        grads.flat()[k] = 0.5 * (weighted_sum(upstream, z_plus) - weighted_sum(upstream, z_minus));
    }
    return grads;
}

std::vector<double> input_shift_grad(const LatentVector& z, const QuantumParams& params,
                                     const AnsatzSpec& spec, std::span<const double> upstream,
                                     CircuitEvalCounter* counter) {
    if (spec.encoding != Encoding::FeatureMap) {
        throw Error::validation("input gradients via the shift rule need feature-map encoding");
    }
    spec.validate_input(z);
    check_params_match(spec, params);
    if (upstream.size() != static_cast<std::size_t>(spec.n_qubits)) {
        throw Error::validation("upstream gradient has " + std::to_string(upstream.size()) +
                                " entries, expected " + std::to_string(spec.n_qubits));
    }
    std::vector<double> grads(z.size(), 0.0);
    LatentVector shifted = z;
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double original = shifted[j];

        shifted[j] = original + kHalfPi;
        Statevector plus = encode_feature_map(shifted);
        apply_ansatz_in_place(plus, params);
        if (counter != nullptr) counter->bump();
        const auto z_plus = measure_all_z(plus);

        shifted[j] = original - kHalfPi;
        Statevector minus = encode_feature_map(shifted);
        apply_ansatz_in_place(minus, params);
        if (counter != nullptr) counter->bump();
        const auto z_minus = measure_all_z(minus);

        shifted[j] = original;
        grads[j] = 0.5 * (weighted_sum(upstream, z_plus) - weighted_sum(upstream, z_minus));
    }
    return grads;
}

}  // namespace qegm

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "qegm/statevector.hpp"

namespace qegm {

using LatentVector = std::vector<double>;

enum class Encoding { FeatureMap, Amplitude };

/// Circuit topology of the hardware-efficient ansatz: per layer, a fused
/// R_y*R_z rotation slot on every qubit followed by the linear CNOT chain
/// CNOT(0,1), CNOT(1,2), ..., CNOT(n-2, n-1).
struct AnsatzSpec {
    int n_qubits = 1;
    int depth = 1;
    Encoding encoding = Encoding::FeatureMap;

    /// ceil(log2(d)) qubits hold d amplitudes (d=16 -> 4).
    static int qubits_for_amplitude_dim(std::size_t d);

    /// One fused slot per qubit per layer. Each slot carries two angles
    /// (y then z) but counts as a single rotation gate.
    int rotation_slot_count() const { return depth * n_qubits; }
    int entangler_count() const { return depth * (n_qubits - 1); }
    std::size_t parameter_count() const {
        return static_cast<std::size_t>(depth) * static_cast<std::size_t>(n_qubits) * 2;
    }

    void validate() const;
    void validate_input(const LatentVector& z) const;
};

/// Trainable angle tensor, shape depth x n_qubits x 2 (slot 0 = y, 1 = z).
class QuantumParams {
public:
    QuantumParams() = default;
    QuantumParams(int depth, int n_qubits);

    /// Angles uniform in [-scale, scale]; small angles keep the circuit near
    /// identity at initialization.
    static QuantumParams random_init(int depth, int n_qubits, RandomnessSource& rng,
                                     double scale = 0.1);

    int depth() const { return depth_; }
    int n_qubits() const { return n_qubits_; }
    std::size_t size() const { return angles_.size(); }

    double& at(int layer, int qubit, int slot) { return angles_[flat_index(layer, qubit, slot)]; }
    double at(int layer, int qubit, int slot) const { return angles_[flat_index(layer, qubit, slot)]; }

    std::vector<double>& flat() { return angles_; }
    const std::vector<double>& flat() const { return angles_; }

    void validate_finite() const;

private:
    int depth_ = 0;
    int n_qubits_ = 0;
    std::vector<double> angles_;

    std::size_t flat_index(int layer, int qubit, int slot) const;
};

/// Per-qubit Z expectations of the evolved state; every entry in [-1, 1].
struct QuantumLatent {
    std::vector<double> values;
};

/// Counts full circuit evaluations (encode + ansatz + measure). Shared by
/// the gradient engine so tests can assert the 2-evaluations-per-parameter
/// contract; safe to bump from parallel evaluations.
struct CircuitEvalCounter {
    std::atomic<std::uint64_t> evaluations{0};

    void bump() { evaluations.fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t count() const { return evaluations.load(std::memory_order_relaxed); }
};

/// |psi(z)> = tensor_i R_y(z_i)|0>; requires z.size() qubits.
Statevector encode_feature_map(const LatentVector& z);

/// z padded to the next power of two and L2-normalized into amplitudes.
Statevector encode_amplitude(const LatentVector& z);

void apply_ansatz_in_place(Statevector& state, const QuantumParams& params);
Statevector apply_ansatz(Statevector state, const QuantumParams& params);

/// Encode, run the ansatz, measure (<Z_1>, ..., <Z_n>). Analytic, no shots.
QuantumLatent quantum_forward(const LatentVector& z, const QuantumParams& params,
                              const AnsatzSpec& spec, CircuitEvalCounter* counter = nullptr);

/// Shot-based estimate of the same expectations from `shots` Born samples.
QuantumLatent quantum_forward_sampled(const LatentVector& z, const QuantumParams& params,
                                      const AnsatzSpec& spec, std::size_t shots,
                                      RandomnessSource& rng,
                                      CircuitEvalCounter* counter = nullptr);

/// Parameter-shift gradient of sum_i upstream_i * <Z_i> with respect to every
/// ansatz angle: d<Z>/dtheta = (<Z>(theta+pi/2) - <Z>(theta-pi/2)) / 2.
/// Costs exactly two circuit evaluations per scalar parameter.
QuantumParams parameter_shift_grad(const LatentVector& z, const QuantumParams& params,
                                   const AnsatzSpec& spec, std::span<const double> upstream,
                                   CircuitEvalCounter* counter = nullptr);

/// Same shift rule applied to the feature-map encoding angles, giving the
/// gradient with respect to the circuit inputs z. FeatureMap encoding only.
std::vector<double> input_shift_grad(const LatentVector& z, const QuantumParams& params,
                                     const AnsatzSpec& spec, std::span<const double> upstream,
                                     CircuitEvalCounter* counter = nullptr);

}  // namespace qegm

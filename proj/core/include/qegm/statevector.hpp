// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qegm/random.hpp"

namespace qegm {

/// Largest supported register. Dense amplitudes are fine at this scale
/// (2^12 complex doubles = 64 KiB); anything bigger is out of scope.
inline constexpr int kMaxQubits = 12;

/// One gate application. Qubit q maps to bit q of the basis index
/// (little-endian); bitstrings are rendered with qubit 0 first, so the
/// basis index 0b110 on three qubits prints as "011".
struct GateOp {
    enum class Kind { RotY, RotZ, Cnot };

    Kind kind;
    int target = 0;
    int control = -1;   // CNOT only
    double angle = 0.0; // rotations only

    static GateOp rot_y(int target, double angle) { return {Kind::RotY, target, -1, angle}; }
    static GateOp rot_z(int target, double angle) { return {Kind::RotZ, target, -1, angle}; }
    static GateOp cnot(int control, int target) { return {Kind::Cnot, target, control, 0.0}; }
};

/// Dense normalized statevector over 2^n basis states.
class Statevector {
public:
    using Amplitude = std::complex<double>;

    /// |0...0>
    explicit Statevector(int n_qubits);

    /// Adopts the given amplitudes; length must be a power of two matching
    /// n_qubits and the norm must already be 1 within 1e-10.
    static Statevector from_amplitudes(int n_qubits, std::vector<Amplitude> amplitudes);

    int n_qubits() const { return n_qubits_; }
    std::size_t dimension() const { return amplitudes_.size(); }
    const std::vector<Amplitude>& amplitudes() const { return amplitudes_; }

    /// In-place gate application. R_y(t) = [[cos t/2, -sin t/2],[sin t/2, cos t/2]],
    /// R_z(t) = diag(e^{-it/2}, e^{it/2}), CNOT flips target iff control bit is 1.
    void apply(const GateOp& gate);

    double probability(std::size_t basis_index) const;
    double norm() const;

    /// <Z_qubit> = sum_i |a_i|^2 * (+1 if bit(i, qubit) == 0 else -1).
    double expectation_z(int qubit) const;

    /// `shots` i.i.d. Born-rule draws of basis indices.
    std::vector<std::size_t> sample_indices(std::size_t shots, RandomnessSource& rng) const;

    /// Same draws rendered as bitstrings (character k = qubit k).
    std::vector<std::string> sample_bitstrings(std::size_t shots, RandomnessSource& rng) const;

    std::string index_to_bitstring(std::size_t index) const;

private:
    int n_qubits_;
    std::vector<Amplitude> amplitudes_;

    void check_qubit(int qubit, const char* what) const;
};

/// Value-returning form of Statevector::apply.
Statevector apply_gate(Statevector state, const GateOp& gate);

}  // namespace qegm

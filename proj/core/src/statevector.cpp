// SPDX-License-Identifier: Apache-2.0
#include "qegm/statevector.hpp"

#include <algorithm>
#include <cmath>

#include "qegm/error.hpp"

namespace qegm {

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw Error::validation("statevector: n_qubits must be between 1 and " +
                                std::to_string(kMaxQubits) + ", got " + std::to_string(n_qubits));
    }
    amplitudes_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
    amplitudes_[0] = Amplitude{1.0, 0.0};
}

Statevector Statevector::from_amplitudes(int n_qubits, std::vector<Amplitude> amplitudes) {
    Statevector state(n_qubits);
    if (amplitudes.size() != state.dimension()) {
        throw Error::validation("statevector: expected " + std::to_string(state.dimension()) +
                                " amplitudes for " + std::to_string(n_qubits) + " qubits, got " +
                                std::to_string(amplitudes.size()));
    }
    state.amplitudes_ = std::move(amplitudes);
    if (std::abs(state.norm() - 1.0) > 1e-10) {
        throw Error::numeric("statevector: amplitudes are not normalized (norm=" +
                             std::to_string(state.norm()) + ")");
    }
    return state;
}

void Statevector::check_qubit(int qubit, const char* what) const {
    if (qubit < 0 || qubit >= n_qubits_) {
        throw Error::validation(std::string(what) + " qubit index " + std::to_string(qubit) +
                                " out of range for " + std::to_string(n_qubits_) + " qubits");
    }
}

void Statevector::apply(const GateOp& gate) {
    check_qubit(gate.target, "target");
    switch (gate.kind) {
        case GateOp::Kind::RotY: {
            if (!std::isfinite(gate.angle)) {
                throw Error::validation("rotation angle must be finite");
            }
            const double c = std::cos(gate.angle / 2.0);
            const double s = std::sin(gate.angle / 2.0);
            const std::size_t step = std::size_t{1} << gate.target;
            for (std::size_t base = 0; base < amplitudes_.size(); base += 2 * step) {
                for (std::size_t low = base; low < base + step; ++low) {
                    const Amplitude a0 = amplitudes_[low];
                    const Amplitude a1 = amplitudes_[low + step];
                    amplitudes_[low] = c * a0 - s * a1;
                    amplitudes_[low + step] = s * a0 + c * a1;
                }
            }
            break;
        }
        case GateOp::Kind::RotZ: {
            if (!std::isfinite(gate.angle)) {
                throw Error::validation("rotation angle must be finite");
            }
            const Amplitude phase0 = std::polar(1.0, -gate.angle / 2.0);
            const Amplitude phase1 = std::polar(1.0, gate.angle / 2.0);
            const std::size_t step = std::size_t{1} << gate.target;
            for (std::size_t base = 0; base < amplitudes_.size(); base += 2 * step) {
                for (std::size_t low = base; low < base + step; ++low) {
                    amplitudes_[low] *= phase0;
                    amplitudes_[low + step] *= phase1;
                }
            }
            break;
        }
        case GateOp::Kind::Cnot: {
            check_qubit(gate.control, "control");
            if (gate.control == gate.target) {
                throw Error::validation("CNOT control and target must differ, both are " +
                                        std::to_string(gate.target));
            }
            const std::size_t control_bit = std::size_t{1} << gate.control;
            const std::size_t target_bit = std::size_t{1} << gate.target;
            for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
                if ((i & control_bit) != 0 && (i & target_bit) == 0) {
                    std::swap(amplitudes_[i], amplitudes_[i | target_bit]);
                }
            }
            break;
        }
    }
}

double Statevector::probability(std::size_t basis_index) const {
    if (basis_index >= amplitudes_.size()) {
        throw Error::validation("basis index " + std::to_string(basis_index) + " out of range");
    }
    return std::norm(amplitudes_[basis_index]);
}

double Statevector::norm() const {
    double total = 0.0;
    for (const auto& a : amplitudes_) {
        total += std::norm(a);
    }
    return std::sqrt(total);
}

double Statevector::expectation_z(int qubit) const {
    check_qubit(qubit, "measured");
    const std::size_t bit = std::size_t{1} << qubit;
    double value = 0.0;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
        const double p = std::norm(amplitudes_[i]);
        value += (i & bit) ? -p : p;
    }
    return value;
}

std::vector<std::size_t> Statevector::sample_indices(std::size_t shots, RandomnessSource& rng) const {
    if (shots < 1) {
        throw Error::validation("sampling requires shots >= 1");
    }
    std::vector<double> cumulative(amplitudes_.size());
    double running = 0.0;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
        running += std::norm(amplitudes_[i]);
        cumulative[i] = running;
    }
    std::vector<std::size_t> draws(shots);
    for (std::size_t s = 0; s < shots; ++s) {
        const double u = rng.uniform() * running;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        draws[s] = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                         amplitudes_.size() - 1);
    }
    return draws;
}

std::vector<std::string> Statevector::sample_bitstrings(std::size_t shots, RandomnessSource& rng) const {
    const auto indices = sample_indices(shots, rng);
    std::vector<std::string> out;
    out.reserve(indices.size());
    for (const auto index : indices) {
        out.push_back(index_to_bitstring(index));
    }
    return out;
}

std::string Statevector::index_to_bitstring(std::size_t index) const {
    std::string bits(static_cast<std::size_t>(n_qubits_), '0');
    for (int q = 0; q < n_qubits_; ++q) {
        if (index & (std::size_t{1} << q)) {
            bits[static_cast<std::size_t>(q)] = '1';
        }
    }
    return bits;
}

Statevector apply_gate(Statevector state, const GateOp& gate) {
    state.apply(gate);
    return state;
}

}  // namespace qegm

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qegm/matrix.hpp"
#include "qegm/random.hpp"

namespace qegm {

/// Decoder output head: per-dimension Gaussian mean and log-variance.
/// log_variance is clamped to [-10, 10] so variances stay in [e^-10, e^10].
struct GaussianHead {
    std::vector<double> mean;
    std::vector<double> log_variance;
};

inline constexpr double kLogVarClamp = 10.0;

/// Fully connected network, tanh on hidden layers, linear output.
/// Weights[j] has shape (dims[j+1], dims[j]). Forward passes are const and
/// write their intermediate activations into a caller-owned Trace, so a
/// frozen network can evaluate many samples in parallel.
class Mlp {
public:
    /// Activations of every layer (index 0 is the input itself).
    struct Trace {
        std::vector<std::vector<double>> activations;
        bool valid = false;
    };

    struct Gradients {
        std::vector<Matrix> weight_grads;
        std::vector<std::vector<double>> bias_grads;
        std::vector<double> input_grad;
    };

    Mlp() = default;
    explicit Mlp(std::vector<int> layer_dims);  // zero initialized

    /// Uniform init scaled by 1/sqrt(fan_in) per layer; biases zero.
    static Mlp random_init(std::vector<int> layer_dims, RandomnessSource& rng);

    std::vector<double> forward(std::span<const double> x, Trace* trace = nullptr) const;

    /// Exact reverse-mode gradients from a cached forward pass.
    /// output_grad is dLoss/d(output); input_grad feeds the quantum shift
    /// rule when this network sits on top of the quantum layer.
    Gradients backward(const Trace& trace, std::span<const double> output_grad) const;

    const std::vector<int>& layer_dims() const { return layer_dims_; }
    int input_dim() const { return layer_dims_.front(); }
    int output_dim() const { return layer_dims_.back(); }
    std::size_t layer_count() const { return weights_.size(); }

    Matrix& weight(std::size_t layer) { return weights_[layer]; }
    const Matrix& weight(std::size_t layer) const { return weights_[layer]; }
    std::vector<double>& bias(std::size_t layer) { return biases_[layer]; }
    const std::vector<double>& bias(std::size_t layer) const { return biases_[layer]; }

    std::size_t parameter_count() const;
    void copy_parameters_to(std::span<double> out) const;
    void set_parameters(std::span<const double> in);
    void copy_gradients_to(const Gradients& grads, std::span<double> out) const;

    void validate_finite() const;

private:
    std::vector<int> layer_dims_;
    std::vector<Matrix> weights_;
    std::vector<double> empty_;
    std::vector<std::vector<double>> biases_;
};

/// z = net(x) + epsilon.
std::vector<double> encode(const Mlp& net, std::span<const double> x, const NoiseDraw& noise,
                           Mlp::Trace* trace = nullptr);

/// Splits a raw 2*d output into mean and clamped log-variance halves.
GaussianHead split_gaussian_head(const std::vector<double>& raw_output);

/// Decoder forward pass: x_hat is head.mean.
GaussianHead decode(const Mlp& net, std::span<const double> z, Mlp::Trace* trace = nullptr);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Standard Adam with bias correction over one flat parameter vector.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t parameter_count, AdamConfig config);

    void step(std::span<double> params, std::span<const double> grads);

    std::uint64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<double>& first_moment() const { return first_moment_; }
    const std::vector<double>& second_moment() const { return second_moment_; }

    void restore(std::vector<double> m, std::vector<double> v, std::uint64_t steps);

private:
    AdamConfig config_;
    std::vector<double> first_moment_;
    std::vector<double> second_moment_;
    std::uint64_t step_count_ = 0;
};

}  // namespace qegm

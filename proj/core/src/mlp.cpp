// SPDX-License-Identifier: Apache-2.0
#include "qegm/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "qegm/error.hpp"

namespace qegm {

Mlp::Mlp(std::vector<int> layer_dims) : layer_dims_(std::move(layer_dims)) {
    if (layer_dims_.size() < 2) {
        throw Error::validation("network needs at least an input and an output dimension");
    }
    for (const auto dim : layer_dims_) {
        if (dim < 1) {
            throw Error::validation("network layer dimensions must be >= 1");
        }
    }
    for (std::size_t j = 0; j + 1 < layer_dims_.size(); ++j) {
        weights_.emplace_back(static_cast<std::size_t>(layer_dims_[j + 1]),
                              static_cast<std::size_t>(layer_dims_[j]));
        biases_.emplace_back(static_cast<std::size_t>(layer_dims_[j + 1]), 0.0);
    }
}

Mlp Mlp::random_init(std::vector<int> layer_dims, RandomnessSource& rng) {
    Mlp net(std::move(layer_dims));
    for (std::size_t j = 0; j < net.weights_.size(); ++j) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(net.weights_[j].cols));
        for (auto& w : net.weights_[j].data) {
            w = scale * (2.0 * rng.uniform() - 1.0);
        }
    }
    return net;
}

std::vector<double> Mlp::forward(std::span<const double> x, Trace* trace) const {
    if (x.size() != static_cast<std::size_t>(input_dim())) {
        throw Error::validation("network input has " + std::to_string(x.size()) +
                                " dims, expected " + std::to_string(input_dim()));
    }
    std::vector<double> activation(x.begin(), x.end());
    if (trace != nullptr) {
        trace->activations.clear();
        trace->activations.push_back(activation);
        trace->valid = false;
    }
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        const Matrix& w = weights_[j];
        std::vector<double> next(w.rows);
        for (std::size_t r = 0; r < w.rows; ++r) {
            double sum = biases_[j][r];
            const double* row = w.data.data() + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) {
                sum += row[c] * activation[c];
            }
            next[r] = sum;
        }
        const bool hidden = j + 1 < weights_.size();
        if (hidden) {
            for (auto& v : next) {
                v = std::tanh(v);
            }
        }
        for (std::size_t r = 0; r < next.size(); ++r) {
            if (!std::isfinite(next[r])) {
                throw Error::numeric("non-finite activation in layer " + std::to_string(j + 1));
            }
        }
        activation = std::move(next);
        if (trace != nullptr) {
            trace->activations.push_back(activation);
        }
    }
    if (trace != nullptr) {
        trace->valid = true;
    }
    return activation;
}

Mlp::Gradients Mlp::backward(const Trace& trace, std::span<const double> output_grad) const {
    if (!trace.valid || trace.activations.size() != layer_dims_.size()) {
        throw Error::validation("backward called without a completed forward trace");
    }
    if (output_grad.size() != static_cast<std::size_t>(output_dim())) {
        throw Error::validation("output gradient has " + std::to_string(output_grad.size()) +
                                " dims, expected " + std::to_string(output_dim()));
    }
    Gradients grads;
    grads.weight_grads.reserve(weights_.size());
    grads.bias_grads.reserve(weights_.size());
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        grads.weight_grads.emplace_back(weights_[j].rows, weights_[j].cols);
        grads.bias_grads.emplace_back(weights_[j].rows, 0.0);
    }

    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (std::size_t j = weights_.size(); j-- > 0;) {
        const Matrix& w = weights_[j];
        const auto& input_act = trace.activations[j];
        const auto& output_act = trace.activations[j + 1];
        const bool hidden = j + 1 < weights_.size();
        if (hidden) {
            // delta currently holds dL/d(post-activation); fold in tanh'.
            for (std::size_t r = 0; r < delta.size(); ++r) {
                delta[r] *= 1.0 - output_act[r] * output_act[r];
            }
        }
        Matrix& wg = grads.weight_grads[j];
        for (std::size_t r = 0; r < w.rows; ++r) {
            grads.bias_grads[j][r] = delta[r];
            double* row = wg.data.data() + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) {
                row[c] = delta[r] * input_act[c];
            }
        }
        std::vector<double> prev(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* row = w.data.data() + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) {
                prev[c] += row[c] * delta[r];
            }
        }
        delta = std::move(prev);
    }
    grads.input_grad = std::move(delta);
    return grads;
}

std::size_t Mlp::parameter_count() const {
    std::size_t count = 0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        count += weights_[j].data.size() + biases_[j].size();
    }
    return count;
}

void Mlp::copy_parameters_to(std::span<double> out) const {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        std::copy(weights_[j].data.begin(), weights_[j].data.end(), out.begin() + offset);
        offset += weights_[j].data.size();
        std::copy(biases_[j].begin(), biases_[j].end(), out.begin() + offset);
        offset += biases_[j].size();
    }
}

void Mlp::set_parameters(std::span<const double> in) {
    if (in.size() != parameter_count()) {
        throw Error::validation("parameter vector has wrong length");
    }
    std::size_t offset = 0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        std::copy(in.begin() + offset, in.begin() + offset + weights_[j].data.size(),
                  weights_[j].data.begin());
        offset += weights_[j].data.size();
        std::copy(in.begin() + offset, in.begin() + offset + biases_[j].size(),
                  biases_[j].begin());
        offset += biases_[j].size();
    }
}

void Mlp::copy_gradients_to(const Gradients& grads, std::span<double> out) const {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        std::copy(grads.weight_grads[j].data.begin(), grads.weight_grads[j].data.end(),
                  out.begin() + offset);
        offset += grads.weight_grads[j].data.size();
        std::copy(grads.bias_grads[j].begin(), grads.bias_grads[j].end(), out.begin() + offset);
        offset += grads.bias_grads[j].size();
    }
}

void Mlp::validate_finite() const {
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        for (const auto w : weights_[j].data) {
            if (!std::isfinite(w)) {
                throw Error::numeric("non-finite weight in layer " + std::to_string(j));
            }
        }
        for (const auto b : biases_[j]) {
            if (!std::isfinite(b)) {
                throw Error::numeric("non-finite bias in layer " + std::to_string(j));
            }
        }
    }
}

std::vector<double> encode(const Mlp& net, std::span<const double> x, const NoiseDraw& noise,
                           Mlp::Trace* trace) {
    auto z = net.forward(x, trace);
    if (noise.epsilon.size() != z.size()) {
        throw Error::validation("noise draw has " + std::to_string(noise.epsilon.size()) +
                                " dims, latent has " + std::to_string(z.size()));
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += noise.epsilon[i];
    }
    return z;
}

GaussianHead split_gaussian_head(const std::vector<double>& raw_output) {
    if (raw_output.size() % 2 != 0 || raw_output.empty()) {
        throw Error::validation("Gaussian head needs an even, nonzero output width");
    }
    const std::size_t d = raw_output.size() / 2;
    GaussianHead head;
    head.mean.assign(raw_output.begin(), raw_output.begin() + static_cast<std::ptrdiff_t>(d));
    head.log_variance.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        head.log_variance[i] = std::clamp(raw_output[d + i], -kLogVarClamp, kLogVarClamp);
    }
    return head;
}

GaussianHead decode(const Mlp& net, std::span<const double> z, Mlp::Trace* trace) {
    return split_gaussian_head(net.forward(z, trace));
}

AdamState::AdamState(std::size_t parameter_count, AdamConfig config)
    : config_(config), first_moment_(parameter_count, 0.0), second_moment_(parameter_count, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != first_moment_.size() || grads.size() != first_moment_.size()) {
        throw Error::validation("Adam step: parameter/gradient shape mismatch");
    }
    ++step_count_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * grads[i];
        second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * grads[i] * grads[i];
        const double m_hat = first_moment_[i] / bias1;
        const double v_hat = second_moment_[i] / bias2;
        params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

void AdamState::restore(std::vector<double> m, std::vector<double> v, std::uint64_t steps) {
    if (m.size() != first_moment_.size() || v.size() != second_moment_.size()) {
        throw Error::validation("Adam restore: moment shape mismatch");
    }
    first_moment_ = std::move(m);
    second_moment_ = std::move(v);
    step_count_ = steps;
}

}  // namespace qegm

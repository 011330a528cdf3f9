// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qegm/data.hpp"
#include "qegm/matrix.hpp"
#include "qegm/mlp.hpp"
#include "qegm/vqc.hpp"

namespace qegm {

enum class ModelMode { Quantum, ClassicalBaseline };

struct ModelConfig {
    int input_dim = 1;
    int latent_dim = 4;
    int n_qubits = 4;
    int depth = 3;
    Encoding encoding = Encoding::FeatureMap;
    ModelMode mode = ModelMode::Quantum;
    double noise_sigma = 0.1;
    std::vector<int> encoder_hidden{32, 32};
    std::vector<int> decoder_hidden{32, 32};
    // Propagate dLoss/d(z_tilde) through the quantum layer via the shift rule
    // on the encoding angles, so the encoder co-adapts. With this off the
    // encoder sees a stop-gradient at the quantum boundary.
    bool quantum_input_grad = true;

    void validate() const;
    std::vector<int> encoder_dims() const;
    std::vector<int> decoder_dims() const;
    int decoder_input_dim() const;
    AnsatzSpec ansatz() const;
};

/// Everything one forward pass produces, kept for the backward pass.
struct ForwardInternals {
    std::vector<double> input;
    Mlp::Trace encoder_trace;
    std::vector<double> latent;         // z = f(x)
    NoiseDraw noise;
    std::vector<double> latent_noisy;   // z_tilde = z + epsilon
    std::vector<double> quantum_latent; // z_q (equals z_tilde in baseline mode)
    Mlp::Trace decoder_trace;
    std::vector<double> decoder_raw;    // pre-clamp decoder output
    GaussianHead head;
};

struct GenerationOptions {
    std::size_t shots = 0;      // 0 = analytic expectations
    bool sample_heads = false;  // draw from N(mean, sigma^2) instead of returning means
};

/// Encoder -> noise injection -> quantum variational layer -> decoder.
/// ClassicalBaseline mode routes z_tilde straight into the decoder, keeping
/// every other component identical, which is what makes the quantum delta
/// measurable.
class QegmModel {
public:
    QegmModel() = default;

    static QegmModel initialize(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ModelMode mode() const { return config_.mode; }

    Mlp& encoder() { return encoder_; }
    const Mlp& encoder() const { return encoder_; }
    Mlp& decoder() { return decoder_; }
    const Mlp& decoder() const { return decoder_; }
    QuantumParams& quantum_params() { return quantum_params_; }
    const QuantumParams& quantum_params() const { return quantum_params_; }
    AnsatzSpec ansatz() const { return config_.ansatz(); }

    using LatentMap = std::function<std::vector<double>(const std::vector<double>&)>;

    /// Deterministic forward given an explicit noise draw.
    GaussianHead forward(std::span<const double> x, const NoiseDraw& noise,
                         ForwardInternals* internals = nullptr,
                         CircuitEvalCounter* counter = nullptr) const;

    /// Draws the noise from `src`, then runs the deterministic forward.
    GaussianHead forward(std::span<const double> x, RandomnessSource& src,
                         ForwardInternals* internals = nullptr,
                         CircuitEvalCounter* counter = nullptr) const;

    /// Shared code path for both modes: the only mode difference is which
    /// latent map runs between noise injection and decoding. Exposed so the
    /// baseline-equals-quantum-with-identity-map property is checkable as
    /// stated rather than by duplicating the pipeline in a test.
    GaussianHead forward_with_latent_map(std::span<const double> x, const NoiseDraw& noise,
                                         const LatentMap& map,
                                         ForwardInternals* internals = nullptr) const;

    /// Noise-free deterministic forward; reconstruction x_hat is head.mean.
    GaussianHead predict(std::span<const double> x) const;

    /// Standardized-space samples from the latent prior N(0, I).
    Matrix generate(std::size_t count, RandomnessSource& src,
                    const GenerationOptions& options = {}) const;

    std::size_t parameter_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> params);
    void validate_finite() const;

private:
    ModelConfig config_;
    Mlp encoder_;
    Mlp decoder_;
    QuantumParams quantum_params_;

    std::vector<double> latent_to_quantum(const std::vector<double>& latent_noisy,
                                          CircuitEvalCounter* counter) const;
};

struct LossConfig {
    double lambda_rec = 1.0;
    double lambda_tail = 0.0;

    void validate() const;
};

struct LossTerms {
    double hybrid = 0.0;
    double rec = 0.0;
    double tail = 0.0;
};

/// Gaussian negative log-likelihood of x under the head, summed over
/// dimensions: sum_j [ ln(2 pi)/2 + lv_j/2 + (x_j - m_j)^2 / (2 e^{lv_j}) ].
double gaussian_nll(std::span<const double> x, const GaussianHead& head);

/// L_rec averages the NLL over the whole batch; L_tail averages it over the
/// rare-masked samples only (0 when none); L_hybrid is the weighted sum.
LossTerms hybrid_loss(const Matrix& batch, const std::vector<GaussianHead>& heads,
                      std::span<const char> rare_mask, const LossConfig& cfg);

/// Counters reported by training. `circuit_evaluations` counts parameterized
/// circuit evaluations at batch granularity (1 forward + 2 per scalar
/// parameter, independent of batch size), matching the two-evaluations-per-
/// parameter complexity accounting; `statevector_runs` counts every
/// individual simulator execution.
struct TrainCounters {
    std::uint64_t circuit_evaluations = 0;
    std::uint64_t input_shift_evaluations = 0;
    CircuitEvalCounter statevector_runs;
};

struct BatchGradients {
    LossTerms loss;
    std::vector<double> flat;  // same layout as QegmModel::parameters()
};

/// Loss and exact gradients for one batch: reverse mode through the decoder
/// and encoder, parameter-shift rule through the quantum layer.
BatchGradients compute_batch_gradients(const QegmModel& model, const Matrix& batch,
                                       std::span<const char> rare_flags, const LossConfig& cfg,
                                       std::span<const NoiseDraw> noise,
                                       TrainCounters* counters = nullptr);

/// Noise-free loss of the current model over the given dataset rows.
LossTerms evaluate_losses(const QegmModel& model, const Matrix& samples,
                          std::span<const char> rare_mask,
                          const std::vector<std::size_t>& rows, const LossConfig& cfg);

enum class RandomnessKind { SeededPrng, SimulatedQrng, EntropyFile };

struct RandomnessSpec {
    RandomnessKind kind = RandomnessKind::SeededPrng;
    std::string file_path;

    std::unique_ptr<RandomnessSource> make(std::uint64_t seed) const;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 1e-3;
    int patience = 20;
    LossConfig loss;
    std::uint64_t seed = 1;
    RandomnessSpec randomness;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_rec = 0.0, train_tail = 0.0, train_hybrid = 0.0;
    double val_rec = 0.0, val_tail = 0.0, val_hybrid = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0;
    std::uint64_t circuit_evaluations = 0;
    std::uint64_t input_shift_evaluations = 0;
    std::uint64_t statevector_runs = 0;
    std::uint64_t seed = 0;
    int best_epoch = -1;
    double best_val_hybrid = 0.0;
    bool early_stopped = false;

    std::string to_json_text() const;
};

/// Minibatch Adam over all classical and quantum parameters jointly.
/// Per-epoch train/val losses are recorded noise-free so frozen parameters
/// give bit-identical records. Early-stops after `patience` validation
/// epochs without improvement and restores the best-validation parameters.
/// A non-finite loss aborts with epoch/batch context after restoring the
/// last finite epoch-end parameters.
TrainReport train(QegmModel& model, AdamState& adam, const LabeledDataset& dataset,
                  const TrainConfig& cfg);

}  // namespace qegm

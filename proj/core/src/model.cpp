// SPDX-License-Identifier: Apache-2.0
#include "qegm/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "qegm/error.hpp"

namespace qegm {

namespace {

constexpr double kHalfLogTwoPi = 0.9189385332046727;  // ln(2*pi)/2

void accumulate_mlp_gradients(const Mlp::Gradients& grads, std::span<double> out) {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < grads.weight_grads.size(); ++j) {
        for (const auto g : grads.weight_grads[j].data) {
            out[offset++] += g;
        }
        for (const auto g : grads.bias_grads[j]) {
            out[offset++] += g;
        }
    }
}

void fisher_yates_indices(std::vector<std::size_t>& items, RandomnessSource& src) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(src.uniform() * static_cast<double>(i));
        std::swap(items[i - 1], items[std::min(j, i - 1)]);
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (input_dim < 1) {
        throw Error::validation("model input_dim must be >= 1");
    }
    if (latent_dim < 1) {
        throw Error::validation("model latent_dim must be >= 1");
    }
    if (!(noise_sigma >= 0.0)) {
        throw Error::validation("model noise_sigma must be >= 0");
    }
    for (const auto h : encoder_hidden) {
        if (h < 1) throw Error::validation("encoder hidden widths must be >= 1");
    }
    for (const auto h : decoder_hidden) {
        if (h < 1) throw Error::validation("decoder hidden widths must be >= 1");
    }
    if (mode == ModelMode::Quantum) {
        ansatz().validate();
        if (encoding == Encoding::FeatureMap && latent_dim != n_qubits) {
            throw Error::validation("feature-map encoding requires n_qubits == latent_dim (" +
                                    std::to_string(n_qubits) + " != " +
                                    std::to_string(latent_dim) + ")");
        }
        if (encoding == Encoding::Amplitude &&
            AnsatzSpec::qubits_for_amplitude_dim(static_cast<std::size_t>(latent_dim)) != n_qubits) {
            throw Error::validation("amplitude encoding of " + std::to_string(latent_dim) +
                                    " latent dims requires n_qubits == ceil(log2(d))");
        }
    }
}

std::vector<int> ModelConfig::encoder_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), encoder_hidden.begin(), encoder_hidden.end());
    dims.push_back(latent_dim);
    return dims;
}

int ModelConfig::decoder_input_dim() const {
    return mode == ModelMode::Quantum ? n_qubits : latent_dim;
}

std::vector<int> ModelConfig::decoder_dims() const {
    std::vector<int> dims;
    dims.push_back(decoder_input_dim());
    dims.insert(dims.end(), decoder_hidden.begin(), decoder_hidden.end());
    dims.push_back(2 * input_dim);
    return dims;
}

AnsatzSpec ModelConfig::ansatz() const {
    return AnsatzSpec{n_qubits, depth, encoding};
}

QegmModel QegmModel::initialize(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    QegmModel model;
    model.config_ = config;
    SeededPrng encoder_rng(derive_seed(seed, 0xE4C0));
    SeededPrng decoder_rng(derive_seed(seed, 0xDEC0));
    model.encoder_ = Mlp::random_init(config.encoder_dims(), encoder_rng);
    model.decoder_ = Mlp::random_init(config.decoder_dims(), decoder_rng);
    if (config.mode == ModelMode::Quantum) {
        SeededPrng quantum_rng(derive_seed(seed, 0x0B17));
        model.quantum_params_ =
            QuantumParams::random_init(config.depth, config.n_qubits, quantum_rng, 0.1);
        // Equator offset on the first-layer R_y slots. These compose
        // additively with the feature-map rotations, so this puts the
        // encoded qubits where <Z> responds linearly to the input angle
        // instead of at the cos() stationary point, and the encoder does
        // not have to drift away from the generation prior to be heard.
        if (config.encoding == Encoding::FeatureMap) {
            for (int q = 0; q < config.n_qubits; ++q) {
                model.quantum_params_.at(0, q, 0) += std::numbers::pi / 2.0;
            }
        }
    }
    return model;
}

std::vector<double> QegmModel::latent_to_quantum(const std::vector<double>& latent_noisy,
                                                 CircuitEvalCounter* counter) const {
    if (config_.mode != ModelMode::Quantum) {
        return latent_noisy;
    }
    return quantum_forward(latent_noisy, quantum_params_, ansatz(), counter).values;
}

GaussianHead QegmModel::forward_with_latent_map(std::span<const double> x, const NoiseDraw& noise,
                                                const LatentMap& map,
                                                ForwardInternals* internals) const {
    ForwardInternals local;
    ForwardInternals& fi = internals != nullptr ? *internals : local;
    fi.input.assign(x.begin(), x.end());
    fi.noise = noise;
    fi.latent = encoder_.forward(x, &fi.encoder_trace);
    fi.latent_noisy = fi.latent;
    if (noise.epsilon.size() != fi.latent.size()) {
        throw Error::validation("noise draw dimension does not match the latent dimension");
    }
    for (std::size_t i = 0; i < fi.latent_noisy.size(); ++i) {
        fi.latent_noisy[i] += noise.epsilon[i];
    }
    fi.quantum_latent = map(fi.latent_noisy);
    fi.decoder_raw = decoder_.forward(fi.quantum_latent, &fi.decoder_trace);
    fi.head = split_gaussian_head(fi.decoder_raw);
    return fi.head;
}

GaussianHead QegmModel::forward(std::span<const double> x, const NoiseDraw& noise,
                                ForwardInternals* internals, CircuitEvalCounter* counter) const {
    return forward_with_latent_map(
        x, noise, [&](const std::vector<double>& zt) { return latent_to_quantum(zt, counter); },
        internals);
}

GaussianHead QegmModel::forward(std::span<const double> x, RandomnessSource& src,
                                ForwardInternals* internals, CircuitEvalCounter* counter) const {
    const auto noise =
        draw_noise(src, static_cast<std::size_t>(config_.latent_dim), config_.noise_sigma);
    return forward(x, noise, internals, counter);
}

GaussianHead QegmModel::predict(std::span<const double> x) const {
    NoiseDraw zero;
    zero.sigma = 0.0;
    zero.r_value = 0.0;
    zero.epsilon.assign(static_cast<std::size_t>(config_.latent_dim), 0.0);
    return forward(x, zero);
}

Matrix QegmModel::generate(std::size_t count, RandomnessSource& src,
                           const GenerationOptions& options) const {
    validate_finite();
    const auto d_x = static_cast<std::size_t>(config_.input_dim);
    Matrix out(count, d_x);
    const auto d = static_cast<std::size_t>(config_.latent_dim);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> z(d);
        for (auto& v : z) {
            v = src.gaussian();
        }
        const auto noise = draw_noise(src, d, config_.noise_sigma);
        for (std::size_t j = 0; j < d; ++j) {
            z[j] += noise.epsilon[j];
        }
        std::vector<double> z_q;
        if (config_.mode == ModelMode::Quantum && options.shots > 0) {
            z_q = quantum_forward_sampled(z, quantum_params_, ansatz(), options.shots, src).values;
        } else {
            z_q = latent_to_quantum(z, nullptr);
        }
        const auto head = decode(decoder_, z_q);
        for (std::size_t j = 0; j < d_x; ++j) {
            double value = head.mean[j];
            if (options.sample_heads) {
                value += std::exp(0.5 * head.log_variance[j]) * src.gaussian();
            }
            out.at(i, j) = value;
        }
    }
    return out;
}

std::size_t QegmModel::parameter_count() const {
    std::size_t count = encoder_.parameter_count() + decoder_.parameter_count();
    if (config_.mode == ModelMode::Quantum) {
        count += quantum_params_.size();
    }
    return count;
}

std::vector<double> QegmModel::parameters() const {
    std::vector<double> flat(parameter_count());
    std::span<double> view(flat);
    encoder_.copy_parameters_to(view.subspan(0, encoder_.parameter_count()));
    decoder_.copy_parameters_to(
        view.subspan(encoder_.parameter_count(), decoder_.parameter_count()));
    if (config_.mode == ModelMode::Quantum) {
        const auto offset = encoder_.parameter_count() + decoder_.parameter_count();
        std::copy(quantum_params_.flat().begin(), quantum_params_.flat().end(),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset));
    }
    return flat;
}

void QegmModel::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count()) {
        throw Error::validation("model parameter vector has wrong length");
    }
    encoder_.set_parameters(params.subspan(0, encoder_.parameter_count()));
    decoder_.set_parameters(
        params.subspan(encoder_.parameter_count(), decoder_.parameter_count()));
    if (config_.mode == ModelMode::Quantum) {
        const auto offset = encoder_.parameter_count() + decoder_.parameter_count();
        std::copy(params.begin() + static_cast<std::ptrdiff_t>(offset), params.end(),
                  quantum_params_.flat().begin());
    }
}

void QegmModel::validate_finite() const {
    encoder_.validate_finite();
    decoder_.validate_finite();
    if (config_.mode == ModelMode::Quantum) {
        quantum_params_.validate_finite();
    }
}

void LossConfig::validate() const {
    if (!(lambda_rec >= 0.0) || !(lambda_tail >= 0.0)) {
        throw Error::validation("loss weights must be >= 0");
    }
    if (lambda_rec + lambda_tail <= 0.0) {
        throw Error::validation("loss weights must not both be zero");
    }
}

double gaussian_nll(std::span<const double> x, const GaussianHead& head) {
    if (x.size() != head.mean.size()) {
        throw Error::validation("NLL: sample and head dimensions differ");
    }
    double nll = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double lv = head.log_variance[j];
        const double d = x[j] - head.mean[j];
        nll += kHalfLogTwoPi + 0.5 * lv + d * d / (2.0 * std::exp(lv));
    }
    return nll;
}

LossTerms hybrid_loss(const Matrix& batch, const std::vector<GaussianHead>& heads,
                      std::span<const char> rare_mask, const LossConfig& cfg) {
    cfg.validate();
    if (batch.rows == 0) {
        throw Error::validation("hybrid loss needs a nonempty batch");
    }
    if (heads.size() != batch.rows || rare_mask.size() != batch.rows) {
        throw Error::validation("hybrid loss: batch, heads and rare mask sizes differ");
    }
    LossTerms terms;
    std::size_t rare_count = 0;
    for (std::size_t i = 0; i < batch.rows; ++i) {
        const double nll = gaussian_nll(batch.row(i), heads[i]);
        terms.rec += nll;
        if (rare_mask[i]) {
            terms.tail += nll;
            ++rare_count;
        }
    }
    terms.rec /= static_cast<double>(batch.rows);
    terms.tail = rare_count > 0 ? terms.tail / static_cast<double>(rare_count) : 0.0;
    terms.hybrid = cfg.lambda_rec * terms.rec + cfg.lambda_tail * terms.tail;
    return terms;
}

BatchGradients compute_batch_gradients(const QegmModel& model, const Matrix& batch,
                                       std::span<const char> rare_flags, const LossConfig& cfg,
                                       std::span<const NoiseDraw> noise, TrainCounters* counters) {
    cfg.validate();
    const std::size_t batch_size = batch.rows;
    if (batch_size == 0) {
        throw Error::validation("gradient computation needs a nonempty batch");
    }
    if (rare_flags.size() != batch_size || noise.size() != batch_size) {
        throw Error::validation("gradient computation: batch, rare flags and noise sizes differ");
    }
    const ModelConfig& mc = model.config();
    const bool quantum = mc.mode == ModelMode::Quantum;
    CircuitEvalCounter* run_counter = counters != nullptr ? &counters->statevector_runs : nullptr;

    std::size_t rare_count = 0;
    for (const auto flag : rare_flags) {
        rare_count += flag ? 1 : 0;
    }

    BatchGradients result;
    result.flat.assign(model.parameter_count(), 0.0);
    const std::size_t enc_count = model.encoder().parameter_count();
    const std::size_t dec_count = model.decoder().parameter_count();
    std::span<double> flat(result.flat);
    auto enc_segment = flat.subspan(0, enc_count);
    auto dec_segment = flat.subspan(enc_count, dec_count);
    auto quantum_segment = quantum ? flat.subspan(enc_count + dec_count) : std::span<double>{};

    std::vector<ForwardInternals> internals(batch_size);
    std::vector<GaussianHead> heads(batch_size);
    std::vector<std::vector<double>> decoder_input_grads(batch_size);

    for (std::size_t i = 0; i < batch_size; ++i) {
        heads[i] = model.forward(batch.row(i), noise[i], &internals[i], run_counter);
        const double weight = cfg.lambda_rec / static_cast<double>(batch_size) +
                              (rare_flags[i] && rare_count > 0
                                   ? cfg.lambda_tail / static_cast<double>(rare_count)
                                   : 0.0);
        // d(NLL)/d(mean_j) and d(NLL)/d(raw log-variance_j); the clamp passes
        // gradient only strictly inside its range.
        const auto d_out = static_cast<std::size_t>(mc.input_dim);
        std::vector<double> output_grad(2 * d_out, 0.0);
        for (std::size_t j = 0; j < d_out; ++j) {
            const double lv = heads[i].log_variance[j];
            const double var = std::exp(lv);
            const double diff = heads[i].mean[j] - batch.at(i, j);
            output_grad[j] = weight * diff / var;
            const double raw_lv = internals[i].decoder_raw[d_out + j];
            const bool interior = raw_lv > -kLogVarClamp && raw_lv < kLogVarClamp;
            output_grad[d_out + j] =
                interior ? weight * (0.5 - diff * diff / (2.0 * var)) : 0.0;
        }
        const auto dec_grads = model.decoder().backward(internals[i].decoder_trace, output_grad);
        accumulate_mlp_gradients(dec_grads, dec_segment);
        decoder_input_grads[i] = dec_grads.input_grad;
    }
    if (counters != nullptr) {
        counters->circuit_evaluations += 1;  // the batch forward
    }

    result.loss = hybrid_loss(batch, heads, rare_flags, cfg);

    if (quantum) {
        const AnsatzSpec spec = model.ansatz();
        // Quantum parameter gradients: shift rule per sample, summed.
        for (std::size_t i = 0; i < batch_size; ++i) {
            const auto qgrads =
                parameter_shift_grad(internals[i].latent_noisy, model.quantum_params(), spec,
                                     decoder_input_grads[i], run_counter);
            for (std::size_t k = 0; k < qgrads.flat().size(); ++k) {
                quantum_segment[k] += qgrads.flat()[k];
            }
        }
        if (counters != nullptr) {
            counters->circuit_evaluations += 2 * model.quantum_params().size();
        }
        // Encoder gradients through the quantum layer, if enabled.
        for (std::size_t i = 0; i < batch_size; ++i) {
            std::vector<double> latent_grad;
            if (mc.quantum_input_grad) {
                latent_grad = input_shift_grad(internals[i].latent_noisy, model.quantum_params(),
                                               spec, decoder_input_grads[i], run_counter);
            } else {
                latent_grad.assign(internals[i].latent_noisy.size(), 0.0);
            }
            const auto enc_grads = model.encoder().backward(internals[i].encoder_trace, latent_grad);
            accumulate_mlp_gradients(enc_grads, enc_segment);
        }
        if (counters != nullptr && mc.quantum_input_grad) {
            counters->input_shift_evaluations += 2 * static_cast<std::size_t>(mc.latent_dim);
        }
    } else {
        for (std::size_t i = 0; i < batch_size; ++i) {
            const auto enc_grads =
                model.encoder().backward(internals[i].encoder_trace, decoder_input_grads[i]);
            accumulate_mlp_gradients(enc_grads, enc_segment);
        }
    }
    return result;
}

LossTerms evaluate_losses(const QegmModel& model, const Matrix& samples,
                          std::span<const char> rare_mask,
                          const std::vector<std::size_t>& rows, const LossConfig& cfg) {
    if (rows.empty()) {
        throw Error::validation("loss evaluation needs at least one row");
    }
    Matrix subset(rows.size(), samples.cols);
    std::vector<char> subset_rare(rows.size());
    std::vector<GaussianHead> heads(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < samples.cols; ++c) {
            subset.at(i, c) = samples.at(rows[i], c);
        }
        subset_rare[i] = rare_mask[rows[i]];
        heads[i] = model.predict(subset.row(i));
    }
    return hybrid_loss(subset, heads, subset_rare, cfg);
}

std::unique_ptr<RandomnessSource> RandomnessSpec::make(std::uint64_t seed) const {
    switch (kind) {
        case RandomnessKind::SeededPrng:
            return std::make_unique<SeededPrng>(seed);
        case RandomnessKind::SimulatedQrng:
            return std::make_unique<SimulatedQrng>(seed);
        case RandomnessKind::EntropyFile:
            return std::make_unique<EntropyFile>(file_path);
    }
    throw Error::validation("unknown randomness kind");
}

void TrainConfig::validate() const {
    if (epochs < 0) {
        throw Error::validation("training epochs must be >= 0");
    }
    if (batch_size < 1) {
        throw Error::validation("training batch size must be >= 1");
    }
    if (!(learning_rate >= 0.0)) {
        throw Error::validation("learning rate must be >= 0");
    }
    if (patience < 1) {
        throw Error::validation("early-stop patience must be >= 1");
    }
    loss.validate();
}

std::string TrainReport::to_json_text() const {
    nlohmann::json j;
    nlohmann::json records = nlohmann::json::array();
    for (const auto& e : epochs) {
        records.push_back({{"epoch", e.epoch},
                           {"train_rec", e.train_rec},
                           {"train_tail", e.train_tail},
                           {"train_hybrid", e.train_hybrid},
                           {"val_rec", e.val_rec},
                           {"val_tail", e.val_tail},
                           {"val_hybrid", e.val_hybrid}});
    }
    j["epochs"] = records;
    j["wall_seconds"] = wall_seconds;
    j["circuit_evaluations"] = circuit_evaluations;
    j["input_shift_evaluations"] = input_shift_evaluations;
    j["statevector_runs"] = statevector_runs;
    j["seed"] = seed;
    j["best_epoch"] = best_epoch;
    j["best_val_hybrid"] = best_val_hybrid;
    j["early_stopped"] = early_stopped;
    return j.dump(2) + "\n";
}

TrainReport train(QegmModel& model, AdamState& adam, const LabeledDataset& dataset,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.split.train.empty() || dataset.split.val.empty()) {
        throw Error::validation("training needs nonempty train and validation splits");
    }
    if (model.config().mode == ModelMode::Quantum &&
        model.config().encoding == Encoding::Amplitude && model.config().quantum_input_grad) {
        throw Error::validation("amplitude encoding has no clean two-point input shift rule; "
                                "disable quantum_input_grad to train with it");
    }

    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.seed = cfg.seed;

    SeededPrng shuffle_rng(derive_seed(cfg.seed, 0x5348'5546));
    auto noise_master = cfg.randomness.make(derive_seed(cfg.seed, 0x4E4F'4953));

    auto params = model.parameters();
    std::vector<double> last_good = params;
    std::vector<double> best_params = params;
    TrainCounters counters;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = dataset.split.train;
        fisher_yates_indices(order, shuffle_rng);

        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t size = end - begin;
            Matrix batch(size, dataset.samples.cols);
            std::vector<char> rare(size);
            std::vector<NoiseDraw> noise(size);
            for (std::size_t s = 0; s < size; ++s) {
                const auto row = order[begin + s];
                for (std::size_t c = 0; c < dataset.samples.cols; ++c) {
                    batch.at(s, c) = dataset.samples.at(row, c);
                }
                rare[s] = dataset.rare_mask[row];
                // Per-sample noise stream split keyed by (epoch, dataset row),
                // so parallel batch evaluation could not reorder consumption.
                const auto stream = derive_seed(static_cast<std::uint64_t>(epoch), row);
                auto forked = noise_master->fork(stream);
                RandomnessSource& src = forked ? *forked : *noise_master;
                noise[s] = draw_noise(src, static_cast<std::size_t>(model.config().latent_dim),
                                      model.config().noise_sigma);
            }

            BatchGradients grads;
            try {
                grads = compute_batch_gradients(model, batch, rare, cfg.loss, noise, &counters);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Numeric) {
                    throw;
                }
                model.set_parameters(last_good);
                throw Error::numeric("numeric failure at epoch " + std::to_string(epoch) +
                                     ", batch starting at " + std::to_string(begin) + " (" +
                                     e.what() + "); model restored to last finite epoch");
            }
            if (!std::isfinite(grads.loss.hybrid)) {
                model.set_parameters(last_good);
                throw Error::numeric("non-finite training loss at epoch " +
                                     std::to_string(epoch) + ", batch starting at " +
                                     std::to_string(begin) +
                                     "; model restored to last finite epoch");
            }
            adam.step(params, grads.flat);
            model.set_parameters(params);
        }

        EpochRecord record;
        record.epoch = epoch;
        LossTerms train_terms;
        LossTerms val_terms;
        try {
            train_terms = evaluate_losses(model, dataset.samples, dataset.rare_mask,
                                          dataset.split.train, cfg.loss);
            val_terms = evaluate_losses(model, dataset.samples, dataset.rare_mask,
                                        dataset.split.val, cfg.loss);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numeric) {
                throw;
            }
            model.set_parameters(last_good);
            throw Error::numeric("non-finite evaluation loss at epoch " + std::to_string(epoch) +
                                 "; model restored to last finite epoch");
        }
        if (!std::isfinite(train_terms.hybrid) || !std::isfinite(val_terms.hybrid)) {
            model.set_parameters(last_good);
            throw Error::numeric("non-finite evaluation loss at epoch " + std::to_string(epoch) +
                                 "; model restored to last finite epoch");
        }
        record.train_rec = train_terms.rec;
        record.train_tail = train_terms.tail;
        record.train_hybrid = train_terms.hybrid;
        record.val_rec = val_terms.rec;
        record.val_tail = val_terms.tail;
        record.val_hybrid = val_terms.hybrid;
        report.epochs.push_back(record);
        last_good = params;

        if (report.best_epoch < 0 || val_terms.hybrid < report.best_val_hybrid) {
            report.best_epoch = epoch;
            report.best_val_hybrid = val_terms.hybrid;
            best_params = params;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= cfg.patience) {
                report.early_stopped = true;
                break;
            }
        }
    }

    if (report.best_epoch >= 0) {
        model.set_parameters(best_params);
    }
    report.circuit_evaluations = counters.circuit_evaluations;
    report.input_shift_evaluations = counters.input_shift_evaluations;
    report.statevector_runs = counters.statevector_runs.count();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace qegm

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qegm/data.hpp"
#include "qegm/matrix.hpp"
#include "qegm/mlp.hpp"

namespace qegm {

/// Standard normal CDF and its inverse (Acklam's approximation plus one
/// Halley refinement; accurate to ~1e-15 over (0, 1)).
double normal_cdf(double x);
double normal_quantile(double p);

/// Gaussian product-kernel density with per-feature Silverman bandwidths.
/// The rarity-score fallback when no closed-form reference density exists.
class KdeDensity {
public:
    explicit KdeDensity(Matrix samples);

    double pdf(std::span<const double> x) const;
    double log_pdf(std::span<const double> x) const;
    const std::vector<double>& bandwidths() const { return bandwidths_; }

private:
    Matrix samples_;
    std::vector<double> bandwidths_;
};

/// Tail region T = { x : s(x) >= tau } for a rarity score s
/// (negative log-density under a reference density).
struct TailRegion {
    std::function<double(std::span<const double>)> rarity_score;
    double threshold = 0.0;

    bool contains(std::span<const double> x) const { return rarity_score(x) >= threshold; }
};

/// Region whose score is the negative log-density of the known mixture.
/// The threshold is placed at the (1 - tail_fraction) quantile of the scores
/// of `reference_samples`, so tail_fraction of them fall inside.
TailRegion tail_region_from_mixture(const MixtureSpec& mixture, const Matrix& reference_samples,
                                    double tail_fraction);

/// Same construction with a KDE fitted on the reference samples.
TailRegion tail_region_from_kde(const Matrix& reference_samples, double tail_fraction);

/// KL divergence between two histograms given as per-bin masses or counts.
/// Both sides get `smoothing_eps` added to every bin before normalization.
double kl_from_histogram(std::span<const double> p_counts, std::span<const double> q_counts,
                         double smoothing_eps);

/// KL between the real and model distributions restricted and renormalized
/// to the tail region, histogrammed on equal-probability bin edges fitted
/// from the real tail samples. For multi-feature samples the histogrammed
/// projection is the rarity score itself; one feature uses the value.
double tail_kl(const Matrix& real_samples, const Matrix& model_samples, const TailRegion& region,
               int bins, double smoothing_eps = 1e-9);

struct RecallResult {
    double recall = 0.0;
    int true_positives = 0;
    int false_negatives = 0;
};

/// A held-out rare sample is a true positive when its reconstruction still
/// satisfies the rare rule.
RecallResult rare_recall(const Matrix& rare_samples,
                         const std::function<std::vector<double>(std::span<const double>)>& reconstruct,
                         const std::function<bool(std::span<const double>)>& is_rare);

/// Empirical coverage of the model's central alpha-intervals,
/// I_alpha(x) = mean +- q_{(1+alpha)/2} * sigma per dimension; a target
/// counts as covered when every dimension falls inside.
std::vector<std::pair<double, double>> coverage_curve(
    const std::function<GaussianHead(std::span<const double>)>& predict, const Matrix& targets,
    std::span<const double> alphas);

/// Exact W1 between two 1-D empirical distributions (order statistics).
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// Per-feature W1, averaged.
double wasserstein_per_feature(const Matrix& a, const Matrix& b);

struct MetricsReport {
    double tail_kl = 0.0;
    RecallResult recall;
    std::vector<std::pair<double, double>> coverage;
    double wasserstein = 0.0;

    // Estimator constants, embedded so every number is reproducible from
    // the report alone.
    int bins = 32;
    double smoothing_eps = 1e-9;
    double tail_fraction = 0.0;
    double score_threshold = 0.0;
    std::size_t generation_count = 0;
    bool sampled_heads = false;

    std::uint64_t seed = 0;
    std::string config_hash;
    std::string dataset_hash;

    double coverage_error() const;  // mean |C(alpha) - alpha|
    std::string to_json_text() const;
};

}  // namespace qegm

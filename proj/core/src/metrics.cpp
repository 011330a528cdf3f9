// SPDX-License-Identifier: Apache-2.0
#include "qegm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include <json.hpp>

#include "qegm/error.hpp"

namespace qegm {

namespace {

/// Score projection used for tail histograms: the raw value for 1-D data,
/// the rarity score otherwise.
std::vector<double> tail_projection(const Matrix& samples, const std::vector<std::size_t>& rows,
                                    const TailRegion& region) {
    std::vector<double> projected;
    projected.reserve(rows.size());
    for (const auto r : rows) {
        if (samples.cols == 1) {
            projected.push_back(samples.at(r, 0));
        } else {
            projected.push_back(region.rarity_score(samples.row(r)));
        }
    }
    return projected;
}

std::vector<std::size_t> rows_in_region(const Matrix& samples, const TailRegion& region) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < samples.rows; ++r) {
        if (region.contains(samples.row(r))) {
            rows.push_back(r);
        }
    }
    return rows;
}

/// Quantile of sorted data at probability p (linear interpolation).
double sorted_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        throw Error::validation("quantile of an empty sample");
    }
    if (sorted.size() == 1) {
        return sorted[0];
    }
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - std::floor(pos);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double population_std(std::span<const double> xs) {
    double mean = 0.0;
    for (const auto x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (const auto x : xs) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error::validation("normal quantile needs p in (0, 1)");
    }
    // Acklam's rational approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the exact CDF.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

KdeDensity::KdeDensity(Matrix samples) : samples_(std::move(samples)) {
    if (samples_.rows < 2) {
        throw Error::validation("KDE needs at least 2 samples");
    }
    bandwidths_.resize(samples_.cols);
    const auto n = static_cast<double>(samples_.rows);
    for (std::size_t c = 0; c < samples_.cols; ++c) {
        std::vector<double> column(samples_.rows);
        for (std::size_t r = 0; r < samples_.rows; ++r) {
            column[r] = samples_.at(r, c);
        }
        const double sigma = population_std(column);
        std::sort(column.begin(), column.end());
        const double iqr = sorted_quantile(column, 0.75) - sorted_quantile(column, 0.25);
        double spread = sigma;
        if (iqr > 0.0) {
            spread = std::min(sigma, iqr / 1.34);
        }
        if (spread <= 0.0) {
            throw Error::numeric("KDE: column " + std::to_string(c) + " has zero spread");
        }
        bandwidths_[c] = 0.9 * spread * std::pow(n, -0.2);  // Silverman
    }
}

double KdeDensity::pdf(std::span<const double> x) const {
    if (x.size() != samples_.cols) {
        throw Error::validation("KDE input dimension mismatch");
    }
    const double norm = 1.0 / (static_cast<double>(samples_.rows));
    double total = 0.0;
    for (std::size_t r = 0; r < samples_.rows; ++r) {
        double k = 1.0;
        for (std::size_t c = 0; c < samples_.cols; ++c) {
            const double u = (x[c] - samples_.at(r, c)) / bandwidths_[c];
            k *= std::exp(-0.5 * u * u) / (bandwidths_[c] * std::sqrt(2.0 * std::numbers::pi));
        }
        total += k;
    }
    return total * norm;
}

double KdeDensity::log_pdf(std::span<const double> x) const {
    return std::log(pdf(x) + 1e-300);
}

TailRegion tail_region_from_mixture(const MixtureSpec& mixture, const Matrix& reference_samples,
                                    double tail_fraction) {
    if (reference_samples.cols != 1) {
        throw Error::validation("mixture rarity scores apply to 1-D samples");
    }
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
        throw Error::validation("tail fraction must lie in (0, 1)");
    }
    MixtureSpec spec = mixture;
    TailRegion region;
    region.rarity_score = [spec](std::span<const double> x) {
        return -std::log(spec.pdf(x[0]) + 1e-300);
    };
    std::vector<double> scores(reference_samples.rows);
    for (std::size_t r = 0; r < reference_samples.rows; ++r) {
        scores[r] = region.rarity_score(reference_samples.row(r));
    }
    std::sort(scores.begin(), scores.end());
    region.threshold = sorted_quantile(scores, 1.0 - tail_fraction);
    return region;
}

TailRegion tail_region_from_kde(const Matrix& reference_samples, double tail_fraction) {
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
        throw Error::validation("tail fraction must lie in (0, 1)");
    }
    auto kde = std::make_shared<KdeDensity>(reference_samples);
    TailRegion region;
    region.rarity_score = [kde](std::span<const double> x) { return -kde->log_pdf(x); };
    std::vector<double> scores(reference_samples.rows);
    for (std::size_t r = 0; r < reference_samples.rows; ++r) {
        scores[r] = region.rarity_score(reference_samples.row(r));
    }
    std::sort(scores.begin(), scores.end());
    region.threshold = sorted_quantile(scores, 1.0 - tail_fraction);
    return region;
}

double kl_from_histogram(std::span<const double> p_counts, std::span<const double> q_counts,
                         double smoothing_eps) {
    if (p_counts.size() != q_counts.size() || p_counts.empty()) {
        throw Error::validation("histogram KL needs two equal-length, nonempty count vectors");
    }
    if (!(smoothing_eps > 0.0)) {
        throw Error::validation("histogram smoothing must be positive");
    }
    double p_total = 0.0;
    double q_total = 0.0;
    for (std::size_t i = 0; i < p_counts.size(); ++i) {
        p_total += p_counts[i] + smoothing_eps;
        q_total += q_counts[i] + smoothing_eps;
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p_counts.size(); ++i) {
        const double p = (p_counts[i] + smoothing_eps) / p_total;
        const double q = (q_counts[i] + smoothing_eps) / q_total;
        kl += p * std::log(p / q);
    }
    return kl;
}

double tail_kl(const Matrix& real_samples, const Matrix& model_samples, const TailRegion& region,
               int bins, double smoothing_eps) {
    if (bins < 2) {
        throw Error::validation("tail KL needs at least 2 bins");
    }
    if (real_samples.cols != model_samples.cols) {
        throw Error::validation("real and model samples have different dimensions");
    }
    const auto real_rows = rows_in_region(real_samples, region);
    if (real_rows.empty()) {
        throw Error::validation("tail KL undefined: no real samples fall in the tail region");
    }
    const auto model_rows = rows_in_region(model_samples, region);

    auto real_proj = tail_projection(real_samples, real_rows, region);
    const auto model_proj = tail_projection(model_samples, model_rows, region);

    // Equal-probability edges from the real tail.
    std::sort(real_proj.begin(), real_proj.end());
    std::vector<double> edges(static_cast<std::size_t>(bins) - 1);
    for (int k = 1; k < bins; ++k) {
        edges[static_cast<std::size_t>(k - 1)] =
            sorted_quantile(real_proj, static_cast<double>(k) / static_cast<double>(bins));
    }
    auto bin_of = [&](double x) {
        return static_cast<std::size_t>(
            std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
    };
    std::vector<double> p_counts(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> q_counts(static_cast<std::size_t>(bins), 0.0);
    for (const auto x : real_proj) {
        p_counts[bin_of(x)] += 1.0;
    }
    for (const auto x : model_proj) {
        q_counts[bin_of(x)] += 1.0;
    }
    return kl_from_histogram(p_counts, q_counts, smoothing_eps);
}

RecallResult rare_recall(
    const Matrix& rare_samples,
    const std::function<std::vector<double>(std::span<const double>)>& reconstruct,
    const std::function<bool(std::span<const double>)>& is_rare) {
    if (rare_samples.rows == 0) {
        throw Error::validation("rare recall undefined on an empty rare set");
    }
    RecallResult result;
    for (std::size_t r = 0; r < rare_samples.rows; ++r) {
        const auto reconstruction = reconstruct(rare_samples.row(r));
        if (is_rare(reconstruction)) {
            ++result.true_positives;
        } else {
            ++result.false_negatives;
        }
    }
    result.recall = static_cast<double>(result.true_positives) /
                    static_cast<double>(result.true_positives + result.false_negatives);
    return result;
}

std::vector<std::pair<double, double>> coverage_curve(
    const std::function<GaussianHead(std::span<const double>)>& predict, const Matrix& targets,
    std::span<const double> alphas) {
    if (targets.rows == 0) {
        throw Error::validation("coverage needs at least one target");
    }
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (!(alphas[k] > 0.0 && alphas[k] < 1.0)) {
            throw Error::validation("coverage levels must lie in (0, 1)");
        }
        if (k > 0 && alphas[k] <= alphas[k - 1]) {
            throw Error::validation("coverage levels must be strictly increasing");
        }
    }
    std::vector<std::pair<double, double>> curve;
    curve.reserve(alphas.size());
    // Heads are deterministic per target, so compute them once.
    std::vector<GaussianHead> heads;
    heads.reserve(targets.rows);
    for (std::size_t r = 0; r < targets.rows; ++r) {
        heads.push_back(predict(targets.row(r)));
        if (heads.back().mean.size() != targets.cols) {
            throw Error::validation("predictive head dimension does not match targets");
        }
    }
    for (const auto alpha : alphas) {
        const double q = normal_quantile((1.0 + alpha) / 2.0);
        std::size_t covered = 0;
        for (std::size_t r = 0; r < targets.rows; ++r) {
            const auto& head = heads[r];
            bool inside = true;
            for (std::size_t c = 0; c < targets.cols; ++c) {
                const double sigma = std::exp(0.5 * head.log_variance[c]);
                if (std::abs(targets.at(r, c) - head.mean[c]) > q * sigma) {
                    inside = false;
                    break;
                }
            }
            covered += inside ? 1 : 0;
        }
        curve.emplace_back(alpha, static_cast<double>(covered) / static_cast<double>(targets.rows));
    }
    return curve;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw Error::validation("Wasserstein distance needs nonempty samples on both sides");
    }
    std::vector<double> xs(a.begin(), a.end());
    std::vector<double> ys(b.begin(), b.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    // Integrate |F_a(t) - F_b(t)| dt over the merged support.
    double distance = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    double prev = std::min(xs[0], ys[0]);
    while (i < xs.size() || j < ys.size()) {
        const double next = (j >= ys.size() || (i < xs.size() && xs[i] <= ys[j])) ? xs[i] : ys[j];
        const double fa = static_cast<double>(i) / static_cast<double>(xs.size());
        const double fb = static_cast<double>(j) / static_cast<double>(ys.size());
        distance += std::abs(fa - fb) * (next - prev);
        prev = next;
        while (i < xs.size() && xs[i] == next) ++i;
        while (j < ys.size() && ys[j] == next) ++j;
    }
    return distance;
}

double wasserstein_per_feature(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols || a.cols == 0) {
        throw Error::validation("per-feature Wasserstein needs matching, nonzero widths");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) {
        std::vector<double> xs(a.rows);
        std::vector<double> ys(b.rows);
        for (std::size_t r = 0; r < a.rows; ++r) xs[r] = a.at(r, c);
        for (std::size_t r = 0; r < b.rows; ++r) ys[r] = b.at(r, c);
        total += wasserstein_1d(xs, ys);
    }
    return total / static_cast<double>(a.cols);
}

double MetricsReport::coverage_error() const {
    if (coverage.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& [alpha, c_hat] : coverage) {
        total += std::abs(c_hat - alpha);
    }
    return total / static_cast<double>(coverage.size());
}

std::string MetricsReport::to_json_text() const {
    nlohmann::json j;
    j["tail_kl"] = tail_kl;
    j["rare_recall"] = {{"recall", recall.recall},
                        {"true_positives", recall.true_positives},
                        {"false_negatives", recall.false_negatives}};
    nlohmann::json cov = nlohmann::json::array();
    for (const auto& [alpha, c_hat] : coverage) {
        cov.push_back({{"alpha", alpha}, {"empirical", c_hat}});
    }
    j["coverage"] = cov;
    j["coverage_error"] = coverage_error();
    j["wasserstein_1d"] = wasserstein;
    j["estimator"] = {{"bins", bins},
                      {"smoothing_eps", smoothing_eps},
                      {"tail_fraction", tail_fraction},
                      {"score_threshold", score_threshold},
                      {"generation_count", generation_count},
                      {"sampled_heads", sampled_heads}};
    j["provenance"] = {{"seed", seed}, {"config_hash", config_hash}, {"dataset_hash", dataset_hash}};
    return j.dump(2) + "\n";
}

}  // namespace qegm

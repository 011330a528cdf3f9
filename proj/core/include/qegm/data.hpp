// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qegm/matrix.hpp"
#include "qegm/random.hpp"

namespace qegm {

/// Gaussian mixture: weights sum to 1, one (mean, variance) per component.
struct MixtureSpec {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;

    void validate() const;
    double pdf(double x) const;
    double cdf(double x) const;

    /// The three-component desk benchmark: 70% central mass at 0, 15% tails
    /// at -3 and +3 with variances 1, 0.5, 1.5.
    static MixtureSpec benchmark();
};

std::vector<double> sample_mixture(const MixtureSpec& spec, std::size_t n, RandomnessSource& src);

enum class ThresholdKind { KappaSigma, Quantile };
enum class TailSide { Lower, Upper };

/// Everything needed to re-apply a rare-event rule: the rule kind, its
/// parameter, the statistics it was fitted on, and the resolved cutoff.
/// KappaSigma marks the lower tail (crash convention x < -tau); Quantile
/// marks the upper tail (x >= cutoff).
struct ThresholdMeta {
    ThresholdKind kind = ThresholdKind::KappaSigma;
    double parameter = 0.0;  // kappa, or the quantile level
    double mean = 0.0;       // fitted mu (KappaSigma)
    double stddev = 0.0;     // fitted population sigma (KappaSigma)
    double cutoff = 0.0;     // tau for KappaSigma, value cutoff for Quantile
    TailSide side = TailSide::Lower;

    bool is_rare(double x) const {
        return side == TailSide::Lower ? x < -cutoff : x >= cutoff;
    }
};

struct Labeling {
    std::vector<char> rare_mask;
    ThresholdMeta meta;
};

/// tau = mu + kappa * sigma (population sigma); rare iff x < -tau.
Labeling label_rare_kappa_sigma(std::span<const double> series, double kappa);

/// Marks exactly ceil(level * N) samples at or above the empirical
/// (1 - level) cutoff; ties broken by ascending index.
Labeling label_rare_quantile(std::span<const double> series, double level);

struct SplitIndices {
    std::vector<std::size_t> train, val, test;

    std::size_t total() const { return train.size() + val.size() + test.size(); }
};

/// Shuffles rare and common strata independently and apportions each so the
/// overall split sizes follow the ratios exactly (largest-remainder).
SplitIndices stratified_split(std::span<const char> rare_mask, std::array<double, 3> ratios,
                              RandomnessSource& src);

/// Per-feature (x - mu) / sigma, population sigma, fitted on the training
/// rows only and applied everywhere.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Standardizer fit(const Matrix& samples, std::span<const std::size_t> rows);
    Matrix apply(const Matrix& samples) const;
    double transform(std::size_t column, double x) const;
    double inverse(std::size_t column, double x) const;
    std::vector<double> inverse_row(std::span<const double> standardized) const;
};

/// Samples in standardized units plus everything needed to get back to raw
/// values and to re-apply the rare rule.
struct LabeledDataset {
    Matrix samples;      // standardized
    Matrix raw;          // original units
    std::vector<char> rare_mask;
    ThresholdMeta threshold;
    SplitIndices split;
    Standardizer standardizer;
    std::size_t label_column = 0;  // column the rare rule was applied to
    std::vector<std::string> column_names;

    std::size_t size() const { return samples.rows; }
    std::size_t feature_count() const { return samples.cols; }
    double global_rare_fraction() const;
    double split_rare_fraction(const std::vector<std::size_t>& rows) const;
};

/// Labels raw samples, splits with stratification, standardizes on the
/// training rows. The rare rule always sees raw (pre-standardization) values.
LabeledDataset build_labeled_dataset(Matrix raw_samples, const Labeling& labeling,
                                     std::size_t label_column, std::array<double, 3> ratios,
                                     RandomnessSource& split_src);

/// Columns declared categorical are one-hot expanded; all other columns must
/// parse as finite numbers.
struct CsvSchema {
    std::vector<std::string> categorical_columns;
};

struct OneHotColumn {
    std::string column;
    std::vector<std::string> categories;  // sorted

    std::size_t index_of(const std::string& value) const;  // throws on unseen category
};

struct CsvTable {
    std::vector<std::string> column_names;  // expanded names, e.g. "kind=a"
    Matrix values;
    std::vector<OneHotColumn> encoders;
};

/// Strict CSV reader: UTF-8, header row, comma separator, '.' decimal,
/// no missing values. Malformed cells report their line number.
CsvTable load_csv(const std::string& path, const CsvSchema& schema);

}  // namespace qegm

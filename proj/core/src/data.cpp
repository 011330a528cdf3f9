// SPDX-License-Identifier: Apache-2.0
#include "qegm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "qegm/error.hpp"

namespace qegm {

namespace {

double normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return std::exp(-d * d / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi_v<double> * variance);
}

double normal_cdf(double x, double mean, double variance) {
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

/// Largest-remainder apportionment of n into parts proportional to ratios.
/// Ties go to the earlier part, so results are deterministic.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double target = ratios[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(target));
        remainders[k] = target - std::floor(target);
        assigned += counts[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; ++k) {
        ++counts[order[k % 3]];
        ++assigned;
    }
    return counts;
}

void fisher_yates(std::vector<std::size_t>& items, RandomnessSource& src) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(src.uniform() * static_cast<double>(i));
        std::swap(items[i - 1], items[std::min(j, i - 1)]);
    }
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse_numeric_cell(const std::string& cell, std::size_t line_number,
                          const std::string& column) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || begin == end) {
        throw Error::io("line " + std::to_string(line_number) + ": cell '" + cell +
                        "' in column '" + column + "' is not numeric");
    }
    if (!std::isfinite(value)) {
        throw Error::io("line " + std::to_string(line_number) + ": non-finite value in column '" +
                        column + "'");
    }
    return value;
}

}  // namespace

void MixtureSpec::validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
        throw Error::validation("mixture spec needs equal, nonzero numbers of weights, means and "
                                "variances");
    }
    double total = 0.0;
    for (const auto w : weights) {
        if (!(w >= 0.0)) {
            throw Error::validation("mixture weights must be nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error::validation("mixture weights must sum to 1 within 1e-12, got " +
                                std::to_string(total));
    }
    for (const auto v : variances) {
        if (!(v > 0.0)) {
            throw Error::validation("mixture variances must be positive");
        }
    }
}

double MixtureSpec::pdf(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        p += weights[k] * normal_pdf(x, means[k], variances[k]);
    }
    return p;
}

double MixtureSpec::cdf(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        p += weights[k] * normal_cdf(x, means[k], variances[k]);
    }
    return p;
}

MixtureSpec MixtureSpec::benchmark() {
    return MixtureSpec{{0.15, 0.70, 0.15}, {-3.0, 0.0, 3.0}, {1.0, 0.5, 1.5}};
}

std::vector<double> sample_mixture(const MixtureSpec& spec, std::size_t n, RandomnessSource& src) {
    spec.validate();
    if (n < 1) {
        throw Error::validation("mixture sampling needs n >= 1");
    }
    std::vector<double> cumulative(spec.weights.size());
    std::partial_sum(spec.weights.begin(), spec.weights.end(), cumulative.begin());
    std::vector<double> draws(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = src.uniform();
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && u >= cumulative[k]) {
            ++k;
        }
        draws[i] = spec.means[k] + std::sqrt(spec.variances[k]) * src.gaussian();
    }
    return draws;
}

Labeling label_rare_kappa_sigma(std::span<const double> series, double kappa) {
    if (series.size() < 2) {
        throw Error::validation("kappa-sigma labeling needs at least 2 samples");
    }
    if (!(kappa > 0.0)) {
        throw Error::validation("kappa must be positive");
    }
    double mean = 0.0;
    for (const auto x : series) {
        mean += x;
    }
    mean /= static_cast<double>(series.size());
    double var = 0.0;
    for (const auto x : series) {
        var += (x - mean) * (x - mean);
    }
    var /= static_cast<double>(series.size());  // population variance
    if (var == 0.0) {
        throw Error::numeric("kappa-sigma labeling: series has zero variance");
    }
    Labeling labeling;
    labeling.meta.kind = ThresholdKind::KappaSigma;
    labeling.meta.parameter = kappa;
    labeling.meta.mean = mean;
    labeling.meta.stddev = std::sqrt(var);
    labeling.meta.cutoff = mean + kappa * labeling.meta.stddev;
    labeling.meta.side = TailSide::Lower;
    labeling.rare_mask.resize(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        labeling.rare_mask[i] = labeling.meta.is_rare(series[i]) ? 1 : 0;
    }
    return labeling;
}

Labeling label_rare_quantile(std::span<const double> series, double level) {
    if (series.empty()) {
        throw Error::validation("quantile labeling needs a nonempty series");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw Error::validation("quantile level must lie in (0, 1)");
    }
    const auto n = series.size();
    const auto rare_count = static_cast<std::size_t>(
        std::ceil(level * static_cast<double>(n)));
    // Sort positions by value descending, ties by ascending index, and mark
    // exactly the first rare_count of them.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return series[a] > series[b];
    });
    Labeling labeling;
    labeling.rare_mask.assign(n, 0);
    for (std::size_t k = 0; k < rare_count; ++k) {
        labeling.rare_mask[order[k]] = 1;
    }
    labeling.meta.kind = ThresholdKind::Quantile;
    labeling.meta.parameter = level;
    labeling.meta.cutoff = series[order[rare_count - 1]];
    labeling.meta.side = TailSide::Upper;
    return labeling;
}

SplitIndices stratified_split(std::span<const char> rare_mask, std::array<double, 3> ratios,
                              RandomnessSource& src) {
    const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(ratio_sum - 1.0) > 1e-12) {
        throw Error::validation("split ratios must sum to 1");
    }
    std::vector<std::size_t> rare, common;
    for (std::size_t i = 0; i < rare_mask.size(); ++i) {
        (rare_mask[i] ? rare : common).push_back(i);
    }
    if (rare.size() < 3 || common.size() < 3) {
        throw Error::validation("stratified split needs at least 3 rare and 3 common samples, got " +
                                std::to_string(rare.size()) + " rare / " +
                                std::to_string(common.size()) + " common");
    }
    // Global sizes first (exact largest-remainder on N), then the rare
    // stratum's own apportionment; common gets the difference so the global
    // sizes hold exactly.
    const auto global_counts = apportion(rare_mask.size(), ratios);
    const auto rare_counts = apportion(rare.size(), ratios);
    std::array<std::size_t, 3> common_counts{};
    for (std::size_t k = 0; k < 3; ++k) {
        if (rare_counts[k] > global_counts[k]) {
            throw Error::validation("stratified split infeasible: rare stratum alone exceeds the " +
                                    std::to_string(k) + "-th split");
        }
        common_counts[k] = global_counts[k] - rare_counts[k];
    }

    fisher_yates(rare, src);
    fisher_yates(common, src);

    SplitIndices split;
    auto take = [](const std::vector<std::size_t>& pool, std::size_t begin, std::size_t count,
                   std::vector<std::size_t>& out) {
        out.insert(out.end(), pool.begin() + static_cast<std::ptrdiff_t>(begin),
                   pool.begin() + static_cast<std::ptrdiff_t>(begin + count));
    };
    take(rare, 0, rare_counts[0], split.train);
    take(rare, rare_counts[0], rare_counts[1], split.val);
    take(rare, rare_counts[0] + rare_counts[1], rare_counts[2], split.test);
    take(common, 0, common_counts[0], split.train);
    take(common, common_counts[0], common_counts[1], split.val);
    take(common, common_counts[0] + common_counts[1], common_counts[2], split.test);
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

Standardizer Standardizer::fit(const Matrix& samples, std::span<const std::size_t> rows) {
    if (rows.empty()) {
        throw Error::validation("standardizer needs at least one fitting row");
    }
    Standardizer st;
    st.mean.assign(samples.cols, 0.0);
    st.stddev.assign(samples.cols, 0.0);
    for (const auto r : rows) {
        for (std::size_t c = 0; c < samples.cols; ++c) {
            st.mean[c] += samples.at(r, c);
        }
    }
    for (auto& m : st.mean) {
        m /= static_cast<double>(rows.size());
    }
    for (const auto r : rows) {
        for (std::size_t c = 0; c < samples.cols; ++c) {
            const double d = samples.at(r, c) - st.mean[c];
            st.stddev[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < samples.cols; ++c) {
        st.stddev[c] = std::sqrt(st.stddev[c] / static_cast<double>(rows.size()));
        if (st.stddev[c] == 0.0) {
            throw Error::numeric("standardize: feature column " + std::to_string(c) +
                                 " has zero variance on the training split");
        }
    }
    return st;
}

Matrix Standardizer::apply(const Matrix& samples) const {
    if (samples.cols != mean.size()) {
        throw Error::validation("standardizer fitted on " + std::to_string(mean.size()) +
                                " columns, samples have " + std::to_string(samples.cols));
    }
    Matrix out(samples.rows, samples.cols);
    for (std::size_t r = 0; r < samples.rows; ++r) {
        for (std::size_t c = 0; c < samples.cols; ++c) {
            out.at(r, c) = (samples.at(r, c) - mean[c]) / stddev[c];
        }
    }
    return out;
}

double Standardizer::transform(std::size_t column, double x) const {
    return (x - mean[column]) / stddev[column];
}

double Standardizer::inverse(std::size_t column, double x) const {
    return mean[column] + stddev[column] * x;
}

std::vector<double> Standardizer::inverse_row(std::span<const double> standardized) const {
    std::vector<double> raw(standardized.size());
    for (std::size_t c = 0; c < standardized.size(); ++c) {
        raw[c] = inverse(c, standardized[c]);
    }
    return raw;
}

double LabeledDataset::global_rare_fraction() const {
    if (rare_mask.empty()) {
        return 0.0;
    }
    const auto rare = static_cast<double>(std::count(rare_mask.begin(), rare_mask.end(), 1));
    return rare / static_cast<double>(rare_mask.size());
}

double LabeledDataset::split_rare_fraction(const std::vector<std::size_t>& rows) const {
    if (rows.empty()) {
        return 0.0;
    }
    std::size_t rare = 0;
    for (const auto r : rows) {
        rare += rare_mask[r] ? 1 : 0;
    }
    return static_cast<double>(rare) / static_cast<double>(rows.size());
}

LabeledDataset build_labeled_dataset(Matrix raw_samples, const Labeling& labeling,
                                     std::size_t label_column, std::array<double, 3> ratios,
                                     RandomnessSource& split_src) {
    if (labeling.rare_mask.size() != raw_samples.rows) {
        throw Error::validation("rare mask length does not match sample count");
    }
    if (label_column >= raw_samples.cols) {
        throw Error::validation("label column out of range");
    }
    LabeledDataset ds;
    ds.rare_mask = labeling.rare_mask;
    ds.threshold = labeling.meta;
    ds.label_column = label_column;
    ds.split = stratified_split(ds.rare_mask, ratios, split_src);
    ds.standardizer = Standardizer::fit(raw_samples, ds.split.train);
    ds.samples = ds.standardizer.apply(raw_samples);
    ds.raw = std::move(raw_samples);
    return ds;
}

std::size_t OneHotColumn::index_of(const std::string& value) const {
    const auto it = std::lower_bound(categories.begin(), categories.end(), value);
    if (it == categories.end() || *it != value) {
        throw Error::validation("unseen category '" + value + "' in column '" + column + "'");
    }
    return static_cast<std::size_t>(it - categories.begin());
}

CsvTable load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw Error::io("cannot open CSV file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error::io("CSV file is empty: " + path);
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const auto header = split_line(line);
    if (header.empty()) {
        throw Error::io("CSV header row is empty: " + path);
    }
    std::vector<bool> categorical(header.size(), false);
    for (const auto& name : schema.categorical_columns) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error::validation("categorical column '" + name + "' not found in CSV header");
        }
        categorical[static_cast<std::size_t>(it - header.begin())] = true;
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw Error::io("line " + std::to_string(line_number) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        rows.push_back(std::move(cells));
        row_lines.push_back(line_number);
    }
    if (rows.empty()) {
        throw Error::io("CSV file has no data rows: " + path);
    }

    CsvTable table;
    // Categorical encoders first, with sorted category lists.
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!categorical[c]) {
            continue;
        }
        OneHotColumn encoder;
        encoder.column = header[c];
        for (const auto& row : rows) {
            encoder.categories.push_back(row[c]);
        }
        std::sort(encoder.categories.begin(), encoder.categories.end());
        encoder.categories.erase(std::unique(encoder.categories.begin(), encoder.categories.end()),
                                 encoder.categories.end());
        table.encoders.push_back(std::move(encoder));
    }

    std::size_t expanded_cols = 0;
    std::size_t encoder_idx = 0;
    std::vector<std::size_t> column_offsets(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        column_offsets[c] = expanded_cols;
        if (categorical[c]) {
            const auto& enc = table.encoders[encoder_idx++];
            for (const auto& cat : enc.categories) {
                table.column_names.push_back(header[c] + "=" + cat);
            }
            expanded_cols += enc.categories.size();
        } else {
            table.column_names.push_back(header[c]);
            ++expanded_cols;
        }
    }

    table.values = Matrix(rows.size(), expanded_cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        encoder_idx = 0;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (categorical[c]) {
                const auto& enc = table.encoders[encoder_idx++];
                const auto hot = enc.index_of(rows[r][c]);
                table.values.at(r, column_offsets[c] + hot) = 1.0;
            } else {
                table.values.at(r, column_offsets[c]) =
                    parse_numeric_cell(rows[r][c], row_lines[r], header[c]);
            }
        }
    }
    return table;
}

}  // namespace qegm

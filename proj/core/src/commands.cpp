// SPDX-License-Identifier: Apache-2.0
#include "qegm/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "qegm/error.hpp"
#include "qegm/io.hpp"

namespace qegm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kDataStream = 0xDA7A;
constexpr std::uint64_t kSplitStream = 0x5B17;
constexpr std::uint64_t kEvalStream = 0x6E47;

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void log_line(const CommandOptions& options, const std::string& message) {
    if (!options.quiet) {
        std::cout << "[qegm] " << message << "\n";
    }
}

json threshold_meta_json(const ThresholdMeta& meta) {
    return {{"kind", meta.kind == ThresholdKind::KappaSigma ? "kappa_sigma" : "quantile"},
            {"parameter", meta.parameter},
            {"mean", meta.mean},
            {"stddev", meta.stddev},
            {"cutoff", meta.cutoff},
            {"side", meta.side == TailSide::Lower ? "lower" : "upper"}};
}

ThresholdMeta threshold_meta_from_json(const json& j) {
    ThresholdMeta meta;
    meta.kind = j.at("kind").get<std::string>() == "kappa_sigma" ? ThresholdKind::KappaSigma
                                                                 : ThresholdKind::Quantile;
    meta.parameter = j.at("parameter").get<double>();
    meta.mean = j.at("mean").get<double>();
    meta.stddev = j.at("stddev").get<double>();
    meta.cutoff = j.at("cutoff").get<double>();
    meta.side = j.at("side").get<std::string>() == "lower" ? TailSide::Lower : TailSide::Upper;
    return meta;
}

Matrix rows_subset(const Matrix& samples, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), samples.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < samples.cols; ++c) {
            out.at(i, c) = samples.at(rows[i], c);
        }
    }
    return out;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ExperimentConfig apply_overrides(ExperimentConfig cfg, const CommandOptions& options) {
    if (options.seed_override) {
        cfg.training.seed = *options.seed_override;
    }
    if (options.out_override) {
        cfg.output_dir = *options.out_override;
    }
    return cfg;
}

LabeledDataset build_dataset(const ExperimentConfig& cfg) {
    Matrix raw;
    std::vector<std::string> names;
    std::size_t label_column = 0;
    if (cfg.dataset.kind == DatasetKind::Mixture) {
        SeededPrng src(derive_seed(cfg.training.seed, kDataStream));
        const auto values = sample_mixture(cfg.dataset.mixture, cfg.dataset.n_samples, src);
        raw = Matrix(values.size(), 1);
        for (std::size_t i = 0; i < values.size(); ++i) {
            raw.at(i, 0) = values[i];
        }
        names = {"x0"};
        label_column = 0;
    } else {
        CsvSchema schema;
        schema.categorical_columns = cfg.dataset.csv_categorical;
        const auto table = load_csv(cfg.dataset.csv_path, schema);
        const auto it = std::find(table.column_names.begin(), table.column_names.end(),
                                  cfg.dataset.csv_label_column);
        if (it == table.column_names.end()) {
            throw Error::validation("label column '" + cfg.dataset.csv_label_column +
                                    "' not found among CSV columns");
        }
        label_column = static_cast<std::size_t>(it - table.column_names.begin());
        raw = table.values;
        names = table.column_names;
    }

    std::vector<double> series(raw.rows);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        series[i] = raw.at(i, label_column);
    }
    const Labeling labeling =
        cfg.dataset.labeling.rule == ThresholdKind::KappaSigma
            ? label_rare_kappa_sigma(series, cfg.dataset.labeling.kappa)
            : label_rare_quantile(series, cfg.dataset.labeling.quantile_level);

    SeededPrng split_src(derive_seed(cfg.training.seed, kSplitStream));
    auto dataset = build_labeled_dataset(std::move(raw), labeling, label_column,
                                         cfg.dataset.split_ratios, split_src);
    dataset.column_names = std::move(names);
    return dataset;
}

void write_dataset_files(const std::string& dir, const LabeledDataset& dataset,
                         const ExperimentConfig& cfg, bool force) {
    const auto csv_path = join_path(dir, "dataset.csv");
    const auto manifest_path = join_path(dir, "manifest.json");
    if (!force && (file_exists(csv_path) || file_exists(manifest_path))) {
        throw Error::validation("dataset files already exist in " + dir +
                                "; pass --force to overwrite");
    }
    ensure_directory(dir);

    std::vector<std::string> split_tag(dataset.size());
    for (const auto r : dataset.split.train) split_tag[r] = "train";
    for (const auto r : dataset.split.val) split_tag[r] = "val";
    for (const auto r : dataset.split.test) split_tag[r] = "test";

    std::ostringstream csv;
    for (const auto& name : dataset.column_names) {
        csv << name << ',';
    }
    csv << "rare,split\n";
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        for (std::size_t c = 0; c < dataset.raw.cols; ++c) {
            csv << format_double(dataset.raw.at(r, c)) << ',';
        }
        csv << (dataset.rare_mask[r] ? '1' : '0') << ',' << split_tag[r] << '\n';
    }
    write_text_file(csv_path, csv.str());

    json manifest;
    manifest["format_version"] = 1;
    manifest["seed"] = cfg.training.seed;
    manifest["n_samples"] = dataset.size();
    manifest["n_features"] = dataset.feature_count();
    manifest["column_names"] = dataset.column_names;
    manifest["label_column"] = dataset.label_column;
    manifest["threshold"] = threshold_meta_json(dataset.threshold);
    manifest["split_sizes"] = {{"train", dataset.split.train.size()},
                               {"val", dataset.split.val.size()},
                               {"test", dataset.split.test.size()}};
    manifest["rare_count"] =
        static_cast<std::size_t>(std::count(dataset.rare_mask.begin(), dataset.rare_mask.end(), 1));
    if (cfg.dataset.kind == DatasetKind::Mixture) {
        manifest["generator"] = {{"kind", "mixture"},
                                 {"weights", cfg.dataset.mixture.weights},
                                 {"means", cfg.dataset.mixture.means},
                                 {"variances", cfg.dataset.mixture.variances}};
    } else {
        manifest["generator"] = {{"kind", "csv"},
                                 {"path", cfg.dataset.csv_path},
                                 {"source_file_hash", hash_file(cfg.dataset.csv_path)}};
    }
    manifest["config_hash"] = cfg.hash();
    manifest["dataset_file_hash"] = hash_file(csv_path);
    write_text_file(manifest_path, manifest.dump(2) + "\n");
}

LabeledDataset load_dataset_files(const std::string& dir, std::string* dataset_hash) {
    const auto csv_path = join_path(dir, "dataset.csv");
    const auto manifest_path = join_path(dir, "manifest.json");
    if (!file_exists(csv_path) || !file_exists(manifest_path)) {
        throw Error::io("dataset files not found in " + dir +
                        "; run `qegm generate-data` first");
    }
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw Error::io(std::string("cannot parse dataset manifest: ") + e.what());
    }
    const auto recorded_hash = manifest.at("dataset_file_hash").get<std::string>();
    const auto actual_hash = hash_file(csv_path);
    if (recorded_hash != actual_hash) {
        throw Error::validation("dataset.csv does not match its manifest hash (file edited?)");
    }

    const auto table = load_csv(csv_path, CsvSchema{{"split"}});
    // Columns: features..., "rare", then the one-hot expanded "split=..." set.
    const auto n_features = manifest.at("n_features").get<std::size_t>();
    LabeledDataset dataset;
    dataset.column_names = manifest.at("column_names").get<std::vector<std::string>>();
    dataset.label_column = manifest.at("label_column").get<std::size_t>();
    dataset.threshold = threshold_meta_from_json(manifest.at("threshold"));

    const auto& cols = table.column_names;
    auto col_index = [&](const std::string& name) {
        const auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end()) {
            throw Error::io("dataset.csv is missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - cols.begin());
    };
    const auto rare_col = col_index("rare");
    const auto n = table.values.rows;
    dataset.raw = Matrix(n, n_features);
    dataset.rare_mask.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n_features; ++c) {
            dataset.raw.at(r, c) = table.values.at(r, c);
        }
        dataset.rare_mask[r] = table.values.at(r, rare_col) != 0.0 ? 1 : 0;
    }
    const auto train_col = col_index("split=train");
    const auto val_col = col_index("split=val");
    const auto test_col = col_index("split=test");
    for (std::size_t r = 0; r < n; ++r) {
        if (table.values.at(r, train_col) != 0.0) {
            dataset.split.train.push_back(r);
        } else if (table.values.at(r, val_col) != 0.0) {
            dataset.split.val.push_back(r);
        } else if (table.values.at(r, test_col) != 0.0) {
            dataset.split.test.push_back(r);
        } else {
            throw Error::io("dataset.csv row " + std::to_string(r) + " has no split tag");
        }
    }
    dataset.standardizer = Standardizer::fit(dataset.raw, dataset.split.train);
    dataset.samples = dataset.standardizer.apply(dataset.raw);
    if (dataset_hash != nullptr) {
        *dataset_hash = actual_hash;
    }
    return dataset;
}

void cmd_generate_data(const ExperimentConfig& raw_cfg, const CommandOptions& options) {
    const auto cfg = apply_overrides(raw_cfg, options);
    cfg.validate();
    const auto dir = cfg.resolved_output_dir();
    const auto dataset = build_dataset(cfg);
    write_dataset_files(dir, dataset, cfg, options.force);
    log_line(options, "wrote " + join_path(dir, "dataset.csv") + " (" +
                          std::to_string(dataset.size()) + " samples, " +
                          std::to_string(static_cast<std::size_t>(std::count(
                              dataset.rare_mask.begin(), dataset.rare_mask.end(), 1))) +
                          " rare)");
}

void cmd_train(const ExperimentConfig& raw_cfg, const CommandOptions& options) {
    auto cfg = apply_overrides(raw_cfg, options);
    cfg.validate();
    const auto dir = cfg.resolved_output_dir();
    std::string dataset_hash;
    const auto dataset = load_dataset_files(dir, &dataset_hash);

    ModelConfig model_cfg = cfg.model;
    if (cfg.model_input_dim_given) {
        if (static_cast<std::size_t>(model_cfg.input_dim) != dataset.feature_count()) {
            throw Error::validation("config model.input_dim=" + std::to_string(model_cfg.input_dim) +
                                    " does not match dataset feature count " +
                                    std::to_string(dataset.feature_count()));
        }
    } else {
        model_cfg.input_dim = static_cast<int>(dataset.feature_count());
    }
    model_cfg.validate();

    QegmModel model = QegmModel::initialize(model_cfg, cfg.training.seed);
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.training.learning_rate;
    AdamState adam(model.parameter_count(), adam_cfg);

    TrainConfig train_cfg = cfg.training;
    train_cfg.loss = cfg.loss;

    Checkpoint cp;
    cp.model_config = model_cfg;
    cp.standardizer = dataset.standardizer;
    cp.threshold = dataset.threshold;
    cp.label_column = dataset.label_column;
    cp.seed = cfg.training.seed;
    cp.config_hash = cfg.hash();
    cp.dataset_hash = dataset_hash;

    TrainReport report;
    report.seed = cfg.training.seed;
    if (cfg.training.epochs > 0) {
        try {
            report = train(model, adam, dataset, train_cfg);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Numeric) {
                // train() restored the last finite parameters; keep them.
                cp.model = model;
                cp.adam = adam;
                ensure_directory(dir);
                cp.save(join_path(dir, "checkpoint.lastgood.json"));
                log_line(options, "training aborted; last-good checkpoint written to " +
                                      join_path(dir, "checkpoint.lastgood.json"));
            }
            throw;
        }
    }

    cp.model = model;
    cp.adam = adam;
    ensure_directory(dir);
    cp.save(join_path(dir, "checkpoint.json"));
    write_text_file(join_path(dir, "train_report.json"), report.to_json_text());
    json resolved = cfg.to_json();
    resolved["config_hash"] = cfg.hash();
    write_text_file(join_path(dir, "resolved_config.json"), resolved.dump(2) + "\n");
    std::ostringstream summary;
    summary << "trained " << (model_cfg.mode == ModelMode::Quantum ? "quantum" : "baseline")
            << " model for " << report.epochs.size() << " epochs";
    if (!report.epochs.empty()) {
        summary << " (val hybrid " << format_double(report.best_val_hybrid) << " at epoch "
                << report.best_epoch << ")";
    }
    log_line(options, summary.str());
}

MetricsReport cmd_evaluate(const ExperimentConfig& raw_cfg, const CommandOptions& options,
                           const std::optional<std::string>& checkpoint_path) {
    auto cfg = apply_overrides(raw_cfg, options);
    cfg.validate();
    const auto dir = cfg.resolved_output_dir();
    std::string dataset_hash;
    const auto dataset = load_dataset_files(dir, &dataset_hash);
    const auto cp_path = checkpoint_path.value_or(join_path(dir, "checkpoint.json"));
    const auto cp = Checkpoint::load(cp_path);

    if (cp.dataset_hash != dataset_hash) {
        throw Error::validation("checkpoint was trained on a different dataset (hash " +
                                cp.dataset_hash + " vs " + dataset_hash + ")");
    }
    if (static_cast<std::size_t>(cp.model_config.input_dim) != dataset.feature_count()) {
        throw Error::validation("checkpoint input_dim=" +
                                std::to_string(cp.model_config.input_dim) +
                                " does not match dataset feature count " +
                                std::to_string(dataset.feature_count()));
    }

    const auto test_raw = rows_subset(dataset.raw, dataset.split.test);
    const auto test_std = rows_subset(dataset.samples, dataset.split.test);

    // Generated samples, mapped back to raw units.
    SeededPrng gen_src(derive_seed(cp.seed, kEvalStream));
    GenerationOptions gen_opts;
    gen_opts.shots = cfg.metrics.generation_shots;
    gen_opts.sample_heads = cfg.metrics.sample_heads;
    const auto gen_std = cp.model.generate(cfg.metrics.generation_count, gen_src, gen_opts);
    Matrix gen_raw(gen_std.rows, gen_std.cols);
    for (std::size_t r = 0; r < gen_std.rows; ++r) {
        for (std::size_t c = 0; c < gen_std.cols; ++c) {
            gen_raw.at(r, c) = cp.standardizer.inverse(c, gen_std.at(r, c));
        }
    }

    const TailRegion region =
        cfg.dataset.kind == DatasetKind::Mixture
            ? tail_region_from_mixture(cfg.dataset.mixture, test_raw, cfg.metrics.tail_fraction)
            : tail_region_from_kde(test_raw, cfg.metrics.tail_fraction);

    MetricsReport report;
    report.bins = cfg.metrics.bins;
    report.smoothing_eps = cfg.metrics.smoothing_eps;
    report.tail_fraction = cfg.metrics.tail_fraction;
    report.score_threshold = region.threshold;
    report.generation_count = cfg.metrics.generation_count;
    report.sampled_heads = cfg.metrics.sample_heads;
    report.seed = cp.seed;
    report.config_hash = cp.config_hash;
    report.dataset_hash = dataset_hash;

    report.tail_kl = tail_kl(test_raw, gen_raw, region, cfg.metrics.bins, cfg.metrics.smoothing_eps);

    std::vector<std::size_t> rare_test;
    for (const auto r : dataset.split.test) {
        if (dataset.rare_mask[r]) {
            rare_test.push_back(r);
        }
    }
    const auto rare_raw = rows_subset(dataset.raw, rare_test);
    const auto& standardizer = cp.standardizer;
    const auto& model = cp.model;
    auto reconstruct_raw = [&](std::span<const double> x_raw) {
        std::vector<double> x_std(x_raw.size());
        for (std::size_t c = 0; c < x_raw.size(); ++c) {
            x_std[c] = standardizer.transform(c, x_raw[c]);
        }
        const auto head = model.predict(x_std);
        return standardizer.inverse_row(head.mean);
    };
    const auto label_col = cp.label_column;
    const auto threshold = cp.threshold;
    auto is_rare_raw = [label_col, threshold](std::span<const double> x_raw) {
        return threshold.is_rare(x_raw[label_col]);
    };
    report.recall = rare_recall(rare_raw, reconstruct_raw, is_rare_raw);

    auto predict_std = [&](std::span<const double> x_std) { return model.predict(x_std); };
    report.coverage = coverage_curve(predict_std, test_std, cfg.metrics.alphas);

    report.wasserstein = wasserstein_per_feature(test_raw, gen_raw);

    ensure_directory(dir);
    write_text_file(join_path(dir, "metrics_report.json"), report.to_json_text());
    log_line(options, "metrics: tail_kl=" + format_double(report.tail_kl) +
                          " rare_recall=" + format_double(report.recall.recall) +
                          " coverage_err=" + format_double(report.coverage_error()) +
                          " w1=" + format_double(report.wasserstein));
    return report;
}

CompareResult cmd_compare(const CompareConfig& cfg, const CommandOptions& options) {
    std::vector<std::pair<std::string, ExperimentConfig>> models;
    for (const auto& [name, path] : cfg.model_configs) {
        models.emplace_back(name, ExperimentConfig::from_json_file(path));
    }
    // All models must describe the same data and the same evaluation.
    const auto reference_dataset = models.front().second.to_json()["dataset"];
    const auto reference_metrics = models.front().second.to_json()["metrics"];
    for (const auto& [name, model_cfg] : models) {
        if (model_cfg.to_json()["dataset"] != reference_dataset) {
            throw Error::validation("comparison invalid: model '" + name +
                                    "' has a different dataset section");
        }
        if (model_cfg.to_json()["metrics"] != reference_metrics) {
            throw Error::validation("comparison invalid: model '" + name +
                                    "' has a different metrics section");
        }
    }

    std::string out_dir = cfg.output_dir;
    if (options.out_override) {
        out_dir = *options.out_override;
    }
    ensure_directory(out_dir);

    CompareResult result;
    for (const auto seed : cfg.seeds) {
        std::optional<std::string> seed_dataset_hash;
        for (const auto& [name, base_cfg] : models) {
            ExperimentConfig run_cfg = base_cfg;
            run_cfg.training.seed = seed;
            run_cfg.output_dir = join_path(out_dir, name + "_seed" + std::to_string(seed));
            CommandOptions run_opts;
            run_opts.force = true;
            run_opts.quiet = options.quiet;
            cmd_generate_data(run_cfg, run_opts);
            std::string dataset_hash;
            load_dataset_files(run_cfg.resolved_output_dir(), &dataset_hash);
            if (seed_dataset_hash && *seed_dataset_hash != dataset_hash) {
                throw Error::validation("comparison invalid: dataset manifests differ across "
                                        "models for seed " + std::to_string(seed));
            }
            seed_dataset_hash = dataset_hash;
            cmd_train(run_cfg, run_opts);
            const auto metrics = cmd_evaluate(run_cfg, run_opts);
            CompareRow row;
            row.model = name;
            row.seed = seed;
            row.tail_kl = metrics.tail_kl;
            row.rare_recall = metrics.recall.recall;
            row.coverage_error = metrics.coverage_error();
            row.wasserstein = metrics.wasserstein;
            result.per_seed.push_back(row);
            log_line(options, name + " seed " + std::to_string(seed) + ": tail_kl=" +
                                  format_double(row.tail_kl) + " recall=" +
                                  format_double(row.rare_recall));
        }
    }

    for (const auto& [name, base_cfg] : models) {
        std::vector<double> kl, recall, cov, w1;
        for (const auto& row : result.per_seed) {
            if (row.model != name) {
                continue;
            }
            kl.push_back(row.tail_kl);
            recall.push_back(row.rare_recall);
            cov.push_back(row.coverage_error);
            w1.push_back(row.wasserstein);
        }
        CompareRow median;
        median.model = name;
        median.tail_kl = median_of(kl);
        median.rare_recall = median_of(recall);
        median.coverage_error = median_of(cov);
        median.wasserstein = median_of(w1);
        result.medians.push_back(median);
    }

    std::ostringstream csv;
    csv << "model,seed,tail_kl,rare_recall,coverage_error,wasserstein_1d\n";
    for (const auto& row : result.per_seed) {
        csv << row.model << ',' << row.seed << ',' << format_double(row.tail_kl) << ','
            << format_double(row.rare_recall) << ',' << format_double(row.coverage_error) << ','
            << format_double(row.wasserstein) << '\n';
    }
    for (const auto& row : result.medians) {
        csv << row.model << ",median," << format_double(row.tail_kl) << ','
            << format_double(row.rare_recall) << ',' << format_double(row.coverage_error) << ','
            << format_double(row.wasserstein) << '\n';
    }
    write_text_file(join_path(out_dir, "comparison.csv"), csv.str());

    json summary;
    summary["seeds"] = cfg.seeds;
    json per_seed = json::array();
    for (const auto& row : result.per_seed) {
        per_seed.push_back({{"model", row.model},
                            {"seed", row.seed},
                            {"tail_kl", row.tail_kl},
                            {"rare_recall", row.rare_recall},
                            {"coverage_error", row.coverage_error},
                            {"wasserstein_1d", row.wasserstein}});
    }
    summary["per_seed"] = per_seed;
    json medians = json::object();
    for (const auto& row : result.medians) {
        medians[row.model] = {{"tail_kl", row.tail_kl},
                              {"rare_recall", row.rare_recall},
                              {"coverage_error", row.coverage_error},
                              {"wasserstein_1d", row.wasserstein}};
    }
    summary["medians"] = medians;
    write_text_file(join_path(out_dir, "comparison.json"), summary.dump(2) + "\n");

    for (const auto& row : result.medians) {
        log_line(options, "median " + row.model + ": tail_kl=" + format_double(row.tail_kl) +
                              " recall=" + format_double(row.rare_recall) + " coverage_err=" +
                              format_double(row.coverage_error) + " w1=" +
                              format_double(row.wasserstein));
    }
    return result;
}

}  // namespace qegm

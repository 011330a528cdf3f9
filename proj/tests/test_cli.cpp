// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "qegm/commands.hpp"
#include "qegm/config.hpp"
#include "qegm/error.hpp"
#include "qegm/io.hpp"

using namespace qegm;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json small_config_json(const std::string& out_dir) {
    return json{
        {"dataset",
         {{"kind", "mixture"},
          {"mixture",
           {{"weights", {0.15, 0.70, 0.15}}, {"means", {-3.0, 0.0, 3.0}},
            {"variances", {1.0, 0.5, 1.5}}}},
          {"n_samples", 400},
          {"labeling", {{"rule", "quantile"}, {"level", 0.1}}}}},
        {"model",
         {{"mode", "baseline"}, {"latent_dim", 2}, {"n_qubits", 2}, {"depth", 1},
          {"noise_sigma", 0.05}, {"encoder_hidden", {8}}, {"decoder_hidden", {8}}}},
        {"loss", {{"lambda_rec", 1.0}, {"lambda_tail", 1.0}}},
        {"training",
         {{"epochs", 3}, {"batch_size", 32}, {"learning_rate", 0.005}, {"patience", 10},
          {"seed", 11}}},
        {"metrics",
         {{"bins", 8}, {"alphas", {0.5, 0.9}}, {"tail_fraction", 0.1},
          {"generation_count", 200}}},
        {"output_dir", out_dir},
    };
}

CommandOptions quiet_options() {
    CommandOptions options;
    options.quiet = true;
    return options;
}

}  // namespace

TEST_CASE("config parsing is strict about unknown keys") {
    auto j = small_config_json("/tmp/qegm_cfg_probe");
    CHECK_NOTHROW(ExperimentConfig::from_json(j));

    auto with_typo = j;
    with_typo["loss"]["lamda_tail"] = 2.0;
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(with_typo),
                         doctest::Contains("unknown key 'lamda_tail'"), Error);

    auto with_extra_top = j;
    with_extra_top["extra_section"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(with_extra_top), Error);

    auto missing = j;
    missing.erase("training");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(missing),
                         doctest::Contains("missing key 'training'"), Error);
}

TEST_CASE("config hash is stable and sensitive") {
    const auto a = ExperimentConfig::from_json(small_config_json("/tmp/a"));
    const auto b = ExperimentConfig::from_json(small_config_json("/tmp/a"));
    CHECK(a.hash() == b.hash());
    auto changed = small_config_json("/tmp/a");
    changed["loss"]["lambda_tail"] = 3.0;
    CHECK(ExperimentConfig::from_json(changed).hash() != a.hash());
}

TEST_CASE("invalid mixture weights fail before any file is written") {
    const auto dir = fresh_dir("qegm_cli_badcfg");
    auto j = small_config_json((dir / "run").string());
    j["dataset"]["mixture"]["weights"] = {0.5, 0.3, 0.1};  // sums to 0.9
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(j), doctest::Contains("sum to 1"), Error);
    CHECK_FALSE(fs::exists(dir / "run" / "dataset.csv"));
}

TEST_CASE("generate-data writes files, refuses overwrite, and is idempotent per seed") {
    const auto dir = fresh_dir("qegm_cli_gen");
    const auto run = (dir / "run").string();
    const auto cfg = ExperimentConfig::from_json(small_config_json(run));

    cmd_generate_data(cfg, quiet_options());
    REQUIRE(fs::exists(fs::path(run) / "dataset.csv"));
    REQUIRE(fs::exists(fs::path(run) / "manifest.json"));
    const auto first_csv = read_text_file(run + "/dataset.csv");
    const auto first_manifest = read_text_file(run + "/manifest.json");

    CHECK_THROWS_WITH_AS(cmd_generate_data(cfg, quiet_options()), doctest::Contains("--force"),
                         Error);

    auto force = quiet_options();
    force.force = true;
    cmd_generate_data(cfg, force);
    CHECK(read_text_file(run + "/dataset.csv") == first_csv);
    CHECK(read_text_file(run + "/manifest.json") == first_manifest);

    // A different seed produces different bytes.
    auto reseeded = force;
    reseeded.seed_override = 999;
    cmd_generate_data(cfg, reseeded);
    CHECK(read_text_file(run + "/dataset.csv") != first_csv);
}

TEST_CASE("dataset files round-trip through load_dataset_files") {
    const auto dir = fresh_dir("qegm_cli_roundtrip");
    const auto run = (dir / "run").string();
    const auto cfg = ExperimentConfig::from_json(small_config_json(run));
    const auto built = build_dataset(cfg);
    write_dataset_files(run, built, cfg, false);

    std::string hash;
    const auto loaded = load_dataset_files(run, &hash);
    CHECK(loaded.size() == built.size());
    CHECK(loaded.raw.data == built.raw.data);
    CHECK(loaded.rare_mask == built.rare_mask);
    CHECK(loaded.split.train == built.split.train);
    CHECK(loaded.split.val == built.split.val);
    CHECK(loaded.split.test == built.split.test);
    CHECK(loaded.standardizer.mean == built.standardizer.mean);
    CHECK(loaded.threshold.cutoff == built.threshold.cutoff);
    CHECK_FALSE(hash.empty());

    // Tampering is detected.
    auto text = read_text_file(run + "/dataset.csv");
    text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
    write_text_file(run + "/dataset.csv", text);
    CHECK_THROWS_WITH_AS(load_dataset_files(run, nullptr), doctest::Contains("manifest hash"),
                         Error);
}

TEST_CASE("train fails cleanly without dataset files") {
    const auto dir = fresh_dir("qegm_cli_notrain");
    const auto cfg = ExperimentConfig::from_json(small_config_json((dir / "run").string()));
    CHECK_THROWS_WITH_AS(cmd_train(cfg, quiet_options()), doctest::Contains("generate-data"),
                         Error);
}

TEST_CASE("full pipeline runs and reruns byte-identically") {
    const auto dir = fresh_dir("qegm_cli_pipeline");
    const auto run = (dir / "run").string();
    const auto cfg = ExperimentConfig::from_json(small_config_json(run));

    cmd_generate_data(cfg, quiet_options());
    cmd_train(cfg, quiet_options());
    REQUIRE(fs::exists(fs::path(run) / "checkpoint.json"));
    REQUIRE(fs::exists(fs::path(run) / "train_report.json"));
    REQUIRE(fs::exists(fs::path(run) / "resolved_config.json"));
    const auto report = cmd_evaluate(cfg, quiet_options());
    REQUIRE(fs::exists(fs::path(run) / "metrics_report.json"));
    CHECK(report.recall.true_positives + report.recall.false_negatives > 0);

    const auto metrics_a = read_text_file(run + "/metrics_report.json");
    cmd_evaluate(cfg, quiet_options());
    CHECK(read_text_file(run + "/metrics_report.json") == metrics_a);

    // Full rerun into a second directory: identical data and reports.
    const auto run2 = (dir / "run2").string();
    auto cfg2 = cfg;
    cfg2.output_dir = run2;
    cmd_generate_data(cfg2, quiet_options());
    cmd_train(cfg2, quiet_options());
    cmd_evaluate(cfg2, quiet_options());
    CHECK(read_text_file(run2 + "/dataset.csv") == read_text_file(run + "/dataset.csv"));
    CHECK(read_text_file(run2 + "/manifest.json") == read_text_file(run + "/manifest.json"));
    CHECK(read_text_file(run2 + "/checkpoint.json") == read_text_file(run + "/checkpoint.json"));
    CHECK(read_text_file(run2 + "/metrics_report.json") == metrics_a);

    // The metrics report carries the training config hash.
    const auto parsed = json::parse(metrics_a);
    CHECK(parsed["provenance"]["config_hash"] == cfg.hash());
}

TEST_CASE("zero-epoch training checkpoints the initialization") {
    const auto dir = fresh_dir("qegm_cli_zeroepoch");
    const auto run = (dir / "run").string();
    auto j = small_config_json(run);
    j["training"]["epochs"] = 0;
    const auto cfg = ExperimentConfig::from_json(j);
    cmd_generate_data(cfg, quiet_options());
    cmd_train(cfg, quiet_options());
    const auto cp = Checkpoint::load(run + "/checkpoint.json");
    CHECK(cp.adam.step_count() == 0);
    const auto report = json::parse(read_text_file(run + "/train_report.json"));
    CHECK(report["epochs"].empty());

    // The checkpoint equals a fresh initialization with the same seed.
    const auto fresh = QegmModel::initialize(cp.model_config, cfg.training.seed);
    CHECK(cp.model.parameters() == fresh.parameters());
}

TEST_CASE("evaluate rejects a checkpoint trained on different data") {
    const auto dir = fresh_dir("qegm_cli_mismatch");
    const auto run = (dir / "run").string();
    const auto cfg = ExperimentConfig::from_json(small_config_json(run));
    cmd_generate_data(cfg, quiet_options());
    cmd_train(cfg, quiet_options());

    // Regenerate the dataset under a different seed: hash changes.
    auto reseeded = quiet_options();
    reseeded.force = true;
    reseeded.seed_override = 12;
    cmd_generate_data(cfg, reseeded);
    CHECK_THROWS_WITH_AS(cmd_evaluate(cfg, quiet_options()),
                         doctest::Contains("different dataset"), Error);
}

TEST_CASE("compare of the same model under two names shows zero deltas") {
    const auto dir = fresh_dir("qegm_cli_compare");
    const auto cfg_path = (dir / "model.json").string();
    auto j = small_config_json((dir / "unused").string());
    j["training"]["epochs"] = 2;
    write_text_file(cfg_path, j.dump(2));

    CompareConfig compare;
    compare.seeds = {1, 2};
    compare.model_configs = {{"left", cfg_path}, {"right", cfg_path}};
    compare.output_dir = (dir / "cmp").string();
    const auto result = cmd_compare(compare, quiet_options());

    REQUIRE(result.per_seed.size() == 4);  // 2 models x 2 seeds
    REQUIRE(result.medians.size() == 2);
    CHECK(result.medians[0].tail_kl == doctest::Approx(result.medians[1].tail_kl));
    CHECK(result.medians[0].rare_recall == doctest::Approx(result.medians[1].rare_recall));
    CHECK(result.medians[0].wasserstein == doctest::Approx(result.medians[1].wasserstein));

    REQUIRE(fs::exists(fs::path(compare.output_dir) / "comparison.csv"));
    REQUIRE(fs::exists(fs::path(compare.output_dir) / "comparison.json"));
    const auto csv = read_text_file(compare.output_dir + "/comparison.csv");
    // Header + 4 per-seed rows + 2 median rows.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("compare rejects mismatched dataset sections") {
    const auto dir = fresh_dir("qegm_cli_compare_bad");
    auto j1 = small_config_json((dir / "u1").string());
    auto j2 = small_config_json((dir / "u2").string());
    j2["dataset"]["n_samples"] = 500;
    const auto p1 = (dir / "m1.json").string();
    const auto p2 = (dir / "m2.json").string();
    write_text_file(p1, j1.dump(2));
    write_text_file(p2, j2.dump(2));

    CompareConfig compare;
    compare.seeds = {1};
    compare.model_configs = {{"a", p1}, {"b", p2}};
    compare.output_dir = (dir / "cmp").string();
    CHECK_THROWS_WITH_AS(cmd_compare(compare, quiet_options()),
                         doctest::Contains("dataset section"), Error);
}

#ifdef QEGM_CLI_PATH
TEST_CASE("the qegm binary maps errors onto the documented exit codes") {
    const auto dir = fresh_dir("qegm_cli_binary");
    const std::string binary = QEGM_CLI_PATH;

    const auto good_cfg = (dir / "good.json").string();
    write_text_file(good_cfg, small_config_json((dir / "run").string()).dump(2));
    const int ok = std::system((binary + " generate-data --config " + good_cfg +
                                " --quiet").c_str());
    CHECK(WEXITSTATUS(ok) == 0);

    // Refusal to overwrite: validation, exit 2.
    const int refused = std::system((binary + " generate-data --config " + good_cfg +
                                     " --quiet 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(refused) == 2);

    // Missing dataset: I/O error, exit 4.
    auto moved = small_config_json((dir / "elsewhere").string());
    const auto moved_cfg = (dir / "moved.json").string();
    write_text_file(moved_cfg, moved.dump(2));
    const int io_fail = std::system((binary + " train --config " + moved_cfg +
                                     " --quiet 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(io_fail) == 4);

    // Unknown key: validation, exit 2.
    auto bad = small_config_json((dir / "run3").string());
    bad["model"]["n_qbits"] = 4;
    const auto bad_cfg = (dir / "bad.json").string();
    write_text_file(bad_cfg, bad.dump(2));
    const int invalid = std::system((binary + " generate-data --config " + bad_cfg +
                                     " --quiet 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(invalid) == 2);
}
#endif

// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Runs each criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. `--criterion N` runs a single one.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qegm/checkpoint.hpp"
#include "qegm/commands.hpp"
#include "qegm/config.hpp"
#include "qegm/error.hpp"
#include "qegm/io.hpp"
#include "qegm/metrics.hpp"
#include "qegm/model.hpp"
#include "qegm/statevector.hpp"
#include "qegm/vqc.hpp"

using namespace qegm;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool condition, const std::string& what) {
        if (!condition) {
            pass = false;
            detail << "  FAILED: " << what << "\n";
        }
    }
    void note(const std::string& line) { detail << "  " << line << "\n"; }
};

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qegm_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

GateOp random_gate(int n_qubits, RandomnessSource& rng) {
    const int kind = static_cast<int>(rng.uniform() * 3.0);
    const int target = static_cast<int>(rng.uniform() * n_qubits);
    const double angle = (2.0 * rng.uniform() - 1.0) * 2.0 * kPi;
    if (kind == 0) {
        return GateOp::rot_y(target, angle);
    }
    if (kind == 1 || n_qubits < 2) {
        return GateOp::rot_z(target, angle);
    }
    int control = static_cast<int>(rng.uniform() * n_qubits);
    if (control == target) {
        control = (control + 1) % n_qubits;
    }
    return GateOp::cnot(control, target);
}

// --- criterion 1: simulator correctness -------------------------------------

Outcome criterion_simulator() {
    Outcome out;
    SeededPrng rng(101);

    double worst_norm = 0.0;
    for (int n = 1; n <= 6; ++n) {
        for (int rep = 0; rep < 4; ++rep) {
            Statevector state(n);
            for (int g = 0; g < 100; ++g) {
                state.apply(random_gate(n, rng));
            }
            worst_norm = std::max(worst_norm, std::abs(state.norm() - 1.0));
        }
    }
    out.note("max |norm - 1| over 100-gate sequences: " + format_double(worst_norm));
    out.require(worst_norm < 1e-10, "norm preservation within 1e-10");

    Statevector state(4);
    for (int g = 0; g < 40; ++g) {
        state.apply(random_gate(4, rng));
    }
    const auto reference = state.amplitudes();
    state.apply(GateOp::rot_y(2, 1.234));
    state.apply(GateOp::rot_y(2, -1.234));
    state.apply(GateOp::rot_z(1, 0.777));
    state.apply(GateOp::rot_z(1, -0.777));
    state.apply(GateOp::cnot(0, 3));
    state.apply(GateOp::cnot(0, 3));
    double worst_amp = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        worst_amp = std::max(worst_amp, std::abs(state.amplitudes()[i] - reference[i]));
    }
    out.note("max amplitude deviation after inverse pairs: " + format_double(worst_amp));
    out.require(worst_amp < 1e-12, "rotation inverses and CNOT involution within 1e-12");

    // Born-rule frequencies at 1e5 shots, 4-sigma binomial bounds.
    const std::size_t shots = 100000;
    {
        Statevector uniform(1);
        uniform.apply(GateOp::rot_y(0, kPi / 2.0));
        SeededPrng sample_rng(55);
        const auto draws = uniform.sample_indices(shots, sample_rng);
        std::size_t ones = 0;
        for (const auto d : draws) {
            ones += d;
        }
        const double freq = static_cast<double>(ones) / static_cast<double>(shots);
        const double bound = 4.0 * std::sqrt(0.25 / static_cast<double>(shots));
        out.note("uniform qubit: freq(1) = " + format_double(freq));
        out.require(std::abs(freq - 0.5) < bound, "uniform sampling within 4 sigma");
    }
    {
        // Biased 2-qubit product state with known probabilities.
        Statevector biased(2);
        biased.apply(GateOp::rot_y(0, 2.0 * std::acos(std::sqrt(0.7))));  // P(bit0=0)=0.7
        biased.apply(GateOp::rot_y(1, 2.0 * std::acos(std::sqrt(0.4))));  // P(bit1=0)=0.4
        SeededPrng sample_rng(56);
        const auto draws = biased.sample_indices(shots, sample_rng);
        std::array<double, 4> expected{0.7 * 0.4, 0.3 * 0.4, 0.7 * 0.6, 0.3 * 0.6};
        std::array<std::size_t, 4> counts{};
        for (const auto d : draws) {
            ++counts[d];
        }
        for (std::size_t i = 0; i < 4; ++i) {
            const double freq = static_cast<double>(counts[i]) / static_cast<double>(shots);
            const double sigma = std::sqrt(expected[i] * (1.0 - expected[i]) /
                                           static_cast<double>(shots));
            out.require(std::abs(freq - expected[i]) < 4.0 * sigma,
                        "biased state outcome " + std::to_string(i) + " within 4 sigma");
        }
    }
    return out;
}

// --- criterion 2: parameter-shift exactness ----------------------------------

Outcome criterion_parameter_shift() {
    Outcome out;

    double worst_analytic = 0.0;
    for (const double theta : {0.0, 0.3, kPi / 4.0, 1.9, -2.4}) {
        const AnsatzSpec spec{1, 1, Encoding::FeatureMap};
        QuantumParams params(1, 1);
        params.at(0, 0, 0) = theta;
        const auto grads = parameter_shift_grad({0.0}, params, spec, std::vector<double>{1.0});
        worst_analytic = std::max(worst_analytic,
                                  std::abs(grads.at(0, 0, 0) - (-std::sin(theta))));
    }
    out.note("max |shift - (-sin)| on the single-qubit grid: " + format_double(worst_analytic));
    out.require(worst_analytic < 1e-12, "single-qubit analytic derivative within 1e-12");

    SeededPrng rng(202);
    double worst = 0.0;
    for (int circuit = 0; circuit < 100; ++circuit) {
        const int n = 1 + static_cast<int>(rng.uniform() * 4.0);
        const int depth = 1 + static_cast<int>(rng.uniform() * 3.0);
        const AnsatzSpec spec{n, depth, Encoding::FeatureMap};
        auto params = QuantumParams::random_init(depth, n, rng, kPi / 2.0);
        LatentVector z(static_cast<std::size_t>(n));
        for (auto& v : z) {
            v = (2.0 * rng.uniform() - 1.0) * kPi;
        }
        std::vector<double> upstream(static_cast<std::size_t>(n));
        for (auto& u : upstream) {
            u = 2.0 * rng.uniform() - 1.0;
        }
        auto value = [&] {
            const auto z_q = quantum_forward(z, params, spec).values;
            double total = 0.0;
            for (std::size_t i = 0; i < z_q.size(); ++i) {
                total += upstream[i] * z_q[i];
            }
            return total;
        };
        const auto shift = parameter_shift_grad(z, params, spec, upstream);
        const double step = 1e-6;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double original = params.flat()[k];
            params.flat()[k] = original + step;
            const double plus = value();
            params.flat()[k] = original - step;
            const double minus = value();
            params.flat()[k] = original;
            worst = std::max(worst, std::abs(shift.flat()[k] - (plus - minus) / (2.0 * step)));
        }
    }
    out.note("max |shift - central difference| over 100 circuits: " + format_double(worst));
    out.require(worst < 1e-6, "shift rule matches finite differences within 1e-6");
    return out;
}

// --- criterion 3: end-to-end gradient check ----------------------------------

Outcome criterion_end_to_end_gradients() {
    Outcome out;
    ModelConfig cfg;
    cfg.input_dim = 2;
    cfg.latent_dim = 2;
    cfg.n_qubits = 2;
    cfg.depth = 1;
    cfg.mode = ModelMode::Quantum;
    cfg.noise_sigma = 0.1;
    cfg.encoder_hidden = {4};
    cfg.decoder_hidden = {4};
    auto model = QegmModel::initialize(cfg, 404);

    Matrix batch(4, 2);
    SeededPrng data_rng(405);
    for (auto& v : batch.data) {
        v = 2.0 * data_rng.uniform() - 1.0;
    }
    const std::vector<char> rare{1, 0, 0, 1};
    const LossConfig loss{1.0, 0.8};
    std::vector<NoiseDraw> noise;
    SeededPrng noise_master(406);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto forked = noise_master.fork(i);
        noise.push_back(draw_noise(*forked, 2, cfg.noise_sigma));
    }

    const auto analytic = compute_batch_gradients(model, batch, rare, loss, noise);
    auto loss_at = [&] {
        std::vector<GaussianHead> heads(batch.rows);
        for (std::size_t i = 0; i < batch.rows; ++i) {
            heads[i] = model.forward(batch.row(i), noise[i]);
        }
        return hybrid_loss(batch, heads, rare, loss).hybrid;
    };
    auto params = model.parameters();
    const double step = 1e-5;
    double worst_rel = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double original = params[k];
        params[k] = original + step;
        model.set_parameters(params);
        const double plus = loss_at();
        params[k] = original - step;
        model.set_parameters(params);
        const double minus = loss_at();
        params[k] = original;
        model.set_parameters(params);
        const double fd = (plus - minus) / (2.0 * step);
        const double scale = std::max({std::abs(fd), std::abs(analytic.flat[k]), 1e-3});
        worst_rel = std::max(worst_rel, std::abs(analytic.flat[k] - fd) / scale);
    }
    out.note("parameters checked: " + std::to_string(params.size()) +
             ", worst relative error: " + format_double(worst_rel));
    out.require(worst_rel <= 1e-4, "all gradients within 1e-4 relative of finite differences");
    return out;
}

// --- criterion 4: metric oracles ----------------------------------------------

Outcome criterion_metric_oracles() {
    Outcome out;

    const double two_bin = kl_from_histogram(std::vector<double>{0.75, 0.25},
                                             std::vector<double>{0.5, 0.5}, 1e-9);
    out.note("two-bin KL: " + format_double(two_bin));
    out.require(std::abs(two_bin - 0.13081) < 1e-5, "two-bin KL equals 0.13081 within 1e-5");

    SeededPrng rng(501);
    Matrix identical(1000, 1);
    for (auto& v : identical.data) {
        v = rng.gaussian();
    }
    TailRegion everything;
    everything.rarity_score = [](std::span<const double>) { return 1.0; };
    everything.threshold = 0.0;
    const double self_kl = tail_kl(identical, identical, everything, 16);
    out.require(std::abs(self_kl) < 1e-12, "tail KL of identical inputs is 0 within 1e-12");

    std::vector<double> rare_values(14, 2.0);
    rare_values.insert(rare_values.end(), 2, 1.0);
    Matrix rare(rare_values.size(), 1);
    for (std::size_t i = 0; i < rare_values.size(); ++i) {
        rare.at(i, 0) = rare_values[i];
    }
    const auto recall = rare_recall(
        rare, [](std::span<const double> x) { return std::vector<double>{x[0] - 0.5}; },
        [](std::span<const double> x) { return x[0] >= 1.0; });
    out.note("recall: TP=" + std::to_string(recall.true_positives) +
             " FN=" + std::to_string(recall.false_negatives) + " -> " +
             format_double(recall.recall));
    out.require(recall.true_positives == 14 && recall.false_negatives == 2 &&
                    recall.recall == 0.875,
                "TP=14, FN=2 gives recall 0.875 exactly");

    const double mu = -0.5;
    const double sigma = 1.7;
    Matrix targets(10000, 1);
    SeededPrng cov_rng(502);
    for (std::size_t r = 0; r < targets.rows; ++r) {
        targets.at(r, 0) = mu + sigma * cov_rng.gaussian();
    }
    auto oracle = [&](std::span<const double>) {
        GaussianHead head;
        head.mean = {mu};
        head.log_variance = {std::log(sigma * sigma)};
        return head;
    };
    const std::vector<double> alphas{0.5, 0.8, 0.9, 0.95};
    const auto curve = coverage_curve(oracle, targets, alphas);
    for (const auto& [alpha, c_hat] : curve) {
        out.note("coverage alpha=" + format_double(alpha) + ": " + format_double(c_hat));
        out.require(std::abs(c_hat - alpha) <= 0.02,
                    "|C(" + format_double(alpha) + ") - alpha| <= 0.02");
    }

    SeededPrng w_rng(503);
    std::vector<double> a(100000);
    std::vector<double> b(100000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = w_rng.gaussian();
        b[i] = 1.0 + w_rng.gaussian();
    }
    const double w1 = wasserstein_1d(a, b);
    out.note("W1(N(0,1), N(1,1)) at 1e5: " + format_double(w1));
    out.require(std::abs(w1 - 1.0) < 0.05, "W1 within 0.05 of 1");
    return out;
}

// --- criterion 5: formula reproduction -----------------------------------------

Outcome criterion_formulas() {
    Outcome out;

    out.require(AnsatzSpec::qubits_for_amplitude_dim(16) == 4, "d=16 needs n=4 qubits");

    const AnsatzSpec spec{6, 5, Encoding::FeatureMap};
    out.note("n=6, L=5 gate counts: " + std::to_string(spec.rotation_slot_count()) +
             " rotation slots, " + std::to_string(spec.entangler_count()) + " entanglers");
    out.require(spec.rotation_slot_count() == 30 && spec.entangler_count() == 25,
                "gate counts are (30, 25)");

    // Alternating +-1 series has mu=0 and population sigma=1 exactly.
    std::vector<double> series;
    for (int i = 0; i < 64; ++i) {
        series.push_back(1.0);
        series.push_back(-1.0);
    }
    const auto labeling = label_rare_kappa_sigma(series, 2.5);
    out.note("tau for mu=0, sigma=1, kappa=2.5: " + format_double(labeling.meta.cutoff));
    out.require(labeling.meta.cutoff == 2.5, "tau = mu + kappa*sigma = 2.5 exactly");
    out.require(labeling.meta.is_rare(-3.0), "-3.0 is labeled rare");
    out.require(!labeling.meta.is_rare(-2.0), "-2.0 is not labeled rare");

    std::vector<char> mask(1000, 0);
    for (std::size_t i = 0; i < 50; ++i) {
        mask[i * 20] = 1;
    }
    SeededPrng rng(601);
    const auto split = stratified_split(mask, {0.70, 0.15, 0.15}, rng);
    out.note("split sizes at N=1000: " + std::to_string(split.train.size()) + "/" +
             std::to_string(split.val.size()) + "/" + std::to_string(split.test.size()));
    out.require(split.train.size() == 700 && split.val.size() == 150 && split.test.size() == 150,
                "split sizes are exactly 700/150/150");
    return out;
}

// --- criterion 6: desk-scale benchmark -----------------------------------------

Outcome criterion_benchmark() {
    Outcome out;
    const auto dir = scratch_dir("benchmark");

    const std::string config_dir = QEGM_CONFIG_DIR;
    auto compare_cfg = CompareConfig::from_json_file(config_dir + "/benchmark_compare.json");

    CommandOptions options;
    options.quiet = true;
    options.out_override = (dir / "cmp").string();
    const auto result = cmd_compare(compare_cfg, options);

    double qegm_kl = 0.0, base_kl = 0.0, qegm_recall = 0.0, base_recall = 0.0;
    for (const auto& row : result.medians) {
        out.note("median " + row.model + ": tail_kl=" + format_double(row.tail_kl) +
                 " rare_recall=" + format_double(row.rare_recall) + " coverage_err=" +
                 format_double(row.coverage_error) + " w1=" + format_double(row.wasserstein));
        if (row.model == "qegm") {
            qegm_kl = row.tail_kl;
            qegm_recall = row.rare_recall;
        } else if (row.model == "baseline") {
            base_kl = row.tail_kl;
            base_recall = row.rare_recall;
        }
    }
    for (const auto& row : result.per_seed) {
        out.note(row.model + " seed " + std::to_string(row.seed) + ": tail_kl=" +
                 format_double(row.tail_kl) + " rare_recall=" + format_double(row.rare_recall));
    }
    out.require(qegm_kl <= base_kl, "median QEGM tail KL <= median baseline tail KL");
    out.require(qegm_recall >= base_recall,
                "median QEGM rare recall >= median baseline rare recall");
    fs::remove_all(dir);
    return out;
}

// --- criterion 7: noise-injection variance law ----------------------------------

Outcome criterion_variance_law() {
    Outcome out;
    SeededPrng rng(707);
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < 100000; ++i) {
        const auto draw = draw_noise(rng, 1, 1.0);
        for (const auto e : draw.epsilon) {
            sum += e;
            sum_sq += e * e;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double variance = sum_sq / static_cast<double>(count) - mean * mean;
    out.note("pooled variance over 1e5 draws at sigma=1: " + format_double(variance));
    out.require(std::abs(variance - 0.5) <= 0.02, "pooled variance equals 0.5 within 0.02");
    return out;
}

// --- criterion 8: byte-identical reproducibility --------------------------------

Outcome criterion_reproducibility() {
    Outcome out;
    const auto dir = scratch_dir("repro");

    json j{
        {"dataset",
         {{"kind", "mixture"},
          {"mixture",
           {{"weights", {0.15, 0.70, 0.15}}, {"means", {-3.0, 0.0, 3.0}},
            {"variances", {1.0, 0.5, 1.5}}}},
          {"n_samples", 400},
          {"labeling", {{"rule", "quantile"}, {"level", 0.1}}}}},
        {"model",
         {{"mode", "quantum"}, {"latent_dim", 2}, {"n_qubits", 2}, {"depth", 1},
          {"noise_sigma", 0.1}, {"encoder_hidden", {8}}, {"decoder_hidden", {8}}}},
        {"loss", {{"lambda_rec", 1.0}, {"lambda_tail", 1.0}}},
        {"training",
         {{"epochs", 2}, {"batch_size", 32}, {"learning_rate", 0.005}, {"patience", 10},
          {"seed", 21}}},
        {"metrics",
         {{"bins", 8}, {"alphas", {0.5, 0.9}}, {"tail_fraction", 0.1},
          {"generation_count", 200}}},
        {"output_dir", ""},
    };

    CommandOptions options;
    options.quiet = true;
    auto run_pipeline = [&](const std::string& run_dir) {
        auto cfg_json = j;
        cfg_json["output_dir"] = run_dir;
        const auto cfg = ExperimentConfig::from_json(cfg_json);
        cmd_generate_data(cfg, options);
        cmd_train(cfg, options);
        cmd_evaluate(cfg, options);
    };
    const auto run_a = (dir / "a").string();
    const auto run_b = (dir / "b").string();
    run_pipeline(run_a);
    run_pipeline(run_b);

    for (const std::string file :
         {"dataset.csv", "manifest.json", "checkpoint.json", "metrics_report.json"}) {
        const bool identical =
            read_text_file(run_a + "/" + file) == read_text_file(run_b + "/" + file);
        out.require(identical, file + " is byte-identical across reruns");
    }
    // Note: the two runs used the same config (including output_dir-independent
    // content), so their config hashes also match.
    const auto report_a = json::parse(read_text_file(run_a + "/metrics_report.json"));
    out.note("metrics config hash: " + report_a["provenance"]["config_hash"].get<std::string>());
    fs::remove_all(dir);
    return out;
}

struct Criterion {
    int number;
    std::string name;
    double time_limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
            ++i;
        }
    }

    const std::vector<Criterion> criteria{
        {1, "simulator correctness", 10.0, criterion_simulator},
        {2, "parameter-shift exactness", 30.0, criterion_parameter_shift},
        {3, "end-to-end gradient check", 60.0, criterion_end_to_end_gradients},
        {4, "metric oracles", 60.0, criterion_metric_oracles},
        {5, "formula reproduction", 60.0, criterion_formulas},
        {6, "desk-scale benchmark (directional)", 600.0, criterion_benchmark},
        {7, "noise-injection variance law", 60.0, criterion_variance_law},
        {8, "byte-identical reproducibility", 120.0, criterion_reproducibility},
    };

    bool all_pass = true;
    for (const auto& criterion : criteria) {
        if (only != 0 && criterion.number != only) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail << "  EXCEPTION: " << e.what() << "\n";
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > criterion.time_limit_seconds) {
            outcome.pass = false;
            outcome.detail << "  FAILED: runtime " << elapsed << "s exceeds limit "
                           << criterion.time_limit_seconds << "s\n";
        }
        all_pass &= outcome.pass;
        std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion.number
                  << ": " << criterion.name << " (" << elapsed << "s)\n"
                  << outcome.detail.str();
    }
    std::cout << (all_pass ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << "\n";
    return all_pass ? 0 : 1;
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "qegm/error.hpp"
#include "qegm/random.hpp"

using namespace qegm;

namespace {

/// Source with a scripted uniform stream, for forcing r values.
class StubSource final : public RandomnessSource {
public:
    explicit StubSource(std::vector<double> values) : values_(std::move(values)) {}
    double uniform() override {
        const double v = values_[next_ % values_.size()];
        ++next_;
        return v;
    }
    std::string describe() const override { return "Stub"; }

private:
    std::vector<double> values_;
    std::size_t next_ = 0;
};

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("seeded streams are reproducible") {
    SeededPrng a(42);
    SeededPrng b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.uniform() == b.uniform());
    }
    SeededPrng c(43);
    bool any_different = false;
    SeededPrng a2(42);
    for (int i = 0; i < 10; ++i) {
        any_different |= a2.uniform() != c.uniform();
    }
    CHECK(any_different);
}

TEST_CASE("uniform draws live in [0, 1) and average to one half") {
    SeededPrng rng(7);
    double total = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        total += u;
    }
    const double mean = total / n;
    CHECK(mean > 0.496);
    CHECK(mean < 0.504);
}

TEST_CASE("simulated QRNG produces a valid, reproducible stream") {
    SimulatedQrng a(11);
    SimulatedQrng b(11);
    for (int i = 0; i < 50; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    double total = 0.0;
    SimulatedQrng c(21);
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        total += c.uniform();
    }
    // 4-sigma band for the mean of n uniforms.
    CHECK(std::abs(total / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("entropy file consumes 8 little-endian bytes per uniform") {
    const auto path = temp_file("qegm_entropy_test.bin");
    {
        std::ofstream out(path, std::ios::binary);
        const unsigned char low[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        out.write(reinterpret_cast<const char*>(low), 8);
        const unsigned char high[8] = {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
        out.write(reinterpret_cast<const char*>(high), 8);
        // One byte short of a third word.
        const unsigned char partial[7] = {1, 2, 3, 4, 5, 6, 7};
        out.write(reinterpret_cast<const char*>(partial), 7);
    }
    EntropyFile src(path);
    CHECK(src.uniform() == 0.0);
    // Top 53 bits of all-ones: (2^53 - 1) / 2^53.
    CHECK(src.uniform() == doctest::Approx((9007199254740992.0 - 1.0) / 9007199254740992.0)
                               .epsilon(1e-18));
    CHECK_THROWS_WITH_AS(src.uniform(), doctest::Contains("exhausted"), Error);
    std::remove(path.c_str());
}

TEST_CASE("entropy file with 8 bytes yields exactly one double") {
    const auto path = temp_file("qegm_entropy_tiny.bin");
    {
        std::ofstream out(path, std::ios::binary);
        const unsigned char bytes[8] = {9, 9, 9, 9, 9, 9, 9, 9};
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    EntropyFile src(path);
    CHECK_NOTHROW(src.uniform());
    CHECK_THROWS_AS(src.uniform(), Error);
    CHECK_THROWS_AS(EntropyFile("/nonexistent/entropy.bin"), Error);
    std::remove(path.c_str());
}

TEST_CASE("draw_noise honors degenerate sigma and r") {
    SeededPrng rng(3);
    const auto zero_sigma = draw_noise(rng, 5, 0.0);
    for (const auto e : zero_sigma.epsilon) {
        CHECK(e == 0.0);
    }

    StubSource zero_r({0.0, 0.3, 0.7, 0.1});  // first value is r
    const auto modulated = draw_noise(zero_r, 3, 2.0);
    CHECK(modulated.r_value == 0.0);
    for (const auto e : modulated.epsilon) {
        CHECK(e == 0.0);
    }

    CHECK_THROWS_AS(draw_noise(rng, 2, -0.5), Error);
}

TEST_CASE("pooled noise variance follows the law of total variance") {
    SeededPrng rng(2718);
    const double sigma = 1.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < 25000; ++i) {
        const auto draw = draw_noise(rng, 4, sigma);
        for (const auto e : draw.epsilon) {
            sum += e;
            sum_sq += e * e;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double variance = sum_sq / static_cast<double>(count) - mean * mean;
    // Var = sigma^2 * E[r] = 1/2 for uniform r.
    CHECK(std::abs(variance - 0.5) < 0.02);
}

TEST_CASE("gaussian draws have the right first two moments") {
    SeededPrng rng(1);
    double sum = 0.0;
    double sum_sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sum_sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.03);
}

TEST_CASE("forked streams are deterministic and independent") {
    SeededPrng parent(500);
    const auto fork_a = parent.fork(7);
    const auto fork_b = parent.fork(7);
    const auto fork_c = parent.fork(8);
    REQUIRE(fork_a);
    REQUIRE(fork_b);
    REQUIRE(fork_c);
    bool all_equal = true;
    bool c_differs = false;
    for (int i = 0; i < 100; ++i) {
        const double a = fork_a->uniform();
        const double b = fork_b->uniform();
        const double c = fork_c->uniform();
        all_equal &= a == b;
        c_differs |= a != c;
    }
    CHECK(all_equal);
    CHECK(c_differs);

    const auto path = temp_file("qegm_entropy_fork.bin");
    {
        std::ofstream out(path, std::ios::binary);
        const char bytes[16] = {};
        out.write(bytes, 16);
    }
    EntropyFile file_src(path);
    CHECK(file_src.fork(1) == nullptr);
    std::remove(path.c_str());
}

TEST_CASE("seed derivation is stable and spreads streams") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

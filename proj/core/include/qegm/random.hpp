// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace qegm {

/// splitmix64 finalizer; the basis for all seed derivation in the project.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent child seed from a master seed and a stream id.
/// Pure function: the same (master, stream) pair always gives the same seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Additive latent noise: epsilon ~ N(0, sigma^2 * r) with r drawn once per call.
struct NoiseDraw {
    std::vector<double> epsilon;
    double r_value = 0.0;
    double sigma = 0.0;
};

/// Uniform-bit source. Three kinds exist:
///   SeededPrng   - mt19937_64 stream, fully reproducible from its seed.
///   SimulatedQrng - bits obtained by Born-rule sampling of R_y(pi/2)|0> states
///                   on the statevector simulator. The sampling itself is
///                   driven by a PRNG, so this source carries no physical
///                   entropy guarantee; it exists to exercise the quantum
///                   sampling path end to end.
///   EntropyFile  - raw bytes from disk (e.g. hardware QRNG dumps), consumed
///                  8 bytes per uniform, little-endian, top 53 bits as mantissa.
///                  Errors out when exhausted; never falls back to a PRNG.
class RandomnessSource {
public:
    virtual ~RandomnessSource() = default;

    /// Next value in [0, 1), built from 53 random mantissa bits.
    virtual double uniform() = 0;

    /// Standard normal draw via Box-Muller over uniform(). The spare value of
    /// each pair is cached, so draws come in deterministic order.
    double gaussian();

    /// Independent child stream derived from this source's seed, or nullptr
    /// for sources that cannot be split (EntropyFile).
    virtual std::unique_ptr<RandomnessSource> fork(std::uint64_t stream) const { (void)stream; return nullptr; }

    virtual std::string describe() const = 0;

private:
    bool has_spare_ = false;
    double spare_ = 0.0;
};

class SeededPrng final : public RandomnessSource {
public:
    explicit SeededPrng(std::uint64_t seed);

    double uniform() override;
    std::unique_ptr<RandomnessSource> fork(std::uint64_t stream) const override;
    std::string describe() const override;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

class SimulatedQrng final : public RandomnessSource {
public:
    explicit SimulatedQrng(std::uint64_t seed);
    ~SimulatedQrng() override;

    double uniform() override;
    std::unique_ptr<RandomnessSource> fork(std::uint64_t stream) const override;
    std::string describe() const override;

private:
    std::uint64_t seed_;
    std::unique_ptr<SeededPrng> backing_;
};

class EntropyFile final : public RandomnessSource {
public:
    explicit EntropyFile(const std::string& path);

    double uniform() override;
    std::string describe() const override;

    std::size_t bytes_remaining() const { return bytes_.size() - position_; }

private:
    std::string path_;
    std::vector<unsigned char> bytes_;
    std::size_t position_ = 0;
};

/// One r per call (per-sample modulation), then `dim` Gaussians with
/// standard deviation sigma * sqrt(r).
NoiseDraw draw_noise(RandomnessSource& src, std::size_t dim, double sigma);

}  // namespace qegm

// SPDX-License-Identifier: Apache-2.0
#include "qegm/random.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "qegm/error.hpp"
#include "qegm/statevector.hpp"

namespace qegm {

namespace {
constexpr double kUniformScale = 1.0 / 9007199254740992.0;  // 2^-53

double mantissa_to_unit(std::uint64_t bits53) {
    return static_cast<double>(bits53) * kUniformScale;
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

double RandomnessSource::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    // 1 - u1 lies in (0, 1], so the log is finite.
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

SeededPrng::SeededPrng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double SeededPrng::uniform() {
    return mantissa_to_unit(engine_() >> 11);
}

std::unique_ptr<RandomnessSource> SeededPrng::fork(std::uint64_t stream) const {
    return std::make_unique<SeededPrng>(derive_seed(seed_, stream));
}

std::string SeededPrng::describe() const {
    return "SeededPrng(seed=" + std::to_string(seed_) + ")";
}

SimulatedQrng::SimulatedQrng(std::uint64_t seed)
    : seed_(seed), backing_(std::make_unique<SeededPrng>(derive_seed(seed, 0x5152ULL))) {}

SimulatedQrng::~SimulatedQrng() = default;

double SimulatedQrng::uniform() {
    // Each mantissa bit is one Born-rule measurement of R_y(pi/2)|0>,
    // a 50/50 superposition. The measurement draw itself comes from the
    // backing PRNG, which is what keeps this source honest-but-simulated.
    Statevector state(1);
    state.apply(GateOp::rot_y(0, std::numbers::pi / 2.0));
    const auto shots = state.sample_indices(53, *backing_);
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < shots.size(); ++k) {
        bits |= static_cast<std::uint64_t>(shots[k] & 1U) << k;
    }
    return mantissa_to_unit(bits);
}

std::unique_ptr<RandomnessSource> SimulatedQrng::fork(std::uint64_t stream) const {
    return std::make_unique<SimulatedQrng>(derive_seed(seed_, stream));
}

std::string SimulatedQrng::describe() const {
    return "SimulatedQrng(seed=" + std::to_string(seed_) + ")";
}

EntropyFile::EntropyFile(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error::io("cannot open entropy file: " + path);
    }
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

double EntropyFile::uniform() {
    if (position_ + 8 > bytes_.size()) {
        throw Error::validation("entropy file exhausted: " + path_ + " has " +
                                std::to_string(bytes_.size() - position_) +
                                " bytes left, 8 needed per uniform");
    }
    std::uint64_t word = 0;
    for (int k = 0; k < 8; ++k) {
        word |= static_cast<std::uint64_t>(bytes_[position_ + k]) << (8 * k);
    }
    position_ += 8;
    return mantissa_to_unit(word >> 11);
}

std::string EntropyFile::describe() const {
    return "EntropyFile(path=" + path_ + ")";
}

NoiseDraw draw_noise(RandomnessSource& src, std::size_t dim, double sigma) {
    if (!(sigma >= 0.0)) {
        throw Error::validation("draw_noise: sigma must be >= 0, got " + std::to_string(sigma));
    }
    NoiseDraw draw;
    draw.sigma = sigma;
    draw.r_value = src.uniform();
    draw.epsilon.resize(dim);
    const double scale = sigma * std::sqrt(draw.r_value);
    for (std::size_t i = 0; i < dim; ++i) {
        draw.epsilon[i] = scale * src.gaussian();
    }
    return draw;
}

}  // namespace qegm

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace pmx {

/// Deterministic random stream: xoshiro256++ core with explicit distribution
/// transforms. All draws are reproducible bit-for-bit given (seed, stream),
/// independent of platform or standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t x = seed;
        // fold the stream id in through two splitmix rounds so that nearby
        // (seed, stream) pairs land on unrelated trajectories
        x = splitmix(x) ^ (0x9e3779b97f4a7c15ull * (stream + 1));
        for (auto& w : state_) w = splitmix(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform on (0, 1]; safe as input to logs and inverse CDFs.
    double uniform_pos() { return 1.0 - uniform(); }

    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire-style rejection-free-ish bounded draw; n is tiny here so the
        // modulo bias of a plain % would already be negligible, but be exact.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Pair of independent standard normals (Marsaglia polar method).
    std::pair<double, double> normal2() {
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                const double f = std::sqrt(-2.0 * std::log(s) / s);
                return {u * f, v * f};
            }
        }
    }

    double normal() { return normal2().first; }

    /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    double gamma(double shape, double rate) { return gamma(shape) / rate; }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
        std::uint64_t total = 0;
        // halve until the product method is comfortable
        while (mean > 32.0) {
            mean *= 0.5;
            total += poisson(mean);
        }
        const double limit = std::exp(-mean);
        double prod = uniform_pos();
        std::uint64_t k = 0;
        while (prod > limit) {
            prod *= uniform_pos();
            ++k;
        }
        return total + k;
    }

    void save(std::ostream& os) const {
        os << state_[0] << ' ' << state_[1] << ' ' << state_[2] << ' ' << state_[3];
    }

    void load(std::istream& is) {
        for (auto& w : state_)
            if (!(is >> w)) throw std::runtime_error("Rng::load: truncated state");
    }

    bool operator==(const Rng& other) const { return state_ == other.state_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace pmx

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

// Deterministic random generation. Everything downstream (cohort synthesis,
// fold splits, LIME perturbations, cluster seeding) derives per-task streams
// from a master seed plus a tag, so results are reproducible bit-for-bit
// regardless of execution order and do not depend on libstdc++'s
// implementation-defined distribution algorithms.

namespace lms::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derived seed for handing a whole sub-stream to another component.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
    std::uint64_t mix = seed;
    mix ^= hash_tag(tag) + 0x9e3779b97f4a7c15ULL + (mix << 6) + (mix >> 2);
    mix ^= (index + 0x517cc1b727220a95ULL) + (mix << 6) + (mix >> 2);
    return splitmix64(mix);
}

// xoshiro256++ seeded through splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    // Independent stream for (seed, tag, index); used to give every student,
    // fold, tree, ... its own generator.
    Rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
        std::uint64_t mix = seed;
        mix ^= hash_tag(tag) + 0x9e3779b97f4a7c15ULL + (mix << 6) + (mix >> 2);
        mix ^= (index + 0x517cc1b727220a95ULL) + (mix << 6) + (mix >> 2);
        reseed(mix);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive bounds.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Box-Muller; the second value of each pair is discarded to keep stream
    // consumption independent of call history.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

    double exponential(double rate) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    // Marsaglia-Tsang.
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            const double u = std::max(uniform(), 1e-300);
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
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
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (std::log(std::max(u, 1e-300)) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v * scale;
        }
    }

    std::uint64_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda > 600.0) {
            // Normal approximation; only reached by extreme negative-binomial
            // tail draws.
            const double v = lambda + std::sqrt(lambda) * normal();
            return v <= 0.0 ? 0 : static_cast<std::uint64_t>(v + 0.5);
        }
        const double limit = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // Gamma-Poisson mixture with mean `mean` and dispersion `size`
    // (variance = mean + mean^2/size).
    std::uint64_t negative_binomial(double mean, double size) {
        if (mean <= 0.0) return 0;
        const double lambda = gamma(size, mean / size);
        return poisson(lambda);
    }

    // Index draw from unnormalized non-negative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k && i < n; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n - i) - 1));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& s : s_) s = splitmix64(sm);
    }

    std::uint64_t s_[4];
};

}  // namespace lms::rng

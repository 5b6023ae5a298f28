#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gsema/error.hpp"

/**
 * @file rng.hpp
 * @brief Deterministic random number plumbing.
 *
 * Every stochastic routine derives its own engine from (master seed, domain
 * tag, index) so that results never depend on evaluation order, thread count,
 * or how many draws a sibling consumed. The generator and all sampling
 * helpers are hand-pinned here rather than taken from <random> distributions,
 * whose sequences the standard leaves implementation-defined.
 */

namespace gsema::rng {

// SplitMix64 finalizer; also used to mix seed components together.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum : std::uint64_t {
    domain_study = 0x5354554459ULL,       // per-study expression draws
    domain_sets = 0x5345545353ULL,        // gene set construction
    domain_permutation = 0x5045524dULL,   // label permutations
};

// Substream seed for (master, domain, index); collision-resistant mixing.
inline std::uint64_t substream(std::uint64_t master, std::uint64_t domain, std::uint64_t index) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ domain;
    std::uint64_t b = splitmix64(s);
    s = b ^ index;
    return splitmix64(s);
}

// xoshiro256** by Blackman and Vigna, seeded through SplitMix64.
class Engine {
public:
    using result_type = std::uint64_t;

    explicit Engine(std::uint64_t seed = 0) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

// Uniform integer in [0, n) by rejection; unbiased and generator-stable.
inline std::uint64_t bounded(Engine& eng, std::uint64_t n) {
    if (n == 0) fail(errc::domain_error, "bounded draw with n == 0");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = eng();
        if (r >= threshold) return r % n;
    }
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

// Marsaglia polar method; the spare is dropped so each call maps to a fixed
// number of engine advances regardless of caller interleaving.
inline double normal(Engine& eng, double mean, double sd) {
    for (;;) {
        const double u = 2.0 * uniform01(eng) - 1.0;
        const double v = 2.0 * uniform01(eng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return mean + sd * u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

// Marsaglia-Tsang gamma(shape, scale = 1); shape > 0.
inline double gamma_shape(Engine& eng, double shape) {
    if (!(shape > 0.0)) fail(errc::domain_error, "gamma draw requires shape > 0");
    if (shape < 1.0) {
        // Boost to shape + 1 and scale back down.
        const double u = uniform01(eng);
        return gamma_shape(eng, shape + 1.0) * std::pow(u <= 0.0 ? 0x1.0p-53 : u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal(eng, 0.0, 1.0);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = uniform01(eng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline double gamma(Engine& eng, double shape, double scale) {
    return gamma_shape(eng, shape) * scale;
}

namespace detail {

// Knuth product method; exp(-lambda) must stay representable, so callers
// keep lambda <= 400.
inline std::uint64_t poisson_small(Engine& eng, double lambda) {
    const double limit = std::exp(-lambda);
    std::uint64_t count = 0;
    double prod = uniform01(eng);
    while (prod > limit) {
        ++count;
        prod *= uniform01(eng);
    }
    return count;
}

} // namespace detail

// Poisson(a + b) = Poisson(a) + Poisson(b), so large rates are drawn as a
// fixed sequence of bounded chunks. Exact in distribution at every rate.
inline std::uint64_t poisson(Engine& eng, double lambda) {
    if (!(lambda >= 0.0)) fail(errc::domain_error, "poisson draw requires lambda >= 0");
    std::uint64_t count = 0;
    while (lambda > 400.0) {
        count += detail::poisson_small(eng, 400.0);
        lambda -= 400.0;
    }
    return count + detail::poisson_small(eng, lambda);
}

// In-place Fisher-Yates shuffle.
template <typename T>
inline void shuffle(std::vector<T>& values, Engine& eng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded(eng, i));
        std::swap(values[i - 1], values[j]);
    }
}

// k distinct indices from [0, n), in shuffled order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Engine& eng) {
    if (k > n) fail(errc::domain_error, "cannot sample more indices than available");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(eng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

} // namespace gsema::rng

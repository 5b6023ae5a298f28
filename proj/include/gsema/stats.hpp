#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gsema/error.hpp"

/**
 * @file stats.hpp
 * @brief Scalar special functions and small-vector statistics used throughout
 * the pipeline. Everything here is deterministic and allocation-light.
 */

namespace gsema::stats {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;

inline double mean(std::span<const double> xs) {
    if (xs.empty()) fail(errc::domain_error, "mean of empty range");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Unbiased (N-1) sample variance, two-pass for stability.
inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) fail(errc::domain_error, "variance needs at least two values");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) {
        const double r = x - m;
        ss += r * r;
    }
    return ss / static_cast<double>(xs.size() - 1);
}

inline double sample_sd(std::span<const double> xs) {
    return std::sqrt(sample_variance(xs));
}

// Median by copy; even lengths average the two central order statistics.
inline double median(std::vector<double> xs) {
    if (xs.empty()) fail(errc::domain_error, "median of empty range");
    const std::size_t n = xs.size();
    const std::size_t h = n / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(h), xs.end());
    double hi = xs[h];
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(h));
    return 0.5 * (lo + hi);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * inv_sqrt2);
}

// Two-sided normal p-value, computed through erfc so extreme |z| keeps
// full relative precision instead of cancelling against 1.
inline double two_sided_p(double z) {
    return std::erfc(std::abs(z) * inv_sqrt2);
}

namespace detail {

// Asymptotic tails below are accurate to ~1e-14 relative once the argument
// has been shifted past the cutoff by the recurrence.
inline constexpr double polygamma_shift = 12.0;

} // namespace detail

inline double digamma(double x) {
    if (!(x > 0.0)) fail(errc::domain_error, "digamma requires x > 0");
    double acc = 0.0;
    while (x < detail::polygamma_shift) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    return acc + series;
}

inline double trigamma(double x) {
    if (!(x > 0.0)) fail(errc::domain_error, "trigamma requires x > 0");
    double acc = 0.0;
    while (x < detail::polygamma_shift) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = inv * (1.0 + 0.5 * inv);
    series += inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    return acc + series;
}

// Second derivative of digamma; only consumed by the Newton step in
// trigamma_inverse, so ~1e-12 relative accuracy is ample.
inline double tetragamma(double x) {
    if (!(x > 0.0)) fail(errc::domain_error, "tetragamma requires x > 0");
    double acc = 0.0;
    while (x < detail::polygamma_shift) {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = -inv2 * (1.0 + inv);
    series -= inv2 * inv2 * (0.5 - inv2 * (1.0 / 6.0 - inv2 * (1.0 / 6.0 - inv2 * (3.0 / 10.0 - inv2 * (5.0 / 6.0)))));
    return acc + series;
}

/**
 * Solve trigamma(y) = x for y > 0 by the monotone Newton iteration on the
 * reciprocal scale. Converges when the step drops below 1e-8 relative.
 */
inline double trigamma_inverse(double x) {
    if (!(x > 0.0)) fail(errc::domain_error, "trigamma_inverse requires x > 0");
    if (x > 1e7) return 1.0 / std::sqrt(x);
    if (x < 1e-6) return 1.0 / x;
    double y = 0.5 + 1.0 / x;
    for (int iter = 0; iter < 100; ++iter) {
        const double tri = trigamma(y);
        const double dif = tri * (1.0 - tri / x) / tetragamma(y);
        y += dif;
        if (std::abs(dif) < 1e-8 * y) break;
    }
    return y;
}

namespace detail {

inline constexpr int igamma_max_iter = 500;
inline constexpr double igamma_eps = 1e-15;

// Lower regularized incomplete gamma by power series; valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int i = 0; i < igamma_max_iter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * igamma_eps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by Lentz continued fraction; x >= a + 1.
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= igamma_max_iter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < igamma_eps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) fail(errc::domain_error, "gamma_p requires a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) fail(errc::domain_error, "gamma_q requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

// P(X <= k) for X ~ Poisson(lambda), via Q(k + 1, lambda).
inline double poisson_cdf(double k, double lambda) {
    if (k < 0.0) return 0.0;
    const double kk = std::floor(k);
    if (lambda == 0.0) return 1.0;
    return gamma_q(kk + 1.0, lambda);
}

/**
 * Stable order of indices 0..n-1 by value. Ties keep ascending original
 * index, which pins every rank-based routine to one deterministic layout.
 */
inline std::vector<std::size_t> order(std::span<const double> values, bool decreasing) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (decreasing) {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    } else {
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    }
    return idx;
}

// ranks[i] = 1-based position of element i in the given order.
inline std::vector<double> ranks_from_order(std::span<const std::size_t> ord) {
    std::vector<double> ranks(ord.size());
    for (std::size_t pos = 0; pos < ord.size(); ++pos) {
        ranks[ord[pos]] = static_cast<double>(pos + 1);
    }
    return ranks;
}

// Kolmogorov-Smirnov distance between a sample and the uniform(0,1) CDF.
inline double ks_uniform_distance(std::vector<double> xs) {
    if (xs.empty()) fail(errc::domain_error, "ks distance of empty sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lo = xs[i] - static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n - xs[i];
        d = std::max(d, std::max(lo, hi));
    }
    return d;
}

// Linear-interpolation quantile of a sorted copy (R type 7).
inline double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) fail(errc::domain_error, "quantile of empty range");
    p = std::clamp(p, 0.0, 1.0);
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

} // namespace gsema::stats

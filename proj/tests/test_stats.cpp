#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <set>
#include <vector>

#include "gsema/error.hpp"
#include "gsema/parallel.hpp"
#include "gsema/rng.hpp"
#include "gsema/stats.hpp"
#include "gsema/tsv.hpp"

using namespace gsema;
using Catch::Approx;

TEST_CASE("mean, variance, median basics") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    REQUIRE(stats::mean(v) == Approx(2.5).epsilon(1e-15));
    REQUIRE(stats::sample_variance(v) == Approx(5.0 / 3.0).epsilon(1e-15));
    REQUIRE(stats::median(v) == Approx(2.5).epsilon(1e-15));
    REQUIRE(stats::median({5.0, 1.0, 9.0}) == 5.0);
    REQUIRE(stats::median({2.0}) == 2.0);
    REQUIRE_THROWS_AS(stats::mean(std::vector<double>{}), Error);
    REQUIRE_THROWS_AS(stats::sample_variance(std::vector<double>{1.0}), Error);
}

// Reference values computed with 30-digit arbitrary precision arithmetic.
TEST_CASE("polygamma functions against high-precision references") {
    REQUIRE(stats::digamma(1.0) == Approx(-0.57721566490153286).epsilon(1e-14));
    REQUIRE(stats::digamma(0.5) == Approx(-1.9635100260214235).epsilon(1e-14));
    REQUIRE(stats::digamma(4.25) == Approx(1.3246832187604867).epsilon(1e-14));
    REQUIRE(stats::trigamma(1.0) == Approx(1.6449340668482264).epsilon(1e-14));
    REQUIRE(stats::trigamma(0.5) == Approx(4.9348022005446793).epsilon(1e-14));
    REQUIRE(stats::trigamma(4.25) == Approx(0.26512373409656212).epsilon(1e-14));
    REQUIRE(stats::tetragamma(1.0) == Approx(-2.4041138063191886).epsilon(1e-13));
    REQUIRE(stats::tetragamma(3.5) == Approx(-0.1082040516417274).epsilon(1e-13));
    REQUIRE_THROWS_AS(stats::digamma(0.0), Error);
    REQUIRE_THROWS_AS(stats::trigamma(-1.0), Error);
}

TEST_CASE("trigamma_inverse round-trips") {
    for (double x : {1e-5, 0.01, 0.3, 1.0, 2.5, 17.0, 1e3, 1e6}) {
        const double y = stats::trigamma_inverse(x);
        REQUIRE(stats::trigamma(y) == Approx(x).epsilon(1e-8));
    }
    REQUIRE(stats::trigamma_inverse(1e8) == Approx(1.0 / std::sqrt(1e8)).epsilon(1e-12));
    REQUIRE(stats::trigamma_inverse(1e-7) == Approx(1e7).epsilon(1e-12));
    REQUIRE_THROWS_AS(stats::trigamma_inverse(0.0), Error);
}

TEST_CASE("incomplete gamma and poisson cdf") {
    REQUIRE(stats::gamma_p(2.5, 1.2) == Approx(0.20852587940567533).epsilon(1e-13));
    REQUIRE(stats::gamma_q(2.5, 1.2) == Approx(0.79147412059432467).epsilon(1e-13));
    REQUIRE(stats::gamma_p(7.0, 7.0) == Approx(0.55028894415130115).epsilon(1e-13));
    REQUIRE(stats::gamma_q(0.5, 3.0) == Approx(0.01430587843542964).epsilon(1e-12));
    REQUIRE(stats::gamma_p(3.0, 0.0) == 0.0);
    REQUIRE(stats::gamma_q(3.0, 0.0) == 1.0);

    REQUIRE(stats::poisson_cdf(3.0, 2.5) == Approx(0.75757613313306596).epsilon(1e-13));
    REQUIRE(stats::poisson_cdf(0.0, 0.5) == Approx(0.60653065971263342).epsilon(1e-13));
    REQUIRE(stats::poisson_cdf(40.0, 55.5) == Approx(0.018190698156849848).epsilon(1e-12));
    REQUIRE(stats::poisson_cdf(700.0, 650.5) == Approx(0.97396290058296404).epsilon(1e-12));
    REQUIRE(stats::poisson_cdf(-1.0, 2.0) == 0.0);
    REQUIRE(stats::poisson_cdf(5.0, 0.0) == 1.0);
    REQUIRE_THROWS_AS(stats::gamma_p(-1.0, 2.0), Error);
}

TEST_CASE("normal cdf and two-sided p-values keep tail precision") {
    REQUIRE(stats::normal_cdf(0.0) == 0.5);
    REQUIRE(stats::normal_cdf(1.0) == Approx(0.84134474606854295).epsilon(1e-14));
    REQUIRE(stats::normal_cdf(-8.0) == Approx(6.2209605742717841e-16).epsilon(1e-13));
    REQUIRE(stats::two_sided_p(1.0) == Approx(0.3173105078629141).epsilon(1e-14));
    REQUIRE(stats::two_sided_p(-1.0) == stats::two_sided_p(1.0));
    REQUIRE(stats::two_sided_p(8.0) == Approx(1.2441921148543568e-15).epsilon(1e-13));
    REQUIRE(stats::two_sided_p(1.959963984540054) == Approx(0.05).epsilon(1e-14));
    REQUIRE(stats::two_sided_p(0.0) == 1.0);
}

TEST_CASE("order is stable and tie-breaks by ascending index") {
    std::vector<double> v{2.0, 5.0, 2.0, 1.0, 5.0};
    const auto desc = stats::order(v, true);
    REQUIRE(desc == std::vector<std::size_t>{1, 4, 0, 2, 3});
    const auto asc = stats::order(v, false);
    REQUIRE(asc == std::vector<std::size_t>{3, 0, 2, 1, 4});
    const auto ranks = stats::ranks_from_order(asc);
    REQUIRE(ranks == std::vector<double>{2.0, 4.0, 3.0, 1.0, 5.0});
}

TEST_CASE("ks distance against hand-computed cases") {
    // Single point at 0.3: CDF jumps from 0 to 1 there, so D = 0.7.
    REQUIRE(stats::ks_uniform_distance({0.3}) == Approx(0.7).epsilon(1e-15));
    // Perfectly centered grid has D = 1/(2n).
    REQUIRE(stats::ks_uniform_distance({0.125, 0.375, 0.625, 0.875}) == Approx(0.125).epsilon(1e-15));
}

TEST_CASE("quantile matches linear interpolation") {
    std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    REQUIRE(stats::quantile(v, 0.0) == 1.0);
    REQUIRE(stats::quantile(v, 1.0) == 4.0);
    REQUIRE(stats::quantile(v, 0.5) == Approx(2.5).epsilon(1e-15));
    REQUIRE(stats::quantile(v, 0.25) == Approx(1.75).epsilon(1e-15));
}

TEST_CASE("substreams are deterministic and independent") {
    rng::Engine a(rng::substream(42, rng::domain_study, 3));
    rng::Engine b(rng::substream(42, rng::domain_study, 3));
    for (int i = 0; i < 16; ++i) REQUIRE(a() == b());

    rng::Engine c(rng::substream(42, rng::domain_study, 4));
    rng::Engine d(rng::substream(42, rng::domain_sets, 3));
    bool all_equal_c = true, all_equal_d = true;
    rng::Engine a2(rng::substream(42, rng::domain_study, 3));
    for (int i = 0; i < 16; ++i) {
        const auto ref = a2();
        all_equal_c = all_equal_c && (c() == ref);
        all_equal_d = all_equal_d && (d() == ref);
    }
    REQUIRE_FALSE(all_equal_c);
    REQUIRE_FALSE(all_equal_d);
}

TEST_CASE("bounded draws stay in range and reach every value") {
    rng::Engine eng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 400; ++i) {
        const auto v = rng::bounded(eng, 7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    REQUIRE(seen.size() == 7);
    REQUIRE_THROWS_AS(rng::bounded(eng, 0), Error);
}

TEST_CASE("shuffle permutes without loss") {
    rng::Engine eng(11);
    std::vector<int> v(25);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng::shuffle(w, eng);
    REQUIRE_FALSE(w == v); // astronomically unlikely to be identity
    std::sort(w.begin(), w.end());
    REQUIRE(w == v);
}

TEST_CASE("sampling without replacement yields distinct indices") {
    rng::Engine eng(13);
    const auto picks = rng::sample_without_replacement(100, 30, eng);
    REQUIRE(picks.size() == 30);
    std::set<std::size_t> uniq(picks.begin(), picks.end());
    REQUIRE(uniq.size() == 30);
    for (auto p : picks) REQUIRE(p < 100);
    REQUIRE_THROWS_AS(rng::sample_without_replacement(3, 4, eng), Error);
}

TEST_CASE("distribution draws have the right first moments") {
    rng::Engine eng(17);
    const int n = 20000;

    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng::normal(eng, 2.0, 3.0);
        sum += x;
        sum2 += x * x;
    }
    REQUIRE(sum / n == Approx(2.0).margin(0.1));
    REQUIRE(sum2 / n - (sum / n) * (sum / n) == Approx(9.0).margin(0.5));

    sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng::gamma(eng, 5.0, 0.4); // mean 2
    REQUIRE(sum / n == Approx(2.0).margin(0.05));

    sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng::gamma(eng, 0.37, 1.0); // shape < 1 branch
    REQUIRE(sum / n == Approx(0.37).margin(0.03));

    sum = 0.0;
    for (int i = 0; i < 4000; ++i) sum += static_cast<double>(rng::poisson(eng, 6.5));
    REQUIRE(sum / 4000 == Approx(6.5).margin(0.25));

    // Chunked path for large rates.
    sum = 0.0;
    for (int i = 0; i < 400; ++i) sum += static_cast<double>(rng::poisson(eng, 1234.5));
    REQUIRE(sum / 400 == Approx(1234.5).margin(15.0));

    REQUIRE(rng::poisson(eng, 0.0) == 0);
}

TEST_CASE("double formatting round-trips bit-exactly") {
    const std::vector<double> cases{
        0.0, -0.0, 1.0, -1.0, 0.1, 1.0 / 3.0, 2.0 / 3.0, 1e-300, 1e300,
        123456789.123456789, 6.62607015e-34, 0x1p-1074, -0x1.fffffffffffffp1023,
        3.141592653589793, 0.65,
    };
    for (double v : cases) {
        const std::string s = tsv::format_double(v);
        double back = 0.0;
        REQUIRE(tsv::parse_double(s, back));
        REQUIRE(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("double parsing rejects junk and partial tokens") {
    double v = 0.0;
    REQUIRE_FALSE(tsv::parse_double("", v));
    REQUIRE_FALSE(tsv::parse_double("abc", v));
    REQUIRE_FALSE(tsv::parse_double("1.2.3", v));
    REQUIRE_FALSE(tsv::parse_double("1.5 ", v));
    REQUIRE_FALSE(tsv::parse_double(" 1.5", v));
    REQUIRE_FALSE(tsv::parse_double("1e", v));
    REQUIRE(tsv::parse_double("-2.5e-3", v));
    REQUIRE(v == -2.5e-3);
    REQUIRE(tsv::parse_double("nan", v)); // finiteness policy is the caller's
    REQUIRE(std::isnan(v));
    REQUIRE(tsv::parse_double("inf", v));
    REQUIRE(std::isinf(v));
}

TEST_CASE("line and field splitting handle cr-lf and trailing newline") {
    const auto lines = tsv::split_lines("a\tb\r\nc\td\n");
    REQUIRE(lines.size() == 2);
    REQUIRE(lines[0] == "a\tb");
    REQUIRE(lines[1] == "c\td");

    const auto no_trailing = tsv::split_lines("x");
    REQUIRE(no_trailing.size() == 1);
    REQUIRE(no_trailing[0] == "x");

    const auto fields = tsv::split_fields("a\t\tb");
    REQUIRE(fields.size() == 3);
    REQUIRE(fields[1].empty());
}

TEST_CASE("parallel_for covers the range once for any thread count") {
    const std::size_t n = 1000;
    std::vector<double> expected(n);
    for (std::size_t i = 0; i < n; ++i) expected[i] = std::sqrt(static_cast<double>(i));

    for (unsigned threads : {1u, 2u, 3u, 8u}) {
        std::vector<double> got(n, -1.0);
        parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) got[i] = std::sqrt(static_cast<double>(i));
        });
        REQUIRE(got == expected);
    }
}

TEST_CASE("parallel_for propagates worker exceptions") {
    REQUIRE_THROWS_AS(
        parallel_for(100, 4, [](std::size_t begin, std::size_t) {
            if (begin >= 0) throw Error(errc::domain_error, "boom");
        }),
        Error);
}

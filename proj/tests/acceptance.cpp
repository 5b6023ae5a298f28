// Release gate for the pipeline: six end-to-end checks, one line of output
// each. Exits nonzero when any check fails. Tolerances and seeds are fixed
// here, not configurable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gsema/gsema.hpp"
#include "oracles.hpp"

using namespace gsema;

namespace {

int g_failures = 0;

void report(int number, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", number, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

bool bits_equal(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool close(double a, double b, double margin) {
    return std::abs(a - b) <= margin;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ExpressionMatrix toy_matrix(const oracle::Dense& x) {
    ExpressionMatrix m;
    m.study_id = "toy";
    for (std::size_t i = 0; i < x.size(); ++i) m.gene_ids.push_back("g" + std::to_string(i + 1));
    for (std::size_t j = 0; j < x[0].size(); ++j) m.sample_ids.push_back("s" + std::to_string(j + 1));
    m.values = Matrix(x.size(), x[0].size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x[0].size(); ++j) m.values(i, j) = x[i][j];
    }
    return m;
}

GeneSetCollection toy_sets(const std::vector<std::pair<std::string, std::vector<std::size_t>>>& sets) {
    GeneSetCollection catalog;
    for (const auto& [name, members] : sets) {
        GeneSet s;
        s.name = name;
        for (std::size_t i : members) s.genes.push_back("g" + std::to_string(i + 1));
        catalog.sets.push_back(std::move(s));
    }
    return catalog;
}

// ---------------------------------------------------------------------------
// 1. Positive control: five simulated studies, a 23-gene spiked pathway among
//    500 decoy sets; the spiked set must lead the ranking with FDR < 0.05 in
//    at least 95 of 100 seeds for both the Stouffer and the rank-walk scorer.
// ---------------------------------------------------------------------------
void criterion_positive_control() {
    constexpr std::size_t n_seeds = 100;
    constexpr std::size_t required = 95;
    std::size_t hits_zscore = 0;
    std::size_t hits_ssgsea = 0;

    sim::SimConfig cfg; // defaults: 5 studies, 2000 genes, 20/20, 1% DE,
                        // 23-gene spike, 500 decoys
    for (std::uint64_t s = 0; s < n_seeds; ++s) {
        cfg.seed = 1000 + s;
        const auto data = sim::simulate_studies(cfg);
        for (int mi = 0; mi < 2; ++mi) {
            pipeline::RunOptions opt;
            opt.sse.method = mi == 0 ? SseMethod::zscore : SseMethod::ssgsea;
            bool hit = false;
            try {
                const auto res = pipeline::run_pipeline(data.studies, data.catalog, opt);
                hit = !res.results.empty() &&
                      res.results[0].pathway == sim::spiked_pathway_name() &&
                      res.results[0].fdr < 0.05;
            } catch (const Error&) {
                hit = false;
            }
            (mi == 0 ? hits_zscore : hits_ssgsea) += hit ? 1 : 0;
        }
    }

    const bool pass = hits_zscore >= required && hits_ssgsea >= required;
    report(1, pass,
           "spiked pathway ranked first with FDR < 0.05 in " + std::to_string(hits_zscore) +
           "/100 seeds (zscore) and " + std::to_string(hits_ssgsea) +
           "/100 (ssgsea); threshold 95");
}

// ---------------------------------------------------------------------------
// 2. Permutation null: relabeling the positive-control samples 100 times must
//    leave the spiked pathway non-significant in at least 95% of iterations,
//    and the median count of significant pathways at or below 5% of the
//    median panel size.
// ---------------------------------------------------------------------------
void criterion_permutation_null() {
    sim::SimConfig cfg;
    cfg.seed = 4242;
    const auto data = sim::simulate_studies(cfg);

    pipeline::RunOptions opt; // zscore defaults
    constexpr std::size_t iterations = 100;
    const auto rep = sim::run_permutation_suite(data.studies, data.catalog, opt,
                                                data.truth.spiked_set_name, iterations,
                                                20240817);

    std::vector<double> tested;
    for (const auto& it : rep.iterations) {
        if (it.status != sim::PermutationIteration::Status::failed) {
            tested.push_back(static_cast<double>(it.tested));
        }
    }
    const double median_tested = tested.empty() ? 0.0 : stats::quantile(tested, 0.5);

    const bool rate_ok = rep.spiked_significant_rate <= 0.05;
    const bool median_ok = rep.median <= 0.05 * median_tested + 1e-12;
    const bool pass = rate_ok && median_ok;

    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "spiked pathway significant in %.0f%% of %zu permutations (limit 5%%); "
                  "median significant %.1f of median %.1f tested; %zu failed iterations",
                  rep.spiked_significant_rate * 100.0, iterations, rep.median, median_tested,
                  rep.failed);
    report(2, pass, buf);
}

// ---------------------------------------------------------------------------
// 3. Effect and combination arithmetic against fixed hand computations, a
//    brute-force Cohen's d, and a brute-force multiplicity adjustment.
// ---------------------------------------------------------------------------
void criterion_effect_arithmetic() {
    bool pass = true;
    std::string first_fail;
    auto expect = [&](bool ok, const char* what) {
        if (!ok && pass) {
            pass = false;
            first_fail = what;
        }
    };

    // (a) Hand-computed conversion cases, absolute tolerance 1e-12.
    expect(close(effects::t_to_cohens_d(2.0, 50, 50, 98.0), 0.4040610178208843, 1e-12),
           "t-to-d hand case");
    expect(close(effects::hedges_correction(50, 50), 0.99232736572890026, 1e-12),
           "bias factor hand case");
    expect(close(effects::hedges_correction(2, 2), 4.0 / 7.0, 1e-12), "bias factor small case");
    expect(close(effects::cohens_to_hedges(1.0 / std::sqrt(2.0), 2, 2),
                 0.40406101782088427, 1e-12),
           "d-to-g hand case");
    expect(close(effects::hedges_variance_raw(1.0 / std::sqrt(2.0), 2, 2), 17.0 / 49.0, 1e-12),
           "raw variance hand case");
    expect(close(effects::hedges_variance_corrected(0.5, 50, 50), 0.04125, 1e-12),
           "corrected variance hand case");

    // (b) With moderation off, the t-derived d equals the direct standardized
    //     mean difference times sqrt(n/(n-2)), within 1e-12, on 1000 designs.
    rng::Engine eng(rng::substream(31, rng::domain_study, 0));
    for (int rep = 0; rep < 1000 && pass; ++rep) {
        const std::size_t n_e = 2 + rng::bounded(eng, 11);
        const std::size_t n_c = 2 + rng::bounded(eng, 11);
        const std::size_t n = n_e + n_c;

        PathwayScoreMatrix m;
        m.study_id = "acc";
        m.method = SseMethod::ssgsea;
        m.pathway_names = {"P"};
        m.effective_set_sizes = {10};
        m.scores = Matrix(1, n);
        ClassLabels labels;
        for (std::size_t j = 0; j < n; ++j) {
            m.sample_ids.push_back("s" + std::to_string(j));
            labels.sample_ids.push_back(m.sample_ids.back());
            labels.groups.push_back(j < n_e ? Group::experimental : Group::control);
            m.scores(0, j) = rng::normal(eng, j < n_e ? 0.4 : 0.0, 1.0);
        }

        effects::EffectOptions opts;
        opts.ordinary_t = true;
        const auto fx = effects::compute_study_effects(m, labels, opts);

        // Direct two-group standardized difference, written out longhand.
        double sum_e = 0.0, sum_c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            (j < n_e ? sum_e : sum_c) += m.scores(0, j);
        }
        const double mean_e = sum_e / static_cast<double>(n_e);
        const double mean_c = sum_c / static_cast<double>(n_c);
        double ss = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double r = m.scores(0, j) - (j < n_e ? mean_e : mean_c);
            ss += r * r;
        }
        const double pooled_sd = std::sqrt(ss / static_cast<double>(n - 2));
        const double direct_d = (mean_e - mean_c) / pooled_sd;
        const double scaled =
            direct_d * std::sqrt(static_cast<double>(n) / static_cast<double>(n - 2));
        expect(close(fx[0].d, scaled, 1e-12), "ordinary-t d conversion identity");
    }

    // (c) Two-study combination worked example, tolerance 1e-10.
    {
        std::vector<double> g{0.0, 1.0};
        std::vector<double> v{0.1, 0.1};
        const auto fem = meta::fem_combine(g, v);
        const auto het = meta::dl_tau2(g, v, fem.ces);
        const auto rem = meta::rem_combine(g, v, het.tau2);
        expect(close(het.tau2, 0.4, 1e-10), "between-study variance example");
        expect(close(rem.ces, 0.5, 1e-10), "combined effect example");
        expect(close(rem.z, 1.0, 1e-10), "combined z example");
        expect(close(rem.p, 0.3173105078629141, 1e-10), "combined p example");
    }

    // (d) Step-up adjustment equals the brute-force oracle bit for bit on 100
    //     random vectors up to length 1000.
    {
        rng::Engine peng(rng::substream(32, rng::domain_permutation, 0));
        for (int rep = 0; rep < 100 && pass; ++rep) {
            const std::size_t m = 1 + rng::bounded(peng, 1000);
            std::vector<double> p(m);
            for (auto& x : p) x = rng::uniform01(peng);
            if (m > 3) {
                p[1] = p[0]; // force ties through both code paths
                p[m - 1] = p[m / 2];
            }
            const auto fast = meta::bh_adjust(p);
            const auto slow = oracle::bh_stepup(p);
            for (std::size_t i = 0; i < m; ++i) {
                if (!bits_equal(fast[i], slow[i])) {
                    expect(false, "step-up adjustment mismatch");
                    break;
                }
            }
        }
    }

    report(3, pass,
           pass ? "hand cases to 1e-12, 1000 ordinary-t conversions to 1e-12, combination "
                  "example to 1e-10, step-up adjustment exact on 100 vectors"
                : "first failing check: " + first_fail);
}

// ---------------------------------------------------------------------------
// 4. All four scoring methods against independent brute-force rewrites on a
//    5-gene, 4-sample toy with two sets, per-score tolerance 1e-9.
// ---------------------------------------------------------------------------
void criterion_scoring_oracles() {
    const oracle::Dense toy{
        {3.1, -0.4, 2.2, 0.9},
        {-1.7, 2.8, -3.3, 1.1},
        {0.6, 1.9, -0.8, -2.6},
        {2.4, -3.6, 1.5, 0.3},
        {-0.2, 0.7, 4.1, -1.8},
    };
    const std::vector<std::size_t> set_one{0, 2};
    const std::vector<std::size_t> set_two{1, 3, 4};
    const auto m = toy_matrix(toy);
    const auto catalog = toy_sets({{"one", set_one}, {"two", set_two}});

    double worst = 0.0;
    std::string worst_method = "none";
    auto compare = [&](const PathwayScoreMatrix& got, const std::vector<double>& want,
                       std::size_t row, const char* method) {
        for (std::size_t j = 0; j < want.size(); ++j) {
            const double err = std::abs(got.scores(row, j) - want[j]);
            if (err > worst) {
                worst = err;
                worst_method = method;
            }
        }
    };

    SseConfig cfg;
    cfg.min_set_size = 2;

    cfg.method = SseMethod::zscore;
    const auto z = sse::score_study(m, catalog, cfg);
    compare(z, oracle::zscore(toy, set_one), 0, "zscore");
    compare(z, oracle::zscore(toy, set_two), 1, "zscore");

    cfg.method = SseMethod::ssgsea;
    const auto ss = sse::score_study(m, catalog, cfg);
    compare(ss, oracle::ssgsea(toy, set_one, cfg.ssgsea_weight_exponent), 0, "ssgsea");
    compare(ss, oracle::ssgsea(toy, set_two, cfg.ssgsea_weight_exponent), 1, "ssgsea");

    cfg.method = SseMethod::gsva;
    const auto gv = sse::score_study(m, catalog, cfg);
    compare(gv, oracle::gsva_gaussian(toy, set_one, cfg.gsva_bandwidth_factor, true), 0, "gsva");
    compare(gv, oracle::gsva_gaussian(toy, set_two, cfg.gsva_bandwidth_factor, true), 1, "gsva");

    cfg.method = SseMethod::singscore;
    const auto sing = sse::score_study(m, catalog, cfg);
    compare(sing, oracle::singscore_directed(toy, set_one), 0, "singscore");
    compare(sing, oracle::singscore_directed(toy, set_two), 1, "singscore");

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "four methods vs brute-force rewrites on the 5x4 toy, worst |error| %.2e (%s), "
                  "tolerance 1e-9",
                  worst, worst_method.c_str());
    report(4, worst <= 1e-9, buf);
}

// ---------------------------------------------------------------------------
// 5. Null calibration: with no differential genes, the filter open, and
//    plain t-statistics, raw combined p-values over >= 1000 pathways must sit
//    within KS distance 0.05 of uniform.
// ---------------------------------------------------------------------------
void criterion_null_calibration() {
    sim::SimConfig cfg;
    cfg.k_studies = 5;
    cfg.genes = 3000;
    cfg.n_e = 50;
    cfg.n_c = 50;
    cfg.de_fraction = 0.0;
    cfg.spiked_set_size = 0;
    cfg.n_decoy_sets = 1400;
    cfg.decoy_size_low = 10;
    cfg.decoy_size_high = 50;
    cfg.seed = 8675309;
    const auto data = sim::simulate_studies(cfg);

    pipeline::RunOptions opt;
    opt.sse.method = SseMethod::zscore;
    opt.filter.activity_threshold = 0.0; // keep every pathway
    opt.effects.ordinary_t = true;

    bool pass = false;
    char buf[200];
    try {
        const auto res = pipeline::run_pipeline(data.studies, data.catalog, opt);
        std::vector<double> pvals;
        pvals.reserve(res.results.size());
        for (const auto& r : res.results) pvals.push_back(r.p);
        const double ks = stats::ks_uniform_distance(pvals);
        const bool enough = pvals.size() >= 1000;
        pass = enough && ks < 0.05;
        std::snprintf(buf, sizeof buf,
                      "%zu null pathways retained (need >= 1000), KS distance from uniform "
                      "%.4f (limit 0.05)",
                      pvals.size(), ks);
    } catch (const Error& e) {
        std::snprintf(buf, sizeof buf, "pipeline failed: %s", e.what());
    }
    report(5, pass, buf);
}

// ---------------------------------------------------------------------------
// 6. Invariants: label-swap antisymmetry, nonnegative between-study variance,
//    convex-combination bounds, variance ordering, filter monotonicity, and
//    thread-count-independent output checksums.
// ---------------------------------------------------------------------------
void criterion_invariants() {
    bool pass = true;
    std::string first_fail;
    auto expect = [&](bool ok, const char* what) {
        if (!ok && pass) {
            pass = false;
            first_fail = what;
        }
    };

    // Label-swap antisymmetry: t, d, g flip sign bit for bit.
    {
        rng::Engine eng(rng::substream(61, rng::domain_study, 1));
        PathwayScoreMatrix m;
        m.study_id = "inv";
        m.method = SseMethod::gsva;
        const std::size_t rows = 30, cols = 12;
        m.scores = Matrix(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            m.pathway_names.push_back("P" + std::to_string(r));
            m.effective_set_sizes.push_back(9);
            for (std::size_t j = 0; j < cols; ++j) m.scores(r, j) = rng::normal(eng, 0.0, 1.0);
        }
        ClassLabels fwd, rev;
        for (std::size_t j = 0; j < cols; ++j) {
            m.sample_ids.push_back("s" + std::to_string(j));
            fwd.sample_ids.push_back(m.sample_ids.back());
            rev.sample_ids.push_back(m.sample_ids.back());
            fwd.groups.push_back(j % 2 == 0 ? Group::experimental : Group::control);
            rev.groups.push_back(j % 2 == 0 ? Group::control : Group::experimental);
        }
        const auto a = effects::compute_study_effects(m, fwd);
        const auto b = effects::compute_study_effects(m, rev);
        for (std::size_t r = 0; r < rows; ++r) {
            expect(bits_equal(b[r].t, -a[r].t), "label-swap t antisymmetry");
            expect(bits_equal(b[r].g, -a[r].g), "label-swap g antisymmetry");
            expect(bits_equal(b[r].var_raw, a[r].var_raw), "label-swap variance symmetry");
        }
    }

    // Pool-level invariants over random configurations.
    {
        rng::Engine eng(rng::substream(62, rng::domain_sets, 2));
        for (int rep = 0; rep < 500; ++rep) {
            const std::size_t k = 2 + rng::bounded(eng, 7);
            std::vector<double> g(k), v(k);
            for (std::size_t i = 0; i < k; ++i) {
                g[i] = rng::uniform(eng, -2.0, 2.0);
                v[i] = rng::uniform(eng, 0.01, 0.5);
            }
            const auto fem = meta::fem_combine(g, v);
            const auto het = meta::dl_tau2(g, v, fem.ces);
            const auto rem = meta::rem_combine(g, v, het.tau2);
            const double lo = *std::min_element(g.begin(), g.end());
            const double hi = *std::max_element(g.begin(), g.end());
            expect(het.tau2 >= 0.0, "tau2 nonnegative");
            expect(fem.ces >= lo - 1e-12 && fem.ces <= hi + 1e-12, "fixed pool convex bounds");
            expect(rem.ces >= lo - 1e-12 && rem.ces <= hi + 1e-12, "random pool convex bounds");
            expect(rem.var >= fem.var - 1e-15, "variance ordering");
        }
    }

    // Filter monotonicity: tightening the threshold only removes pathways.
    {
        rng::Engine eng(rng::substream(63, rng::domain_sets, 3));
        PathwayScoreMatrix m;
        m.study_id = "inv";
        m.method = SseMethod::ssgsea;
        const std::size_t rows = 40, cols = 10;
        m.scores = Matrix(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            m.pathway_names.push_back("P" + std::to_string(r));
            m.effective_set_sizes.push_back(8);
            for (std::size_t j = 0; j < cols; ++j) m.scores(r, j) = rng::normal(eng, 0.0, 1.0);
        }
        ClassLabels labels;
        for (std::size_t j = 0; j < cols; ++j) {
            m.sample_ids.push_back("s" + std::to_string(j));
            labels.sample_ids.push_back(m.sample_ids.back());
            labels.groups.push_back(j < 5 ? Group::experimental : Group::control);
        }
        std::vector<std::string> previous;
        bool first = true;
        for (double threshold : {0.0, 0.15, 0.3, 0.45, 0.6}) {
            panel::FilterConfig fcfg;
            fcfg.activity_threshold = threshold;
            const auto kept = panel::filter_low_activity(m, labels, fcfg);
            if (!first) {
                for (const auto& name : kept.matrix.pathway_names) {
                    expect(std::find(previous.begin(), previous.end(), name) != previous.end(),
                           "filter monotonicity");
                }
            }
            previous = kept.matrix.pathway_names;
            first = false;
        }
    }

    // Thread-count independence: serialized outputs hash identically.
    {
        sim::SimConfig cfg;
        cfg.k_studies = 3;
        cfg.genes = 400;
        cfg.n_e = 8;
        cfg.n_c = 8;
        cfg.de_fraction = 0.05;
        cfg.n_decoy_sets = 60;
        cfg.decoy_size_low = 8;
        cfg.decoy_size_high = 30;
        cfg.seed = 5150;
        const auto data = sim::simulate_studies(cfg);

        std::vector<std::uint64_t> sums;
        for (unsigned threads : {1u, 4u}) {
            pipeline::RunOptions opt;
            opt.sse.method = SseMethod::ssgsea;
            opt.threads = threads;
            const auto res = pipeline::run_pipeline(data.studies, data.catalog, opt);
            std::string blob = report::to_tsv(res.results);
            for (const auto& fx : res.study_effects) blob += report::to_tsv(fx);
            blob += report::to_tsv(res.filter_report);
            sums.push_back(fnv1a(blob));
        }
        expect(sums[0] == sums[1], "thread-count checksum equality");
    }

    report(6, pass,
           pass ? "antisymmetry, nonnegative tau2, convex bounds, variance ordering, filter "
                  "monotonicity, thread-count checksums all hold"
                : "first failing check: " + first_fail);
}

} // namespace

int main() {
    criterion_positive_control();
    criterion_permutation_null();
    criterion_effect_arithmetic();
    criterion_scoring_oracles();
    criterion_null_calibration();
    criterion_invariants();
    if (g_failures > 0) {
        std::printf("%d of 6 criteria failed\n", g_failures);
        return 1;
    }
    std::printf("all 6 criteria passed\n");
    return 0;
}

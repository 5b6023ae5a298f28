#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gsema/effects.hpp"
#include "gsema/error.hpp"
#include "gsema/panel.hpp"
#include "gsema/stats.hpp"

/**
 * @file meta.hpp
 * @brief Cross-study combination of per-pathway effects: inverse-variance
 * fixed-effect pooling, the DerSimonian-Laird between-study variance, the
 * random-effects combined size with its normal test, and Benjamini-Hochberg
 * multiplicity control.
 *
 * Every accumulation walks studies in the panel's canonical (lexicographic)
 * order, so results do not depend on input study order.
 */

namespace gsema::meta {

struct MetaConfig {
    enum class Model { fixed, random };
    Model model = Model::random;
    double alpha = 0.05; // significance level quoted in summaries

    void validate() const {
        if (!(alpha > 0.0) || !(alpha < 1.0)) {
            fail(errc::config_error, "alpha must lie strictly between 0 and 1");
        }
    }
};

inline const char* to_string(MetaConfig::Model m) {
    return m == MetaConfig::Model::fixed ? "fixed" : "random";
}

inline MetaConfig::Model meta_model_from_string(std::string_view name) {
    if (name == "fixed" || name == "fem") return MetaConfig::Model::fixed;
    if (name == "random" || name == "rem") return MetaConfig::Model::random;
    fail(errc::config_error, "unknown meta-analysis model '" + std::string(name) + "'");
}

struct CombinedEffect {
    double ces = 0.0;
    double var = 0.0;
};

/** Inverse-variance fixed-effect pool; weights are 1/v_i. */
inline CombinedEffect fem_combine(std::span<const double> g, std::span<const double> v) {
    if (g.empty() || g.size() != v.size()) {
        fail(errc::domain_error, "fixed-effect pool needs matching nonempty effect/variance lists");
    }
    double wsum = 0.0, gwsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(v[i] > 0.0)) fail(errc::domain_error, "nonpositive sampling variance in pool");
        const double w = 1.0 / v[i];
        wsum += w;
        gwsum += w * g[i];
    }
    return {gwsum / wsum, 1.0 / wsum};
}

struct HeterogeneityFit {
    double tau2 = 0.0; // between-study variance, floored at zero
    double q = 0.0;    // Cochran's Q at the fixed-effect estimate
    double c = 0.0;    // scale factor sum(w) - sum(w^2)/sum(w)
};

/**
 * DerSimonian-Laird moment estimator. A single study carries no
 * heterogeneity information: tau2 and Q are defined as zero.
 */
inline HeterogeneityFit dl_tau2(std::span<const double> g, std::span<const double> v,
                                double fem_ces) {
    if (g.empty() || g.size() != v.size()) {
        fail(errc::domain_error, "heterogeneity fit needs matching nonempty lists");
    }
    if (g.size() == 1) return {};
    double q = 0.0, wsum = 0.0, w2sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(v[i] > 0.0)) fail(errc::domain_error, "nonpositive sampling variance in pool");
        const double w = 1.0 / v[i];
        const double dev = g[i] - fem_ces;
        q += w * dev * dev;
        wsum += w;
        w2sum += w * w;
    }
    HeterogeneityFit fit;
    fit.q = q;
    fit.c = wsum - w2sum / wsum;
    if (!(fit.c > 0.0)) {
        fail(errc::domain_error, "degenerate weight configuration in heterogeneity fit");
    }
    const double df = static_cast<double>(g.size() - 1);
    fit.tau2 = std::max(0.0, (q - df) / fit.c);
    return fit;
}

struct RandomEffects {
    double ces = 0.0;
    double var = 0.0;
    double z = 0.0;
    double p = 1.0;
};

/** Random-effects pool with weights 1/(v_i + tau2) and two-sided normal test. */
inline RandomEffects rem_combine(std::span<const double> g, std::span<const double> v, double tau2) {
    if (g.empty() || g.size() != v.size()) {
        fail(errc::domain_error, "random-effects pool needs matching nonempty lists");
    }
    if (!(tau2 >= 0.0)) fail(errc::domain_error, "tau2 must be nonnegative");
    double wsum = 0.0, gwsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(v[i] > 0.0)) fail(errc::domain_error, "nonpositive sampling variance in pool");
        const double w = 1.0 / (v[i] + tau2);
        wsum += w;
        gwsum += w * g[i];
    }
    RandomEffects out;
    out.ces = gwsum / wsum;
    out.var = 1.0 / wsum;
    out.z = out.ces / std::sqrt(out.var);
    out.p = stats::two_sided_p(out.z);
    return out;
}

/**
 * Benjamini-Hochberg step-up adjustment. Ties and order are handled by
 * sorting; the adjusted value for rank r is the running minimum over
 * min(1, m * p / r) from the largest rank down.
 */
inline std::vector<double> bh_adjust(std::span<const double> p) {
    const std::size_t m = p.size();
    std::vector<double> adjusted(m);
    if (m == 0) return adjusted;
    for (double x : p) {
        if (!(x >= 0.0) || !(x <= 1.0)) fail(errc::domain_error, "p-values must lie in [0, 1]");
    }
    std::vector<std::size_t> ord(m);
    for (std::size_t i = 0; i < m; ++i) ord[i] = i;
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double scaled = std::min(1.0, static_cast<double>(m) * p[ord[r]] / static_cast<double>(r + 1));
        running = std::min(running, scaled);
        adjusted[ord[r]] = running;
    }
    return adjusted;
}

struct MetaResult {
    std::string pathway;
    std::size_t k_studies = 0;
    double ces = 0.0;
    double var_ces = 0.0;
    double tau2 = 0.0;
    double q = 0.0;
    double z = 0.0;
    double p = 1.0;
    double fdr = 1.0;
    std::vector<std::string> studies; // member ids, canonical order
    std::vector<double> per_study_g;
};

/**
 * Combine per-study effects across the aligned panel. For each pathway the
 * member studies' g values give an unweighted mean, which parameterizes the
 * bias-corrected sampling variances; those variances drive the fixed-effect
 * pool, the DerSimonian-Laird tau2, and the requested combination model.
 * Results come back sorted by |ces| descending (ties by pathway name), with
 * BH-adjusted p-values computed over the full panel.
 *
 * The var_corrected field of every consumed StudyEffect is filled in as a
 * side effect.
 */
inline std::vector<MetaResult> run_meta(const panel::AlignedPathwayPanel& aligned,
                                        std::vector<std::vector<effects::StudyEffect>>& per_study,
                                        const MetaConfig& cfg = {}) {
    cfg.validate();
    if (per_study.size() != aligned.study_ids.size()) {
        fail(errc::domain_error, "panel and effect lists disagree on study count");
    }
    // Per-study lookup from pathway name to effect row.
    std::vector<std::unordered_map<std::string_view, std::size_t>> index(per_study.size());
    for (std::size_t s = 0; s < per_study.size(); ++s) {
        index[s].reserve(per_study[s].size() * 2);
        for (std::size_t i = 0; i < per_study[s].size(); ++i) {
            index[s].emplace(per_study[s][i].pathway, i);
        }
    }

    std::vector<MetaResult> results;
    results.reserve(aligned.pathway_names.size());
    std::vector<double> pvals;
    pvals.reserve(aligned.pathway_names.size());

    for (std::size_t pidx = 0; pidx < aligned.pathway_names.size(); ++pidx) {
        const auto& name = aligned.pathway_names[pidx];
        MetaResult res;
        res.pathway = name;

        std::vector<effects::StudyEffect*> members;
        for (std::size_t s = 0; s < per_study.size(); ++s) {
            if (!aligned.presence[pidx][s]) continue;
            auto it = index[s].find(name);
            if (it == index[s].end()) {
                fail(errc::domain_error,
                     "pathway '" + name + "' missing from effects of study " + aligned.study_ids[s]);
            }
            members.push_back(&per_study[s][it->second]);
        }
        res.k_studies = members.size();

        double g_mean = 0.0;
        for (const auto* e : members) g_mean += e->g;
        g_mean /= static_cast<double>(members.size());

        std::vector<double> g, v;
        g.reserve(members.size());
        v.reserve(members.size());
        for (auto* e : members) {
            e->var_corrected = effects::hedges_variance_corrected(g_mean, e->n_e, e->n_c);
            g.push_back(e->g);
            v.push_back(e->var_corrected);
            res.studies.push_back(e->study_id);
        }
        res.per_study_g = g;

        const auto fem = fem_combine(g, v);
        const auto het = dl_tau2(g, v, fem.ces);
        res.tau2 = het.tau2;
        res.q = het.q;
        if (cfg.model == MetaConfig::Model::random) {
            const auto rem = rem_combine(g, v, het.tau2);
            res.ces = rem.ces;
            res.var_ces = rem.var;
            res.z = rem.z;
            res.p = rem.p;
        } else {
            res.ces = fem.ces;
            res.var_ces = fem.var;
            res.z = fem.ces / std::sqrt(fem.var);
            res.p = stats::two_sided_p(res.z);
        }
        pvals.push_back(res.p);
        results.push_back(std::move(res));
    }

    const auto fdr = bh_adjust(pvals);
    for (std::size_t i = 0; i < results.size(); ++i) results[i].fdr = fdr[i];

    std::sort(results.begin(), results.end(), [](const MetaResult& a, const MetaResult& b) {
        const double ma = std::abs(a.ces), mb = std::abs(b.ces);
        if (ma != mb) return ma > mb;
        return a.pathway < b.pathway;
    });
    return results;
}

} // namespace gsema::meta

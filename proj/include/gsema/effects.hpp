#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gsema/error.hpp"
#include "gsema/model.hpp"
#include "gsema/stats.hpp"

/**
 * @file effects.hpp
 * @brief Per-study effect sizes: an empirical-Bayes moderated two-group t
 * statistic per pathway, converted to bias-corrected standardized mean
 * differences (Hedges' g) with their sampling variances.
 *
 * Accumulations run in sample-column order with the class label acting only
 * as a selector. Swapping every label therefore negates each t (and g)
 * bit-exactly and leaves every variance bit-identical.
 */

namespace gsema::effects {

struct EffectOptions {
    bool ordinary_t = false; // skip variance moderation entirely
    bool design_df = false;  // use the design df, not the moderated df, in the d conversion
    unsigned threads = 1;
};

struct ModeratedFit {
    std::vector<double> t;
    std::vector<double> df_total;     // df carried into downstream conversions
    std::vector<double> residual_var; // pooled two-group residual variance per pathway
    std::vector<double> posterior_var;
    double residual_df = 0.0;         // design df, common to every pathway
    double prior_df = 0.0;
    double prior_var = 0.0;
    bool prior_df_infinite = false;
    std::size_t n_e = 0;
    std::size_t n_c = 0;
};

// Finite stand-in for an unbounded prior df; flagged separately so callers
// can tell a huge estimate from a degenerate one.
inline constexpr double prior_df_cap = 1e6;

namespace detail {

struct VariancePrior {
    double d0 = 0.0;
    double s02 = 0.0;
    bool infinite = false;
};

/**
 * Method-of-moments fit of a scaled-F prior to the observed residual
 * variances, on the log scale. Rows with zero variance carry no information
 * about dispersion and are excluded here (they are still squeezed later).
 * A single usable row cannot inform the prior's spread either; following
 * the convention of limma's fitFDist, it yields a zero-df prior, so the fit
 * degrades to the ordinary statistic instead of failing.
 */
inline VariancePrior fit_variance_prior(std::span<const double> variances, double df) {
    std::vector<double> e;
    e.reserve(variances.size());
    const double offset = std::log(df / 2.0) - stats::digamma(df / 2.0);
    double last_positive = 0.0;
    for (double v : variances) {
        if (v > 0.0 && std::isfinite(v)) {
            e.push_back(std::log(v) + offset);
            last_positive = v;
        }
    }
    if (e.empty()) {
        fail(errc::degenerate_variance,
             "no pathway has positive residual variance, nothing to moderate");
    }
    if (e.size() == 1) {
        VariancePrior prior;
        prior.d0 = 0.0;
        prior.s02 = last_positive;
        return prior;
    }
    const double e_mean = stats::mean(e);
    const double excess = stats::sample_variance(e) - stats::trigamma(df / 2.0);

    VariancePrior prior;
    if (excess > 0.0) {
        prior.d0 = 2.0 * stats::trigamma_inverse(excess);
        prior.s02 = std::exp(e_mean + stats::digamma(prior.d0 / 2.0) - std::log(prior.d0 / 2.0));
    } else {
        // No excess dispersion: the prior dominates completely.
        prior.infinite = true;
        prior.d0 = prior_df_cap;
        prior.s02 = std::exp(e_mean);
    }
    return prior;
}

} // namespace detail

/**
 * Two-group ordinary-least-squares fit per pathway with empirical-Bayes
 * variance moderation. With ordinary_t the moderation step is skipped and
 * the classical pooled-variance t is returned (df0 = 0).
 */
inline ModeratedFit fit_moderated_t(const PathwayScoreMatrix& m, const ClassLabels& labels,
                                    const EffectOptions& opts = {}) {
    const std::size_t n = m.scores.cols();
    if (labels.groups.size() != n) {
        fail(errc::domain_error, "labels and score matrix disagree on sample count");
    }
    const std::size_t n_e = labels.count(Group::experimental);
    const std::size_t n_c = labels.count(Group::control);
    if (n_e < 2 || n_c < 2) {
        fail(errc::degenerate_design,
             "need at least two samples per class (got " + std::to_string(n_e) + " case, " +
             std::to_string(n_c) + " control)");
    }
    const std::size_t n_path = m.scores.rows();
    if (n_path == 0) fail(errc::no_pathways, "no pathways to fit");

    const double df = static_cast<double>(n_e + n_c - 2);
    const double u2 = 1.0 / static_cast<double>(n_e) + 1.0 / static_cast<double>(n_c);

    ModeratedFit fit;
    fit.residual_df = df;
    fit.n_e = n_e;
    fit.n_c = n_c;
    fit.t.resize(n_path);
    fit.df_total.resize(n_path);
    fit.residual_var.resize(n_path);
    fit.posterior_var.resize(n_path);

    std::vector<double> beta(n_path);
    for (std::size_t r = 0; r < n_path; ++r) {
        const auto row = m.scores.row(r);
        double sum_e = 0.0, sum_c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (labels.groups[j] == Group::experimental) {
                sum_e += row[j];
            } else {
                sum_c += row[j];
            }
        }
        const double mean_e = sum_e / static_cast<double>(n_e);
        const double mean_c = sum_c / static_cast<double>(n_c);
        double ss = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double res = row[j] - (labels.groups[j] == Group::experimental ? mean_e : mean_c);
            ss += res * res;
        }
        beta[r] = mean_e - mean_c;
        fit.residual_var[r] = ss / df;
    }

    if (opts.ordinary_t) {
        for (std::size_t r = 0; r < n_path; ++r) {
            const double s2 = fit.residual_var[r];
            if (!(s2 > 0.0)) {
                fail(errc::degenerate_variance,
                     "pathway '" + m.pathway_names[r] + "' has zero residual variance");
            }
            fit.posterior_var[r] = s2;
            fit.df_total[r] = df;
            fit.t[r] = beta[r] / std::sqrt(s2 * u2);
        }
        return fit;
    }

    const auto prior = detail::fit_variance_prior(fit.residual_var, df);
    fit.prior_df = prior.d0;
    fit.prior_var = prior.s02;
    fit.prior_df_infinite = prior.infinite;
    for (std::size_t r = 0; r < n_path; ++r) {
        // With an unbounded prior the posterior equals the prior variance
        // exactly, rather than approaching it through the weighted form.
        const double post = prior.infinite
            ? prior.s02
            : (prior.d0 * prior.s02 + df * fit.residual_var[r]) / (prior.d0 + df);
        if (!(post > 0.0)) {
            fail(errc::degenerate_variance,
                 "pathway '" + m.pathway_names[r] + "' has zero posterior variance");
        }
        fit.posterior_var[r] = post;
        fit.df_total[r] = prior.d0 + df;
        fit.t[r] = beta[r] / std::sqrt(post * u2);
    }
    return fit;
}

/**
 * Moderated t to Cohen's d for a two-group design:
 * d = (n_e + n_c) * t / (sqrt(n_e * n_c) * sqrt(df)).
 */
inline double t_to_cohens_d(double t, std::size_t n_e, std::size_t n_c, double df) {
    if (n_e == 0 || n_c == 0) fail(errc::domain_error, "group sizes must be positive");
    if (!(df > 0.0)) fail(errc::domain_error, "t conversion needs positive df");
    const double ne = static_cast<double>(n_e);
    const double nc = static_cast<double>(n_c);
    return (ne + nc) * t / (std::sqrt(ne * nc) * std::sqrt(df));
}

/** Small-sample bias factor J = 1 - 3 / (4(n_e + n_c - 2) - 1). */
inline double hedges_correction(std::size_t n_e, std::size_t n_c) {
    const double denom = 4.0 * (static_cast<double>(n_e) + static_cast<double>(n_c) - 2.0) - 1.0;
    if (!(denom > 0.0)) fail(errc::domain_error, "bias correction needs n_e + n_c > 2");
    return 1.0 - 3.0 / denom;
}

inline double cohens_to_hedges(double d, std::size_t n_e, std::size_t n_c) {
    return hedges_correction(n_e, n_c) * d;
}

/** Classical first-order variance of g: J^2 ((n_e+n_c)/(n_e n_c) + d^2 / (2(n_e+n_c))). */
inline double hedges_variance_raw(double d, std::size_t n_e, std::size_t n_c) {
    const double j = hedges_correction(n_e, n_c);
    const double ne = static_cast<double>(n_e);
    const double nc = static_cast<double>(n_c);
    return j * j * ((ne + nc) / (ne * nc) + d * d / (2.0 * (ne + nc)));
}

/**
 * Bias-corrected variance used by the meta-analysis: the squared effect term
 * is evaluated at the cross-study mean effect instead of the study's own g,
 * and the leading term drops the correction factor:
 * V = 1/n_e + 1/n_c + g_bar^2 / (2(n_e + n_c)).
 */
inline double hedges_variance_corrected(double g_bar, std::size_t n_e, std::size_t n_c) {
    if (n_e == 0 || n_c == 0) fail(errc::domain_error, "group sizes must be positive");
    const double ne = static_cast<double>(n_e);
    const double nc = static_cast<double>(n_c);
    return 1.0 / ne + 1.0 / nc + g_bar * g_bar / (2.0 * (ne + nc));
}

struct StudyEffect {
    std::string pathway;
    std::string study_id;
    std::size_t n_e = 0;
    std::size_t n_c = 0;
    double t = 0.0;
    double df = 0.0; // df used for the d conversion
    double d = 0.0;
    double g = 0.0;
    double var_raw = 0.0;
    double var_corrected = 0.0; // filled in once the cross-study mean is known
};

/** Full effect-size pass over one study's (standardized, filtered) scores. */
inline std::vector<StudyEffect> compute_study_effects(const PathwayScoreMatrix& m,
                                                      const ClassLabels& labels,
                                                      const EffectOptions& opts = {}) {
    const auto fit = fit_moderated_t(m, labels, opts);
    std::vector<StudyEffect> out;
    out.reserve(m.scores.rows());
    for (std::size_t r = 0; r < m.scores.rows(); ++r) {
        StudyEffect e;
        e.pathway = m.pathway_names[r];
        e.study_id = m.study_id;
        e.n_e = fit.n_e;
        e.n_c = fit.n_c;
        e.t = fit.t[r];
        e.df = opts.design_df ? fit.residual_df : fit.df_total[r];
        e.d = t_to_cohens_d(e.t, e.n_e, e.n_c, e.df);
        e.g = cohens_to_hedges(e.d, e.n_e, e.n_c);
        e.var_raw = hedges_variance_raw(e.d, e.n_e, e.n_c);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace gsema::effects

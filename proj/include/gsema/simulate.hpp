#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsema/error.hpp"
#include "gsema/model.hpp"
#include "gsema/pipeline.hpp"
#include "gsema/rng.hpp"
#include "gsema/stats.hpp"

/**
 * @file simulate.hpp
 * @brief Synthetic multi-study RNA-seq generator and the label-permutation
 * harness used for false-positive calibration.
 *
 * Counts are negative binomial via the gamma-Poisson mixture: per study each
 * gene draws a baseline mean from a log-normal, differential genes multiply
 * that mean by a per-study fold change in case samples, and the dispersion
 * is shared. Values are log2(count + 1) transformed on output.
 *
 * Randomness layout: every (master seed, domain, index) triple opens an
 * independent substream, so adding studies or sets never perturbs sibling
 * draws, and any single component can be regenerated in isolation.
 */

namespace gsema::sim {

struct SimConfig {
    std::size_t k_studies = 5;
    std::size_t genes = 2000;
    std::size_t n_e = 20; // case samples per study
    std::size_t n_c = 20; // control samples per study
    double de_fraction = 0.01;
    std::size_t spiked_set_size = 23;
    double fold_change_low = 2.0;
    double fold_change_high = 4.0;
    double nb_dispersion = 0.2;
    double baseline_log_mean = 4.0;
    double baseline_log_sd = 1.5;
    std::size_t n_decoy_sets = 500;
    std::size_t decoy_size_low = 10;
    std::size_t decoy_size_high = 100;
    std::uint64_t seed = 0;

    // Differential genes: the configured fraction of the catalog, but never
    // fewer than the spiked set (its members must all be differential).
    std::size_t de_pool_size() const {
        const auto frac = static_cast<std::size_t>(std::llround(de_fraction * static_cast<double>(genes)));
        return std::max(frac, spiked_set_size);
    }

    void validate() const {
        if (k_studies == 0 || genes == 0) fail(errc::config_error, "need at least one study and one gene");
        if (n_e < 2 || n_c < 2) fail(errc::config_error, "need at least two samples per class");
        if (!(de_fraction >= 0.0) || !(de_fraction <= 1.0)) {
            fail(errc::config_error, "de fraction must lie in [0, 1]");
        }
        if (!(fold_change_low > 0.0) || !(fold_change_high >= fold_change_low)) {
            fail(errc::config_error, "fold-change range must be positive and ordered");
        }
        if (!(nb_dispersion > 0.0)) fail(errc::config_error, "dispersion must be > 0");
        if (!(baseline_log_sd >= 0.0)) fail(errc::config_error, "baseline log-sd must be >= 0");
        if (de_pool_size() > genes) {
            fail(errc::config_error, "differential pool exceeds the gene catalog");
        }
        if (n_decoy_sets > 0) {
            if (decoy_size_low == 0 || decoy_size_high < decoy_size_low) {
                fail(errc::config_error, "decoy size range must be positive and ordered");
            }
            if (decoy_size_high > genes - de_pool_size()) {
                fail(errc::config_error,
                     "decoy sets draw from non-differential genes only; largest decoy (" +
                     std::to_string(decoy_size_high) + ") exceeds that pool");
            }
        }
    }
};

struct SimTruth {
    std::vector<std::string> de_genes;
    std::string spiked_set_name; // empty when no set was spiked
    std::vector<std::string> spiked_genes;
};

struct SimulatedData {
    std::vector<Study> studies;
    GeneSetCollection catalog;
    SimTruth truth;
};

inline const char* spiked_pathway_name() { return "Simulated_Pathway"; }

namespace detail {

inline std::string zero_padded(std::size_t value, std::size_t width) {
    std::string s = std::to_string(value);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

} // namespace detail

/**
 * Generate the study collection, catalog, and truth record for one seed.
 * The spiked set holds the first spiked_set_size differential genes; decoy
 * sets sample exclusively from never-differential genes.
 */
inline SimulatedData simulate_studies(const SimConfig& cfg) {
    cfg.validate();
    SimulatedData data;

    std::vector<std::string> gene_ids(cfg.genes);
    for (std::size_t i = 0; i < cfg.genes; ++i) {
        gene_ids[i] = "G" + detail::zero_padded(i + 1, 6);
    }

    // Differential pool and set catalog share one substream family.
    const std::size_t n_de = cfg.de_pool_size();
    rng::Engine de_eng(rng::substream(cfg.seed, rng::domain_sets, 0));
    const auto de_rows = rng::sample_without_replacement(cfg.genes, n_de, de_eng);
    std::vector<bool> is_de(cfg.genes, false);
    for (std::size_t r : de_rows) is_de[r] = true;
    for (std::size_t r : de_rows) data.truth.de_genes.push_back(gene_ids[r]);

    if (cfg.spiked_set_size > 0) {
        GeneSet spiked;
        spiked.name = spiked_pathway_name();
        spiked.description = "spiked differential set";
        for (std::size_t i = 0; i < cfg.spiked_set_size; ++i) {
            spiked.genes.push_back(gene_ids[de_rows[i]]);
        }
        data.truth.spiked_set_name = spiked.name;
        data.truth.spiked_genes = spiked.genes;
        data.catalog.sets.push_back(std::move(spiked));
    }

    std::vector<std::size_t> background;
    background.reserve(cfg.genes - n_de);
    for (std::size_t r = 0; r < cfg.genes; ++r) {
        if (!is_de[r]) background.push_back(r);
    }
    const std::size_t width = cfg.n_decoy_sets >= 10000 ? 5 : 4;
    for (std::size_t d = 0; d < cfg.n_decoy_sets; ++d) {
        rng::Engine eng(rng::substream(cfg.seed, rng::domain_sets, d + 1));
        const std::size_t span_size = cfg.decoy_size_high - cfg.decoy_size_low + 1;
        const std::size_t size = cfg.decoy_size_low + static_cast<std::size_t>(rng::bounded(eng, span_size));
        const auto picks = rng::sample_without_replacement(background.size(), size, eng);
        GeneSet decoy;
        decoy.name = "Decoy_" + detail::zero_padded(d + 1, width);
        decoy.description = "background set";
        for (std::size_t p : picks) decoy.genes.push_back(gene_ids[background[p]]);
        data.catalog.sets.push_back(std::move(decoy));
    }
    if (data.catalog.sets.empty()) {
        fail(errc::config_error, "simulation defines no gene sets (no spike, no decoys)");
    }

    const double shape = 1.0 / cfg.nb_dispersion;
    for (std::size_t k = 0; k < cfg.k_studies; ++k) {
        rng::Engine eng(rng::substream(cfg.seed, rng::domain_study, k));
        Study study;
        auto& m = study.expression;
        m.study_id = "study_" + std::to_string(k + 1);
        m.gene_ids = gene_ids;
        const std::size_t n = cfg.n_e + cfg.n_c;
        m.sample_ids.reserve(n);
        study.labels.groups.reserve(n);
        for (std::size_t j = 0; j < cfg.n_e; ++j) {
            m.sample_ids.push_back(m.study_id + "_case_" + std::to_string(j + 1));
            study.labels.groups.push_back(Group::experimental);
        }
        for (std::size_t j = 0; j < cfg.n_c; ++j) {
            m.sample_ids.push_back(m.study_id + "_ctrl_" + std::to_string(j + 1));
            study.labels.groups.push_back(Group::control);
        }
        study.labels.sample_ids = m.sample_ids;

        // Baselines and fold changes are study-specific; the differential
        // gene list is shared across studies.
        std::vector<double> mu(cfg.genes);
        for (std::size_t r = 0; r < cfg.genes; ++r) {
            mu[r] = std::exp(rng::normal(eng, cfg.baseline_log_mean, cfg.baseline_log_sd));
        }
        std::vector<double> fold(cfg.genes, 1.0);
        for (std::size_t r : de_rows) {
            fold[r] = rng::uniform(eng, cfg.fold_change_low, cfg.fold_change_high);
        }

        m.values = Matrix(cfg.genes, n);
        for (std::size_t r = 0; r < cfg.genes; ++r) {
            auto row = m.values.row(r);
            for (std::size_t j = 0; j < n; ++j) {
                const bool in_case = study.labels.groups[j] == Group::experimental;
                const double mean = in_case ? mu[r] * fold[r] : mu[r];
                const double lambda = rng::gamma(eng, shape, mean / shape);
                const double count = static_cast<double>(rng::poisson(eng, lambda));
                row[j] = std::log2(count + 1.0);
            }
        }
        data.studies.push_back(std::move(study));
    }
    return data;
}

/** Uniform random relabeling that preserves both class sizes exactly. */
inline ClassLabels permute_labels(const ClassLabels& labels, rng::Engine& eng) {
    ClassLabels out = labels;
    rng::shuffle(out.groups, eng);
    return out;
}

struct PermutationIteration {
    std::size_t iteration = 0;
    enum class Status { ok, empty, failed } status = Status::ok;
    std::size_t tested = 0;      // pathways in the panel
    std::size_t significant = 0; // raw p below alpha
    bool spiked_significant = false;
    std::string error;
};

struct PermutationReport {
    std::vector<PermutationIteration> iterations;
    double alpha = 0.05;
    std::size_t failed = 0;
    double spiked_significant_rate = 0.0; // over all iterations
    // Five-number summary of per-iteration significant counts (failures excluded).
    double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
};

/**
 * Re-run the whole pipeline under label permutation. Iterations whose panel
 * comes up empty (the usual case under the null: nothing passes the activity
 * filter everywhere) count as zero significant pathways; other errors mark
 * the iteration failed without aborting the suite.
 */
inline PermutationReport run_permutation_suite(std::span<const Study> studies,
                                               const GeneSetCollection& catalog,
                                               const pipeline::RunOptions& opt,
                                               const std::string& spiked_name,
                                               std::size_t iterations,
                                               std::uint64_t seed) {
    if (iterations == 0) fail(errc::config_error, "need at least one permutation iteration");
    PermutationReport report;
    report.alpha = opt.meta.alpha;
    report.iterations.reserve(iterations);

    std::vector<Study> working(studies.begin(), studies.end());
    std::size_t spiked_hits = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t s = 0; s < working.size(); ++s) {
            rng::Engine eng(rng::substream(seed, rng::domain_permutation,
                                           it * working.size() + s));
            working[s].labels = permute_labels(studies[s].labels, eng);
        }
        PermutationIteration rec;
        rec.iteration = it;
        try {
            const auto res = pipeline::run_pipeline(working, catalog, opt);
            rec.tested = res.results.size();
            for (const auto& r : res.results) {
                if (r.p < opt.meta.alpha) {
                    ++rec.significant;
                    if (r.pathway == spiked_name) rec.spiked_significant = true;
                }
            }
        } catch (const Error& e) {
            if (e.code() == errc::no_pathways) {
                rec.status = PermutationIteration::Status::empty;
            } else {
                rec.status = PermutationIteration::Status::failed;
                rec.error = e.what();
                ++report.failed;
            }
        }
        if (rec.spiked_significant) ++spiked_hits;
        report.iterations.push_back(std::move(rec));
    }

    report.spiked_significant_rate =
        static_cast<double>(spiked_hits) / static_cast<double>(iterations);
    std::vector<double> counts;
    counts.reserve(iterations);
    for (const auto& rec : report.iterations) {
        if (rec.status != PermutationIteration::Status::failed) {
            counts.push_back(static_cast<double>(rec.significant));
        }
    }
    if (!counts.empty()) {
        report.min = stats::quantile(counts, 0.0);
        report.q25 = stats::quantile(counts, 0.25);
        report.median = stats::quantile(counts, 0.5);
        report.q75 = stats::quantile(counts, 0.75);
        report.max = stats::quantile(counts, 1.0);
    }
    return report;
}

} // namespace gsema::sim

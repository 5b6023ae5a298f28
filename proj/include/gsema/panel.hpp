#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gsema/error.hpp"
#include "gsema/model.hpp"
#include "gsema/stats.hpp"

/**
 * @file panel.hpp
 * @brief Post-scoring steps on pathway-score matrices: per-row
 * standardization, the low-activity filter, and cross-study alignment into
 * the panel that the meta-analysis consumes.
 */

namespace gsema::panel {

struct FilterConfig {
    // A pathway survives a study when either class median has absolute
    // activity at or above this threshold.
    double activity_threshold = 0.65;
    // Minimum number of studies a pathway must survive in to enter the
    // panel; 0 means "all studies".
    std::size_t min_studies = 0;
    // Stouffer scores are already standardized per gene; re-scaling the
    // pathway rows is redundant there and skipped by default.
    bool skip_standardization_for_zscore = true;
    // Standardize with the grand mean/SD of the whole matrix instead of
    // row-wise statistics.
    bool whole_matrix = false;

    void validate(std::size_t n_studies) const {
        if (!(activity_threshold >= 0.0)) {
            fail(errc::config_error, "activity threshold must be >= 0");
        }
        if (min_studies > n_studies) {
            fail(errc::config_error,
                 "min studies (" + std::to_string(min_studies) + ") exceeds the study count (" +
                 std::to_string(n_studies) + ")");
        }
    }
};

/**
 * Standardize a score matrix. Row mode centers and scales each pathway by
 * its own (N-1) statistics; rows without spread are unscoreable and dropped.
 * Whole-matrix mode applies one affine transform everywhere and keeps all
 * rows. Zscore matrices pass through untouched when the skip flag is set.
 */
inline PathwayScoreMatrix standardize_scores(PathwayScoreMatrix m, const FilterConfig& cfg) {
    if (cfg.skip_standardization_for_zscore && m.method == SseMethod::zscore) {
        return m;
    }
    const std::size_t n = m.scores.cols();
    if (n < 2) fail(errc::degenerate_variance, "standardization needs at least two samples");

    if (cfg.whole_matrix) {
        const auto& all = m.scores.data();
        const double mu = stats::mean(all);
        const double var = stats::sample_variance(all);
        if (!(var > 0.0)) {
            fail(errc::degenerate_variance, "score matrix for study " + m.study_id + " has no spread");
        }
        const double sd = std::sqrt(var);
        for (double& v : m.scores.data()) v = (v - mu) / sd;
        return m;
    }

    PathwayScoreMatrix out;
    out.study_id = m.study_id;
    out.method = m.method;
    out.sample_ids = m.sample_ids;
    out.dropped = std::move(m.dropped);
    out.dropped_gene_rows = m.dropped_gene_rows;

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < m.scores.rows(); ++r) {
        const double var = stats::sample_variance(m.scores.row(r));
        if (var > 0.0) {
            keep.push_back(r);
        } else {
            out.dropped.push_back({m.pathway_names[r], DropReason::degenerate_scale});
        }
    }
    if (keep.empty()) {
        fail(errc::no_pathways, "standardization left no pathways for study " + m.study_id);
    }
    out.scores = Matrix(keep.size(), n);
    out.pathway_names.reserve(keep.size());
    out.effective_set_sizes.reserve(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const std::size_t r = keep[i];
        const auto src = m.scores.row(r);
        const double mu = stats::mean(src);
        const double sd = std::sqrt(stats::sample_variance(src));
        auto dst = out.scores.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] = (src[j] - mu) / sd;
        out.pathway_names.push_back(std::move(m.pathway_names[r]));
        out.effective_set_sizes.push_back(m.effective_set_sizes[r]);
    }
    return out;
}

struct FilterRow {
    std::string pathway;
    std::string study_id;
    double control_median;
    double case_median;
    bool kept;
};

struct FilterOutcome {
    PathwayScoreMatrix matrix;
    std::vector<FilterRow> report;
};

/**
 * Low-activity filter: a pathway stays when |median| of either class
 * reaches the threshold. Emits one report row per input pathway. An empty
 * survivor set is an error; callers that tolerate it (permutation runs)
 * catch the no_pathways code.
 */
inline FilterOutcome filter_low_activity(PathwayScoreMatrix m, const ClassLabels& labels,
                                         const FilterConfig& cfg) {
    if (labels.groups.size() != m.scores.cols()) {
        fail(errc::domain_error, "labels and score matrix disagree on sample count");
    }
    std::vector<std::size_t> case_cols, ctrl_cols;
    for (std::size_t j = 0; j < labels.groups.size(); ++j) {
        (labels.groups[j] == Group::experimental ? case_cols : ctrl_cols).push_back(j);
    }
    if (case_cols.empty() || ctrl_cols.empty()) {
        fail(errc::degenerate_design, "both classes must be represented to filter");
    }

    FilterOutcome out;
    out.report.reserve(m.scores.rows());
    std::vector<std::size_t> keep;
    std::vector<double> buffer;
    for (std::size_t r = 0; r < m.scores.rows(); ++r) {
        const auto row = m.scores.row(r);
        buffer.clear();
        for (std::size_t j : ctrl_cols) buffer.push_back(row[j]);
        const double med_ctrl = stats::median(buffer);
        buffer.clear();
        for (std::size_t j : case_cols) buffer.push_back(row[j]);
        const double med_case = stats::median(buffer);
        const bool kept = std::abs(med_ctrl) >= cfg.activity_threshold ||
                          std::abs(med_case) >= cfg.activity_threshold;
        out.report.push_back({m.pathway_names[r], m.study_id, med_ctrl, med_case, kept});
        if (kept) keep.push_back(r);
    }
    if (keep.empty()) {
        fail(errc::no_pathways,
             "activity filter removed every pathway for study " + m.study_id);
    }

    PathwayScoreMatrix kept_m;
    kept_m.study_id = m.study_id;
    kept_m.method = m.method;
    kept_m.sample_ids = m.sample_ids;
    kept_m.dropped = std::move(m.dropped);
    kept_m.dropped_gene_rows = m.dropped_gene_rows;
    kept_m.scores = Matrix(keep.size(), m.scores.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const std::size_t r = keep[i];
        const auto src = m.scores.row(r);
        auto dst = kept_m.scores.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
        kept_m.pathway_names.push_back(std::move(m.pathway_names[r]));
        kept_m.effective_set_sizes.push_back(m.effective_set_sizes[r]);
    }
    out.matrix = std::move(kept_m);
    return out;
}

struct AlignedPathwayPanel {
    // Lexicographic pathway order; ties cannot occur (names are unique).
    std::vector<std::string> pathway_names;
    // Study ids in lexicographic order; this is the canonical member order
    // for every cross-study accumulation downstream.
    std::vector<std::string> study_ids;
    // presence[p][s] says whether pathway p survived in study s.
    std::vector<std::vector<std::uint8_t>> presence;
    std::vector<std::size_t> member_count;
};

/**
 * Align per-study survivor sets into the meta-analysis panel. A pathway
 * enters when it survived in at least min_studies studies (all studies when
 * min_studies is 0).
 */
inline AlignedPathwayPanel align_panel(std::span<const PathwayScoreMatrix> filtered,
                                       const FilterConfig& cfg) {
    if (filtered.empty()) fail(errc::empty_input, "no studies to align");
    cfg.validate(filtered.size());
    const std::size_t k = filtered.size();
    const std::size_t need = cfg.min_studies == 0 ? k : cfg.min_studies;

    std::vector<std::size_t> study_order(k);
    for (std::size_t s = 0; s < k; ++s) study_order[s] = s;
    std::sort(study_order.begin(), study_order.end(), [&](std::size_t a, std::size_t b) {
        return filtered[a].study_id < filtered[b].study_id;
    });
    for (std::size_t s = 1; s < k; ++s) {
        if (filtered[study_order[s - 1]].study_id == filtered[study_order[s]].study_id) {
            fail(errc::domain_error, "duplicate study id '" + filtered[study_order[s]].study_id + "'");
        }
    }

    // std::map keeps pathways lexicographic as a side effect of insertion.
    std::map<std::string, std::vector<std::uint8_t>> presence;
    for (std::size_t rank = 0; rank < k; ++rank) {
        const auto& m = filtered[study_order[rank]];
        for (const auto& name : m.pathway_names) {
            auto [it, fresh] = presence.try_emplace(name);
            if (fresh) it->second.assign(k, 0);
            it->second[rank] = 1;
        }
    }

    AlignedPathwayPanel panel;
    panel.study_ids.reserve(k);
    for (std::size_t rank = 0; rank < k; ++rank) {
        panel.study_ids.push_back(filtered[study_order[rank]].study_id);
    }
    for (auto& [name, mask] : presence) {
        std::size_t count = 0;
        for (auto bit : mask) count += bit;
        if (count >= need) {
            panel.pathway_names.push_back(name);
            panel.presence.push_back(mask);
            panel.member_count.push_back(count);
        }
    }
    if (panel.pathway_names.empty()) {
        fail(errc::no_pathways, "no pathway met the cross-study support requirement");
    }
    return panel;
}

} // namespace gsema::panel

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsema/effects.hpp"
#include "gsema/error.hpp"
#include "gsema/meta.hpp"
#include "gsema/model.hpp"
#include "gsema/panel.hpp"
#include "gsema/sse.hpp"

/**
 * @file pipeline.hpp
 * @brief End-to-end orchestration: score each study, standardize, filter,
 * align into a panel, fit per-study effects, and combine.
 */

namespace gsema::pipeline {

struct RunOptions {
    SseConfig sse;
    panel::FilterConfig filter;
    effects::EffectOptions effects;
    meta::MetaConfig meta;
    bool standardize = true; // per-row standardization before the filter
    unsigned threads = 1;
};

struct PipelineResult {
    // Raw per-study score matrices, input order.
    std::vector<PathwayScoreMatrix> scored;
    // Post-standardization, post-filter matrices, input order.
    std::vector<PathwayScoreMatrix> filtered;
    std::vector<panel::FilterRow> filter_report;
    panel::AlignedPathwayPanel panel;
    // Effect rows per panel study (canonical study order).
    std::vector<std::vector<effects::StudyEffect>> study_effects;
    std::vector<meta::MetaResult> results;
};

/**
 * Run the whole pipeline over a set of studies and one gene-set catalog.
 * Effects are fitted on each study's full post-filter matrix (the moderation
 * step pools information across that study's surviving pathways); the
 * meta-analysis then consumes the panel subset.
 */
inline PipelineResult run_pipeline(std::span<const Study> studies, const GeneSetCollection& catalog,
                                   RunOptions opt) {
    if (studies.empty()) fail(errc::empty_input, "no studies supplied");
    opt.sse.threads = opt.threads;
    opt.effects.threads = opt.threads;
    opt.filter.validate(studies.size());
    opt.meta.validate();

    PipelineResult out;
    out.scored.reserve(studies.size());
    out.filtered.reserve(studies.size());
    for (const auto& study : studies) {
        auto scores = sse::score_study(study.expression, catalog, opt.sse);
        out.scored.push_back(scores);
        if (opt.standardize) {
            scores = panel::standardize_scores(std::move(scores), opt.filter);
        }
        auto filtered = panel::filter_low_activity(std::move(scores), study.labels, opt.filter);
        out.filtered.push_back(std::move(filtered.matrix));
        out.filter_report.insert(out.filter_report.end(),
                                 filtered.report.begin(), filtered.report.end());
    }

    out.panel = panel::align_panel(out.filtered, opt.filter);

    // Panel studies are in canonical order; map back to input positions.
    std::unordered_map<std::string, std::size_t> study_pos;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        study_pos.emplace(out.filtered[i].study_id, i);
    }
    out.study_effects.reserve(out.panel.study_ids.size());
    for (const auto& id : out.panel.study_ids) {
        const std::size_t i = study_pos.at(id);
        out.study_effects.push_back(
            effects::compute_study_effects(out.filtered[i], studies[i].labels, opt.effects));
    }

    out.results = meta::run_meta(out.panel, out.study_effects, opt.meta);
    return out;
}

} // namespace gsema::pipeline

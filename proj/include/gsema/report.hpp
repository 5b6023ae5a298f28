#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "gsema/effects.hpp"
#include "gsema/error.hpp"
#include "gsema/meta.hpp"
#include "gsema/panel.hpp"
#include "gsema/simulate.hpp"
#include "gsema/tsv.hpp"

/**
 * @file report.hpp
 * @brief TSV serialization for stage outputs: per-study effects (also read
 * back, so meta-analysis can run standalone), the filter report, combined
 * results, and the permutation report. All doubles are written with 17
 * significant digits.
 */

namespace gsema::report {

inline constexpr const char* effects_header =
    "pathway\tstudy_id\tn_e\tn_c\tt\tdf\td\tg\tvar_raw";

inline std::string to_tsv(const std::vector<effects::StudyEffect>& rows) {
    std::string out = effects_header;
    out += '\n';
    for (const auto& e : rows) {
        out += e.pathway;
        out += '\t';
        out += e.study_id;
        out += '\t';
        out += std::to_string(e.n_e);
        out += '\t';
        out += std::to_string(e.n_c);
        out += '\t';
        tsv::append_double(out, e.t);
        out += '\t';
        tsv::append_double(out, e.df);
        out += '\t';
        tsv::append_double(out, e.d);
        out += '\t';
        tsv::append_double(out, e.g);
        out += '\t';
        tsv::append_double(out, e.var_raw);
        out += '\n';
    }
    return out;
}

inline void write_effects_tsv(const std::vector<effects::StudyEffect>& rows,
                              const std::filesystem::path& path) {
    tsv::write_file(path, to_tsv(rows));
}

/** Read one study's effects back; the header row is required. */
inline std::vector<effects::StudyEffect> read_effects_tsv(const std::filesystem::path& path) {
    const std::string text = tsv::read_file(path);
    const auto lines = tsv::split_lines(text);
    if (lines.empty()) fail(errc::empty_input, "effects file " + path.string() + " is empty");
    if (lines[0] != effects_header) {
        fail(errc::parse_error, "effects file " + path.string() + " has an unexpected header");
    }
    std::vector<effects::StudyEffect> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto fields = tsv::split_fields(lines[li]);
        if (fields.size() != 9) {
            fail(errc::parse_error,
                 "effects line " + std::to_string(li + 1) + " has " + std::to_string(fields.size()) +
                 " fields, expected 9");
        }
        effects::StudyEffect e;
        e.pathway = std::string(fields[0]);
        e.study_id = std::string(fields[1]);
        bool ok = tsv::parse_size(fields[2], e.n_e) && tsv::parse_size(fields[3], e.n_c) &&
                  tsv::parse_double(fields[4], e.t) && tsv::parse_double(fields[5], e.df) &&
                  tsv::parse_double(fields[6], e.d) && tsv::parse_double(fields[7], e.g) &&
                  tsv::parse_double(fields[8], e.var_raw);
        if (!ok || e.pathway.empty() || e.study_id.empty()) {
            fail(errc::parse_error, "malformed effects record at line " + std::to_string(li + 1));
        }
        rows.push_back(std::move(e));
    }
    if (rows.empty()) fail(errc::empty_input, "effects file " + path.string() + " has no records");
    return rows;
}

inline std::string to_tsv(const std::vector<panel::FilterRow>& rows) {
    std::string out = "pathway\tstudy_id\tcontrol_median\tcase_median\tkept\n";
    for (const auto& r : rows) {
        out += r.pathway;
        out += '\t';
        out += r.study_id;
        out += '\t';
        tsv::append_double(out, r.control_median);
        out += '\t';
        tsv::append_double(out, r.case_median);
        out += '\t';
        out += r.kept ? "1" : "0";
        out += '\n';
    }
    return out;
}

inline void write_filter_report(const std::vector<panel::FilterRow>& rows,
                                const std::filesystem::path& path) {
    tsv::write_file(path, to_tsv(rows));
}

inline std::string to_tsv(const std::vector<meta::MetaResult>& results) {
    std::string out =
        "pathway\tk_studies\tces\tvar_ces\ttau2\tq\tz\tpvalue\tfdr\tper_study_g\n";
    for (const auto& r : results) {
        out += r.pathway;
        out += '\t';
        out += std::to_string(r.k_studies);
        out += '\t';
        tsv::append_double(out, r.ces);
        out += '\t';
        tsv::append_double(out, r.var_ces);
        out += '\t';
        tsv::append_double(out, r.tau2);
        out += '\t';
        tsv::append_double(out, r.q);
        out += '\t';
        tsv::append_double(out, r.z);
        out += '\t';
        tsv::append_double(out, r.p);
        out += '\t';
        tsv::append_double(out, r.fdr);
        out += '\t';
        for (std::size_t i = 0; i < r.per_study_g.size(); ++i) {
            if (i > 0) out += ';';
            out += r.studies[i];
            out += '=';
            tsv::append_double(out, r.per_study_g[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_results_tsv(const std::vector<meta::MetaResult>& results,
                              const std::filesystem::path& path) {
    tsv::write_file(path, to_tsv(results));
}

inline std::string to_tsv(const sim::PermutationReport& report) {
    std::string out = "iteration\tstatus\ttested\tsignificant\tspiked_significant\terror\n";
    for (const auto& rec : report.iterations) {
        out += std::to_string(rec.iteration);
        out += '\t';
        switch (rec.status) {
            case sim::PermutationIteration::Status::ok: out += "ok"; break;
            case sim::PermutationIteration::Status::empty: out += "empty"; break;
            case sim::PermutationIteration::Status::failed: out += "failed"; break;
        }
        out += '\t';
        out += std::to_string(rec.tested);
        out += '\t';
        out += std::to_string(rec.significant);
        out += '\t';
        out += rec.spiked_significant ? "1" : "0";
        out += '\t';
        out += rec.error;
        out += '\n';
    }
    return out;
}

inline void write_permutation_report(const sim::PermutationReport& report,
                                     const std::filesystem::path& path) {
    tsv::write_file(path, to_tsv(report));
}

} // namespace gsema::report

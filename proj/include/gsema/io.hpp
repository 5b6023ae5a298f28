#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gsema/error.hpp"
#include "gsema/model.hpp"
#include "gsema/tsv.hpp"

/**
 * @file io.hpp
 * @brief Readers and writers for the on-disk formats.
 *
 * Expression matrices are TSV with a `gene_id` header column followed by one
 * column per sample. Labels are headerless two-column TSV (sample id, then
 * `case` or `control`, case-insensitive). Gene sets use GMT. Study manifests
 * are TSV with columns study_id / expression_path / labels_path; relative
 * paths resolve against the manifest's directory.
 *
 * Numeric output is written with 17 significant digits, so write followed by
 * read reproduces every finite double bit-for-bit.
 */

namespace gsema::io {

namespace detail {

inline std::string position(std::size_t row, std::size_t col) {
    return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

} // namespace detail

/**
 * Parse a gene-by-sample expression matrix. Data coordinates in error
 * messages are 1-based and exclude the header line and gene column.
 */
inline ExpressionMatrix parse_expression_tsv(const std::filesystem::path& path, std::string study_id = "") {
    const std::string text = tsv::read_file(path);
    const auto lines = tsv::split_lines(text);
    if (lines.empty()) fail(errc::empty_input, "expression file " + path.string() + " is empty");

    ExpressionMatrix m;
    m.study_id = study_id.empty() ? path.stem().string() : std::move(study_id);

    const auto header = tsv::split_fields(lines[0]);
    if (header.size() < 2) {
        fail(errc::empty_input, "expression file " + path.string() + " has no sample columns");
    }
    m.sample_ids.reserve(header.size() - 1);
    std::unordered_set<std::string_view> seen_samples;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) {
            fail(errc::parse_error, "empty sample id in header column " + std::to_string(c + 1));
        }
        if (!seen_samples.insert(header[c]).second) {
            fail(errc::parse_error, "duplicate sample id '" + std::string(header[c]) + "'");
        }
        m.sample_ids.emplace_back(header[c]);
    }

    const std::size_t n_samples = m.sample_ids.size();
    std::unordered_map<std::string_view, std::size_t> seen_genes;
    std::vector<double> values;
    std::size_t n_genes = 0;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto fields = tsv::split_fields(lines[li]);
        const std::size_t row = n_genes + 1;
        if (fields.size() != n_samples + 1) {
            fail(errc::parse_error,
                 "row " + std::to_string(row) + " has " + std::to_string(fields.size() - 1) +
                 " values, expected " + std::to_string(n_samples));
        }
        if (fields[0].empty()) {
            fail(errc::parse_error, "missing gene id at row " + std::to_string(row));
        }
        if (!seen_genes.emplace(fields[0], row).second) {
            fail(errc::duplicate_gene, "gene '" + std::string(fields[0]) + "' appears more than once");
        }
        for (std::size_t c = 1; c < fields.size(); ++c) {
            double v;
            if (!tsv::parse_double(fields[c], v)) {
                fail(errc::parse_error,
                     "malformed value '" + std::string(fields[c]) + "' at " + detail::position(row, c));
            }
            if (!std::isfinite(v)) {
                fail(errc::parse_error, "non-finite value at " + detail::position(row, c));
            }
            values.push_back(v);
        }
        m.gene_ids.emplace_back(fields[0]);
        ++n_genes;
    }
    if (n_genes == 0) fail(errc::empty_input, "expression file " + path.string() + " has no gene rows");

    m.values = Matrix(n_genes, n_samples);
    m.values.data() = std::move(values);
    return m;
}

inline std::string to_tsv(const ExpressionMatrix& m) {
    std::string out;
    out.reserve(m.values.rows() * (m.values.cols() * 20 + 24));
    out += "gene_id";
    for (const auto& s : m.sample_ids) {
        out += '\t';
        out += s;
    }
    out += '\n';
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        out += m.gene_ids[r];
        for (std::size_t c = 0; c < m.values.cols(); ++c) {
            out += '\t';
            tsv::append_double(out, m.values(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_expression_tsv(const ExpressionMatrix& m, const std::filesystem::path& path) {
    tsv::write_file(path, to_tsv(m));
}

/**
 * Parse a GMT gene-set catalog: one set per line, name, description, then
 * member genes. Within-set repeats are dropped (first occurrence wins) and
 * counted; a repeated set name is an error. Catalog order is preserved.
 */
inline GeneSetCollection parse_gmt(const std::filesystem::path& path) {
    const std::string text = tsv::read_file(path);
    const auto lines = tsv::split_lines(text);

    GeneSetCollection catalog;
    std::unordered_set<std::string_view> seen_names;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto fields = tsv::split_fields(lines[li]);
        if (fields.size() < 3) {
            fail(errc::parse_error,
                 "gmt line " + std::to_string(li + 1) + " has fewer than 3 tab-separated fields");
        }
        if (fields[0].empty()) {
            fail(errc::parse_error, "gmt line " + std::to_string(li + 1) + " has an empty set name");
        }
        if (!seen_names.insert(fields[0]).second) {
            fail(errc::duplicate_set, "gene set '" + std::string(fields[0]) + "' appears more than once");
        }
        GeneSet set;
        set.name = std::string(fields[0]);
        set.description = std::string(fields[1]);
        std::unordered_set<std::string_view> members;
        for (std::size_t f = 2; f < fields.size(); ++f) {
            if (fields[f].empty()) continue;
            if (!members.insert(fields[f]).second) {
                ++catalog.duplicate_genes_dropped;
                continue;
            }
            set.genes.emplace_back(fields[f]);
        }
        if (set.genes.empty()) {
            fail(errc::parse_error, "gmt line " + std::to_string(li + 1) + " lists no genes");
        }
        catalog.sets.push_back(std::move(set));
    }
    if (catalog.sets.empty()) fail(errc::empty_input, "gmt file " + path.string() + " defines no gene sets");
    return catalog;
}

inline void write_gmt(const GeneSetCollection& catalog, const std::filesystem::path& path) {
    std::string out;
    for (const auto& set : catalog.sets) {
        out += set.name;
        out += '\t';
        out += set.description;
        for (const auto& g : set.genes) {
            out += '\t';
            out += g;
        }
        out += '\n';
    }
    tsv::write_file(path, out);
}

/**
 * Parse class labels and align them to the matrix's sample order. The file
 * must cover exactly the matrix's sample set, and both classes need at least
 * two members.
 */
inline ClassLabels parse_labels(const std::filesystem::path& path, const ExpressionMatrix& matrix) {
    const std::string text = tsv::read_file(path);
    const auto lines = tsv::split_lines(text);

    std::unordered_map<std::string, Group> by_sample;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto fields = tsv::split_fields(lines[li]);
        if (fields.size() != 2 || fields[0].empty()) {
            fail(errc::parse_error, "labels line " + std::to_string(li + 1) + " is not `sample<TAB>group`");
        }
        const std::string token = detail::lower(fields[1]);
        Group g;
        if (token == "case") {
            g = Group::experimental;
        } else if (token == "control") {
            g = Group::control;
        } else {
            fail(errc::parse_error,
                 "labels line " + std::to_string(li + 1) + " has group '" + std::string(fields[1]) +
                 "' (expected case or control)");
        }
        if (!by_sample.emplace(std::string(fields[0]), g).second) {
            fail(errc::parse_error, "sample '" + std::string(fields[0]) + "' is labeled twice");
        }
    }
    if (by_sample.empty()) fail(errc::empty_input, "labels file " + path.string() + " is empty");

    ClassLabels labels;
    labels.sample_ids = matrix.sample_ids;
    labels.groups.reserve(matrix.sample_ids.size());
    for (const auto& sample : matrix.sample_ids) {
        auto it = by_sample.find(sample);
        if (it == by_sample.end()) {
            fail(errc::missing_label, "sample '" + sample + "' has no label");
        }
        labels.groups.push_back(it->second);
    }
    if (by_sample.size() != matrix.sample_ids.size()) {
        for (const auto& [sample, g] : by_sample) {
            (void)g;
            bool known = false;
            for (const auto& s : matrix.sample_ids) {
                if (s == sample) { known = true; break; }
            }
            if (!known) {
                fail(errc::parse_error, "labels file names unknown sample '" + sample + "'");
            }
        }
    }
    const std::size_t n_case = labels.count(Group::experimental);
    const std::size_t n_ctrl = labels.count(Group::control);
    if (n_case < 2 || n_ctrl < 2) {
        fail(errc::degenerate_design,
             "need at least two samples per class (got " + std::to_string(n_case) + " case, " +
             std::to_string(n_ctrl) + " control)");
    }
    return labels;
}

inline void write_labels_tsv(const ClassLabels& labels, const std::filesystem::path& path) {
    std::string out;
    for (std::size_t i = 0; i < labels.sample_ids.size(); ++i) {
        out += labels.sample_ids[i];
        out += '\t';
        out += labels.groups[i] == Group::experimental ? "case" : "control";
        out += '\n';
    }
    tsv::write_file(path, out);
}

/**
 * Parse a study manifest. A header row is recognized by its first cell being
 * literally `study_id` and skipped. Study ids must be unique and non-empty.
 */
inline StudyManifest load_manifest(const std::filesystem::path& path) {
    const std::string text = tsv::read_file(path);
    const auto lines = tsv::split_lines(text);

    StudyManifest manifest;
    std::unordered_set<std::string> seen;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto fields = tsv::split_fields(lines[li]);
        if (li == 0 && !fields.empty() && fields[0] == "study_id") continue;
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            fail(errc::parse_error,
                 "manifest line " + std::to_string(li + 1) +
                 " is not `study_id<TAB>expression_path<TAB>labels_path`");
        }
        if (!seen.insert(std::string(fields[0])).second) {
            fail(errc::parse_error, "study id '" + std::string(fields[0]) + "' appears more than once");
        }
        manifest.entries.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
    }
    if (manifest.entries.empty()) fail(errc::empty_input, "manifest " + path.string() + " lists no studies");
    return manifest;
}

inline void write_manifest(const StudyManifest& manifest, const std::filesystem::path& path) {
    std::string out = "study_id\texpression_path\tlabels_path\n";
    for (const auto& e : manifest.entries) {
        out += e.study_id;
        out += '\t';
        out += e.expression_path;
        out += '\t';
        out += e.labels_path;
        out += '\n';
    }
    tsv::write_file(path, out);
}

/**
 * Load every study named by a manifest. Any failure is rethrown with the
 * offending study id prefixed so multi-study runs pinpoint the culprit.
 */
inline std::vector<Study> load_studies(const StudyManifest& manifest, const std::filesystem::path& base_dir) {
    std::vector<Study> studies;
    studies.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries) {
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp : base_dir / fp;
        };
        try {
            Study s;
            s.expression = parse_expression_tsv(resolve(entry.expression_path), entry.study_id);
            s.labels = parse_labels(resolve(entry.labels_path), s.expression);
            studies.push_back(std::move(s));
        } catch (const Error& e) {
            throw Error(e.code(), "study " + entry.study_id + ": " + e.what());
        }
    }
    return studies;
}

inline std::string to_tsv(const PathwayScoreMatrix& m) {
    std::string out = "pathway";
    for (const auto& s : m.sample_ids) {
        out += '\t';
        out += s;
    }
    out += '\n';
    for (std::size_t r = 0; r < m.scores.rows(); ++r) {
        out += m.pathway_names[r];
        for (std::size_t c = 0; c < m.scores.cols(); ++c) {
            out += '\t';
            tsv::append_double(out, m.scores(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_scores_tsv(const PathwayScoreMatrix& m, const std::filesystem::path& path) {
    tsv::write_file(path, to_tsv(m));
}

} // namespace gsema::io

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsema/error.hpp"

/**
 * @file model.hpp
 * @brief Core value types passed between pipeline stages.
 */

namespace gsema {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Group : unsigned char { experimental, control };

// Sample order always matches the paired expression (or score) matrix.
struct ClassLabels {
    std::vector<std::string> sample_ids;
    std::vector<Group> groups;

    std::size_t count(Group g) const {
        std::size_t n = 0;
        for (Group x : groups) n += (x == g) ? 1 : 0;
        return n;
    }
};

struct ExpressionMatrix {
    std::string study_id;
    std::vector<std::string> gene_ids;
    std::vector<std::string> sample_ids;
    Matrix values; // genes x samples
};

struct GeneSet {
    std::string name;
    std::string description;
    std::vector<std::string> genes; // deduplicated, catalog order preserved
};

struct GeneSetCollection {
    std::vector<GeneSet> sets;
    std::size_t duplicate_genes_dropped = 0; // within-set repeats removed at parse time
};

struct Study {
    ExpressionMatrix expression;
    ClassLabels labels;
};

struct ManifestEntry {
    std::string study_id;
    std::string expression_path;
    std::string labels_path;
};

struct StudyManifest {
    std::vector<ManifestEntry> entries;
};

enum class SseMethod { zscore, ssgsea, gsva, singscore };

inline const char* to_string(SseMethod m) {
    switch (m) {
        case SseMethod::zscore: return "zscore";
        case SseMethod::ssgsea: return "ssgsea";
        case SseMethod::gsva: return "gsva";
        case SseMethod::singscore: return "singscore";
    }
    return "?";
}

inline SseMethod sse_method_from_string(std::string_view name) {
    if (name == "zscore") return SseMethod::zscore;
    if (name == "ssgsea") return SseMethod::ssgsea;
    if (name == "gsva") return SseMethod::gsva;
    if (name == "singscore") return SseMethod::singscore;
    fail(errc::config_error, "unknown scoring method '" + std::string(name) + "'");
}

enum class GsvaKernel { gaussian, poisson };

inline const char* to_string(GsvaKernel k) {
    return k == GsvaKernel::gaussian ? "gaussian" : "poisson";
}

inline GsvaKernel gsva_kernel_from_string(std::string_view name) {
    if (name == "gaussian") return GsvaKernel::gaussian;
    if (name == "poisson") return GsvaKernel::poisson;
    fail(errc::config_error, "unknown gsva kernel '" + std::string(name) + "'");
}

struct SseConfig {
    SseMethod method = SseMethod::zscore;
    double ssgsea_weight_exponent = 0.25;
    GsvaKernel gsva_kernel = GsvaKernel::gaussian;
    double gsva_bandwidth_factor = 0.25;
    bool gsva_max_diff = true;
    bool singscore_directed = true;
    std::size_t min_set_size = 7;
    unsigned threads = 1;

    void validate() const {
        if (!(ssgsea_weight_exponent >= 0.0)) {
            fail(errc::config_error, "ssgsea weight exponent must be >= 0");
        }
        if (!(gsva_bandwidth_factor > 0.0)) {
            fail(errc::config_error, "gsva bandwidth factor must be > 0");
        }
        if (min_set_size < 1) {
            fail(errc::config_error, "minimum set size must be >= 1");
        }
    }
};

enum class DropReason {
    empty_intersection,   // no set member measured in the study
    below_min_size,       // intersection smaller than the configured floor
    covers_all_genes,     // no out-of-set background remains
    degenerate_scale,     // normalization span collapsed to zero
};

inline const char* to_string(DropReason r) {
    switch (r) {
        case DropReason::empty_intersection: return "empty_intersection";
        case DropReason::below_min_size: return "below_min_size";
        case DropReason::covers_all_genes: return "covers_all_genes";
        case DropReason::degenerate_scale: return "degenerate_scale";
    }
    return "?";
}

struct DroppedPathway {
    std::string name;
    DropReason reason;
};

struct PathwayScoreMatrix {
    std::string study_id;
    SseMethod method = SseMethod::zscore;
    std::vector<std::string> pathway_names;
    std::vector<std::string> sample_ids;
    Matrix scores; // pathways x samples
    std::vector<std::size_t> effective_set_sizes; // per retained pathway
    std::vector<DroppedPathway> dropped;
    std::size_t dropped_gene_rows = 0; // rows unusable for the method (e.g. zero spread)
};

} // namespace gsema

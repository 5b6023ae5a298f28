#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gsema/error.hpp"
#include "gsema/model.hpp"
#include "gsema/parallel.hpp"
#include "gsema/stats.hpp"

/**
 * @file sse.hpp
 * @brief Single-sample enrichment: collapse a gene-by-sample expression
 * matrix into a pathway-by-sample score matrix.
 *
 * Four methods are provided. `zscore` combines per-gene standardized values
 * by Stouffer's scheme. `ssgsea` integrates a weighted running enrichment
 * walk over the per-sample magnitude ranking. `gsva` first maps each gene to
 * an empirical-CDF statistic across samples (Gaussian or Poisson kernel),
 * then scores a symmetric-weight KS walk over the per-sample ranking of
 * those statistics. `singscore` normalizes mean ranks against their
 * theoretical extremes, giving scores in [-0.5, 0.5].
 *
 * Determinism contract: ranking ties break by ascending gene row, set
 * members accumulate in a fixed canonical order (catalog order for value
 * sums, walk order for enrichment walks), and parallel workers write
 * disjoint slots. Scores are therefore bit-identical across thread counts
 * and, when values are distinct, across input row permutations.
 */

namespace gsema::sse {

namespace detail {

struct ResolvedSets {
    std::vector<std::string> names;
    // Positions into the usable-gene list, in catalog member order.
    std::vector<std::vector<std::uint32_t>> members;
    std::vector<std::size_t> effective;
    std::vector<DroppedPathway> dropped;
};

/**
 * Intersect each catalog set with the usable genes of one study. Sets fall
 * out when the intersection is empty, smaller than the configured floor, or
 * spans every usable gene (leaving no background).
 */
inline ResolvedSets resolve_sets(const GeneSetCollection& catalog,
                                 const std::vector<std::string>& usable_genes,
                                 std::size_t min_set_size) {
    std::unordered_map<std::string_view, std::uint32_t> index;
    index.reserve(usable_genes.size() * 2);
    for (std::uint32_t i = 0; i < usable_genes.size(); ++i) index.emplace(usable_genes[i], i);

    ResolvedSets rs;
    for (const auto& set : catalog.sets) {
        std::vector<std::uint32_t> pos;
        pos.reserve(set.genes.size());
        for (const auto& g : set.genes) {
            auto it = index.find(g);
            if (it != index.end()) pos.push_back(it->second);
        }
        if (pos.empty()) {
            rs.dropped.push_back({set.name, DropReason::empty_intersection});
        } else if (pos.size() < min_set_size) {
            rs.dropped.push_back({set.name, DropReason::below_min_size});
        } else if (pos.size() >= usable_genes.size()) {
            rs.dropped.push_back({set.name, DropReason::covers_all_genes});
        } else {
            rs.effective.push_back(pos.size());
            rs.members.push_back(std::move(pos));
            rs.names.push_back(set.name);
        }
    }
    return rs;
}

// Moves the bookkeeping fields of `rs` into the output; rs.members stays
// valid for the caller's scoring loop.
inline PathwayScoreMatrix make_output(const ExpressionMatrix& m, const SseConfig& cfg,
                                      ResolvedSets& rs, std::size_t dropped_rows) {
    if (rs.names.empty()) {
        fail(errc::no_pathways, "no gene set survives intersection with study " + m.study_id);
    }
    PathwayScoreMatrix out;
    out.study_id = m.study_id;
    out.method = cfg.method;
    out.pathway_names = std::move(rs.names);
    out.sample_ids = m.sample_ids;
    out.scores = Matrix(out.pathway_names.size(), m.sample_ids.size());
    out.effective_set_sizes = std::move(rs.effective);
    out.dropped = std::move(rs.dropped);
    out.dropped_gene_rows = dropped_rows;
    return out;
}

// Member walk positions in ascending order; this is the canonical
// accumulation order for enrichment walks.
inline std::vector<std::size_t> walk_positions(const std::vector<std::uint32_t>& members,
                                               const std::vector<std::size_t>& position_of_gene) {
    std::vector<std::size_t> out;
    out.reserve(members.size());
    for (std::uint32_t g : members) out.push_back(position_of_gene[g]);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

/**
 * Stouffer combination of per-gene standardized expression: each usable row
 * is centered and scaled by its own (N-1) statistics, and a pathway score is
 * the member sum divided by sqrt(effective size). Rows without spread carry
 * no signal and are dropped before set intersection.
 */
inline PathwayScoreMatrix score_zscore(const ExpressionMatrix& m, const GeneSetCollection& catalog,
                                       const SseConfig& cfg) {
    const std::size_t n = m.sample_ids.size();
    std::vector<std::string> usable_ids;
    std::vector<std::size_t> usable_rows;
    std::vector<double> mu, sd;
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        if (n < 2) continue;
        const auto row = m.values.row(r);
        const double rv = stats::sample_variance(row);
        if (rv > 0.0) {
            usable_ids.push_back(m.gene_ids[r]);
            usable_rows.push_back(r);
            mu.push_back(stats::mean(row));
            sd.push_back(std::sqrt(rv));
        }
    }
    auto rs = detail::resolve_sets(catalog, usable_ids, cfg.min_set_size);
    auto out = detail::make_output(m, cfg, rs, m.values.rows() - usable_rows.size());

    Matrix z(usable_rows.size(), n);
    parallel_for(usable_rows.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t u = begin; u < end; ++u) {
            const auto src = m.values.row(usable_rows[u]);
            auto dst = z.row(u);
            for (std::size_t j = 0; j < n; ++j) dst[j] = (src[j] - mu[u]) / sd[u];
        }
    });

    parallel_for(rs.members.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            auto dst = out.scores.row(p);
            for (std::uint32_t u : rs.members[p]) {
                const auto zrow = z.row(u);
                for (std::size_t j = 0; j < n; ++j) dst[j] += zrow[j];
            }
            const double denom = std::sqrt(static_cast<double>(rs.members[p].size()));
            for (std::size_t j = 0; j < n; ++j) dst[j] /= denom;
        }
    });
    return out;
}

/**
 * Weighted-KS running enrichment, one column at a time. Genes are ordered by
 * decreasing expression magnitude; in-set steps climb by the normalized rank
 * weight (G - position)^alpha, out-of-set steps descend by 1/(G - s). The
 * score is the sum of the running deviation over all positions, evaluated in
 * closed form over the member hit positions.
 */
inline PathwayScoreMatrix score_ssgsea(const ExpressionMatrix& m, const GeneSetCollection& catalog,
                                       const SseConfig& cfg) {
    const std::size_t n_genes = m.values.rows();
    const std::size_t n = m.sample_ids.size();
    auto rs = detail::resolve_sets(catalog, m.gene_ids, cfg.min_set_size);
    auto out = detail::make_output(m, cfg, rs, 0);

    const double alpha = cfg.ssgsea_weight_exponent;
    const double total = static_cast<double>(n_genes);
    const double all_positions = total * (total + 1.0) / 2.0; // sum of (G - t) over the walk

    parallel_for(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> magnitude(n_genes);
        std::vector<std::size_t> position(n_genes);
        for (std::size_t j = begin; j < end; ++j) {
            for (std::size_t r = 0; r < n_genes; ++r) magnitude[r] = std::abs(m.values(r, j));
            const auto ord = stats::order(magnitude, true);
            for (std::size_t t = 0; t < ord.size(); ++t) position[ord[t]] = t;

            for (std::size_t p = 0; p < rs.members.size(); ++p) {
                const auto q = detail::walk_positions(rs.members[p], position);
                const double s = static_cast<double>(q.size());
                double weight_sum = 0.0;
                double weighted_area = 0.0; // sum over hits of weight * positions remaining
                double hit_area = 0.0;
                for (std::size_t u : q) {
                    const double remaining = total - static_cast<double>(u);
                    const double w = std::pow(remaining, alpha); // rank value is G - position
                    weight_sum += w;
                    weighted_area += w * remaining;
                    hit_area += remaining;
                }
                const double in_area = weighted_area / weight_sum;
                const double out_area = (all_positions - hit_area) / (total - s);
                out.scores(p, j) = in_area - out_area;
            }
        }
    });
    return out;
}

namespace detail {

// Gaussian-kernel empirical CDF statistic per gene; bandwidth scales with
// the row's own spread. Rows without spread are unusable.
inline void gsva_gaussian_stat(const ExpressionMatrix& m, double bandwidth_factor, unsigned threads,
                               std::vector<std::string>& usable_ids, Matrix& stat) {
    const std::size_t n = m.sample_ids.size();
    std::vector<std::size_t> rows;
    std::vector<double> bandwidth;
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        if (n < 2) continue;
        const double rv = stats::sample_variance(m.values.row(r));
        if (rv > 0.0) {
            rows.push_back(r);
            bandwidth.push_back(bandwidth_factor * std::sqrt(rv));
            usable_ids.push_back(m.gene_ids[r]);
        }
    }
    stat = Matrix(rows.size(), n);
    parallel_for(rows.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t u = begin; u < end; ++u) {
            const auto src = m.values.row(rows[u]);
            auto dst = stat.row(u);
            const double inv_h = 1.0 / bandwidth[u];
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += stats::normal_cdf((src[j] - src[k]) * inv_h);
                }
                dst[j] = acc / static_cast<double>(n);
            }
        }
    });
}

// Poisson-kernel statistic; demands nonnegative integer counts.
inline void gsva_poisson_stat(const ExpressionMatrix& m, unsigned threads,
                              std::vector<std::string>& usable_ids, Matrix& stat) {
    const std::size_t n = m.sample_ids.size();
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        const auto row = m.values.row(r);
        for (std::size_t j = 0; j < n; ++j) {
            if (!(row[j] >= 0.0) || row[j] != std::floor(row[j])) {
                fail(errc::invalid_kernel,
                     "poisson kernel requires nonnegative integer counts (gene '" + m.gene_ids[r] + "')");
            }
        }
    }
    usable_ids = m.gene_ids;
    stat = Matrix(m.values.rows(), n);
    parallel_for(m.values.rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto src = m.values.row(r);
            auto dst = stat.row(r);
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += stats::poisson_cdf(src[j], src[k] + 0.5);
                }
                dst[j] = acc / static_cast<double>(n);
            }
        }
    });
}

} // namespace detail

/**
 * Kernel-CDF transform followed by a symmetric-weight KS walk. Within each
 * sample the transformed statistics are ranked in decreasing order; in-set
 * positions climb by weights |G/2 - rank| (normalized), out-of-set positions
 * descend by 1/(G - s). With max_diff the score adds the largest positive
 * and largest negative deviations; otherwise it is the single deviation of
 * greatest magnitude (positive wins exact ties).
 */
inline PathwayScoreMatrix score_gsva(const ExpressionMatrix& m, const GeneSetCollection& catalog,
                                     const SseConfig& cfg) {
    std::vector<std::string> usable_ids;
    Matrix stat;
    if (cfg.gsva_kernel == GsvaKernel::gaussian) {
        detail::gsva_gaussian_stat(m, cfg.gsva_bandwidth_factor, cfg.threads, usable_ids, stat);
    } else {
        detail::gsva_poisson_stat(m, cfg.threads, usable_ids, stat);
    }
    auto rs = detail::resolve_sets(catalog, usable_ids, cfg.min_set_size);
    auto out = detail::make_output(m, cfg, rs, m.values.rows() - usable_ids.size());

    const std::size_t n = m.sample_ids.size();
    const std::size_t n_usable = stat.rows();
    const double total = static_cast<double>(n_usable);

    parallel_for(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> column(n_usable);
        std::vector<std::size_t> position(n_usable);
        std::vector<double> weight(n_usable); // indexed by walk position
        for (std::size_t j = begin; j < end; ++j) {
            for (std::size_t u = 0; u < n_usable; ++u) column[u] = stat(u, j);
            const auto ord = stats::order(column, true);
            for (std::size_t t = 0; t < ord.size(); ++t) {
                position[ord[t]] = t;
                weight[t] = std::abs(total / 2.0 - static_cast<double>(t + 1));
            }

            for (std::size_t p = 0; p < rs.members.size(); ++p) {
                const auto q = detail::walk_positions(rs.members[p], position);
                const double s = static_cast<double>(q.size());
                const double down = 1.0 / (total - s);
                double weight_sum = 0.0;
                for (std::size_t u : q) weight_sum += weight[u];

                double level = 0.0;
                double max_dev = 0.0;
                double min_dev = 0.0;
                for (std::size_t u = 0; u < q.size(); ++u) {
                    const double outside = static_cast<double>(q[u] - u); // out-of-set steps so far
                    min_dev = std::min(min_dev, level - outside * down);
                    level += weight_sum > 0.0 ? weight[q[u]] / weight_sum : 0.0;
                    max_dev = std::max(max_dev, level - outside * down);
                }
                double score;
                if (cfg.gsva_max_diff) {
                    score = max_dev + min_dev;
                } else {
                    score = (max_dev >= -min_dev) ? max_dev : min_dev;
                }
                out.scores(p, j) = score;
            }
        }
    });
    return out;
}

/**
 * Rank-normalization against theoretical extremes. Directed mode averages
 * raw ascending ranks of the members; undirected mode averages the folded
 * distance |rank - (G+1)/2|. Both are affinely mapped so the attainable
 * range is exactly [-0.5, 0.5].
 */
inline PathwayScoreMatrix score_singscore(const ExpressionMatrix& m, const GeneSetCollection& catalog,
                                          const SseConfig& cfg) {
    const std::size_t n_genes = m.values.rows();
    const std::size_t n = m.sample_ids.size();
    auto rs = detail::resolve_sets(catalog, m.gene_ids, cfg.min_set_size);

    const double total = static_cast<double>(n_genes);

    // Undirected extremes come from the folded-rank multiset, which depends
    // only on G; prefix sums over its sorted order serve every set size.
    std::vector<double> folded_prefix;
    if (!cfg.singscore_directed) {
        std::vector<double> folded(n_genes);
        const double center = (total + 1.0) / 2.0;
        for (std::size_t r = 0; r < n_genes; ++r) {
            folded[r] = std::abs(static_cast<double>(r + 1) - center);
        }
        std::sort(folded.begin(), folded.end());
        folded_prefix.assign(n_genes + 1, 0.0);
        for (std::size_t i = 0; i < n_genes; ++i) folded_prefix[i + 1] = folded_prefix[i] + folded[i];

        // A collapsed normalization span cannot be scored; shed those sets.
        detail::ResolvedSets kept;
        kept.dropped = std::move(rs.dropped);
        for (std::size_t p = 0; p < rs.members.size(); ++p) {
            const std::size_t s = rs.members[p].size();
            const double lo = folded_prefix[s] / static_cast<double>(s);
            const double hi = (folded_prefix[n_genes] - folded_prefix[n_genes - s]) / static_cast<double>(s);
            if (hi - lo > 0.0) {
                kept.names.push_back(std::move(rs.names[p]));
                kept.members.push_back(std::move(rs.members[p]));
                kept.effective.push_back(rs.effective[p]);
            } else {
                kept.dropped.push_back({std::move(rs.names[p]), DropReason::degenerate_scale});
            }
        }
        rs = std::move(kept);
    }

    auto out = detail::make_output(m, cfg, rs, 0);

    parallel_for(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> column(n_genes);
        std::vector<double> rank(n_genes);
        for (std::size_t j = begin; j < end; ++j) {
            for (std::size_t r = 0; r < n_genes; ++r) column[r] = m.values(r, j);
            const auto ord = stats::order(column, false);
            for (std::size_t t = 0; t < ord.size(); ++t) rank[ord[t]] = static_cast<double>(t + 1);

            for (std::size_t p = 0; p < rs.members.size(); ++p) {
                const double s = static_cast<double>(rs.members[p].size());
                double score;
                if (cfg.singscore_directed) {
                    double rank_sum = 0.0; // integer-valued, exact
                    for (std::uint32_t g : rs.members[p]) rank_sum += rank[g];
                    const double mean_rank = rank_sum / s;
                    const double lo = (s + 1.0) / 2.0;
                    const double hi = (2.0 * total - s + 1.0) / 2.0;
                    score = (mean_rank - lo) / (hi - lo) - 0.5;
                } else {
                    const double center = (total + 1.0) / 2.0;
                    double folded_sum = 0.0; // multiples of 0.5, exact
                    for (std::uint32_t g : rs.members[p]) folded_sum += std::abs(rank[g] - center);
                    const std::size_t si = rs.members[p].size();
                    const double lo = folded_prefix[si] / s;
                    const double hi = (folded_prefix[n_genes] - folded_prefix[n_genes - si]) / s;
                    score = (folded_sum / s - lo) / (hi - lo) - 0.5;
                }
                out.scores(p, j) = score;
            }
        }
    });
    return out;
}

/** Dispatch on the configured method. */
inline PathwayScoreMatrix score_study(const ExpressionMatrix& m, const GeneSetCollection& catalog,
                                      const SseConfig& cfg) {
    cfg.validate();
    if (m.values.rows() == 0 || m.sample_ids.empty()) {
        fail(errc::empty_input, "study " + m.study_id + " has no data to score");
    }
    switch (cfg.method) {
        case SseMethod::zscore: return score_zscore(m, catalog, cfg);
        case SseMethod::ssgsea: return score_ssgsea(m, catalog, cfg);
        case SseMethod::gsva: return score_gsva(m, catalog, cfg);
        case SseMethod::singscore: return score_singscore(m, catalog, cfg);
    }
    fail(errc::config_error, "unhandled scoring method");
}

} // namespace gsema::sse

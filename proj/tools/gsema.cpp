// Command-line front end: run (full pipeline), score (one study), meta
// (combine saved effect tables), simulate (synthetic studies), permute
// (label-permutation suite). Diagnostics go to standard error; data goes to
// files or standard output. Exit codes: 0 success, 2 configuration problem,
// 3 input-data problem, 4 numeric degeneracy.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsema/gsema.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gsema;

namespace {

constexpr const char* gsema_version = "0.1.0";

int exit_code_for(errc code) {
    switch (code) {
        case errc::config_error:
        case errc::invalid_kernel:
            return 2;
        case errc::parse_error:
        case errc::duplicate_gene:
        case errc::duplicate_set:
        case errc::missing_label:
        case errc::degenerate_design:
        case errc::empty_input:
        case errc::io_error:
            return 3;
        case errc::domain_error:
        case errc::degenerate_variance:
        case errc::no_pathways:
            return 4;
    }
    return 1;
}

// Flag bundles mirror the config structs; strings are converted (and
// validated) once parsing is done.

struct SseFlags {
    std::string method = "zscore";
    std::size_t min_set_size = 7;
    double ssgsea_exponent = 0.25;
    std::string gsva_kernel = "gaussian";
    double gsva_bandwidth = 0.25;
    bool gsva_classic = false;
    bool singscore_undirected = false;
    unsigned threads = 1;
};

void add_sse_flags(CLI::App* cmd, SseFlags& f) {
    cmd->add_option("--sse", f.method, "Scoring method: zscore, ssgsea, gsva, or singscore")
        ->capture_default_str();
    cmd->add_option("--min-set-size", f.min_set_size,
                    "Smallest per-study gene-set intersection that is scored")
        ->capture_default_str();
    cmd->add_option("--ssgsea-exponent", f.ssgsea_exponent, "ssGSEA rank weight exponent")
        ->capture_default_str();
    cmd->add_option("--gsva-kernel", f.gsva_kernel, "GSVA kernel: gaussian or poisson")
        ->capture_default_str();
    cmd->add_option("--gsva-bandwidth-factor", f.gsva_bandwidth,
                    "GSVA gaussian bandwidth as a fraction of each gene's SD")
        ->capture_default_str();
    cmd->add_flag("--gsva-classic", f.gsva_classic,
                  "Score GSVA by the largest single deviation instead of max + min");
    cmd->add_flag("--singscore-undirected", f.singscore_undirected,
                  "Rank genes by folded (undirected) distance from the middle rank");
    cmd->add_option("--threads", f.threads, "Worker threads (0 = all hardware threads)")
        ->capture_default_str();
}

SseConfig to_sse_config(const SseFlags& f) {
    SseConfig cfg;
    cfg.method = sse_method_from_string(f.method);
    cfg.min_set_size = f.min_set_size;
    cfg.ssgsea_weight_exponent = f.ssgsea_exponent;
    cfg.gsva_kernel = gsva_kernel_from_string(f.gsva_kernel);
    cfg.gsva_bandwidth_factor = f.gsva_bandwidth;
    cfg.gsva_max_diff = !f.gsva_classic;
    cfg.singscore_directed = !f.singscore_undirected;
    cfg.threads = f.threads;
    cfg.validate();
    return cfg;
}

struct PipelineFlags {
    SseFlags sse;
    double filter_threshold = 0.65;
    std::size_t min_studies = 0;
    bool no_standardize = false;
    bool standardize_matrix = false;
    bool ordinary_t = false;
    bool design_df = false;
    std::string model = "random";
    double alpha = 0.05;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
    add_sse_flags(cmd, f.sse);
    cmd->add_option("--filter-threshold", f.filter_threshold,
                    "Exclude a pathway from a study unless one class has absolute "
                    "median activity at or above this value")
        ->capture_default_str();
    cmd->add_option("--min-studies", f.min_studies,
                    "Studies a pathway must survive in to be meta-analyzed (0 = all)")
        ->capture_default_str();
    cmd->add_flag("--no-standardize", f.no_standardize,
                  "Skip per-pathway score standardization before the filter");
    cmd->add_flag("--standardize-matrix", f.standardize_matrix,
                  "Standardize with the whole-matrix mean and SD instead of row-wise");
    cmd->add_flag("--ordinary-t", f.ordinary_t,
                  "Use the plain pooled-variance t-statistic (no variance moderation)");
    cmd->add_flag("--design-df", f.design_df,
                  "Convert t to Cohen's d with the design df instead of the moderated df");
    cmd->add_option("--model", f.model, "Combination model: random (rem) or fixed (fem)")
        ->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Significance level for summaries")
        ->capture_default_str();
}

pipeline::RunOptions to_run_options(const PipelineFlags& f) {
    pipeline::RunOptions opt;
    opt.sse = to_sse_config(f.sse);
    opt.filter.activity_threshold = f.filter_threshold;
    opt.filter.min_studies = f.min_studies;
    opt.filter.whole_matrix = f.standardize_matrix;
    opt.effects.ordinary_t = f.ordinary_t;
    opt.effects.design_df = f.design_df;
    opt.meta.model = meta::meta_model_from_string(f.model);
    opt.meta.alpha = f.alpha;
    opt.standardize = !f.no_standardize;
    opt.threads = f.sse.threads;
    return opt;
}

json config_json(const pipeline::RunOptions& opt) {
    return json{
        {"sse",
         {{"method", to_string(opt.sse.method)},
          {"min_set_size", opt.sse.min_set_size},
          {"ssgsea_weight_exponent", opt.sse.ssgsea_weight_exponent},
          {"gsva_kernel", to_string(opt.sse.gsva_kernel)},
          {"gsva_bandwidth_factor", opt.sse.gsva_bandwidth_factor},
          {"gsva_max_diff", opt.sse.gsva_max_diff},
          {"singscore_directed", opt.sse.singscore_directed}}},
        {"standardize", opt.standardize},
        {"standardize_whole_matrix", opt.filter.whole_matrix},
        {"filter_threshold", opt.filter.activity_threshold},
        {"min_studies", opt.filter.min_studies},
        {"ordinary_t", opt.effects.ordinary_t},
        {"design_df", opt.effects.design_df},
        {"model", meta::to_string(opt.meta.model)},
        {"alpha", opt.meta.alpha},
        {"threads", opt.threads},
    };
}

void write_json(const json& j, const fs::path& path) {
    tsv::write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------- run

struct RunArgs {
    std::string manifest;
    std::string sets;
    std::string out_dir = ".";
    std::string scores_out;
    PipelineFlags flags;
};

int cmd_run(const RunArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto opt = to_run_options(args.flags);

    const fs::path manifest_path(args.manifest);
    const auto manifest = io::load_manifest(manifest_path);
    const auto studies = io::load_studies(manifest, manifest_path.parent_path());
    const auto catalog = io::parse_gmt(args.sets);
    std::cerr << "loaded " << studies.size() << " studies, " << catalog.sets.size()
              << " gene sets\n";

    const auto result = pipeline::run_pipeline(studies, catalog, opt);
    std::cerr << "panel: " << result.panel.pathway_names.size() << " pathways across "
              << result.panel.study_ids.size() << " studies\n";

    const fs::path out(args.out_dir);
    fs::create_directories(out);
    std::vector<std::string> written;
    auto emit = [&](const fs::path& p) { written.push_back(p.filename().string()); };

    report::write_results_tsv(result.results, out / "results.tsv");
    emit(out / "results.tsv");
    report::write_filter_report(result.filter_report, out / "filter_report.tsv");
    emit(out / "filter_report.tsv");
    for (std::size_t s = 0; s < result.panel.study_ids.size(); ++s) {
        const fs::path p = out / ("effects_" + result.panel.study_ids[s] + ".tsv");
        report::write_effects_tsv(result.study_effects[s], p);
        emit(p);
    }
    if (!args.scores_out.empty()) {
        const fs::path scores_dir(args.scores_out);
        fs::create_directories(scores_dir);
        for (const auto& scored : result.scored) {
            io::write_scores_tsv(scored, scores_dir / ("scores_" + scored.study_id + ".tsv"));
        }
        std::cerr << "score matrices written to " << scores_dir.string() << "\n";
    }

    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    json meta_doc{
        {"tool", "gsema"},
        {"version", gsema_version},
        {"command", "run"},
        {"config", config_json(opt)},
        {"inputs", {{"manifest", args.manifest}, {"sets", args.sets}}},
        {"studies", json::array()},
        {"panel", {{"pathways", result.panel.pathway_names.size()},
                   {"studies", result.panel.study_ids.size()}}},
        {"outputs", written},
        {"timings_ms", {{"total", elapsed.count()}}},
    };
    for (const auto& id : result.panel.study_ids) meta_doc["studies"].push_back(id);
    write_json(meta_doc, out / "run_metadata.json");

    std::cerr << "results written to " << (out / "results.tsv").string() << "\n";
    return 0;
}

// -------------------------------------------------------------------- score

struct ScoreArgs {
    std::string expression;
    std::string sets;
    std::string study_id;
    std::string out;
    SseFlags flags;
};

int cmd_score(const ScoreArgs& args) {
    const auto cfg = to_sse_config(args.flags);
    const auto matrix = io::parse_expression_tsv(args.expression, args.study_id);
    const auto catalog = io::parse_gmt(args.sets);
    const auto scores = sse::score_study(matrix, catalog, cfg);
    std::cerr << "study " << scores.study_id << ": " << scores.pathway_names.size()
              << " pathways scored, " << scores.dropped.size() << " dropped\n";
    if (args.out.empty()) {
        std::cout << io::to_tsv(scores);
    } else {
        io::write_scores_tsv(scores, args.out);
        std::cerr << "scores written to " << args.out << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------- meta

struct MetaArgs {
    std::vector<std::string> effect_files;
    std::string out;
    std::size_t min_studies = 0;
    std::string model = "random";
    double alpha = 0.05;
};

int cmd_meta(const MetaArgs& args) {
    meta::MetaConfig cfg;
    cfg.model = meta::meta_model_from_string(args.model);
    cfg.alpha = args.alpha;
    cfg.validate();

    // One file per study; rows within a file must agree on the study id.
    std::map<std::string, std::vector<effects::StudyEffect>> by_study;
    for (const auto& file : args.effect_files) {
        auto rows = report::read_effects_tsv(file);
        const std::string id = rows[0].study_id;
        for (const auto& row : rows) {
            if (row.study_id != id) {
                fail(errc::parse_error, "effects file " + file + " mixes study ids '" + id +
                                            "' and '" + row.study_id + "'");
            }
        }
        if (!by_study.emplace(id, std::move(rows)).second) {
            fail(errc::parse_error, "study id '" + id + "' appears in more than one effects file");
        }
    }

    panel::AlignedPathwayPanel aligned;
    std::vector<std::vector<effects::StudyEffect>> per_study;
    for (auto& [id, rows] : by_study) {
        aligned.study_ids.push_back(id);
        per_study.push_back(std::move(rows));
    }

    const std::size_t k = aligned.study_ids.size();
    const std::size_t need = args.min_studies == 0 ? k : args.min_studies;
    if (need > k) {
        fail(errc::config_error, "min studies (" + std::to_string(need) +
                                     ") exceeds the number of effect files (" + std::to_string(k) + ")");
    }
    std::map<std::string, std::vector<std::uint8_t>> presence;
    for (std::size_t s = 0; s < k; ++s) {
        for (const auto& row : per_study[s]) {
            auto [it, inserted] = presence.try_emplace(row.pathway, std::vector<std::uint8_t>(k, 0));
            if (it->second[s]) {
                fail(errc::parse_error, "pathway '" + row.pathway + "' appears twice for study '" +
                                            aligned.study_ids[s] + "'");
            }
            it->second[s] = 1;
            (void)inserted;
        }
    }
    for (auto& [pathway, mask] : presence) {
        std::size_t count = 0;
        for (auto bit : mask) count += bit;
        if (count >= need) {
            aligned.pathway_names.push_back(pathway);
            aligned.presence.push_back(mask);
            aligned.member_count.push_back(count);
        }
    }
    if (aligned.pathway_names.empty()) {
        fail(errc::no_pathways, "no pathway is present in at least " + std::to_string(need) +
                                    " of " + std::to_string(k) + " studies");
    }
    std::cerr << "combining " << aligned.pathway_names.size() << " pathways across " << k
              << " studies\n";

    const auto results = meta::run_meta(aligned, per_study, cfg);
    if (args.out.empty()) {
        std::cout << report::to_tsv(results);
    } else {
        report::write_results_tsv(results, args.out);
        std::cerr << "results written to " << args.out << "\n";
    }
    return 0;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string out_dir;
    sim::SimConfig cfg;
};

void add_sim_flags(CLI::App* cmd, sim::SimConfig& cfg) {
    cmd->add_option("--studies", cfg.k_studies, "Number of studies")->capture_default_str();
    cmd->add_option("--genes", cfg.genes, "Genes per study")->capture_default_str();
    cmd->add_option("--cases", cfg.n_e, "Case samples per study")->capture_default_str();
    cmd->add_option("--controls", cfg.n_c, "Control samples per study")->capture_default_str();
    cmd->add_option("--de-fraction", cfg.de_fraction,
                    "Fraction of genes that are differential (never below the spiked size)")
        ->capture_default_str();
    cmd->add_option("--spiked-size", cfg.spiked_set_size,
                    "Size of the spiked differential pathway (0 = none)")
        ->capture_default_str();
    cmd->add_option("--fold-low", cfg.fold_change_low, "Lower fold-change bound")
        ->capture_default_str();
    cmd->add_option("--fold-high", cfg.fold_change_high, "Upper fold-change bound")
        ->capture_default_str();
    cmd->add_option("--dispersion", cfg.nb_dispersion, "Negative-binomial dispersion")
        ->capture_default_str();
    cmd->add_option("--baseline-log-mean", cfg.baseline_log_mean,
                    "Mean of the log baseline expression")
        ->capture_default_str();
    cmd->add_option("--baseline-log-sd", cfg.baseline_log_sd, "SD of the log baseline expression")
        ->capture_default_str();
    cmd->add_option("--decoys", cfg.n_decoy_sets, "Number of decoy gene sets")
        ->capture_default_str();
    cmd->add_option("--decoy-min", cfg.decoy_size_low, "Smallest decoy set")->capture_default_str();
    cmd->add_option("--decoy-max", cfg.decoy_size_high, "Largest decoy set")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
}

int cmd_simulate(const SimulateArgs& args) {
    const auto data = sim::simulate_studies(args.cfg);
    const fs::path out(args.out_dir);
    fs::create_directories(out);

    StudyManifest manifest;
    for (const auto& study : data.studies) {
        const std::string& id = study.expression.study_id;
        io::write_expression_tsv(study.expression, out / (id + "_expression.tsv"));
        io::write_labels_tsv(study.labels, out / (id + "_labels.tsv"));
        manifest.entries.push_back({id, id + "_expression.tsv", id + "_labels.tsv"});
    }
    io::write_manifest(manifest, out / "manifest.tsv");
    io::write_gmt(data.catalog, out / "sets.gmt");

    json truth{
        {"tool", "gsema"},
        {"version", gsema_version},
        {"command", "simulate"},
        {"seed", args.cfg.seed},
        {"config",
         {{"studies", args.cfg.k_studies},
          {"genes", args.cfg.genes},
          {"cases", args.cfg.n_e},
          {"controls", args.cfg.n_c},
          {"de_fraction", args.cfg.de_fraction},
          {"de_pool_size", args.cfg.de_pool_size()},
          {"spiked_size", args.cfg.spiked_set_size},
          {"fold_low", args.cfg.fold_change_low},
          {"fold_high", args.cfg.fold_change_high},
          {"dispersion", args.cfg.nb_dispersion},
          {"baseline_log_mean", args.cfg.baseline_log_mean},
          {"baseline_log_sd", args.cfg.baseline_log_sd},
          {"decoys", args.cfg.n_decoy_sets},
          {"decoy_min", args.cfg.decoy_size_low},
          {"decoy_max", args.cfg.decoy_size_high}}},
        {"spiked_set_name", data.truth.spiked_set_name},
        {"spiked_genes", data.truth.spiked_genes},
        {"de_genes", data.truth.de_genes},
    };
    write_json(truth, out / "truth.json");

    std::cerr << "wrote " << data.studies.size() << " studies, "
              << data.catalog.sets.size() << " gene sets to " << out.string() << "\n";
    return 0;
}

// ------------------------------------------------------------------ permute

struct PermuteArgs {
    std::string manifest;
    std::string sets;
    std::string out_dir = ".";
    std::size_t iterations = 100;
    std::uint64_t seed = 0;
    std::string spiked = sim::spiked_pathway_name();
    PipelineFlags flags;
};

int cmd_permute(const PermuteArgs& args) {
    const auto opt = to_run_options(args.flags);

    const fs::path manifest_path(args.manifest);
    const auto manifest = io::load_manifest(manifest_path);
    const auto studies = io::load_studies(manifest, manifest_path.parent_path());
    const auto catalog = io::parse_gmt(args.sets);
    std::cerr << "loaded " << studies.size() << " studies, " << catalog.sets.size()
              << " gene sets\n";

    const auto report =
        sim::run_permutation_suite(studies, catalog, opt, args.spiked, args.iterations, args.seed);

    const fs::path out(args.out_dir);
    fs::create_directories(out);
    report::write_permutation_report(report, out / "permutation_report.tsv");

    json summary{
        {"tool", "gsema"},
        {"version", gsema_version},
        {"command", "permute"},
        {"config", config_json(opt)},
        {"iterations", args.iterations},
        {"seed", args.seed},
        {"spiked_pathway", args.spiked},
        {"alpha", report.alpha},
        {"failed_iterations", report.failed},
        {"spiked_significant_rate", report.spiked_significant_rate},
        {"significant_counts",
         {{"min", report.min},
          {"q25", report.q25},
          {"median", report.median},
          {"q75", report.q75},
          {"max", report.max}}},
    };
    write_json(summary, out / "permutation_summary.json");

    std::cerr << "spiked pathway significant in " << report.spiked_significant_rate * 100.0
              << "% of " << args.iterations << " iterations; report in " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pathway-level meta-analysis of gene expression studies"};
    app.set_version_flag("--version", gsema_version);
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand(
        "run", "Score, filter, and meta-analyze a set of studies end to end");
    run->add_option("--manifest", run_args.manifest,
                    "TSV listing study_id, expression path, labels path")
        ->required();
    run->add_option("--sets", run_args.sets, "Gene-set catalog in GMT format")->required();
    run->add_option("--out", run_args.out_dir, "Output directory")->capture_default_str();
    run->add_option("--scores-out", run_args.scores_out,
                    "Also dump each study's raw pathway-score matrix into this directory");
    add_pipeline_flags(run, run_args.flags);

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Score one study's expression matrix");
    score->add_option("--expression", score_args.expression, "Expression matrix TSV")->required();
    score->add_option("--sets", score_args.sets, "Gene-set catalog in GMT format")->required();
    score->add_option("--study-id", score_args.study_id,
                      "Study id for the output (default: expression file stem)");
    score->add_option("--out", score_args.out, "Output TSV (default: standard output)");
    add_sse_flags(score, score_args.flags);

    MetaArgs meta_args;
    auto* meta_cmd =
        app.add_subcommand("meta", "Combine previously saved per-study effect tables");
    meta_cmd->add_option("effects", meta_args.effect_files, "Per-study effects TSV files")
        ->required()
        ->expected(-1);
    meta_cmd->add_option("--out", meta_args.out, "Output TSV (default: standard output)");
    meta_cmd->add_option("--min-studies", meta_args.min_studies,
                         "Studies a pathway must appear in (0 = all)")
        ->capture_default_str();
    meta_cmd->add_option("--model", meta_args.model, "Combination model: random or fixed")
        ->capture_default_str();
    meta_cmd->add_option("--alpha", meta_args.alpha, "Significance level for summaries")
        ->capture_default_str();

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic studies with a spiked pathway");
    simulate->add_option("--out", sim_args.out_dir, "Output directory")->required();
    add_sim_flags(simulate, sim_args.cfg);

    PermuteArgs permute_args;
    auto* permute = app.add_subcommand(
        "permute", "Rerun the pipeline under random label permutations");
    permute->add_option("--manifest", permute_args.manifest,
                        "TSV listing study_id, expression path, labels path")
        ->required();
    permute->add_option("--sets", permute_args.sets, "Gene-set catalog in GMT format")->required();
    permute->add_option("--out", permute_args.out_dir, "Output directory")->capture_default_str();
    permute->add_option("--iterations", permute_args.iterations, "Permutation iterations")
        ->capture_default_str();
    permute->add_option("--seed", permute_args.seed, "Permutation seed")->capture_default_str();
    permute->add_option("--spiked-pathway", permute_args.spiked,
                        "Pathway whose false-positive rate is tracked")
        ->capture_default_str();
    add_pipeline_flags(permute, permute_args.flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad flags are configuration errors
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (score->parsed()) return cmd_score(score_args);
        if (meta_cmd->parsed()) return cmd_meta(meta_args);
        if (simulate->parsed()) return cmd_simulate(sim_args);
        if (permute->parsed()) return cmd_permute(permute_args);
    } catch (const Error& e) {
        std::cerr << "gsema: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "gsema: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

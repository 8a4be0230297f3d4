#ifndef COHORT_AUDIT_PIPELINE_HPP
#define COHORT_AUDIT_PIPELINE_HPP

// End-to-end run: ingest, model selection, scoring, explanation, outputs.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include "anomaly.hpp"
#include "artifact.hpp"
#include "config.hpp"
#include "dekt.hpp"
#include "digest.hpp"
#include "ingest.hpp"
#include "model_select.hpp"
#include "report.hpp"

namespace cohort_audit {

inline std::string utc_timestamp_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Inputs after loading and preprocessing; clinical rows follow matrix columns.
struct PreparedCohort {
    CohortMatrix matrix;
    ClinicalTable clinical;
    std::vector<DektEntry> dekt;
};

inline PreparedCohort prepare_cohort(const RunConfig& cfg, unsigned threads = 1) {
    PreparedCohort p;
    auto matrix = load_matrix(cfg.matrix);
    const auto clinical = load_clinical(cfg.clinical, cfg.schema, cfg.target);
    p.clinical = clinical.aligned_to(matrix.sample_ids);
    p.dekt = load_dekt(cfg.dekt, p.clinical);
    // Filtering reads the values as supplied, before any transform.
    if (cfg.preprocess.filter)
        matrix = filter_features(matrix, cfg.preprocess.filter_threshold, cfg.preprocess.filter_fraction);
    if (matrix.n_features() == 0) throw DataError("ingest", "no features left after filtering");
    if (cfg.preprocess.normalize) matrix = log_normalize(std::move(matrix));
    p.matrix = remove_covariate_effects(matrix, p.clinical, cfg.preprocess.remove_covariates, threads);
    return p;
}

inline GroupFindings explain_group(Group origin, const AnomalySelection& sel, const ClinicalTable& clin,
                                   const std::vector<DektEntry>& dekt, const GroupTestOptions& opt) {
    GroupFindings g;
    g.origin = origin;
    g.origin_name = clin.level_name(origin);
    g.anomalous_name = "A" + g.origin_name;
    const auto flagged = sel.flagged_indices(origin);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < clin.groups.size(); ++i)
        if (clin.groups[i] == origin) members.push_back(i);
    for (auto i : flagged) g.flagged_ids.push_back(clin.sample_ids[i]);
    g.categorical = group_categorical_tests(flagged, members, clin, dekt, opt);
    for (const auto& f : g.categorical)
        g.explanations.push_back(render_explanation_text(f, dekt, g.anomalous_name, g.origin_name));
    auto numeric = group_numeric_tests(flagged, members, clin, dekt, opt);
    g.numeric = std::move(numeric.significant);
    g.skipped = std::move(numeric.skipped);
    return g;
}

/// Runs every analysis step and returns the artifact; writes nothing.
inline RunArtifact analyze(const RunConfig& cfg, unsigned threads = 1) {
    const auto cohort = prepare_cohort(cfg, threads);
    const auto& clin = cohort.clinical;
    const Matrix x = cohort.matrix.sample_rows();
    const auto y = clin.labels();

    GridSearchOptions gopt;
    gopt.k = cfg.k;
    gopt.seed = cfg.seed;
    gopt.threads = threads;
    gopt.smo = cfg.smo;
    RunArtifact a;
    a.target_name = clin.target_name;
    a.control_level = clin.control_level;
    a.case_level = clin.case_level;
    a.cv = grid_search_cv(x, y, cfg.grid, gopt);

    const auto model = fit_final_model(x, y, a.cv.best_cell, cfg.seed, cfg.smo, {clin.case_level, clin.control_level});
    a.model = {a.cv.best_cell, model.n_support(), model.w_norm, model.bias, model.converged, cfg.seed};
    const auto scores = cfg.scoring == ScoringMode::Refit
                            ? score_all(model, x, cohort.matrix.sample_ids, threads)
                            : score_out_of_fold(x, y, cohort.matrix.sample_ids, a.cv, cfg.smo, threads);
    a.anomalies = select_anomalies(scores, clin);

    const GroupTestOptions topt{cfg.alpha, cfg.test_rule, cfg.benjamini_hochberg};
    for (Group g : {Group::Control, Group::Case}) a.groups.push_back(explain_group(g, a.anomalies, clin, cohort.dekt, topt));
    for (const auto& e : cohort.dekt) a.dekt_features.push_back(e.feature);
    for (const auto& r : a.anomalies.records)
        if (r.flagged) a.annotations.push_back(annotate_individual(r.sample_id, clin, cohort.dekt, r));

    a.provenance.config = cfg.snapshot;
    a.provenance.seed = cfg.seed;
    a.provenance.input_digests = {{"clinical", sha256_file(cfg.clinical)},
                                  {"dekt", sha256_file(cfg.dekt)},
                                  {"matrix", sha256_file(cfg.matrix)}};
    a.provenance.tool_version = tool_version;
    a.provenance.timestamp = cfg.timestamp.value_or(utc_timestamp_now());
    return a;
}

inline std::string anomalies_csv(const RunArtifact& a) {
    ClinicalTable names;
    names.control_level = a.control_level;
    names.case_level = a.case_level;
    return anomalies_csv(a.anomalies, names);
}

inline const std::vector<std::string>& output_files() {
    static const std::vector<std::string> files{"report.html", "run.json", "anomalies.csv", "group_tests.csv", "grid.csv"};
    return files;
}

inline void write_outputs(const RunArtifact& a, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("report", "cannot create output directory '" + dir.string() + "': " + ec.message());
    text::write_file(dir / "report.html", render_html(a), "report");
    text::write_file(dir / "run.json", export_json(a), "report");
    text::write_file(dir / "anomalies.csv", anomalies_csv(a), "report");
    text::write_file(dir / "group_tests.csv", group_tests_csv(a), "report");
    text::write_file(dir / "grid.csv", grid_csv(a.cv), "report");
}

inline RunArtifact run(const RunConfig& cfg, unsigned threads = 1) {
    auto a = analyze(cfg, threads);
    write_outputs(a, cfg.output_dir);
    return a;
}

} // namespace cohort_audit

#endif

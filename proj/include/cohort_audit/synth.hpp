#ifndef COHORT_AUDIT_SYNTH_HPP
#define COHORT_AUDIT_SYNTH_HPP

// Synthetic two-class cohorts with planted mislabeled samples, and scoring of a
// run's flagged set against the plant list.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "random.hpp"
#include "text.hpp"

namespace cohort_audit {

struct SynthCovariate {
    std::string name;
    CovariateKind kind = CovariateKind::Numeric;
    // Categorical: levels[0] is the case-typical level and effect in [0, 1]
    // moves probability mass onto it for cases and off it for controls.
    std::vector<std::string> levels;
    // Numeric: cases are shifted by effect * sd relative to controls.
    double mean = 0.0;
    double sd = 1.0;
    double effect = 0.0;
};

struct SynthSpec {
    std::size_t n_per_group = 200;
    std::size_t n_features = 50;
    std::size_t n_informative = 10;
    double separation = 4.0; // between class means over the informative features, in within-class SDs
    std::size_t n_planted_per_group = 5;
    std::vector<SynthCovariate> covariates;
    std::uint64_t seed = 1;
    std::string target_name = "diagnosis";
    std::string control_level = "HC";
    std::string case_level = "PD";

    static SynthSpec defaults() {
        SynthSpec s;
        s.covariates = {{"sex", CovariateKind::Categorical, {"Male", "Female"}, 0.0, 1.0, 0.4},
                        {"mutation", CovariateKind::Categorical, {"carrier", "non_carrier"}, 0.0, 1.0, 0.3},
                        {"site", CovariateKind::Categorical, {"north", "south", "east"}, 0.0, 1.0, 0.0},
                        {"age", CovariateKind::Numeric, {}, 62.0, 9.0, 0.8},
                        {"motor_score", CovariateKind::Numeric, {}, 10.0, 4.0, 1.5}};
        return s;
    }

    void validate() const {
        if (n_per_group < 2) throw ConfigError("cli", "synth: n_per_group must be at least 2");
        if (n_planted_per_group > n_per_group) throw ConfigError("cli", "synth: planted count exceeds group size");
        if (n_informative > n_features) throw ConfigError("cli", "synth: n_informative exceeds n_features");
        if (n_features == 0) throw ConfigError("cli", "synth: n_features must be positive");
        if (!(separation >= 0.0)) throw ConfigError("cli", "synth: separation must be non-negative");
        if (control_level == case_level) throw ConfigError("cli", "synth: target levels must differ");
        std::set<std::string> names{target_name};
        for (const auto& c : covariates) {
            if (!names.insert(c.name).second) throw ConfigError("cli", "synth: duplicate covariate '" + c.name + "'");
            if (c.kind == CovariateKind::Categorical) {
                if (c.levels.size() < 2) throw ConfigError("cli", "synth: covariate '" + c.name + "' needs two levels");
                if (!(c.effect >= 0.0 && c.effect <= 1.0))
                    throw ConfigError("cli", "synth: categorical effect of '" + c.name + "' must lie in [0, 1]");
            } else if (!(c.sd > 0.0)) {
                throw ConfigError("cli", "synth: sd of '" + c.name + "' must be positive");
            }
        }
    }
};

inline SynthSpec parse_synth_spec(const nlohmann::json& doc) {
    const detail::Fields root(doc, "");
    root.only({"n_per_group", "n_features", "n_informative", "separation", "n_planted_per_group", "covariates", "seed",
               "target_name", "control_level", "case_level"});
    SynthSpec s = SynthSpec::defaults();
    s.n_per_group = root.unsigned_or("n_per_group", s.n_per_group);
    s.n_features = root.unsigned_or("n_features", s.n_features);
    s.n_informative = root.unsigned_or("n_informative", s.n_informative);
    s.separation = root.number_or("separation", s.separation);
    s.n_planted_per_group = root.unsigned_or("n_planted_per_group", s.n_planted_per_group);
    s.seed = root.unsigned_or("seed", s.seed);
    s.target_name = root.string_or("target_name", s.target_name);
    s.control_level = root.string_or("control_level", s.control_level);
    s.case_level = root.string_or("case_level", s.case_level);
    if (root.has("covariates")) {
        const auto& list = root.json().at("covariates");
        if (!list.is_array()) throw ConfigError("cli", "field 'covariates' must be a list");
        s.covariates.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            const detail::Fields c(list[i], "covariates[" + std::to_string(i) + "]");
            c.only({"name", "kind", "levels", "mean", "sd", "effect"});
            SynthCovariate cov;
            cov.name = c.string("name");
            const auto kind = c.string("kind");
            if (kind == "categorical") cov.kind = CovariateKind::Categorical;
            else if (kind == "numeric") cov.kind = CovariateKind::Numeric;
            else throw ConfigError("cli", "field '" + c.name("kind") + "' must be 'categorical' or 'numeric'");
            cov.levels = c.strings_or("levels", {});
            cov.mean = c.number_or("mean", 0.0);
            cov.sd = c.number_or("sd", 1.0);
            cov.effect = c.number_or("effect", 0.0);
            s.covariates.push_back(std::move(cov));
        }
    }
    s.validate();
    return s;
}

inline SynthSpec load_synth_spec(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw ConfigError("cli", "spec file '" + path.string() + "' not found");
    try {
        return parse_synth_spec(nlohmann::json::parse(text::read_file(path, "cli")));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("cli", "spec '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

struct PlantedSample {
    std::string sample_id;
    Group nominal = Group::Control; // the label it carries
    bool operator==(const PlantedSample&) const = default;
};

struct SynthCohort {
    CohortMatrix matrix;
    ClinicalTable clinical;
    std::string dekt_csv;
    std::vector<PlantedSample> truth;
};

/// Per-feature mean offset of the case class; the total separation is spread
/// evenly so that the Mahalanobis distance between class means equals it.
inline double informative_shift(const SynthSpec& s) {
    return s.n_informative == 0 ? 0.0 : s.separation / std::sqrt(static_cast<double>(s.n_informative));
}

inline SynthCohort generate_cohort(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = 2 * spec.n_per_group;
    SynthCohort out;

    // Samples alternate control, case so that neither class sits in a block.
    std::vector<Group> nominal(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) nominal[i] = truth[i] = i % 2 == 0 ? Group::Control : Group::Case;
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string num = std::to_string(i + 1);
        ids[i] = "S" + std::string(4 > num.size() ? 4 - num.size() : 0, '0') + num;
    }
    for (Group g : {Group::Control, Group::Case}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (nominal[i] == g) members.push_back(i);
        rng.shuffle(std::span<std::size_t>(members));
        members.resize(spec.n_planted_per_group);
        std::sort(members.begin(), members.end());
        for (auto i : members) truth[i] = opposite(g);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (truth[i] != nominal[i]) out.truth.push_back({ids[i], nominal[i]});

    const double shift = informative_shift(spec);
    out.matrix.sample_ids = ids;
    out.matrix.values = Matrix(spec.n_features, n);
    for (std::size_t f = 0; f < spec.n_features; ++f) {
        out.matrix.feature_ids.push_back("feature_" + std::to_string(f + 1));
        for (std::size_t i = 0; i < n; ++i) {
            const double mu = f < spec.n_informative ? (truth[i] == Group::Case ? 0.5 : -0.5) * shift : 0.0;
            out.matrix.values(f, i) = mu + rng.normal();
        }
    }

    auto& clin = out.clinical;
    clin.sample_ids = ids;
    clin.target_name = spec.target_name;
    clin.control_level = spec.control_level;
    clin.case_level = spec.case_level;
    clin.groups = nominal;
    std::string dekt = "Group,Feature,Value,Sign\n";
    for (const auto& c : spec.covariates) {
        Covariate cov;
        cov.name = c.name;
        cov.kind = c.kind;
        if (c.kind == CovariateKind::Categorical) {
            cov.levels = c.levels;
            const double L = static_cast<double>(c.levels.size());
            for (std::size_t i = 0; i < n; ++i) {
                const double p_first = truth[i] == Group::Case ? 1.0 / L + c.effect * (1.0 - 1.0 / L)
                                                                : (1.0 / L) * (1.0 - c.effect);
                const double u = rng.uniform();
                int code = 0;
                if (u >= p_first) {
                    const double rest = (u - p_first) / (1.0 - p_first);
                    code = 1 + static_cast<int>(std::min(L - 2.0, std::floor(rest * (L - 1.0))));
                }
                cov.codes.push_back(code);
            }
            if (c.effect > 0.0) dekt += "case," + c.name + "," + c.levels.front() + ",+\n";
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double mu = c.mean + (truth[i] == Group::Case ? c.effect * c.sd : 0.0);
                cov.values.push_back(mu + c.sd * rng.normal());
            }
            if (c.effect != 0.0) {
                const double midpoint = c.mean + 0.5 * c.effect * c.sd;
                dekt += "case," + c.name + "," + (c.effect > 0.0 ? ">" : "<") + text::format_real(midpoint) + ",+\n";
            }
        }
        clin.covariates.push_back(std::move(cov));
    }
    out.dekt_csv = std::move(dekt);
    return out;
}

inline std::string truth_csv(const SynthCohort& c, const ClinicalTable& clin) {
    std::string out = "sample_id,nominal_label,true_label\n";
    for (const auto& p : c.truth)
        out += p.sample_id + "," + clin.level_name(p.nominal) + "," + clin.level_name(opposite(p.nominal)) + "\n";
    return out;
}

/// A run configuration for the generated files (written next to them as config.json).
inline nlohmann::json synth_run_config(const SynthSpec& spec) {
    nlohmann::json schema = nlohmann::json::object();
    for (const auto& c : spec.covariates) {
        if (c.kind == CovariateKind::Categorical) schema[c.name] = {{"kind", "categorical"}, {"levels", c.levels}};
        else schema[c.name] = {{"kind", "numeric"}};
    }
    return {{"inputs", {{"matrix", "matrix.tsv"}, {"clinical", "clinical.tsv"}, {"dekt", "dekt.csv"}}},
            {"target", {{"name", spec.target_name}, {"control", spec.control_level}, {"case", spec.case_level}}},
            {"schema", schema},
            {"preprocess", {{"normalize", false}, {"filter", {{"enabled", false}}}, {"remove_covariates", nlohmann::json::array()}}},
            {"k", 10},
            {"seed", spec.seed},
            {"alpha", 0.05},
            {"test_rule", "paper"},
            {"output_dir", "run"},
            {"timestamp", "2000-01-01T00:00:00Z"}};
}

inline const std::vector<std::string>& synth_files() {
    static const std::vector<std::string> files{"matrix.tsv", "clinical.tsv", "dekt.csv", "truth.csv", "config.json"};
    return files;
}

/// Writes matrix.tsv, clinical.tsv, dekt.csv, truth.csv and config.json into `dir`.
inline SynthCohort simulate(const SynthSpec& spec, const std::filesystem::path& dir) {
    auto cohort = generate_cohort(spec);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cli", "cannot create directory '" + dir.string() + "': " + ec.message());
    write_matrix(cohort.matrix, dir / "matrix.tsv");
    write_clinical(cohort.clinical, dir / "clinical.tsv");
    text::write_file(dir / "dekt.csv", cohort.dekt_csv, "cli");
    text::write_file(dir / "truth.csv", truth_csv(cohort, cohort.clinical), "cli");
    text::write_file(dir / "config.json", synth_run_config(spec).dump(2) + "\n", "cli");
    return cohort;
}

struct DetectionScore {
    std::size_t n_flagged = 0;
    std::size_t n_truth = 0;
    std::size_t n_true_positive = 0;
    double precision = 1.0; // 1 by convention when nothing is flagged
    double recall = 0.0;
    bool precision_defined = false;
};

inline DetectionScore score_detection(const std::vector<std::string>& flagged, const std::vector<std::string>& truth) {
    const std::set<std::string> f(flagged.begin(), flagged.end()), t(truth.begin(), truth.end());
    DetectionScore s;
    s.n_flagged = f.size();
    s.n_truth = t.size();
    for (const auto& id : f) s.n_true_positive += t.count(id);
    s.precision_defined = !f.empty();
    s.precision = f.empty() ? 1.0 : static_cast<double>(s.n_true_positive) / static_cast<double>(f.size());
    s.recall = t.empty() ? 1.0 : static_cast<double>(s.n_true_positive) / static_cast<double>(t.size());
    return s;
}

namespace detail {

inline std::vector<std::string> column_where(const std::filesystem::path& path, const std::string& id_col,
                                             const std::string& flag_col) {
    const auto rows = text::read_table(path, ',', "cli");
    if (rows.empty()) throw DataError("cli", "'" + path.string() + "' is empty");
    const auto& h = rows.front();
    const auto pos = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(h.begin(), h.end(), name);
        if (it == h.end()) throw DataError("cli", "'" + path.string() + "' has no column '" + name + "'");
        return static_cast<std::size_t>(it - h.begin());
    };
    const auto id = pos(id_col);
    const auto flag = flag_col.empty() ? std::size_t{0} : pos(flag_col);
    std::vector<std::string> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != h.size())
            throw DataError("cli", "'" + path.string() + "' row " + std::to_string(r + 1) + " has the wrong cell count");
        if (flag_col.empty() || rows[r][flag] == "true") out.push_back(rows[r][id]);
    }
    return out;
}

} // namespace detail

/// Reads the flagged ids from a run directory's anomalies.csv and the plant list.
inline DetectionScore score_run_directory(const std::filesystem::path& run_dir, const std::filesystem::path& truth_file) {
    return score_detection(detail::column_where(run_dir / "anomalies.csv", "sample_id", "flagged"),
                           detail::column_where(truth_file, "sample_id", ""));
}

} // namespace cohort_audit

#endif

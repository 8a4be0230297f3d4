#ifndef COHORT_AUDIT_ARTIFACT_HPP
#define COHORT_AUDIT_ARTIFACT_HPP

// Everything a run produces, with a lossless JSON form (run.json).

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anomaly.hpp"
#include "dekt.hpp"
#include "model_select.hpp"
#include "svm.hpp"

namespace cohort_audit {

struct ModelSummary {
    HyperCell cell;
    std::size_t n_support = 0;
    double w_norm = 0.0;
    double bias = 0.0;
    bool converged = true;
    std::uint64_t seed = 0;
    bool operator==(const ModelSummary&) const = default;
};

/// Group-level findings for one origin group (anomalous controls or anomalous cases).
struct GroupFindings {
    Group origin = Group::Control;
    std::string anomalous_name; // e.g. "AHC"
    std::string origin_name;    // e.g. "HC"
    std::vector<std::string> flagged_ids;
    std::vector<CategoricalFinding> categorical;
    std::vector<std::string> explanations; // parallel to categorical
    std::vector<NumericFinding> numeric;
    std::vector<SkippedTest> skipped;
    bool operator==(const GroupFindings&) const = default;
};

struct Provenance {
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests; // role -> sha256 hex
    std::string tool_version;
    std::string timestamp;
    bool operator==(const Provenance&) const = default;
};

struct RunArtifact {
    std::string target_name;
    std::string control_level;
    std::string case_level;
    CvResult cv;
    ModelSummary model;
    AnomalySelection anomalies;
    std::vector<GroupFindings> groups;
    std::vector<std::string> dekt_features; // expert-table order, used as annotation columns
    std::vector<IndividualAnnotation> annotations;
    Provenance provenance;
    bool operator==(const RunArtifact&) const = default;

    const std::string& level_name(Group g) const { return g == Group::Case ? case_level : control_level; }
};

inline constexpr const char* tool_version = "1.0.0";

namespace detail {

/// Non-finite reals become null (NaN) or "Infinity"/"-Infinity".
inline nlohmann::json real(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    return v;
}

inline double real(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "Infinity") return std::numeric_limits<double>::infinity();
        if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
        throw DataError("report", "unexpected real value '" + s + "'");
    }
    return j.get<double>();
}

inline nlohmann::json reals(const std::vector<double>& v) {
    auto out = nlohmann::json::array();
    for (double x : v) out.push_back(real(x));
    return out;
}

inline std::vector<double> reals(const nlohmann::json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(real(x));
    return out;
}

inline std::string group_key(Group g) { return g == Group::Case ? "case" : "control"; }
inline Group group_from_key(const std::string& s) {
    if (s == "case") return Group::Case;
    if (s == "control") return Group::Control;
    throw DataError("report", "unknown group key '" + s + "'");
}

inline std::string support_key(Support s) {
    switch (s) {
    case Support::Supports: return "supports";
    case Support::Opposes: return "opposes";
    case Support::NotApplicable: return "not_applicable";
    }
    return "not_applicable";
}

inline Support support_from_key(const std::string& s) {
    if (s == "supports") return Support::Supports;
    if (s == "opposes") return Support::Opposes;
    if (s == "not_applicable") return Support::NotApplicable;
    throw DataError("report", "unknown support outcome '" + s + "'");
}

inline TestMethod method_from_name(const std::string& s) {
    if (s == "fisher") return TestMethod::Fisher;
    if (s == "chi_square") return TestMethod::ChiSquare;
    if (s == "mann_whitney") return TestMethod::MannWhitney;
    throw DataError("report", "unknown test method '" + s + "'");
}

} // namespace detail

inline void to_json(nlohmann::json& j, const HyperCell& c) {
    j = {{"kernel", c.kernel}, {"C", c.cost}};
}
inline void from_json(const nlohmann::json& j, HyperCell& c) {
    c.kernel = j.at("kernel").get<KernelSpec>();
    c.cost = j.at("C").get<double>();
}

inline void to_json(nlohmann::json& j, const Confusion& m) {
    j = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}
inline void from_json(const nlohmann::json& j, Confusion& m) {
    m = {j.at("tp").get<std::int64_t>(), j.at("fp").get<std::int64_t>(), j.at("fn").get<std::int64_t>(),
         j.at("tn").get<std::int64_t>()};
}

inline void to_json(nlohmann::json& j, const CellResult& c) {
    j = {{"cell", c.cell},
         {"confusion", c.confusion},
         {"balanced_accuracy", c.balanced_accuracy},
         {"accuracy", c.accuracy},
         {"nonconverged_fits", c.nonconverged_fits}};
}
inline void from_json(const nlohmann::json& j, CellResult& c) {
    c.cell = j.at("cell").get<HyperCell>();
    c.confusion = j.at("confusion").get<Confusion>();
    c.balanced_accuracy = j.at("balanced_accuracy").get<double>();
    c.accuracy = j.at("accuracy").get<double>();
    c.nonconverged_fits = j.at("nonconverged_fits").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const CvResult& r) {
    j = {{"per_cell", r.per_cell},
         {"best_index", r.best_index},
         {"best_cell", r.best_cell},
         {"pooled_confusion", r.pooled_confusion},
         {"balanced_accuracy", r.balanced_accuracy},
         {"acc_ci", {r.acc_ci.first, r.acc_ci.second}},
         {"nir_pvalue", r.nir_pvalue},
         {"mcnemar_pvalue", r.mcnemar_pvalue},
         {"fold_assignments", r.fold_assignments},
         {"k", r.k},
         {"seed", r.seed}};
}
inline void from_json(const nlohmann::json& j, CvResult& r) {
    r.per_cell = j.at("per_cell").get<std::vector<CellResult>>();
    r.best_index = j.at("best_index").get<std::size_t>();
    r.best_cell = j.at("best_cell").get<HyperCell>();
    r.pooled_confusion = j.at("pooled_confusion").get<Confusion>();
    r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
    r.acc_ci = {j.at("acc_ci").at(0).get<double>(), j.at("acc_ci").at(1).get<double>()};
    r.nir_pvalue = j.at("nir_pvalue").get<double>();
    r.mcnemar_pvalue = j.at("mcnemar_pvalue").get<double>();
    r.fold_assignments = j.at("fold_assignments").get<std::vector<std::size_t>>();
    r.k = j.at("k").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const ModelSummary& m) {
    j = {{"cell", m.cell}, {"n_support", m.n_support}, {"w_norm", m.w_norm},
         {"bias", m.bias}, {"converged", m.converged}, {"seed", m.seed}};
}
inline void from_json(const nlohmann::json& j, ModelSummary& m) {
    m.cell = j.at("cell").get<HyperCell>();
    m.n_support = j.at("n_support").get<std::size_t>();
    m.w_norm = j.at("w_norm").get<double>();
    m.bias = j.at("bias").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const AnomalyRecord& r) {
    j = {{"sample_id", r.sample_id},
         {"given", detail::group_key(r.given)},
         {"predicted", detail::group_key(r.predicted)},
         {"decision_value", r.decision},
         {"distance", r.distance},
         {"flagged", r.flagged},
         {"group_threshold", r.group_threshold}};
}
inline void from_json(const nlohmann::json& j, AnomalyRecord& r) {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.given = detail::group_from_key(j.at("given").get<std::string>());
    r.predicted = detail::group_from_key(j.at("predicted").get<std::string>());
    r.decision = j.at("decision_value").get<double>();
    r.distance = j.at("distance").get<double>();
    r.flagged = j.at("flagged").get<bool>();
    r.group_threshold = j.at("group_threshold").get<double>();
}

inline void to_json(nlohmann::json& j, const GroupThreshold& g) {
    j = {{"group", detail::group_key(g.group)},
         {"n_misclassified", g.n_misclassified},
         {"elbow_index", g.elbow_index ? nlohmann::json(*g.elbow_index) : nlohmann::json(nullptr)},
         {"threshold", g.threshold},
         {"sorted_distances", g.sorted_distances},
         {"n_flagged", g.n_flagged}};
}
inline void from_json(const nlohmann::json& j, GroupThreshold& g) {
    g.group = detail::group_from_key(j.at("group").get<std::string>());
    g.n_misclassified = j.at("n_misclassified").get<std::size_t>();
    const auto& e = j.at("elbow_index");
    g.elbow_index = e.is_null() ? std::nullopt : std::optional<std::size_t>(e.get<std::size_t>());
    g.threshold = j.at("threshold").get<double>();
    g.sorted_distances = j.at("sorted_distances").get<std::vector<double>>();
    g.n_flagged = j.at("n_flagged").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const TestResult& t) {
    j = {{"method", method_name(t.method)},
         {"p_value", detail::real(t.p_value)},
         {"odds_ratio", detail::real(t.odds_ratio)},
         {"mean_first", detail::real(t.mean_first)},
         {"mean_second", detail::real(t.mean_second)},
         {"statistic", detail::real(t.statistic)},
         {"n_first", t.n_first},
         {"n_second", t.n_second},
         {"exact", t.exact}};
}
inline void from_json(const nlohmann::json& j, TestResult& t) {
    t.method = detail::method_from_name(j.at("method").get<std::string>());
    t.p_value = detail::real(j.at("p_value"));
    t.odds_ratio = detail::real(j.at("odds_ratio"));
    t.mean_first = detail::real(j.at("mean_first"));
    t.mean_second = detail::real(j.at("mean_second"));
    t.statistic = detail::real(j.at("statistic"));
    t.n_first = j.at("n_first").get<std::size_t>();
    t.n_second = j.at("n_second").get<std::size_t>();
    t.exact = j.at("exact").get<bool>();
}

inline void to_json(nlohmann::json& j, const CategoricalFinding& f) {
    j = {{"covariate", f.covariate},
         {"level", f.level},
         {"other_levels", f.other_levels},
         {"relative_to", f.relative_to},
         {"counts", {f.counts.a, f.counts.b, f.counts.c, f.counts.d}},
         {"test", f.test},
         {"p_adjusted", detail::real(f.p_adjusted)}};
}
inline void from_json(const nlohmann::json& j, CategoricalFinding& f) {
    f.covariate = j.at("covariate").get<std::string>();
    f.level = j.at("level").get<std::string>();
    f.other_levels = j.at("other_levels").get<std::vector<std::string>>();
    f.relative_to = j.at("relative_to").get<std::string>();
    const auto& c = j.at("counts");
    f.counts = {c.at(0).get<std::int64_t>(), c.at(1).get<std::int64_t>(), c.at(2).get<std::int64_t>(),
                c.at(3).get<std::int64_t>()};
    f.test = j.at("test").get<TestResult>();
    f.p_adjusted = detail::real(j.at("p_adjusted"));
}

inline void to_json(nlohmann::json& j, const NumericFinding& f) {
    j = {{"covariate", f.covariate},
         {"expectation", f.expectation},
         {"test", f.test},
         {"p_adjusted", detail::real(f.p_adjusted)},
         {"flagged_values", detail::reals(f.flagged_values)},
         {"origin_values", detail::reals(f.origin_values)}};
}
inline void from_json(const nlohmann::json& j, NumericFinding& f) {
    f.covariate = j.at("covariate").get<std::string>();
    f.expectation = j.at("expectation").get<std::string>();
    f.test = j.at("test").get<TestResult>();
    f.p_adjusted = detail::real(j.at("p_adjusted"));
    f.flagged_values = detail::reals(j.at("flagged_values"));
    f.origin_values = detail::reals(j.at("origin_values"));
}

inline void to_json(nlohmann::json& j, const SkippedTest& s) { j = {{"covariate", s.covariate}, {"reason", s.reason}}; }
inline void from_json(const nlohmann::json& j, SkippedTest& s) {
    s.covariate = j.at("covariate").get<std::string>();
    s.reason = j.at("reason").get<std::string>();
}

inline void to_json(nlohmann::json& j, const GroupFindings& g) {
    j = {{"origin", detail::group_key(g.origin)},
         {"anomalous_name", g.anomalous_name},
         {"origin_name", g.origin_name},
         {"flagged_ids", g.flagged_ids},
         {"categorical", g.categorical},
         {"explanations", g.explanations},
         {"numeric", g.numeric},
         {"skipped", g.skipped}};
}
inline void from_json(const nlohmann::json& j, GroupFindings& g) {
    g.origin = detail::group_from_key(j.at("origin").get<std::string>());
    g.anomalous_name = j.at("anomalous_name").get<std::string>();
    g.origin_name = j.at("origin_name").get<std::string>();
    g.flagged_ids = j.at("flagged_ids").get<std::vector<std::string>>();
    g.categorical = j.at("categorical").get<std::vector<CategoricalFinding>>();
    g.explanations = j.at("explanations").get<std::vector<std::string>>();
    g.numeric = j.at("numeric").get<std::vector<NumericFinding>>();
    g.skipped = j.at("skipped").get<std::vector<SkippedTest>>();
}

inline void to_json(nlohmann::json& j, const Evidence& e) {
    j = {{"feature", e.feature}, {"observed", e.observed}, {"condition", e.condition},
         {"outcome", detail::support_key(e.outcome)}};
}
inline void from_json(const nlohmann::json& j, Evidence& e) {
    e.feature = j.at("feature").get<std::string>();
    e.observed = j.at("observed").get<std::string>();
    e.condition = j.at("condition").get<std::string>();
    e.outcome = detail::support_from_key(j.at("outcome").get<std::string>());
}

inline void to_json(nlohmann::json& j, const IndividualAnnotation& a) {
    j = {{"sample_id", a.sample_id},
         {"given", detail::group_key(a.given)},
         {"direction", a.direction == Direction::TowardCase ? "toward_case" : "toward_control"},
         {"evidence", a.evidence},
         {"n_supports", a.n_supports},
         {"n_total", a.n_total}};
}
inline void from_json(const nlohmann::json& j, IndividualAnnotation& a) {
    a.sample_id = j.at("sample_id").get<std::string>();
    a.given = detail::group_from_key(j.at("given").get<std::string>());
    a.direction = j.at("direction").get<std::string>() == "toward_case" ? Direction::TowardCase : Direction::TowardControl;
    a.evidence = j.at("evidence").get<std::vector<Evidence>>();
    a.n_supports = j.at("n_supports").get<std::size_t>();
    a.n_total = j.at("n_total").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const Provenance& p) {
    j = {{"config", p.config},
         {"seed", p.seed},
         {"input_digests", p.input_digests},
         {"tool_version", p.tool_version},
         {"timestamp", p.timestamp}};
}
inline void from_json(const nlohmann::json& j, Provenance& p) {
    p.config = j.at("config");
    p.seed = j.at("seed").get<std::uint64_t>();
    p.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    p.tool_version = j.at("tool_version").get<std::string>();
    p.timestamp = j.at("timestamp").get<std::string>();
}

inline nlohmann::json to_json_document(const RunArtifact& a) {
    nlohmann::json j;
    j["target"] = {{"name", a.target_name}, {"control", a.control_level}, {"case", a.case_level}};
    j["cv"] = a.cv;
    j["model_summary"] = a.model;
    j["anomalies"] = a.anomalies.records;
    j["thresholds"] = {{"control", a.anomalies.control}, {"case", a.anomalies.cases}};
    j["group_results"] = a.groups;
    j["dekt_features"] = a.dekt_features;
    j["annotations"] = a.annotations;
    j["provenance"] = a.provenance;
    return j;
}

/// Serialized run artifact; keys sorted, reals in shortest round-trip form.
inline std::string export_json(const RunArtifact& a) { return to_json_document(a).dump(2) + "\n"; }

inline RunArtifact import_json(const nlohmann::json& j) {
    RunArtifact a;
    a.target_name = j.at("target").at("name").get<std::string>();
    a.control_level = j.at("target").at("control").get<std::string>();
    a.case_level = j.at("target").at("case").get<std::string>();
    a.cv = j.at("cv").get<CvResult>();
    a.model = j.at("model_summary").get<ModelSummary>();
    a.anomalies.records = j.at("anomalies").get<std::vector<AnomalyRecord>>();
    a.anomalies.control = j.at("thresholds").at("control").get<GroupThreshold>();
    a.anomalies.cases = j.at("thresholds").at("case").get<GroupThreshold>();
    a.groups = j.at("group_results").get<std::vector<GroupFindings>>();
    a.dekt_features = j.at("dekt_features").get<std::vector<std::string>>();
    a.annotations = j.at("annotations").get<std::vector<IndividualAnnotation>>();
    a.provenance = j.at("provenance").get<Provenance>();
    return a;
}

inline RunArtifact import_json(std::string_view text) {
    try {
        return import_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("report", std::string("malformed run artifact: ") + e.what());
    }
}

inline RunArtifact import_json(const std::string& text) { return import_json(std::string_view(text)); }
inline RunArtifact import_json(const char* text) { return import_json(std::string_view(text)); }

} // namespace cohort_audit

#endif

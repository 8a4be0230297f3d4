#ifndef COHORT_AUDIT_CONFIG_HPP
#define COHORT_AUDIT_CONFIG_HPP

// Run configuration: a JSON document, validated field by field. Relative input
// and output paths are resolved against the directory holding the file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "ingest.hpp"
#include "model_select.hpp"
#include "stats.hpp"
#include "svm.hpp"
#include "text.hpp"

namespace cohort_audit {

struct PreprocessConfig {
    bool normalize = true;
    bool filter = true;
    double filter_threshold = 8.0;
    double filter_fraction = 0.8;
    std::vector<std::string> remove_covariates;
};

enum class ScoringMode { Refit, OutOfFold };

struct RunConfig {
    std::filesystem::path matrix;
    std::filesystem::path clinical;
    std::filesystem::path dekt;
    TargetSpec target;
    ClinicalSchema schema;
    PreprocessConfig preprocess;
    HyperGrid grid = HyperGrid::defaults();
    std::size_t k = 10;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    TestRule test_rule = TestRule::Paper;
    bool benjamini_hochberg = false;
    ScoringMode scoring = ScoringMode::Refit;
    SmoOptions smo;
    std::filesystem::path output_dir;
    std::optional<std::string> timestamp;
    nlohmann::json snapshot; // the document as read, seed overrides applied
};

namespace detail {

class Fields {
public:
    Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("cli", "'" + display() + "' must be an object");
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const nlohmann::json& require(const std::string& key) const {
        if (!has(key)) throw ConfigError("cli", "missing required field '" + name(key) + "'");
        return j_.at(key);
    }

    std::string string(const std::string& key) const {
        const auto& v = require(key);
        if (!v.is_string()) throw ConfigError("cli", "field '" + name(key) + "' must be a string");
        return v.get<std::string>();
    }

    std::string string_or(const std::string& key, std::string fallback) const {
        return has(key) ? string(key) : fallback;
    }

    double number_or(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError("cli", "field '" + name(key) + "' must be a number");
        return v.get<double>();
    }

    bool boolean_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError("cli", "field '" + name(key) + "' must be true or false");
        return v.get<bool>();
    }

    std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        if (!ok) throw ConfigError("cli", "field '" + name(key) + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::vector<std::string> strings_or(const std::string& key, std::vector<std::string> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError("cli", "field '" + name(key) + "' must be a list of strings");
        std::vector<std::string> out;
        for (const auto& x : v) {
            if (!x.is_string()) throw ConfigError("cli", "field '" + name(key) + "' must be a list of strings");
            out.push_back(x.get<std::string>());
        }
        return out;
    }

    std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError("cli", "field '" + name(key) + "' must be a list of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError("cli", "field '" + name(key) + "' must be a list of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    /// Rejects keys outside `known` so that typos do not silently fall back to defaults.
    void only(const std::set<std::string>& known) const {
        for (const auto& [key, value] : j_.items())
            if (!known.count(key)) throw ConfigError("cli", "unknown field '" + name(key) + "'");
    }

    const nlohmann::json& json() const { return j_; }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const nlohmann::json& j_;
    std::string path_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline std::filesystem::path existing_input(const Fields& f, const std::string& key, const std::filesystem::path& base) {
    const auto path = resolve(base, f.string(key));
    if (!std::filesystem::is_regular_file(path))
        throw ConfigError("cli", "field '" + f.name(key) + "': file '" + path.string() + "' not found");
    return path;
}

} // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    using detail::Fields;
    RunConfig cfg;
    const Fields root(doc, "");
    root.only({"inputs", "target", "schema", "preprocess", "grid", "k", "seed", "alpha", "test_rule",
               "benjamini_hochberg", "scoring", "smo", "output_dir", "timestamp"});

    const Fields inputs(root.require("inputs"), "inputs");
    inputs.only({"matrix", "clinical", "dekt"});
    cfg.matrix = detail::existing_input(inputs, "matrix", base_dir);
    cfg.clinical = detail::existing_input(inputs, "clinical", base_dir);
    cfg.dekt = detail::existing_input(inputs, "dekt", base_dir);

    const Fields target(root.require("target"), "target");
    target.only({"name", "control", "case"});
    cfg.target.name = target.string("name");
    cfg.target.control_level = target.string_or("control", "");
    cfg.target.case_level = target.string_or("case", "");
    if (!cfg.target.control_level.empty() && cfg.target.control_level == cfg.target.case_level)
        throw ConfigError("cli", "fields 'target.control' and 'target.case' must differ");

    const Fields schema(root.require("schema"), "schema");
    for (const auto& [name, decl_json] : schema.json().items()) {
        const Fields decl(decl_json, schema.name(name));
        decl.only({"kind", "levels"});
        CovariateDecl d;
        const auto kind = decl.string("kind");
        if (kind == "categorical") d.kind = CovariateKind::Categorical;
        else if (kind == "numeric") d.kind = CovariateKind::Numeric;
        else throw ConfigError("cli", "field '" + decl.name("kind") + "' must be 'categorical' or 'numeric'");
        d.levels = decl.strings_or("levels", {});
        if (d.kind == CovariateKind::Numeric && !d.levels.empty())
            throw ConfigError("cli", "field '" + decl.name("levels") + "' only applies to categorical covariates");
        cfg.schema.emplace(name, std::move(d));
    }

    if (root.has("preprocess")) {
        const Fields pre(root.json().at("preprocess"), "preprocess");
        pre.only({"normalize", "filter", "remove_covariates"});
        cfg.preprocess.normalize = pre.boolean_or("normalize", true);
        if (pre.has("filter")) {
            const Fields filt(pre.json().at("filter"), "preprocess.filter");
            filt.only({"enabled", "threshold", "fraction"});
            cfg.preprocess.filter = filt.boolean_or("enabled", true);
            cfg.preprocess.filter_threshold = filt.number_or("threshold", 8.0);
            cfg.preprocess.filter_fraction = filt.number_or("fraction", 0.8);
            if (!(cfg.preprocess.filter_fraction > 0.0 && cfg.preprocess.filter_fraction <= 1.0))
                throw ConfigError("cli", "field 'preprocess.filter.fraction' must lie in (0, 1]");
        }
        cfg.preprocess.remove_covariates = pre.strings_or("remove_covariates", {});
        for (const auto& name : cfg.preprocess.remove_covariates) {
            if (name == cfg.target.name)
                throw ConfigError("cli", "field 'preprocess.remove_covariates' must not contain the target '" + name + "'");
            if (!cfg.schema.count(name))
                throw ConfigError("cli", "field 'preprocess.remove_covariates' names undeclared covariate '" + name + "'");
        }
    }

    if (root.has("grid")) {
        const Fields grid(root.json().at("grid"), "grid");
        grid.only({"costs", "gammas", "kernels"});
        const auto defaults = HyperGrid::defaults();
        cfg.grid.costs = grid.numbers_or("costs", defaults.costs);
        cfg.grid.gammas = grid.numbers_or("gammas", defaults.gammas);
        cfg.grid.kernels.clear();
        for (const auto& k : grid.strings_or("kernels", {"linear", "rbf"})) {
            if (k == "linear") cfg.grid.kernels.push_back(KernelSpec::Kind::Linear);
            else if (k == "rbf") cfg.grid.kernels.push_back(KernelSpec::Kind::Rbf);
            else throw ConfigError("cli", "field 'grid.kernels' has unknown kernel '" + k + "'");
        }
        try {
            cfg.grid.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("cli", std::string("field 'grid': ") + e.what());
        }
    }

    const auto k = root.unsigned_or("k", 10);
    if (k < 2) throw ConfigError("cli", "field 'k' must be at least 2");
    cfg.k = static_cast<std::size_t>(k);
    cfg.seed = root.unsigned_or("seed", 0);
    cfg.alpha = root.number_or("alpha", 0.05);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("cli", "field 'alpha' must lie in (0, 1)");
    try {
        cfg.test_rule = parse_test_rule(root.string_or("test_rule", "paper"));
    } catch (const Error&) {
        throw ConfigError("cli", "field 'test_rule' must be one of paper, conventional, always_fisher");
    }
    cfg.benjamini_hochberg = root.boolean_or("benjamini_hochberg", false);
    const auto scoring = root.string_or("scoring", "refit");
    if (scoring == "refit") cfg.scoring = ScoringMode::Refit;
    else if (scoring == "out_of_fold") cfg.scoring = ScoringMode::OutOfFold;
    else throw ConfigError("cli", "field 'scoring' must be 'refit' or 'out_of_fold'");

    if (root.has("smo")) {
        const Fields smo(root.json().at("smo"), "smo");
        smo.only({"tol", "max_passes"});
        cfg.smo.tol = smo.number_or("tol", 1e-3);
        if (!(cfg.smo.tol > 0.0)) throw ConfigError("cli", "field 'smo.tol' must be positive");
        if (smo.has("max_passes")) cfg.smo.max_passes = static_cast<std::size_t>(smo.unsigned_or("max_passes", 0));
    }

    cfg.output_dir = detail::resolve(base_dir, root.string("output_dir"));
    if (root.has("timestamp")) cfg.timestamp = root.string("timestamp");

    if (cfg.schema.count(cfg.target.name) && cfg.schema.at(cfg.target.name).kind != CovariateKind::Categorical)
        throw ConfigError("cli", "target '" + cfg.target.name + "' must be declared categorical if it appears in 'schema'");
    cfg.snapshot = doc;
    cfg.snapshot["seed"] = cfg.seed;
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw ConfigError("cli", "config file '" + path.string() + "' not found");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text::read_file(path, "cli"));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("cli", "config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

/// Applies a command-line seed override, keeping the snapshot in step.
inline void override_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.snapshot["seed"] = seed;
}

} // namespace cohort_audit

#endif

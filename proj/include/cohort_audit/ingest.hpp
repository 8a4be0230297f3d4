#ifndef COHORT_AUDIT_INGEST_HPP
#define COHORT_AUDIT_INGEST_HPP

// Loading and preprocessing of the omics matrix and the clinical table.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "text.hpp"

namespace cohort_audit {

/// Features x samples expression matrix.
struct CohortMatrix {
    std::vector<std::string> feature_ids;
    std::vector<std::string> sample_ids;
    Matrix values; // rows = features, cols = samples

    std::size_t n_features() const { return feature_ids.size(); }
    std::size_t n_samples() const { return sample_ids.size(); }

    /// Samples x features copy, the orientation the classifier consumes.
    Matrix sample_rows() const { return values.transposed(); }

    bool operator==(const CohortMatrix&) const = default;
};

enum class CovariateKind { Categorical, Numeric };

struct CovariateDecl {
    CovariateKind kind = CovariateKind::Numeric;
    std::vector<std::string> levels; // optional declared level set for categoricals
};

using ClinicalSchema = std::map<std::string, CovariateDecl>;

/// Which column is the binary target and which of its levels plays which role.
/// Empty role names mean "assign by sorted level order" (first = control).
struct TargetSpec {
    std::string name;
    std::string control_level;
    std::string case_level;
};

enum class Group { Control, Case };

inline Group opposite(Group g) { return g == Group::Control ? Group::Case : Group::Control; }

/// Classifier label for a group: cases are +1, controls -1.
inline int label_of(Group g) { return g == Group::Case ? +1 : -1; }
inline Group group_of_label(int y) { return y > 0 ? Group::Case : Group::Control; }

struct Covariate {
    std::string name;
    CovariateKind kind = CovariateKind::Numeric;
    std::vector<std::string> levels; // categorical level set, in declaration/appearance order
    std::vector<int> codes;          // categorical: index into levels, -1 = missing
    std::vector<double> values;      // numeric: NaN = missing

    std::size_t size() const { return kind == CovariateKind::Categorical ? codes.size() : values.size(); }

    bool missing(std::size_t i) const {
        return kind == CovariateKind::Categorical ? codes[i] < 0 : std::isnan(values[i]);
    }

    const std::string& level(std::size_t i) const { return levels.at(static_cast<std::size_t>(codes[i])); }

    /// Human-readable cell value ("NA" when missing).
    std::string display(std::size_t i) const {
        if (missing(i)) return "NA";
        return kind == CovariateKind::Categorical ? level(i) : text::format_compact(values[i]);
    }

    bool operator==(const Covariate& o) const {
        if (name != o.name || kind != o.kind || levels != o.levels || codes != o.codes) return false;
        if (values.size() != o.values.size()) return false;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!(values[i] == o.values[i] || (std::isnan(values[i]) && std::isnan(o.values[i])))) return false;
        return true;
    }
};

/// Per-sample clinical covariates plus the binary target (held apart from the covariates).
struct ClinicalTable {
    std::vector<std::string> sample_ids;
    std::vector<Covariate> covariates;
    std::string target_name;
    std::string control_level;
    std::string case_level;
    std::vector<Group> groups;

    const Covariate* find(std::string_view name) const {
        for (const auto& c : covariates)
            if (c.name == name) return &c;
        return nullptr;
    }

    const std::string& level_name(Group g) const { return g == Group::Case ? case_level : control_level; }

    std::optional<std::size_t> index_of(std::string_view id) const {
        for (std::size_t i = 0; i < sample_ids.size(); ++i)
            if (sample_ids[i] == id) return i;
        return std::nullopt;
    }

    /// Rows reordered (and subset) to follow `ids`. Every id must be present.
    ClinicalTable aligned_to(const std::vector<std::string>& ids) const {
        std::unordered_map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < sample_ids.size(); ++i) pos.emplace(sample_ids[i], i);
        std::vector<std::size_t> order;
        order.reserve(ids.size());
        std::vector<std::string> absent;
        for (const auto& id : ids) {
            auto it = pos.find(id);
            if (it == pos.end()) absent.push_back(id);
            else order.push_back(it->second);
        }
        if (!absent.empty())
            throw DataError("ingest", "samples missing from clinical table: " + text::join(absent, ", "));
        ClinicalTable out;
        out.target_name = target_name;
        out.control_level = control_level;
        out.case_level = case_level;
        out.sample_ids = ids;
        for (std::size_t k : order) out.groups.push_back(groups[k]);
        for (const auto& c : covariates) {
            Covariate nc{c.name, c.kind, c.levels, {}, {}};
            for (std::size_t k : order) {
                if (c.kind == CovariateKind::Categorical) nc.codes.push_back(c.codes[k]);
                else nc.values.push_back(c.values[k]);
            }
            out.covariates.push_back(std::move(nc));
        }
        return out;
    }

    std::vector<int> labels() const {
        std::vector<int> y;
        y.reserve(groups.size());
        for (auto g : groups) y.push_back(label_of(g));
        return y;
    }

    bool operator==(const ClinicalTable&) const = default;
};

inline bool is_missing_token(std::string_view s) {
    s = text::trim(s);
    return s.empty() || s == "NA";
}

namespace detail {

inline void check_unique(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second)
            throw DataError("ingest", std::string("duplicate ") + what + " id '" + id + "'");
}

} // namespace detail

/// Reads a delimited features x samples matrix. The header holds sample ids,
/// optionally preceded by a corner cell; the first column holds feature ids.
inline CohortMatrix load_matrix(const std::filesystem::path& path, std::optional<char> delimiter = std::nullopt) {
    const char delim = delimiter.value_or(text::delimiter_for(path));
    const auto rows = text::read_table(path, delim, "ingest");
    if (rows.empty()) throw DataError("ingest", "matrix file '" + path.string() + "' is empty");

    CohortMatrix m;
    const auto& header = rows.front();
    const std::size_t width = rows.size() > 1 ? rows[1].size() : header.size();
    const std::size_t skip = header.size() == width ? 1 : 0; // corner cell present?
    if (header.size() + 1 - skip != width)
        throw ParseError("ingest", "header has " + std::to_string(header.size()) +
                                       " cells but data rows have " + std::to_string(width), 1);
    for (std::size_t c = skip; c < header.size(); ++c) m.sample_ids.emplace_back(text::trim(header[c]));
    detail::check_unique(m.sample_ids, "sample");

    const std::size_t n = m.sample_ids.size();
    m.values = Matrix(rows.size() - 1, n);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != n + 1)
            throw ParseError("ingest", "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                           " cells, expected " + std::to_string(n + 1), r + 1);
        m.feature_ids.emplace_back(text::trim(row[0]));
        for (std::size_t c = 0; c < n; ++c) {
            const auto v = text::parse_double(row[c + 1]);
            if (!v || !std::isfinite(*v))
                throw ParseError("ingest", "non-numeric cell '" + row[c + 1] + "' at row " + std::to_string(r + 1) +
                                               ", column " + std::to_string(c + 2), r + 1);
            m.values(r - 1, c) = *v;
        }
    }
    detail::check_unique(m.feature_ids, "feature");
    return m;
}

inline void write_matrix(const CohortMatrix& m, const std::filesystem::path& path,
                         std::optional<char> delimiter = std::nullopt) {
    const char delim = delimiter.value_or(text::delimiter_for(path));
    std::string out = "feature";
    for (const auto& s : m.sample_ids) (out += delim) += text::quote_cell(s, delim);
    out += '\n';
    for (std::size_t r = 0; r < m.n_features(); ++r) {
        out += text::quote_cell(m.feature_ids[r], delim);
        for (double v : m.values.row(r)) (out += delim) += text::format_real(v);
        out += '\n';
    }
    text::write_file(path, out, "ingest");
}

/// Reads the clinical table: header of covariate names, first column sample ids.
/// Every non-target column must be declared in `schema`.
inline ClinicalTable load_clinical(const std::filesystem::path& path, const ClinicalSchema& schema,
                                   const TargetSpec& target, std::optional<char> delimiter = std::nullopt) {
    const char delim = delimiter.value_or(text::delimiter_for(path));
    const auto rows = text::read_table(path, delim, "ingest");
    if (rows.empty()) throw DataError("ingest", "clinical file '" + path.string() + "' is empty");
    const auto& header = rows.front();

    std::vector<std::string> names;
    for (std::size_t c = 1; c < header.size(); ++c) names.emplace_back(text::trim(header[c]));

    std::vector<std::string> undeclared;
    std::optional<std::size_t> target_col;
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (names[c] == target.name) target_col = c;
        else if (!schema.contains(names[c])) undeclared.push_back(names[c]);
    }
    if (!target_col) throw ConfigError("ingest", "target column '" + target.name + "' not found in clinical table");
    if (!undeclared.empty())
        throw ConfigError("ingest", "clinical columns not declared in schema: " + text::join(undeclared, ", "));
    detail::check_unique(names, "covariate");

    ClinicalTable t;
    t.target_name = target.name;
    std::vector<std::string> target_cells;
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c == *target_col) continue;
        const auto& decl = schema.at(names[c]);
        t.covariates.push_back(Covariate{names[c], decl.kind, decl.levels, {}, {}});
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw ParseError("ingest", "clinical row " + std::to_string(r + 1) + " has " +
                                           std::to_string(row.size()) + " cells, expected " +
                                           std::to_string(header.size()), r + 1);
        t.sample_ids.emplace_back(text::trim(row[0]));
        std::size_t k = 0;
        for (std::size_t c = 0; c < names.size(); ++c) {
            const std::string cell(text::trim(row[c + 1]));
            if (c == *target_col) {
                target_cells.push_back(cell);
                continue;
            }
            auto& cov = t.covariates[k++];
            if (cov.kind == CovariateKind::Numeric) {
                if (is_missing_token(cell)) {
                    cov.values.push_back(std::nan(""));
                    continue;
                }
                const auto v = text::parse_double(cell);
                if (!v || !std::isfinite(*v))
                    throw ParseError("ingest", "non-numeric value '" + cell + "' in numeric column '" + cov.name +
                                                   "' at row " + std::to_string(r + 1), r + 1);
                cov.values.push_back(*v);
            } else {
                if (is_missing_token(cell)) {
                    cov.codes.push_back(-1);
                    continue;
                }
                auto it = std::find(cov.levels.begin(), cov.levels.end(), cell);
                if (it == cov.levels.end()) {
                    if (!schema.at(cov.name).levels.empty())
                        throw DataError("ingest", "value '" + cell + "' in column '" + cov.name +
                                                      "' is not a declared level (row " + std::to_string(r + 1) + ")");
                    cov.levels.push_back(cell);
                    it = cov.levels.end() - 1;
                }
                cov.codes.push_back(static_cast<int>(it - cov.levels.begin()));
            }
        }
    }
    detail::check_unique(t.sample_ids, "sample");

    std::set<std::string> observed;
    for (std::size_t i = 0; i < target_cells.size(); ++i) {
        if (is_missing_token(target_cells[i]))
            throw DataError("ingest", "sample '" + t.sample_ids[i] + "' has no value for target '" + target.name + "'");
        observed.insert(target_cells[i]);
    }
    if (observed.size() != 2)
        throw ConfigError("ingest", "target '" + target.name + "' must have exactly 2 observed levels, found " +
                                        std::to_string(observed.size()));
    if (target.control_level.empty() && target.case_level.empty()) {
        t.control_level = *observed.begin();
        t.case_level = *std::next(observed.begin());
    } else {
        t.control_level = target.control_level;
        t.case_level = target.case_level;
        if (!observed.contains(t.control_level) || !observed.contains(t.case_level) ||
            t.control_level == t.case_level)
            throw ConfigError("ingest", "target levels {" + *observed.begin() + ", " + *std::next(observed.begin()) +
                                            "} do not match configured control '" + t.control_level +
                                            "' and case '" + t.case_level + "'");
    }
    for (const auto& cell : target_cells) t.groups.push_back(cell == t.case_level ? Group::Case : Group::Control);
    return t;
}

/// Writes a clinical table in the layout load_clinical reads.
inline void write_clinical(const ClinicalTable& t, const std::filesystem::path& path,
                           std::optional<char> delimiter = std::nullopt) {
    const char delim = delimiter.value_or(text::delimiter_for(path));
    std::string out = "sample";
    (out += delim) += text::quote_cell(t.target_name, delim);
    for (const auto& c : t.covariates) (out += delim) += text::quote_cell(c.name, delim);
    out += '\n';
    for (std::size_t i = 0; i < t.sample_ids.size(); ++i) {
        out += text::quote_cell(t.sample_ids[i], delim);
        (out += delim) += text::quote_cell(t.level_name(t.groups[i]), delim);
        for (const auto& c : t.covariates) {
            out += delim;
            if (c.missing(i)) out += "NA";
            else if (c.kind == CovariateKind::Categorical) out += text::quote_cell(c.level(i), delim);
            else out += text::format_real(c.values[i]);
        }
        out += '\n';
    }
    text::write_file(path, out, "ingest");
}

/// log2(v + 1) per cell.
inline CohortMatrix log_normalize(CohortMatrix m) {
    for (double& v : m.values.data()) {
        if (v < 0.0) throw DataError("ingest", "negative value " + text::format_real(v) + " cannot be log-normalized");
        v = std::log2(v + 1.0);
    }
    return m;
}

/// Keeps features with value > threshold in at least ceil(frac * n_samples) samples.
inline CohortMatrix filter_features(const CohortMatrix& m, double expr_threshold = 8.0, double frac = 0.8) {
    if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("ingest", "filter fraction must lie in (0, 1]");
    const auto needed = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(m.n_samples()) - 1e-9));
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < m.n_features(); ++r) {
        const auto row = m.values.row(r);
        const auto count = static_cast<std::size_t>(
            std::count_if(row.begin(), row.end(), [&](double v) { return v > expr_threshold; }));
        if (count >= needed) keep.push_back(r);
    }
    CohortMatrix out;
    out.sample_ids = m.sample_ids;
    out.values = m.values.select_rows(keep);
    for (auto r : keep) out.feature_ids.push_back(m.feature_ids[r]);
    return out;
}

/// Centered nuisance design: one column per numeric covariate and per observed
/// non-reference level of each categorical covariate, all mean-centered.
struct NuisanceDesign {
    std::vector<std::string> column_names;
    std::vector<std::vector<double>> columns;
};

inline NuisanceDesign build_design(const ClinicalTable& clin, const std::vector<std::string>& sample_ids,
                                   const std::vector<std::string>& covariate_names) {
    NuisanceDesign design;
    std::vector<std::size_t> rows;
    rows.reserve(sample_ids.size());
    for (const auto& id : sample_ids) {
        auto idx = clin.index_of(id);
        if (!idx) throw DataError("ingest", "sample '" + id + "' missing from clinical table");
        rows.push_back(*idx);
    }
    for (const auto& name : covariate_names) {
        if (name == clin.target_name)
            throw ConfigError("ingest", "target '" + name + "' cannot be removed as a covariate effect");
        const Covariate* cov = clin.find(name);
        if (!cov) throw ConfigError("ingest", "covariate '" + name + "' not found in clinical table");
        for (std::size_t k = 0; k < rows.size(); ++k)
            if (cov->missing(rows[k]))
                throw DataError("ingest", "sample '" + sample_ids[k] + "' has a missing value for covariate '" +
                                              name + "'");
        if (cov->kind == CovariateKind::Numeric) {
            std::vector<double> col;
            for (auto r : rows) col.push_back(cov->values[r]);
            design.column_names.push_back(name);
            design.columns.push_back(std::move(col));
        } else {
            std::vector<bool> seen(cov->levels.size(), false);
            for (auto r : rows) seen[static_cast<std::size_t>(cov->codes[r])] = true;
            bool reference_dropped = false;
            for (std::size_t lvl = 0; lvl < cov->levels.size(); ++lvl) {
                if (!seen[lvl]) continue;
                if (!reference_dropped) {
                    reference_dropped = true;
                    continue;
                }
                std::vector<double> col;
                for (auto r : rows) col.push_back(cov->codes[r] == static_cast<int>(lvl) ? 1.0 : 0.0);
                design.column_names.push_back(name + "=" + cov->levels[lvl]);
                design.columns.push_back(std::move(col));
            }
        }
    }
    for (auto& col : design.columns) {
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        for (double& v : col) v -= mean;
    }
    return design;
}

/// Orthonormal basis of the centered design; throws when a column lies in the
/// span of earlier ones (the intercept is implicit, columns are centered).
inline std::vector<std::vector<double>> orthonormal_basis(const NuisanceDesign& design) {
    constexpr double rank_tol = 1e-9;
    std::vector<std::vector<double>> basis;
    std::vector<std::size_t> basis_source;
    for (std::size_t j = 0; j < design.columns.size(); ++j) {
        std::vector<double> v = design.columns[j];
        const double original = std::sqrt(dot(v, v));
        std::vector<double> coef(basis.size(), 0.0);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t q = 0; q < basis.size(); ++q) {
                const double c = dot(basis[q], v);
                coef[q] += c;
                for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * basis[q][i];
            }
        }
        const double remaining = std::sqrt(dot(v, v));
        if (original == 0.0 || remaining <= rank_tol * std::max(original, 1.0)) {
            std::vector<std::string> involved;
            for (std::size_t q = 0; q < basis.size(); ++q)
                if (std::abs(coef[q]) > rank_tol * std::max(original, 1.0))
                    involved.push_back(design.column_names[basis_source[q]]);
            involved.push_back(design.column_names[j]);
            throw DataError("ingest", "rank-deficient covariate design; collinear columns: " +
                                          text::join(involved, ", ") +
                                          (original == 0.0 ? " (constant column)" : ""));
        }
        for (double& x : v) x /= remaining;
        basis.push_back(std::move(v));
        basis_source.push_back(j);
    }
    return basis;
}

/// Regresses each feature on the nuisance covariates and removes the fitted
/// effect, keeping the intercept. The target never enters the design.
inline CohortMatrix remove_covariate_effects(const CohortMatrix& m, const ClinicalTable& clin,
                                             const std::vector<std::string>& covariate_names, unsigned threads = 1) {
    if (covariate_names.empty()) return m;
    const auto design = build_design(clin, m.sample_ids, covariate_names);
    const auto basis = orthonormal_basis(design);

    CohortMatrix out = m;
    parallel_for(m.n_features(), threads, [&](std::size_t r) {
        auto y = out.values.row(r);
        // Two sweeps of modified Gram-Schmidt keep the residual orthogonal to machine precision.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) {
                const double c = dot(q, y);
                for (std::size_t i = 0; i < y.size(); ++i) y[i] -= c * q[i];
            }
        }
    });
    return out;
}

} // namespace cohort_audit

#endif

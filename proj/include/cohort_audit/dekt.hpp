#ifndef COHORT_AUDIT_DEKT_HPP
#define COHORT_AUDIT_DEKT_HPP

// Expert-knowledge table: condition language, group-level covariate tests and
// per-sample support annotation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "anomaly.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "stats.hpp"
#include "text.hpp"

namespace cohort_audit {

enum class CmpOp { Less, LessEqual, Greater, GreaterEqual };

inline std::string_view op_symbol(CmpOp op) {
    switch (op) {
    case CmpOp::Less: return "<";
    case CmpOp::LessEqual: return "<=";
    case CmpOp::Greater: return ">";
    case CmpOp::GreaterEqual: return ">=";
    }
    return "?";
}

struct Cmp {
    CmpOp op = CmpOp::Less;
    double threshold = 0.0;
    bool operator==(const Cmp&) const = default;
};

struct OneOf {
    std::vector<std::string> levels;
    bool operator==(const OneOf&) const = default;
};

struct Equals {
    std::string level;
    bool operator==(const Equals&) const = default;
};

/// Case-typical observation for one covariate.
using Condition = std::variant<Cmp, OneOf, Equals>;

/// Grammar:  COND := OP NUMBER | ITEM ("," ITEM)+ | ITEM ;  OP := "<=" | ">=" | "<" | ">"
/// Comparisons are only valid for numeric covariates, lists and literals only
/// for categorical ones. Error positions are byte offsets into `text`.
inline Condition parse_condition(std::string_view text, CovariateKind kind) {
    const auto fail = [](const std::string& msg, std::size_t pos) -> ParseError {
        return ParseError("dekt_explain", msg + " at offset " + std::to_string(pos), pos);
    };
    std::size_t pos = text.find_first_not_of(" \t");
    if (pos == std::string_view::npos) throw fail("empty condition", 0);
    const std::size_t end = text.find_last_not_of(" \t\r\n") + 1;

    const bool has_op = text[pos] == '<' || text[pos] == '>';
    if (has_op) {
        if (kind != CovariateKind::Numeric) throw fail("comparison used on a categorical covariate", pos);
        Cmp c;
        const bool eq = pos + 1 < end && text[pos + 1] == '=';
        c.op = text[pos] == '<' ? (eq ? CmpOp::LessEqual : CmpOp::Less) : (eq ? CmpOp::GreaterEqual : CmpOp::Greater);
        pos += eq ? 2 : 1;
        while (pos < end && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
        const auto number = text::parse_double(text.substr(pos, end - pos));
        if (pos >= end || !number || !std::isfinite(*number)) throw fail("malformed number", pos);
        c.threshold = *number;
        return c;
    }
    if (kind != CovariateKind::Categorical) throw fail("numeric covariate needs a comparison operator", pos);

    std::vector<std::string> items;
    std::size_t start = 0;
    const std::string_view body = text.substr(0, end);
    while (true) {
        const std::size_t comma = body.find(',', start);
        const std::size_t stop = comma == std::string_view::npos ? body.size() : comma;
        const auto item = text::trim(body.substr(start, stop - start));
        if (item.empty()) throw fail("empty list item", std::max(start, pos));
        items.emplace_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (items.size() == 1) return Equals{items.front()};
    return OneOf{std::move(items)};
}

inline std::string render_condition(const Condition& c) {
    if (const auto* cmp = std::get_if<Cmp>(&c)) return std::string(op_symbol(cmp->op)) + text::format_real(cmp->threshold);
    if (const auto* one = std::get_if<OneOf>(&c)) return text::join(one->levels, ",");
    return std::get<Equals>(c).level;
}

/// A single clinical observation: missing, numeric, or a categorical level.
using Observed = std::variant<std::monostate, double, std::string>;

inline Observed observed_value(const Covariate& cov, std::size_t i) {
    if (cov.missing(i)) return std::monostate{};
    if (cov.kind == CovariateKind::Numeric) return cov.values[i];
    return cov.level(i);
}

inline std::string display_observed(const Observed& v) {
    if (std::holds_alternative<std::monostate>(v)) return "NA";
    if (const auto* d = std::get_if<double>(&v)) return text::format_compact(*d);
    return std::get<std::string>(v);
}

/// Whether a (non-missing) observation satisfies the condition.
inline bool condition_holds(const Condition& c, const Observed& v) {
    if (const auto* cmp = std::get_if<Cmp>(&c)) {
        const auto* d = std::get_if<double>(&v);
        if (!d) return false;
        switch (cmp->op) {
        case CmpOp::Less: return *d < cmp->threshold;
        case CmpOp::LessEqual: return *d <= cmp->threshold;
        case CmpOp::Greater: return *d > cmp->threshold;
        case CmpOp::GreaterEqual: return *d >= cmp->threshold;
        }
        return false;
    }
    const auto* s = std::get_if<std::string>(&v);
    if (!s) return false;
    if (const auto* one = std::get_if<OneOf>(&c))
        return std::find(one->levels.begin(), one->levels.end(), *s) != one->levels.end();
    return std::get<Equals>(c).level == *s;
}

enum class RiskSign { Increases, Decreases };

struct DektEntry {
    std::string group;  // group token as written
    Group group_role = Group::Control;
    std::string feature;
    Condition condition;
    RiskSign sign = RiskSign::Increases;
    bool operator==(const DektEntry&) const = default;
};

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

inline std::optional<Group> resolve_group_token(std::string_view token, const ClinicalTable& clin) {
    if (token == clin.control_level) return Group::Control;
    if (token == clin.case_level) return Group::Case;
    const auto lower = lowercase(token);
    if (lower == "control") return Group::Control;
    if (lower == "case") return Group::Case;
    return std::nullopt;
}

/// Reads a CSV with header Group,Feature,Value,Sign and validates it against the clinical schema.
inline std::vector<DektEntry> load_dekt(const std::filesystem::path& path, const ClinicalTable& clin,
                                        bool allow_duplicate_features = false) {
    const auto rows = text::read_table(path, ',', "dekt_explain");
    if (rows.empty()) throw DataError("dekt_explain", "expert table '" + path.string() + "' has no header");
    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.push_back(lowercase(text::trim(h)));
    if (header != std::vector<std::string>{"group", "feature", "value", "sign"})
        throw DataError("dekt_explain", "expert table header must be Group,Feature,Value,Sign");

    std::vector<DektEntry> entries;
    std::vector<std::string> problems;
    std::map<std::string, std::size_t> first_row;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = "row " + std::to_string(r + 1);
        if (row.size() != 4) {
            problems.push_back(where + ": expected 4 cells, found " + std::to_string(row.size()));
            continue;
        }
        DektEntry e;
        e.group = std::string(text::trim(row[0]));
        e.feature = std::string(text::trim(row[1]));
        const auto sign = text::trim(row[3]);
        const auto role = resolve_group_token(e.group, clin);
        if (!role) {
            problems.push_back(where + ": unknown group '" + e.group + "'");
            continue;
        }
        e.group_role = *role;
        if (sign == "+") e.sign = RiskSign::Increases;
        else if (sign == "-") e.sign = RiskSign::Decreases;
        else {
            problems.push_back(where + ": invalid sign '" + std::string(sign) + "' (expected + or -)");
            continue;
        }
        const Covariate* cov = clin.find(e.feature);
        if (!cov) {
            problems.push_back(where + ": unknown feature '" + e.feature + "'");
            continue;
        }
        try {
            e.condition = parse_condition(row[2], cov->kind);
        } catch (const ParseError& err) {
            problems.push_back(where + ": " + err.what());
            continue;
        }
        if (!allow_duplicate_features) {
            auto [it, inserted] = first_row.emplace(e.feature, r + 1);
            if (!inserted) {
                problems.push_back(where + ": duplicate feature '" + e.feature + "' (first on row " +
                                   std::to_string(it->second) + ")");
                continue;
            }
        }
        entries.push_back(std::move(e));
    }
    if (!problems.empty()) throw DataError("dekt_explain", "invalid expert table: " + text::join(problems, "; "));
    return entries;
}

inline const DektEntry* find_entry(const std::vector<DektEntry>& dekt, std::string_view feature) {
    for (const auto& e : dekt)
        if (e.feature == feature) return &e;
    return nullptr;
}

enum class Direction { TowardCase, TowardControl };
enum class Support { Supports, Opposes, NotApplicable };

/// A matching observation is typical of the entry's group; a move toward the
/// other group is supported by the complement.
inline Support entry_supports(const DektEntry& e, const Observed& observed, Direction direction) {
    if (std::holds_alternative<std::monostate>(observed)) return Support::NotApplicable;
    const bool case_typical = condition_holds(e.condition, observed) == (e.group_role == Group::Case);
    const bool supports = direction == Direction::TowardCase ? case_typical : !case_typical;
    return supports ? Support::Supports : Support::Opposes;
}

struct Evidence {
    std::string feature;
    std::string observed;
    std::string condition;
    Support outcome = Support::NotApplicable;
    bool operator==(const Evidence&) const = default;
};

struct IndividualAnnotation {
    std::string sample_id;
    Group given = Group::Control;
    Direction direction = Direction::TowardCase;
    std::vector<Evidence> evidence; // one per expert entry, table order
    std::size_t n_supports = 0;
    std::size_t n_total = 0;

    std::vector<Evidence> with_outcome(Support s) const {
        std::vector<Evidence> out;
        for (const auto& e : evidence)
            if (e.outcome == s) out.push_back(e);
        return out;
    }
    std::string ratio_text() const { return std::to_string(n_supports) + " / " + std::to_string(n_total); }
    bool operator==(const IndividualAnnotation&) const = default;
};

/// Scores one flagged sample against every expert entry. The denominator is the
/// full entry count, missing observations included.
inline IndividualAnnotation annotate_individual(const std::string& sample_id, const ClinicalTable& clin,
                                                const std::vector<DektEntry>& dekt, const AnomalyRecord& record) {
    const auto idx = clin.index_of(sample_id);
    if (!idx) throw DataError("dekt_explain", "sample '" + sample_id + "' missing from clinical table");
    IndividualAnnotation a;
    a.sample_id = sample_id;
    a.given = record.given;
    a.direction = record.given == Group::Control ? Direction::TowardCase : Direction::TowardControl;
    for (const auto& e : dekt) {
        const Covariate* cov = clin.find(e.feature);
        if (!cov) throw DataError("dekt_explain", "expert entry references unknown feature '" + e.feature + "'");
        const auto obs = observed_value(*cov, *idx);
        const auto outcome = entry_supports(e, obs, a.direction);
        a.evidence.push_back({e.feature, display_observed(obs), render_condition(e.condition), outcome});
        if (outcome == Support::Supports) ++a.n_supports;
    }
    a.n_total = dekt.size();
    return a;
}

struct GroupTestOptions {
    double alpha = 0.05;
    TestRule rule = TestRule::Paper;
    bool benjamini_hochberg = false;
};

struct CategoricalFinding {
    std::string covariate;
    std::string level;
    std::vector<std::string> other_levels;
    std::string relative_to; // "Case", "Control" or "unknown"
    Contingency2x2 counts;
    TestResult test;
    double p_adjusted = 1.0;
    bool operator==(const CategoricalFinding&) const = default;
};

struct NumericFinding {
    std::string covariate;
    std::string expectation;
    TestResult test;
    double p_adjusted = 1.0;
    std::vector<double> flagged_values;
    std::vector<double> origin_values;
    bool operator==(const NumericFinding&) const = default;
};

struct SkippedTest {
    std::string covariate;
    std::string reason;
    bool operator==(const SkippedTest&) const = default;
};

namespace detail {

inline std::vector<std::size_t> remainder(const std::vector<std::size_t>& origin, const std::vector<std::size_t>& flagged) {
    const std::set<std::size_t> f(flagged.begin(), flagged.end());
    std::vector<std::size_t> out;
    for (auto i : origin)
        if (!f.contains(i)) out.push_back(i);
    return out;
}

/// Benjamini-Hochberg step-up adjustment.
inline std::vector<double> bh_adjust(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return p[x] < p[y] || (p[x] == p[y] && x < y); });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t i = order[r];
        running = std::min(running, p[i] * static_cast<double>(m) / static_cast<double>(r + 1));
        adj[i] = std::min(running, 1.0);
    }
    return adj;
}

inline std::vector<const Covariate*> sorted_covariates(const ClinicalTable& clin, CovariateKind kind) {
    std::vector<const Covariate*> out;
    for (const auto& c : clin.covariates)
        if (c.kind == kind) out.push_back(&c);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->name < b->name; });
    return out;
}

} // namespace detail

/// Level-vs-rest tests of every categorical covariate between the flagged
/// samples and the remaining members of their origin group (indices into clin).
inline std::vector<CategoricalFinding> group_categorical_tests(const std::vector<std::size_t>& flagged,
                                                               const std::vector<std::size_t>& origin,
                                                               const ClinicalTable& clin,
                                                               const std::vector<DektEntry>& dekt,
                                                               const GroupTestOptions& opt = {}) {
    std::vector<CategoricalFinding> all;
    if (flagged.empty()) return all;
    const auto rest = detail::remainder(origin, flagged);
    for (const Covariate* cov : detail::sorted_covariates(clin, CovariateKind::Categorical)) {
        std::vector<std::int64_t> in_flagged(cov->levels.size(), 0), in_rest(cov->levels.size(), 0);
        for (auto i : flagged)
            if (!cov->missing(i)) ++in_flagged[static_cast<std::size_t>(cov->codes[i])];
        for (auto i : rest)
            if (!cov->missing(i)) ++in_rest[static_cast<std::size_t>(cov->codes[i])];
        std::vector<std::size_t> observed;
        for (std::size_t l = 0; l < cov->levels.size(); ++l)
            if (in_flagged[l] + in_rest[l] > 0) observed.push_back(l);
        if (observed.size() < 2) continue;
        std::int64_t total_flagged = 0, total_rest = 0;
        for (auto l : observed) {
            total_flagged += in_flagged[l];
            total_rest += in_rest[l];
        }
        if (total_flagged == 0 || total_rest == 0) continue;
        const DektEntry* entry = find_entry(dekt, cov->name);
        for (auto l : observed) {
            CategoricalFinding f;
            f.covariate = cov->name;
            f.level = cov->levels[l];
            for (auto o : observed)
                if (o != l) f.other_levels.push_back(cov->levels[o]);
            if (!entry) f.relative_to = "unknown";
            else {
                const bool hit = condition_holds(entry->condition, Observed{f.level});
                f.relative_to = hit == (entry->group_role == Group::Case) ? "Case" : "Control";
            }
            f.counts = {in_flagged[l], in_rest[l], total_flagged - in_flagged[l], total_rest - in_rest[l]};
            f.test = categorical_test(f.counts, opt.rule);
            f.p_adjusted = f.test.p_value;
            all.push_back(std::move(f));
        }
    }
    if (opt.benjamini_hochberg) {
        std::vector<double> p;
        for (const auto& f : all) p.push_back(f.test.p_value);
        const auto adj = detail::bh_adjust(p);
        for (std::size_t i = 0; i < all.size(); ++i) all[i].p_adjusted = adj[i];
    }
    std::vector<CategoricalFinding> significant;
    for (auto& f : all)
        if (f.p_adjusted < opt.alpha) significant.push_back(std::move(f));
    return significant;
}

/// Plot-title expectation for a numeric covariate, from its expert entry.
inline std::string numeric_expectation(const DektEntry* entry, const ClinicalTable& clin) {
    if (!entry) return "no expert expectation";
    const auto* cmp = std::get_if<Cmp>(&entry->condition);
    if (!cmp) return "expected " + render_condition(entry->condition) + " in " + clin.case_level;
    const bool higher = cmp->op == CmpOp::Greater || cmp->op == CmpOp::GreaterEqual;
    return std::string(higher ? "higher" : "lower") + " in " + clin.case_level + " (" + render_condition(entry->condition) + ")";
}

struct NumericTestOutcome {
    std::vector<NumericFinding> significant;
    std::vector<SkippedTest> skipped;
};

/// Mann-Whitney comparison of every numeric covariate (pairwise deletion of missing values).
inline NumericTestOutcome group_numeric_tests(const std::vector<std::size_t>& flagged,
                                              const std::vector<std::size_t>& origin, const ClinicalTable& clin,
                                              const std::vector<DektEntry>& dekt, const GroupTestOptions& opt = {}) {
    NumericTestOutcome out;
    if (flagged.empty()) return out;
    const auto rest = detail::remainder(origin, flagged);
    std::vector<NumericFinding> all;
    for (const Covariate* cov : detail::sorted_covariates(clin, CovariateKind::Numeric)) {
        NumericFinding f;
        f.covariate = cov->name;
        for (auto i : flagged)
            if (!cov->missing(i)) f.flagged_values.push_back(cov->values[i]);
        for (auto i : rest)
            if (!cov->missing(i)) f.origin_values.push_back(cov->values[i]);
        if (f.flagged_values.empty() || f.origin_values.empty()) {
            out.skipped.push_back({cov->name, "no non-missing values on one side"});
            continue;
        }
        f.test = mann_whitney(f.flagged_values, f.origin_values);
        f.p_adjusted = f.test.p_value;
        f.expectation = numeric_expectation(find_entry(dekt, cov->name), clin);
        all.push_back(std::move(f));
    }
    if (opt.benjamini_hochberg) {
        std::vector<double> p;
        for (const auto& f : all) p.push_back(f.test.p_value);
        const auto adj = detail::bh_adjust(p);
        for (std::size_t i = 0; i < all.size(); ++i) all[i].p_adjusted = adj[i];
    }
    for (auto& f : all)
        if (f.p_adjusted < opt.alpha) out.significant.push_back(std::move(f));
    return out;
}

/// Explanation paragraph for a significant categorical finding, followed by the
/// expert risk sentence when the table has an entry for the covariate.
inline std::string render_explanation_text(const CategoricalFinding& f, const std::vector<DektEntry>& dekt,
                                           const std::string& anomalous_group, const std::string& origin_group) {
    const double odds = f.test.odds_ratio;
    const std::string cmp = odds > 1.0 ? ">1" : (odds < 1.0 ? "<1" : "=1");
    const std::string represented = odds > 1.0 ? "more" : (odds < 1.0 ? "less" : "equally");
    std::string s = "For the covariate " + f.covariate + ", we evaluated the prevalence of " + f.level +
                    " over the remaining values of the covariate (" + text::join(f.other_levels, ",") + ") in both " +
                    anomalous_group + " and " + origin_group + " groups. We obtained an OR " + cmp + " (P < " +
                    text::format_pvalue(f.p_adjusted) + "), which means that " + f.level + " is " + represented +
                    " represented than the remaining values in the " + anomalous_group + " group compared to the " +
                    origin_group + " group.";
    if (const DektEntry* e = find_entry(dekt, f.covariate)) {
        const bool hit = condition_holds(e->condition, Observed{f.level});
        const bool provides = hit == (e->sign == RiskSign::Increases);
        s += "\n\nBased on domain expert knowledge, " + f.level + (provides ? " provides" : " does not provide") +
             " a higher risk to develop the disease.";
    }
    return s;
}

} // namespace cohort_audit

#endif

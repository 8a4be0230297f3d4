#ifndef COHORT_AUDIT_STATS_HPP
#define COHORT_AUDIT_STATS_HPP

// Exact and asymptotic tests used to annotate anomalous groups.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace cohort_audit {

/// Rows {has value, other values} x columns {anomalous group, origin group}:
///   a = anomalous with value   b = origin with value
///   c = anomalous other        d = origin other
struct Contingency2x2 {
    std::int64_t a = 0, b = 0, c = 0, d = 0;

    std::int64_t total() const { return a + b + c + d; }
    bool operator==(const Contingency2x2&) const = default;
};

enum class TestMethod { Fisher, ChiSquare, MannWhitney };

inline std::string method_name(TestMethod m) {
    switch (m) {
    case TestMethod::Fisher: return "fisher";
    case TestMethod::ChiSquare: return "chi_square";
    case TestMethod::MannWhitney: return "mann_whitney";
    }
    return "unknown";
}

struct TestResult {
    TestMethod method = TestMethod::Fisher;
    double p_value = 1.0;
    double odds_ratio = std::numeric_limits<double>::quiet_NaN(); // categorical tests
    double mean_first = std::numeric_limits<double>::quiet_NaN(); // Mann-Whitney: anomalous / xs
    double mean_second = std::numeric_limits<double>::quiet_NaN();
    double statistic = 0.0; // chi-square statistic, U, or observed a
    std::size_t n_first = 0;
    std::size_t n_second = 0;
    bool exact = false;

    bool operator==(const TestResult& o) const {
        const auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return method == o.method && same(p_value, o.p_value) && same(odds_ratio, o.odds_ratio) &&
               same(mean_first, o.mean_first) && same(mean_second, o.mean_second) && same(statistic, o.statistic) &&
               n_first == o.n_first && n_second == o.n_second && exact == o.exact;
    }
};

/// Upper tail of chi-square with one degree of freedom.
inline double chi_square_tail(double x) {
    if (!(x >= 0.0)) throw NumericError("stats", "chi-square statistic must be non-negative");
    return std::erfc(std::sqrt(x / 2.0));
}

/// P(Z > z) for standard normal Z.
inline double normal_upper(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// P(X >= k), X ~ Binomial(n, p).
inline double binomial_upper_tail(std::int64_t k, std::int64_t n, double p) {
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double lp = std::log(p), lq = std::log1p(-p);
    double s = 0.0;
    for (std::int64_t i = k; i <= n; ++i) {
        const auto di = static_cast<double>(i);
        s += std::exp(log_choose(static_cast<double>(n), di) + di * lp + static_cast<double>(n - i) * lq);
    }
    return std::min(s, 1.0);
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
inline double beta_quantile(double q, double a, double b) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (incomplete_beta(a, b, mid) < q) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Clopper-Pearson interval for a binomial proportion.
inline std::pair<double, double> accuracy_ci(std::int64_t correct, std::int64_t n, double level = 0.95) {
    if (n <= 0 || correct < 0 || correct > n) throw DataError("stats", "accuracy_ci requires 0 <= correct <= n, n > 0");
    const double alpha = 1.0 - level;
    const auto x = static_cast<double>(correct);
    const auto nn = static_cast<double>(n);
    const double lo = correct == 0 ? 0.0 : beta_quantile(alpha / 2.0, x, nn - x + 1.0);
    const double hi = correct == n ? 1.0 : beta_quantile(1.0 - alpha / 2.0, x + 1.0, nn - x);
    return {lo, hi};
}

namespace detail {

/// Hypergeometric support and normalized central densities for the margins of t.
struct Hypergeometric {
    std::int64_t lo = 0, hi = 0;
    std::vector<double> density; // density[u - lo]
    std::vector<double> log_density;
};

inline Hypergeometric hypergeometric(const Contingency2x2& t) {
    const std::int64_t m = t.a + t.c; // anomalous column total
    const std::int64_t n = t.b + t.d; // origin column total
    const std::int64_t k = t.a + t.b; // "has value" row total
    Hypergeometric h;
    h.lo = std::max<std::int64_t>(0, k - n);
    h.hi = std::min(k, m);
    const auto size = static_cast<std::size_t>(h.hi - h.lo + 1);
    h.density.assign(size, 0.0);

    // Ratio recurrence outward from the mode keeps every term near 1.
    std::int64_t mode = ((k + 1) * (m + 1)) / (m + n + 2);
    mode = std::clamp(mode, h.lo, h.hi);
    auto ratio_up = [&](std::int64_t u) { // w(u+1) / w(u)
        return static_cast<double>((m - u) * (k - u)) / static_cast<double>((u + 1) * (n - k + u + 1));
    };
    h.density[static_cast<std::size_t>(mode - h.lo)] = 1.0;
    for (std::int64_t u = mode; u < h.hi; ++u)
        h.density[static_cast<std::size_t>(u + 1 - h.lo)] = h.density[static_cast<std::size_t>(u - h.lo)] * ratio_up(u);
    for (std::int64_t u = mode; u > h.lo; --u)
        h.density[static_cast<std::size_t>(u - 1 - h.lo)] =
            h.density[static_cast<std::size_t>(u - h.lo)] / ratio_up(u - 1);
    const double total = std::accumulate(h.density.begin(), h.density.end(), 0.0);
    h.log_density.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
        h.density[i] /= total;
        h.log_density[i] = std::log(h.density[i]);
    }
    return h;
}

/// Mean of the noncentral hypergeometric distribution at log odds ratio `t`.
inline double noncentral_mean(const Hypergeometric& h, double log_or) {
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h.log_density.size(); ++i)
        max_log = std::max(max_log, h.log_density[i] + static_cast<double>(h.lo + static_cast<std::int64_t>(i)) * log_or);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < h.log_density.size(); ++i) {
        const double u = static_cast<double>(h.lo + static_cast<std::int64_t>(i));
        const double w = std::exp(h.log_density[i] + u * log_or - max_log);
        num += u * w;
        den += w;
    }
    return num / den;
}

/// Conditional maximum-likelihood odds ratio: solves E[X | psi] = observed a.
inline double conditional_mle_odds_ratio(const Hypergeometric& h, std::int64_t x) {
    if (x == h.lo && x == h.hi) return std::numeric_limits<double>::quiet_NaN();
    if (x == h.lo) return 0.0;
    if (x == h.hi) return std::numeric_limits<double>::infinity();
    const auto target = static_cast<double>(x);
    double lo = -1.0, hi = 1.0;
    while (noncentral_mean(h, lo) > target) lo *= 2.0;
    while (noncentral_mean(h, hi) < target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (noncentral_mean(h, mid) < target) lo = mid;
        else hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

} // namespace detail

/// Fisher's exact test: two-sided p sums every table no more probable than the
/// observed one (1e-7 relative slack); effect is the conditional-MLE odds ratio.
inline TestResult fisher_exact(const Contingency2x2& t) {
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) throw DataError("stats", "negative count in contingency table");
    if (t.total() == 0) throw DataError("stats", "contingency table is empty");
    const auto h = detail::hypergeometric(t);
    const double observed = h.density[static_cast<std::size_t>(t.a - h.lo)];
    const double cutoff = observed * (1.0 + 1e-7);
    double p = 0.0;
    for (double dens : h.density)
        if (dens <= cutoff) p += dens;

    TestResult r;
    r.method = TestMethod::Fisher;
    r.p_value = std::min(p, 1.0);
    r.odds_ratio = detail::conditional_mle_odds_ratio(h, t.a);
    r.statistic = static_cast<double>(t.a);
    r.n_first = static_cast<std::size_t>(t.a + t.c);
    r.n_second = static_cast<std::size_t>(t.b + t.d);
    r.exact = true;
    return r;
}

/// Pearson chi-square on a 2x2 table, Yates-corrected by default.
/// Effect is the sample cross-product odds ratio, Haldane-corrected when a cell is zero.
inline TestResult chi_square_2x2(const Contingency2x2& t, bool yates = true) {
    const double a = static_cast<double>(t.a), b = static_cast<double>(t.b), c = static_cast<double>(t.c),
                 d = static_cast<double>(t.d);
    const double n = a + b + c + d;
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 <= 0 || r2 <= 0 || c1 <= 0 || c2 <= 0) throw DataError("stats", "chi-square test needs positive margins");
    const double observed[4] = {a, b, c, d};
    const double expected[4] = {r1 * c1 / n, r1 * c2 / n, r2 * c1 / n, r2 * c2 / n};
    double h = 0.0;
    if (yates) {
        h = 0.5;
        for (int i = 0; i < 4; ++i) h = std::min(h, std::abs(observed[i] - expected[i]));
    }
    double stat = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double dev = std::abs(observed[i] - expected[i]) - h;
        stat += dev * dev / expected[i];
    }
    TestResult r;
    r.method = TestMethod::ChiSquare;
    r.statistic = stat;
    r.p_value = std::clamp(chi_square_tail(stat), 0.0, 1.0);
    r.odds_ratio = (t.a == 0 || t.b == 0 || t.c == 0 || t.d == 0)
                       ? ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5))
                       : (a * d) / (b * c);
    r.n_first = static_cast<std::size_t>(t.a + t.c);
    r.n_second = static_cast<std::size_t>(t.b + t.d);
    return r;
}

/// Which rule picks between Fisher and chi-square for a 2x2 table.
///   paper:        Fisher only when every count is above 10
///   conventional: Fisher when any expected count is below 5
///   always_fisher
enum class TestRule { Paper, Conventional, AlwaysFisher };

inline TestRule parse_test_rule(const std::string& s) {
    if (s == "paper") return TestRule::Paper;
    if (s == "conventional") return TestRule::Conventional;
    if (s == "always_fisher") return TestRule::AlwaysFisher;
    throw ConfigError("stats", "unknown test_rule '" + s + "' (expected paper, conventional or always_fisher)");
}

inline std::string test_rule_name(TestRule r) {
    switch (r) {
    case TestRule::Paper: return "paper";
    case TestRule::Conventional: return "conventional";
    case TestRule::AlwaysFisher: return "always_fisher";
    }
    return "paper";
}

inline TestMethod choose_categorical_test(const Contingency2x2& t, TestRule rule = TestRule::Paper) {
    switch (rule) {
    case TestRule::AlwaysFisher: return TestMethod::Fisher;
    case TestRule::Paper: return std::min({t.a, t.b, t.c, t.d}) > 10 ? TestMethod::Fisher : TestMethod::ChiSquare;
    case TestRule::Conventional: {
        const double n = static_cast<double>(t.total());
        if (n <= 0) return TestMethod::Fisher;
        const double r1 = static_cast<double>(t.a + t.b), r2 = static_cast<double>(t.c + t.d);
        const double c1 = static_cast<double>(t.a + t.c), c2 = static_cast<double>(t.b + t.d);
        const double min_expected = std::min({r1 * c1, r1 * c2, r2 * c1, r2 * c2}) / n;
        return min_expected < 5.0 ? TestMethod::Fisher : TestMethod::ChiSquare;
    }
    }
    return TestMethod::ChiSquare;
}

inline TestResult categorical_test(const Contingency2x2& t, TestRule rule = TestRule::Paper) {
    return choose_categorical_test(t, rule) == TestMethod::Fisher ? fisher_exact(t) : chi_square_2x2(t, true);
}

struct MannWhitneyOptions {
    std::size_t exact_max_n = 12; // exact null distribution up to this combined size, tie-free only
};

namespace detail {

/// Number of arrangements giving each U value for sample sizes (n1, n2).
inline std::vector<double> mann_whitney_counts(std::size_t n1, std::size_t n2) {
    // counts[i][j] is a vector over u of arrangements for sizes (i, j).
    std::vector<std::vector<std::vector<double>>> counts(n1 + 1, std::vector<std::vector<double>>(n2 + 1));
    for (std::size_t i = 0; i <= n1; ++i) {
        for (std::size_t j = 0; j <= n2; ++j) {
            auto& cur = counts[i][j];
            cur.assign(i * j + 1, 0.0);
            if (i == 0 || j == 0) {
                cur[0] = 1.0;
                continue;
            }
            // Largest value belongs to the first sample (beats all j of the second) or to the second.
            const auto& with_first = counts[i - 1][j];
            for (std::size_t u = 0; u < with_first.size(); ++u) cur[u + j] += with_first[u];
            const auto& with_second = counts[i][j - 1];
            for (std::size_t u = 0; u < with_second.size(); ++u) cur[u] += with_second[u];
        }
    }
    return counts[n1][n2];
}

} // namespace detail

/// Two-sided Mann-Whitney U test. U counts pairs (x, y) with x > y (ties 1/2).
inline TestResult mann_whitney(std::span<const double> xs, std::span<const double> ys, MannWhitneyOptions opt = {}) {
    if (xs.empty() || ys.empty()) throw DataError("stats", "Mann-Whitney test needs at least one value per side");
    const std::size_t n1 = xs.size(), n2 = ys.size(), n = n1 + n2;

    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(n);
    for (double v : xs) pooled.emplace_back(v, 0);
    for (double v : ys) pooled.emplace_back(v, 1);
    std::sort(pooled.begin(), pooled.end());

    double rank_sum_x = 0.0;
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        const auto t = static_cast<double>(j - i);
        if (j - i > 1) {
            ties = true;
            tie_term += t * t * t - t;
        }
        for (std::size_t k = i; k < j; ++k)
            if (pooled[k].second == 0) rank_sum_x += midrank;
        i = j;
    }
    const double u = rank_sum_x - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    const double mean_u = static_cast<double>(n1 * n2) / 2.0;

    TestResult r;
    r.method = TestMethod::MannWhitney;
    r.statistic = u;
    r.n_first = n1;
    r.n_second = n2;
    r.mean_first = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n1);
    r.mean_second = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n2);

    if (!ties && n <= opt.exact_max_n) {
        const auto counts = detail::mann_whitney_counts(n1, n2);
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        const auto ui = static_cast<std::size_t>(u);
        double tail = 0.0;
        if (u > mean_u)
            for (std::size_t k = ui; k < counts.size(); ++k) tail += counts[k];
        else
            for (std::size_t k = 0; k <= ui; ++k) tail += counts[k];
        r.p_value = std::min(1.0, 2.0 * tail / total);
        r.exact = true;
        return r;
    }

    const double nn = static_cast<double>(n);
    const double var = static_cast<double>(n1 * n2) / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    const double dev = std::abs(u - mean_u);
    if (!(var > 0.0) || dev == 0.0) {
        r.p_value = 1.0;
        return r;
    }
    const double z = std::max(dev - 0.5, 0.0) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(z / std::numbers::sqrt2));
    return r;
}

} // namespace cohort_audit

#endif

#ifndef COHORT_AUDIT_TESTS_ORACLES_HPP
#define COHORT_AUDIT_TESTS_ORACLES_HPP

// Reference computations used to check the library. Each one takes a different
// route from the production code: exact integer enumeration, brute force,
// quadrature, or a generic optimizer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace oracle {

using u128 = unsigned __int128;

inline u128 binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    u128 r = 1;
    for (std::int64_t i = 1; i <= k; ++i) r = r * static_cast<u128>(n - k + i) / static_cast<u128>(i);
    return r;
}

/// Two-sided Fisher p by enumerating every table with the observed margins and
/// comparing exact integer weights (no floating-point tolerance).
inline double fisher_p(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    const std::int64_t r1 = a + b, r2 = c + d, c1 = a + c;
    const auto weight = [&](std::int64_t x) { return binomial(r1, x) * binomial(r2, c1 - x); };
    const u128 observed = weight(a);
    u128 total = 0, tail = 0;
    for (std::int64_t x = std::max<std::int64_t>(0, c1 - r2); x <= std::min(r1, c1); ++x) {
        const u128 w = weight(x);
        total += w;
        if (w <= observed) tail += w;
    }
    return static_cast<double>(static_cast<long double>(tail) / static_cast<long double>(total));
}

/// Two-sided exact Mann-Whitney p by enumerating every split of the pooled ranks.
inline double mann_whitney_exact_p(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n1 = xs.size(), n2 = ys.size(), n = n1 + n2;
    std::vector<double> pooled(xs);
    pooled.insert(pooled.end(), ys.begin(), ys.end());
    std::sort(pooled.begin(), pooled.end());
    const auto u_of = [&](const std::vector<double>& first) {
        double u = 0;
        for (double x : first)
            for (double y : pooled)
                if (std::find(first.begin(), first.end(), y) == first.end() && x > y) u += 1;
        return u;
    };
    const double u_obs = u_of(xs);
    std::size_t le = 0, ge = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        std::vector<double> first;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) first.push_back(pooled[i]);
        const double u = u_of(first);
        ++total;
        le += u <= u_obs;
        ge += u >= u_obs;
    }
    (void)n2;
    return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

/// Upper tail of chi-square with one degree of freedom: 2 * integral of the
/// standard normal density from sqrt(x) outward, by composite Simpson's rule.
inline double chi_square1_tail(double x) {
    const double lo = std::sqrt(x), hi = lo + 40.0;
    const int m = 200000;
    const double h = (hi - lo) / m;
    const auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
    double s = phi(lo) + phi(hi);
    for (int i = 1; i < m; ++i) s += phi(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return 2.0 * s * h / 3.0;
}

inline double binomial_pmf_sum(std::int64_t from, std::int64_t to, std::int64_t n, double p) {
    double s = 0;
    for (std::int64_t k = from; k <= to; ++k)
        s += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                      (n - k) * std::log1p(-p));
    return s;
}

/// Clopper-Pearson bounds by bisection on the binomial tail sums.
inline std::pair<double, double> clopper_pearson(std::int64_t k, std::int64_t n, double level = 0.95) {
    const double a = (1 - level) / 2;
    const auto solve = [](auto f) {
        double lo = 0, hi = 1;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) ? hi : lo) = mid;
        }
        return 0.5 * (lo + hi);
    };
    const double lower = k == 0 ? 0.0 : solve([&](double p) { return binomial_pmf_sum(k, n, n, p) >= a; });
    const double upper = k == n ? 1.0 : solve([&](double p) { return binomial_pmf_sum(0, k, n, p) <= a; });
    return {lower, upper};
}

/// Euclidean projection onto {0 <= a <= C, y'a = 0}, via bisection on the multiplier.
inline std::vector<double> project_feasible(const std::vector<double>& v, const std::vector<int>& y, double C) {
    const auto balance = [&](double mu) {
        double s = 0;
        for (std::size_t i = 0; i < v.size(); ++i) s += y[i] * std::clamp(v[i] - mu * y[i], 0.0, C);
        return s;
    };
    double bound = C + 1.0;
    for (double x : v) bound = std::max(bound, std::abs(x) + C + 1.0);
    double lo = -bound, hi = bound; // balance(mu) is non-increasing in mu
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (balance(mid) > 0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    std::vector<double> a(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - mu * y[i], 0.0, C);
    return a;
}

struct QpResult {
    std::vector<double> alpha;
    double objective;
};

/// Accelerated projected gradient (FISTA) on the SVM dual
///   minimize 0.5 a'Qa - sum(a), Q_ij = y_i y_j K_ij.
inline QpResult svm_dual_qp(const std::vector<std::vector<double>>& K, const std::vector<int>& y, double C,
                            int iterations = 200000) {
    const std::size_t n = y.size();
    // Lipschitz constant: power iteration on Q, with headroom.
    std::vector<double> v(n, 1.0);
    double L = 1.0;
    for (int it = 0; it < 500; ++it) {
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) w[i] += y[i] * y[j] * K[i][j] * v[j];
        const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
        if (norm == 0) break;
        L = norm;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    }
    L = std::max(L * 1.01, 1e-12);
    const auto objective = [&](const std::vector<double>& a) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) s += 0.5 * a[i] * a[j] * y[i] * y[j] * K[i][j];
            s -= a[i];
        }
        return s;
    };
    const auto gradient = [&](const std::vector<double>& a) {
        std::vector<double> g(n, -1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i] += y[i] * y[j] * K[i][j] * a[j];
        return g;
    };
    std::vector<double> x(n, 0.0), z = x;
    double t = 1.0, fx = objective(x);
    for (int it = 0; it < iterations; ++it) {
        const auto g = gradient(z);
        std::vector<double> step(n);
        for (std::size_t i = 0; i < n; ++i) step[i] = z[i] - g[i] / L;
        const auto next = project_feasible(step, y, C);
        const double f_next = objective(next);
        const double t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        for (std::size_t i = 0; i < n; ++i) z[i] = next[i] + (t - 1) / t_next * (next[i] - x[i]);
        // Restart momentum when the objective goes up.
        if (f_next > fx) {
            z = next;
            t = 1.0;
        } else {
            t = t_next;
        }
        x = next;
        fx = f_next;
        // Stop at a fixed point of the plain projected-gradient map.
        if (it % 200 == 199) {
            const auto gx = gradient(x);
            std::vector<double> probe(n);
            for (std::size_t i = 0; i < n; ++i) probe[i] = x[i] - gx[i] / L;
            const auto px = project_feasible(probe, y, C);
            double residual = 0;
            for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(px[i] - x[i]));
            if (residual <= 1e-12 * std::max(1.0, C)) break;
        }
    }
    return {x, objective(x)};
}

/// Elbow by explicit perpendicular distances to the first-to-last chord (1-based).
inline std::optional<std::size_t> elbow(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 3) return std::nullopt;
    const double x1 = 1, y1 = v.front(), x2 = static_cast<double>(n), y2 = v.back();
    const double len = std::hypot(x2 - x1, y2 - y1);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = static_cast<double>(i + 1), y0 = v[i];
        dist[i] = std::abs((y2 - y1) * x0 - (x2 - x1) * y0 + x2 * y1 - y2 * x1) / len;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[best]) best = i;
    const double range = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    if (dist[best] <= 1e-12 * range || range == 0) return n;
    return best + 1;
}

/// y minus its least-squares covariate fit on [1, X] (normal equations, Gauss-Jordan).
inline std::vector<double> residualize(const std::vector<double>& y, const std::vector<std::vector<double>>& columns) {
    const std::size_t n = y.size(), p = columns.size() + 1;
    const auto col = [&](std::size_t j, std::size_t i) { return j == 0 ? 1.0 : columns[j - 1][i]; };
    std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c)
            for (std::size_t i = 0; i < n; ++i) A[r][c] += col(r, i) * col(c, i);
        for (std::size_t i = 0; i < n; ++i) A[r][p] += col(r, i) * y[i];
    }
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < p; ++r)
            if (std::abs(A[r][k]) > std::abs(A[piv][k])) piv = r;
        std::swap(A[k], A[piv]);
        if (std::abs(A[k][k]) < 1e-12) throw std::runtime_error("singular design");
        for (std::size_t r = 0; r < p; ++r) {
            if (r == k) continue;
            const double f = A[r][k] / A[k][k];
            for (std::size_t c = k; c <= p; ++c) A[r][c] -= f * A[k][c];
        }
    }
    // Subtract the covariate part of the fit, re-centred so the row mean is kept.
    std::vector<double> fit(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 1; j < p; ++j) fit[i] += A[j][p] / A[j][j] * col(j, i);
    const double mean_fit = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = y[i] - (fit[i] - mean_fit);
    return out;
}

} // namespace oracle

#endif

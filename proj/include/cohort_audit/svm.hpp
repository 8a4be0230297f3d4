#ifndef COHORT_AUDIT_SVM_HPP
#define COHORT_AUDIT_SVM_HPP

// Soft-margin binary SVM trained with SMO (maximal-violating-pair selection
// refined by second-order gain), plus margin-normalized hyperplane distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "matrix.hpp"

namespace cohort_audit {

struct KernelSpec {
    enum class Kind { Linear, Rbf };
    Kind kind = Kind::Linear;
    double gamma = 0.0; // only meaningful for Rbf

    static KernelSpec linear() { return {Kind::Linear, 0.0}; }
    static KernelSpec rbf(double gamma) {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("svm_core", "RBF gamma must be positive");
        return {Kind::Rbf, gamma};
    }

    bool operator==(const KernelSpec&) const = default;
};

inline std::string kernel_name(KernelSpec::Kind k) { return k == KernelSpec::Kind::Linear ? "linear" : "rbf"; }

inline double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError("svm_core", "kernel dimension mismatch: " + std::to_string(x.size()) + " vs " +
                                        std::to_string(y.size()));
    if (k.kind == KernelSpec::Kind::Linear) return dot(x, y);
    return std::exp(-k.gamma * squared_distance(x, y));
}

/// Which target level sits on each side of the hyperplane.
struct LabelMap {
    std::string positive; // +1
    std::string negative; // -1
    bool operator==(const LabelMap&) const = default;
};

struct SvmModel {
    Matrix support_vectors;         // one row per support vector
    std::vector<double> dual_coefs; // alpha_k * y_k
    double bias = 0.0;
    KernelSpec kernel;
    double w_norm = 0.0; // ||w||, RKHS norm for non-linear kernels
    LabelMap label_map;
    double cost = 1.0;
    bool converged = true;
    std::size_t iterations = 0;

    std::size_t dimension() const { return support_vectors.cols(); }
    std::size_t n_support() const { return dual_coefs.size(); }

    bool operator==(const SvmModel&) const = default;
};

struct SmoOptions {
    double tol = 1e-3;
    /// Iteration budget in units of n pair updates; default 10 * n.
    std::optional<std::size_t> max_passes;
};

/// Raw dual solution, exposed for verification against independent solvers.
struct DualSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    double objective = 0.0; // 0.5 a'Qa - sum(a), minimized
    bool converged = true;
    std::size_t iterations = 0;
};

namespace detail {

/// Dual solver on a precomputed kernel matrix.
///   minimize 0.5 a'Qa - e'a  s.t. 0 <= a_i <= C, y'a = 0,  Q_ij = y_i y_j K_ij
/// A feasible `warm_start` (for instance the solution at a smaller C) may seed the iteration.
inline DualSolution solve_dual(const Matrix& kernel, std::span<const int> y, double cost, const SmoOptions& opt,
                               std::span<const double> warm_start = {}) {
    const std::size_t n = y.size();
    constexpr double tau = 1e-12;
    const std::size_t passes = opt.max_passes.value_or(10 * n);
    const std::size_t max_iter = std::max<std::size_t>(passes * n, 1);

    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);
    auto q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * kernel(i, j); };
    if (!warm_start.empty()) {
        if (warm_start.size() != n) throw DataError("svm_core", "warm start has the wrong length");
        double balance = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            if (!(warm_start[t] >= 0.0 && warm_start[t] <= cost))
                throw DataError("svm_core", "warm start violates the box constraint");
            alpha[t] = warm_start[t];
            balance += y[t] * alpha[t];
        }
        if (std::abs(balance) > 1e-8 * std::max(1.0, cost * static_cast<double>(n)))
            throw DataError("svm_core", "warm start violates the equality constraint");
        for (std::size_t t = 0; t < n; ++t) {
            if (alpha[t] == 0.0) continue;
            for (std::size_t u = 0; u < n; ++u) grad[u] += q(t, u) * alpha[t];
        }
    }
    auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < cost : alpha[t] > 0.0; };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < cost; };

    DualSolution sol;
    sol.converged = false;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // First index: maximal -y_t * grad_t over I_up.
        double gmax = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_up(t)) continue;
            const double v = -y[t] * grad[t];
            if (v >= gmax) {
                gmax = v;
                i = static_cast<std::ptrdiff_t>(t);
            }
        }
        // Second index: largest guaranteed objective decrease among violators in I_low.
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t j = -1;
        double best_gain = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double v = y[t] * grad[t];
            gmax2 = std::max(gmax2, v);
            if (i < 0) continue;
            const double diff = gmax + v;
            if (diff > 0.0) {
                const auto ii = static_cast<std::size_t>(i);
                double quad = kernel(ii, ii) + kernel(t, t) - 2.0 * kernel(ii, t);
                if (quad <= 0.0) quad = tau;
                const double gain = -(diff * diff) / quad;
                if (gain <= best_gain) {
                    best_gain = gain;
                    j = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        if (i < 0 || j < 0 || gmax + gmax2 < opt.tol) {
            sol.converged = true;
            break;
        }

        const auto a = static_cast<std::size_t>(i);
        const auto b = static_cast<std::size_t>(j);
        const double old_a = alpha[a];
        const double old_b = alpha[b];
        if (y[a] != y[b]) {
            double quad = kernel(a, a) + kernel(b, b) + 2.0 * q(a, b);
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad[a] - grad[b]) / quad;
            const double diff = alpha[a] - alpha[b];
            alpha[a] += delta;
            alpha[b] += delta;
            if (diff > 0.0) {
                if (alpha[b] < 0.0) {
                    alpha[b] = 0.0;
                    alpha[a] = diff;
                }
            } else if (alpha[a] < 0.0) {
                alpha[a] = 0.0;
                alpha[b] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[a] > cost) {
                    alpha[a] = cost;
                    alpha[b] = cost - diff;
                }
            } else if (alpha[b] > cost) {
                alpha[b] = cost;
                alpha[a] = cost + diff;
            }
        } else {
            double quad = kernel(a, a) + kernel(b, b) - 2.0 * q(a, b);
            if (quad <= 0.0) quad = tau;
            const double delta = (grad[a] - grad[b]) / quad;
            const double sum = alpha[a] + alpha[b];
            alpha[a] -= delta;
            alpha[b] += delta;
            if (sum > cost) {
                if (alpha[a] > cost) {
                    alpha[a] = cost;
                    alpha[b] = sum - cost;
                }
            } else if (alpha[b] < 0.0) {
                alpha[b] = 0.0;
                alpha[a] = sum;
            }
            if (sum > cost) {
                if (alpha[b] > cost) {
                    alpha[b] = cost;
                    alpha[a] = sum - cost;
                }
            } else if (alpha[a] < 0.0) {
                alpha[a] = 0.0;
                alpha[b] = sum;
            }
        }
        const double da = alpha[a] - old_a;
        const double db = alpha[b] - old_b;
        for (std::size_t t = 0; t < n; ++t) grad[t] += q(a, t) * da + q(b, t) * db;
    }
    sol.iterations = iter;

    // Bias: average y*grad over free variables, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= cost) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    sol.bias = -rho;

    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
    sol.objective = 0.5 * obj;
    sol.alpha = std::move(alpha);
    return sol;
}

inline void check_training_input(const Matrix& x, std::span<const int> y, double cost) {
    if (x.rows() != y.size())
        throw DataError("svm_core", "sample count " + std::to_string(x.rows()) + " does not match label count " +
                                        std::to_string(y.size()));
    if (!(cost > 0.0)) throw ConfigError("svm_core", "cost C must be positive");
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1) pos = true;
        else if (v == -1) neg = true;
        else throw DataError("svm_core", "labels must be +1 or -1");
    }
    if (!pos || !neg) throw DataError("svm_core", "training data contains a single class");
}

} // namespace detail

inline Matrix kernel_matrix(const KernelSpec& k, const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) out(i, j) = out(j, i) = kernel_eval(k, x.row(i), x.row(j));
    return out;
}

/// Solves the dual on rows of `x` given a matching precomputed kernel matrix.
inline SvmModel train_svm_precomputed(const Matrix& x, const Matrix& kernel, std::span<const int> y, double cost,
                                      const KernelSpec& k, const SmoOptions& opt = {}, LabelMap labels = {}) {
    detail::check_training_input(x, y, cost);
    const auto sol = detail::solve_dual(kernel, y, cost, opt);

    constexpr double sv_floor = 1e-9;
    std::vector<std::size_t> sv;
    for (std::size_t t = 0; t < sol.alpha.size(); ++t)
        if (sol.alpha[t] > sv_floor) sv.push_back(t);

    SvmModel m;
    m.support_vectors = x.select_rows(sv);
    for (auto t : sv) m.dual_coefs.push_back(sol.alpha[t] * y[t]);
    m.bias = sol.bias;
    m.kernel = k;
    m.cost = cost;
    m.label_map = std::move(labels);
    m.converged = sol.converged;
    m.iterations = sol.iterations;

    double ww = 0.0;
    for (std::size_t a = 0; a < sv.size(); ++a)
        for (std::size_t b = 0; b < sv.size(); ++b)
            ww += m.dual_coefs[a] * m.dual_coefs[b] * kernel(sv[a], sv[b]);
    m.w_norm = std::sqrt(std::max(ww, 0.0));
    return m;
}

/// Trains on sample rows `x` with labels in {+1, -1}.
inline SvmModel train_svm(const Matrix& x, std::span<const int> y, double cost, const KernelSpec& k,
                          const SmoOptions& opt = {}, LabelMap labels = {}) {
    detail::check_training_input(x, y, cost);
    return train_svm_precomputed(x, kernel_matrix(k, x), y, cost, k, opt, std::move(labels));
}

/// D(x) = sum_k coef_k K(x_k, x) + b.
inline double decision_value(const SvmModel& m, std::span<const double> x) {
    if (x.size() != m.dimension())
        throw DataError("svm_core", "sample dimension " + std::to_string(x.size()) + " does not match model dimension " +
                                        std::to_string(m.dimension()));
    double d = m.bias;
    for (std::size_t k = 0; k < m.n_support(); ++k) d += m.dual_coefs[k] * kernel_eval(m.kernel, m.support_vectors.row(k), x);
    return d;
}

/// |D(x)| / ||w||.
inline double hyperplane_distance(const SvmModel& m, std::span<const double> x) {
    if (!(m.w_norm > 0.0)) throw NumericError("svm_core", "model has a zero weight-vector norm");
    return std::abs(decision_value(m, x)) / m.w_norm;
}

/// Predicted label; D = 0 goes to the +1 side.
inline int predict_label(const SvmModel& m, std::span<const double> x) { return decision_value(m, x) >= 0.0 ? 1 : -1; }

inline void to_json(nlohmann::json& j, const KernelSpec& k) {
    j = {{"kind", kernel_name(k.kind)}};
    if (k.kind == KernelSpec::Kind::Rbf) j["gamma"] = k.gamma;
}

inline void from_json(const nlohmann::json& j, KernelSpec& k) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear") k = KernelSpec::linear();
    else if (kind == "rbf") k = KernelSpec::rbf(j.at("gamma").get<double>());
    else throw ConfigError("svm_core", "unknown kernel kind '" + kind + "'");
}

inline void to_json(nlohmann::json& j, const SvmModel& m) {
    nlohmann::json svs = nlohmann::json::array();
    for (std::size_t r = 0; r < m.support_vectors.rows(); ++r) {
        auto row = m.support_vectors.row(r);
        svs.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j = {{"support_vectors", svs},
         {"dimension", m.dimension()},
         {"dual_coefs", m.dual_coefs},
         {"bias", m.bias},
         {"kernel", m.kernel},
         {"w_norm", m.w_norm},
         {"label_map", {{"positive", m.label_map.positive}, {"negative", m.label_map.negative}}},
         {"cost", m.cost},
         {"converged", m.converged},
         {"iterations", m.iterations}};
}

inline void from_json(const nlohmann::json& j, SvmModel& m) {
    const auto& svs = j.at("support_vectors");
    const std::size_t dim = j.at("dimension").get<std::size_t>();
    m.support_vectors = Matrix(svs.size(), dim);
    for (std::size_t r = 0; r < svs.size(); ++r) {
        const auto row = svs[r].get<std::vector<double>>();
        if (row.size() != dim) throw DataError("svm_core", "support vector row has wrong dimension");
        std::copy(row.begin(), row.end(), m.support_vectors.row(r).begin());
    }
    m.dual_coefs = j.at("dual_coefs").get<std::vector<double>>();
    if (m.dual_coefs.size() != svs.size()) throw DataError("svm_core", "dual_coefs / support_vectors size mismatch");
    m.bias = j.at("bias").get<double>();
    m.kernel = j.at("kernel").get<KernelSpec>();
    m.w_norm = j.at("w_norm").get<double>();
    m.label_map = {j.at("label_map").at("positive").get<std::string>(),
                   j.at("label_map").at("negative").get<std::string>()};
    m.cost = j.at("cost").get<double>();
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", std::size_t{0});
}

} // namespace cohort_audit

#endif

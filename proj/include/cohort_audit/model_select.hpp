#ifndef COHORT_AUDIT_MODEL_SELECT_HPP
#define COHORT_AUDIT_MODEL_SELECT_HPP

// Hyperparameter grid search under stratified k-fold cross-validation with
// per-fold majority-class downsampling, and the classifier summary statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "ingest.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "svm.hpp"

namespace cohort_audit {

struct HyperGrid {
    std::vector<double> costs;
    std::vector<double> gammas;
    std::vector<KernelSpec::Kind> kernels;

    /// C in 10^-3..10^3, gamma in 10^-1..10^9, both kernels.
    static HyperGrid defaults() {
        HyperGrid g;
        for (int k = -3; k <= 3; ++k) g.costs.push_back(std::pow(10.0, k));
        for (int k = -1; k <= 9; ++k) g.gammas.push_back(std::pow(10.0, k));
        g.kernels = {KernelSpec::Kind::Linear, KernelSpec::Kind::Rbf};
        return g;
    }

    void validate() const {
        if (costs.empty() || kernels.empty()) throw ConfigError("model_select", "grid needs at least one cost and kernel");
        for (double c : costs)
            if (!(c > 0.0)) throw ConfigError("model_select", "grid costs must be positive");
        const bool rbf = std::find(kernels.begin(), kernels.end(), KernelSpec::Kind::Rbf) != kernels.end();
        if (rbf && gammas.empty()) throw ConfigError("model_select", "rbf kernel requires at least one gamma");
        for (double g : gammas)
            if (!(g > 0.0)) throw ConfigError("model_select", "grid gammas must be positive");
    }
};

/// One grid cell. Linear cells carry no gamma.
struct HyperCell {
    KernelSpec kernel;
    double cost = 1.0;
    bool operator==(const HyperCell&) const = default;
};

/// Cells in tie-break order: linear before rbf, then ascending C, then ascending gamma.
inline std::vector<HyperCell> enumerate_cells(const HyperGrid& grid) {
    grid.validate();
    auto costs = grid.costs;
    auto gammas = grid.gammas;
    std::sort(costs.begin(), costs.end());
    std::sort(gammas.begin(), gammas.end());
    std::vector<HyperCell> cells;
    const auto has = [&](KernelSpec::Kind k) { return std::find(grid.kernels.begin(), grid.kernels.end(), k) != grid.kernels.end(); };
    if (has(KernelSpec::Kind::Linear))
        for (double c : costs) cells.push_back({KernelSpec::linear(), c});
    if (has(KernelSpec::Kind::Rbf))
        for (double c : costs)
            for (double g : gammas) cells.push_back({KernelSpec::rbf(g), c});
    return cells;
}

/// Counts with cases (+1) as the positive class.
struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    std::int64_t correct() const { return tp + tn; }
    double accuracy() const { return total() > 0 ? static_cast<double>(correct()) / static_cast<double>(total()) : 0.0; }

    void add(int truth, int predicted) {
        if (truth > 0) (predicted > 0 ? tp : fn) += 1;
        else (predicted > 0 ? fp : tn) += 1;
    }

    bool operator==(const Confusion&) const = default;
};

/// Mean of sensitivity and specificity.
inline double balanced_accuracy(const Confusion& m) {
    if (m.tp + m.fn == 0 || m.tn + m.fp == 0)
        throw DataError("model_select", "balanced accuracy needs both classes present");
    const double sens = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    const double spec = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);
    return (sens + spec) / 2.0;
}

/// One-sided exact binomial test of accuracy against the no-information rate.
inline double nir_test(const Confusion& m) {
    const auto n = m.total();
    if (n <= 0) throw DataError("model_select", "NIR test needs at least one prediction");
    const auto positives = m.tp + m.fn;
    const double nir = static_cast<double>(std::max(positives, n - positives)) / static_cast<double>(n);
    return binomial_upper_tail(m.correct(), n, nir);
}

/// McNemar statistic on the off-diagonal counts b = FP, c = FN. The continuity
/// term is not clamped, so b = c gives 1 / (b + c) rather than 0.
inline double mcnemar_statistic(const Confusion& m, bool continuity = true) {
    const auto b = static_cast<double>(m.fp), c = static_cast<double>(m.fn);
    if (b + c == 0.0) return 0.0;
    const double diff = continuity ? std::abs(b - c) - 1.0 : std::abs(b - c);
    return diff * diff / (b + c);
}

inline double mcnemar_test(const Confusion& m, bool continuity = true) {
    if (m.fp + m.fn == 0) return 1.0;
    return chi_square_tail(mcnemar_statistic(m, continuity));
}

/// Fold index per sample. Each class is shuffled and dealt round-robin, the
/// deal continuing across classes so whole folds also differ by at most one.
inline std::vector<std::size_t> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("model_select", "k must be at least 2");
    std::vector<std::size_t> neg, pos;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
    if (neg.size() < k || pos.size() < k)
        throw DataError("model_select", "each class needs at least k=" + std::to_string(k) + " samples (have " +
                                            std::to_string(neg.size()) + " and " + std::to_string(pos.size()) + ")");
    Rng rng(derive_seed(seed, 0x6b666f6c64ULL));
    std::vector<std::size_t> fold(labels.size(), 0);
    std::size_t deal = 0;
    for (auto* cls : {&neg, &pos}) {
        rng.shuffle(std::span<std::size_t>(*cls));
        for (std::size_t idx : *cls) fold[idx] = deal++ % k;
    }
    return fold;
}

/// Majority class subsampled without replacement to the minority size. Output is sorted.
inline std::vector<std::size_t> downsample(std::span<const std::size_t> indices, std::span<const int> labels,
                                           std::uint64_t seed) {
    std::vector<std::size_t> neg, pos;
    for (auto i : indices) (labels[i] > 0 ? pos : neg).push_back(i);
    if (neg.empty() || pos.empty()) throw DataError("model_select", "downsampling needs both classes");
    auto& major = neg.size() > pos.size() ? neg : pos;
    auto& minor = neg.size() > pos.size() ? pos : neg;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(major));
    major.resize(minor.size());
    std::vector<std::size_t> out = minor;
    out.insert(out.end(), major.begin(), major.end());
    std::sort(out.begin(), out.end());
    return out;
}

struct CellResult {
    HyperCell cell;
    Confusion confusion;
    double balanced_accuracy = 0.0;
    double accuracy = 0.0;
    std::size_t nonconverged_fits = 0;
    bool operator==(const CellResult&) const = default;
};

struct CvResult {
    std::vector<CellResult> per_cell;
    std::size_t best_index = 0;
    HyperCell best_cell;
    Confusion pooled_confusion;
    double balanced_accuracy = 0.0;
    std::pair<double, double> acc_ci{0.0, 1.0};
    double nir_pvalue = 1.0;
    double mcnemar_pvalue = 1.0;
    std::vector<std::size_t> fold_assignments;
    std::size_t k = 10;
    std::uint64_t seed = 0;
    bool operator==(const CvResult&) const = default;
};

/// Summary statistics of a pooled confusion matrix.
inline void summarize(CvResult& r) {
    const auto& best = r.per_cell.at(r.best_index);
    r.best_cell = best.cell;
    r.pooled_confusion = best.confusion;
    r.balanced_accuracy = best.balanced_accuracy;
    r.acc_ci = accuracy_ci(best.confusion.correct(), best.confusion.total());
    r.nir_pvalue = nir_test(best.confusion);
    r.mcnemar_pvalue = mcnemar_test(best.confusion);
}

/// Dot products and squared norms of all sample rows; kernel values for any
/// subset are derived from these without recomputing feature sums.
class GramCache {
public:
    explicit GramCache(const Matrix& x, unsigned threads = 1) : dots_(x.rows(), x.rows()) {
        const std::size_t n = x.rows();
        parallel_for(n, threads, [&](std::size_t i) {
            for (std::size_t j = 0; j < n; ++j) dots_(i, j) = dot(x.row(i), x.row(j));
        });
    }

    double kernel(const KernelSpec& k, std::size_t i, std::size_t j) const {
        if (k.kind == KernelSpec::Kind::Linear) return dots_(i, j);
        const double sq = std::max(dots_(i, i) + dots_(j, j) - 2.0 * dots_(i, j), 0.0);
        return std::exp(-k.gamma * sq);
    }

    Matrix submatrix(const KernelSpec& k, std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = a; b < idx.size(); ++b) out(a, b) = out(b, a) = kernel(k, idx[a], idx[b]);
        return out;
    }

    /// Decision value of a model trained on rows `train` (coefficients aligned to them) at sample i.
    double decision(const KernelSpec& k, std::span<const std::size_t> train, std::span<const double> coef_full,
                    double bias, std::size_t i) const {
        double d = bias;
        for (std::size_t t = 0; t < train.size(); ++t)
            if (coef_full[t] != 0.0) d += coef_full[t] * kernel(k, train[t], i);
        return d;
    }

private:
    Matrix dots_;
};

/// Seed for downsampling the training split of fold f; shared with out-of-fold scoring.
inline std::uint64_t fold_downsample_seed(std::uint64_t seed, std::size_t fold) {
    return derive_seed(seed, 0x646f776eULL, fold);
}

struct GridSearchOptions {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    SmoOptions smo;
};

/// Stratified k-fold grid search. x holds one sample per row, labels are +1 (case) / -1 (control).
inline CvResult grid_search_cv(const Matrix& x, std::span<const int> labels, const HyperGrid& grid,
                               const GridSearchOptions& opt) {
    if (x.rows() != labels.size()) throw DataError("model_select", "matrix rows do not match label count");
    const auto cells = enumerate_cells(grid);
    const auto folds = stratified_kfold(labels, opt.k, opt.seed);
    const std::size_t n = labels.size();

    // Train/test splits and their downsampled training sets are shared by every cell.
    std::vector<std::vector<std::size_t>> train_sets(opt.k), test_sets(opt.k);
    for (std::size_t f = 0; f < opt.k; ++f) {
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < n; ++i) (folds[i] == f ? test_sets[f] : train).push_back(i);
        bool pos = false, neg = false;
        for (auto i : train) (labels[i] > 0 ? pos : neg) = true;
        if (!pos || !neg) throw DataError("model_select", "fold " + std::to_string(f) + " has a single-class training split");
        train_sets[f] = downsample(train, labels, fold_downsample_seed(opt.seed, f));
    }

    const GramCache gram(x, opt.threads);
    struct FoldOutcome {
        std::vector<int> predictions; // aligned with test_sets[f]
        bool converged = true;
    };
    std::vector<FoldOutcome> outcomes(cells.size() * opt.k);
    parallel_for(outcomes.size(), opt.threads, [&](std::size_t task) {
        const auto& cell = cells[task / opt.k];
        const std::size_t f = task % opt.k;
        const auto& train = train_sets[f];
        std::vector<int> y;
        y.reserve(train.size());
        for (auto i : train) y.push_back(labels[i]);
        const auto kmat = gram.submatrix(cell.kernel, train);
        const auto sol = detail::solve_dual(kmat, y, cell.cost, opt.smo);
        std::vector<double> coef(train.size());
        for (std::size_t t = 0; t < train.size(); ++t) coef[t] = sol.alpha[t] > 1e-9 ? sol.alpha[t] * y[t] : 0.0;
        auto& out = outcomes[task];
        out.converged = sol.converged;
        for (auto i : test_sets[f])
            out.predictions.push_back(gram.decision(cell.kernel, train, coef, sol.bias, i) >= 0.0 ? 1 : -1);
    });

    CvResult result;
    result.k = opt.k;
    result.seed = opt.seed;
    result.fold_assignments = folds;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        CellResult cr;
        cr.cell = cells[c];
        for (std::size_t f = 0; f < opt.k; ++f) {
            const auto& out = outcomes[c * opt.k + f];
            if (!out.converged) ++cr.nonconverged_fits;
            for (std::size_t t = 0; t < test_sets[f].size(); ++t)
                cr.confusion.add(labels[test_sets[f][t]], out.predictions[t]);
        }
        cr.balanced_accuracy = balanced_accuracy(cr.confusion);
        cr.accuracy = cr.confusion.accuracy();
        result.per_cell.push_back(cr);
    }
    // Cells are already in tie-break order, so the first maximum wins.
    for (std::size_t c = 1; c < result.per_cell.size(); ++c)
        if (result.per_cell[c].balanced_accuracy > result.per_cell[result.best_index].balanced_accuracy)
            result.best_index = c;
    summarize(result);
    return result;
}

/// Convenience overload over the ingest types.
inline CvResult grid_search_cv(const CohortMatrix& m, const ClinicalTable& clin, const HyperGrid& grid,
                               const GridSearchOptions& opt) {
    const auto aligned = clin.aligned_to(m.sample_ids);
    const auto y = aligned.labels();
    return grid_search_cv(m.sample_rows(), y, grid, opt);
}

inline std::string grid_csv(const CvResult& r) {
    std::string out = "kernel,C,gamma,balanced_accuracy,accuracy\n";
    for (const auto& c : r.per_cell) {
        out += kernel_name(c.cell.kernel.kind) + "," + text::format_real(c.cell.cost) + ",";
        if (c.cell.kernel.kind == KernelSpec::Kind::Rbf) out += text::format_real(c.cell.kernel.gamma);
        out += "," + text::format_real(c.balanced_accuracy) + "," + text::format_real(c.accuracy) + "\n";
    }
    return out;
}

} // namespace cohort_audit

#endif

#ifndef COHORT_AUDIT_ANOMALY_HPP
#define COHORT_AUDIT_ANOMALY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "ingest.hpp"
#include "model_select.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "svm.hpp"

namespace cohort_audit {

/// Refit on the whole cohort (majority class downsampled with `seed`) using the selected cell.
inline SvmModel fit_final_model(const Matrix& x, std::span<const int> labels, const HyperCell& cell,
                                std::uint64_t seed, const SmoOptions& smo = {}, LabelMap label_map = {}) {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto chosen = downsample(all, labels, derive_seed(seed, 0x66696e616cULL));
    std::vector<int> y;
    for (auto i : chosen) y.push_back(labels[i]);
    return train_svm(x.select_rows(chosen), y, cell.cost, cell.kernel, smo, std::move(label_map));
}

inline SvmModel fit_final_model(const CohortMatrix& m, const ClinicalTable& clin, const HyperCell& cell,
                                std::uint64_t seed, const SmoOptions& smo = {}) {
    const auto aligned = clin.aligned_to(m.sample_ids);
    return fit_final_model(m.sample_rows(), aligned.labels(), cell, seed, smo, {clin.case_level, clin.control_level});
}

struct SampleScore {
    std::string sample_id;
    double decision = 0.0;
    double distance = 0.0;
    int predicted = 1; // +1 case, -1 control
    bool operator==(const SampleScore&) const = default;
};

/// Decision value, hyperplane distance and predicted side for every sample row.
inline std::vector<SampleScore> score_all(const SvmModel& model, const Matrix& x, const std::vector<std::string>& ids,
                                          unsigned threads = 1) {
    if (x.cols() != model.dimension())
        throw DataError("anomaly", "model dimension " + std::to_string(model.dimension()) +
                                       " does not match feature count " + std::to_string(x.cols()));
    if (ids.size() != x.rows()) throw DataError("anomaly", "sample id count does not match matrix rows");
    if (!(model.w_norm > 0.0)) throw NumericError("anomaly", "model has a zero weight-vector norm");
    std::vector<SampleScore> out(x.rows());
    parallel_for(x.rows(), threads, [&](std::size_t i) {
        const double d = decision_value(model, x.row(i));
        out[i] = {ids[i], d, std::abs(d) / model.w_norm, d >= 0.0 ? 1 : -1};
    });
    return out;
}

inline std::vector<SampleScore> score_all(const SvmModel& model, const CohortMatrix& m, unsigned threads = 1) {
    return score_all(model, m.sample_rows(), m.sample_ids, threads);
}

/// Alternative scoring: every sample is scored by the model of the fold that held
/// it out, trained with the selected cell on that fold's downsampled split.
inline std::vector<SampleScore> score_out_of_fold(const Matrix& x, std::span<const int> labels,
                                                  const std::vector<std::string>& ids, const CvResult& cv,
                                                  const SmoOptions& smo = {}, unsigned threads = 1) {
    const std::size_t n = labels.size();
    if (x.rows() != n || ids.size() != n || cv.fold_assignments.size() != n)
        throw DataError("anomaly", "out-of-fold scoring inputs disagree on the sample count");
    std::vector<SampleScore> out(n);
    parallel_for(cv.k, threads, [&](std::size_t f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (cv.fold_assignments[i] == f ? test : train).push_back(i);
        const auto chosen = downsample(train, labels, fold_downsample_seed(cv.seed, f));
        std::vector<int> y;
        for (auto i : chosen) y.push_back(labels[i]);
        const auto model = train_svm(x.select_rows(chosen), y, cv.best_cell.cost, cv.best_cell.kernel, smo);
        if (!(model.w_norm > 0.0)) throw NumericError("anomaly", "fold model has a zero weight-vector norm");
        for (auto i : test) {
            const double d = decision_value(model, x.row(i));
            out[i] = {ids[i], d, std::abs(d) / model.w_norm, d >= 0.0 ? 1 : -1};
        }
    });
    return out;
}

/// Knee of a non-increasing curve: 1-based index of the point farthest from the
/// chord joining the first and last points. Ties resolve to the smallest index;
/// a (numerically) straight curve returns n. nullopt when fewer than 3 points.
inline std::optional<std::size_t> find_curve_elbow(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3) return std::nullopt;
    const double x1 = 1.0, y1 = values.front();
    const double x2 = static_cast<double>(n), y2 = values.back();
    const double dx = x2 - x1, dy = y2 - y1;
    const double chord = std::hypot(dx, dy);
    double best = -1.0;
    std::size_t best_index = n;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(i + 1);
        const double dist = std::abs(dy * xi - dx * values[i] + x2 * y1 - y2 * x1) / chord;
        if (dist > best) {
            best = dist;
            best_index = i + 1;
        }
    }
    const double range = std::abs(y1 - y2);
    if (best <= 1e-12 * range) return n;
    return best_index;
}

struct AnomalyRecord {
    std::string sample_id;
    Group given = Group::Control;
    Group predicted = Group::Control;
    double decision = 0.0;
    double distance = 0.0;
    bool flagged = false;
    double group_threshold = 0.0;
    bool operator==(const AnomalyRecord&) const = default;
};

/// Per-group thresholding outcome.
struct GroupThreshold {
    Group group = Group::Control;
    std::size_t n_misclassified = 0;
    std::optional<std::size_t> elbow_index; // 1-based into the descending distances; empty = degenerate
    double threshold = 0.0;
    std::vector<double> sorted_distances; // misclassified, descending
    std::size_t n_flagged = 0;
    bool operator==(const GroupThreshold&) const = default;
};

struct AnomalySelection {
    std::vector<AnomalyRecord> records; // one per sample, input order
    GroupThreshold control;             // anomalous controls ("case-like")
    GroupThreshold cases;               // anomalous cases ("control-like")
    bool operator==(const AnomalySelection&) const = default;

    const GroupThreshold& threshold_for(Group g) const { return g == Group::Control ? control : cases; }

    std::vector<std::size_t> flagged_indices(Group given) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].flagged && records[i].given == given) out.push_back(i);
        return out;
    }
};

/// Flags misclassified samples whose distance is strictly above their group's elbow.
/// Groups with fewer than three misclassified samples flag all of them.
inline AnomalySelection select_anomalies(const std::vector<SampleScore>& scores, const ClinicalTable& clin) {
    AnomalySelection sel;
    sel.records.reserve(scores.size());
    for (const auto& s : scores) {
        const auto idx = clin.index_of(s.sample_id);
        if (!idx) throw DataError("anomaly", "scored sample '" + s.sample_id + "' missing from clinical table");
        sel.records.push_back({s.sample_id, clin.groups[*idx], group_of_label(s.predicted), s.decision, s.distance,
                               false, 0.0});
    }
    for (Group g : {Group::Control, Group::Case}) {
        GroupThreshold& gt = g == Group::Control ? sel.control : sel.cases;
        gt.group = g;
        for (const auto& r : sel.records)
            if (r.given == g && r.predicted != g) gt.sorted_distances.push_back(r.distance);
        std::sort(gt.sorted_distances.begin(), gt.sorted_distances.end(), std::greater<>());
        gt.n_misclassified = gt.sorted_distances.size();
        gt.elbow_index = find_curve_elbow(gt.sorted_distances);
        gt.threshold = gt.elbow_index ? gt.sorted_distances[*gt.elbow_index - 1] : 0.0;
        for (auto& r : sel.records) {
            if (r.given != g) continue;
            r.group_threshold = gt.threshold;
            const bool misclassified = r.predicted != g;
            r.flagged = misclassified && (!gt.elbow_index || r.distance > gt.threshold);
            if (r.flagged) ++gt.n_flagged;
        }
    }
    return sel;
}

inline std::string anomalies_csv(const AnomalySelection& sel, const ClinicalTable& clin) {
    std::string out = "sample_id,given_label,predicted_label,decision_value,distance,group_threshold,flagged\n";
    for (const auto& r : sel.records) {
        out += text::quote_cell(r.sample_id) + "," + text::quote_cell(clin.level_name(r.given)) + "," +
               text::quote_cell(clin.level_name(r.predicted)) + "," + text::format_real(r.decision) + "," +
               text::format_real(r.distance) + "," + text::format_real(r.group_threshold) + "," +
               (r.flagged ? "true" : "false") + "\n";
    }
    return out;
}

} // namespace cohort_audit

#endif

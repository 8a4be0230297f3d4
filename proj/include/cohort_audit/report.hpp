#ifndef COHORT_AUDIT_REPORT_HPP
#define COHORT_AUDIT_REPORT_HPP

// Self-contained HTML report with inline SVG, plus the CSV exports.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artifact.hpp"
#include "error.hpp"
#include "text.hpp"

namespace cohort_audit {

inline std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&#39;"; break;
        default: out.push_back(ch);
        }
    }
    return out;
}

inline std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

/// Quantile by linear interpolation between order statistics (type 7).
inline double quantile_type7(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DataError("report", "quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct BoxStats {
    double q1 = 0, median = 0, q3 = 0, whisker_lo = 0, whisker_hi = 0, mean = 0;
    std::vector<double> outliers;
};

inline BoxStats box_stats(std::vector<double> v) {
    if (v.empty()) throw DataError("report", "boxplot group is empty");
    std::sort(v.begin(), v.end());
    BoxStats b;
    b.q1 = quantile_type7(v, 0.25);
    b.median = quantile_type7(v, 0.5);
    b.q3 = quantile_type7(v, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = b.q1;
    b.whisker_hi = b.q3;
    for (double x : v) {
        if (x < lo_fence || x > hi_fence) b.outliers.push_back(x);
        else {
            b.whisker_lo = std::min(b.whisker_lo, x);
            b.whisker_hi = std::max(b.whisker_hi, x);
        }
    }
    double s = 0.0;
    for (double x : v) s += x;
    b.mean = s / static_cast<double>(v.size());
    return b;
}

namespace detail {

inline std::string coord(double v) { return text::format_fixed(v, 2); }

} // namespace detail

/// Two box-and-whisker glyphs on a fixed 640x400 canvas.
inline std::string boxplot_svg(std::span<const double> flagged_values, std::span<const double> origin_values,
                               const std::string& covariate, const std::string& expectation, double p,
                               const std::string& flagged_label = "anomalous",
                               const std::string& origin_label = "origin") {
    if (flagged_values.empty() || origin_values.empty()) throw DataError("report", "boxplot needs two non-empty groups");
    const BoxStats boxes[2] = {box_stats({flagged_values.begin(), flagged_values.end()}),
                               box_stats({origin_values.begin(), origin_values.end()})};
    const std::string labels[2] = {flagged_label, origin_label};

    double lo = std::min(*std::min_element(flagged_values.begin(), flagged_values.end()),
                         *std::min_element(origin_values.begin(), origin_values.end()));
    double hi = std::max(*std::max_element(flagged_values.begin(), flagged_values.end()),
                         *std::max_element(origin_values.begin(), origin_values.end()));
    if (hi - lo <= 0.0) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    constexpr double top = 70.0, bottom = 350.0, left = 80.0, right = 600.0;
    const auto y = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };

    const std::string stars = significance_stars(p);
    std::string s = "<svg class=\"boxplot\" viewBox=\"0 0 640 400\" width=\"640\" height=\"400\" role=\"img\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"320\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" font-weight=\"bold\">" +
         html_escape(covariate + " — " + expectation) + "</text>\n";
    s += "<text x=\"320\" y=\"50\" text-anchor=\"middle\" font-size=\"13\">Mann-Whitney P = " +
         html_escape(text::format_pvalue(p)) + (stars.empty() ? "" : " " + stars) + "</text>\n";
    s += "<line x1=\"" + detail::coord(left) + "\" y1=\"" + detail::coord(top) + "\" x2=\"" + detail::coord(left) +
         "\" y2=\"" + detail::coord(bottom) + "\" stroke=\"#333\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        s += "<text x=\"" + detail::coord(left - 6) + "\" y=\"" + detail::coord(y(v) + 4) +
             "\" text-anchor=\"end\" font-size=\"11\">" + html_escape(text::format_compact(v, 3)) + "</text>\n";
    }
    for (int g = 0; g < 2; ++g) {
        const auto& b = boxes[g];
        const double cx = left + (right - left) * (g == 0 ? 0.3 : 0.7);
        const double half = 60.0;
        const std::string fill = g == 0 ? "#f4a582" : "#92c5de";
        s += "<line class=\"whisker\" x1=\"" + detail::coord(cx) + "\" y1=\"" + detail::coord(y(b.whisker_lo)) +
             "\" x2=\"" + detail::coord(cx) + "\" y2=\"" + detail::coord(y(b.whisker_hi)) + "\" stroke=\"#333\"/>\n";
        for (double w : {b.whisker_lo, b.whisker_hi})
            s += "<line x1=\"" + detail::coord(cx - half / 2) + "\" y1=\"" + detail::coord(y(w)) + "\" x2=\"" +
                 detail::coord(cx + half / 2) + "\" y2=\"" + detail::coord(y(w)) + "\" stroke=\"#333\"/>\n";
        s += "<rect class=\"box\" x=\"" + detail::coord(cx - half) + "\" y=\"" + detail::coord(y(b.q3)) +
             "\" width=\"" + detail::coord(2 * half) + "\" height=\"" + detail::coord(y(b.q1) - y(b.q3)) +
             "\" fill=\"" + fill + "\" stroke=\"#333\"/>\n";
        s += "<line class=\"median\" x1=\"" + detail::coord(cx - half) + "\" y1=\"" + detail::coord(y(b.median)) +
             "\" x2=\"" + detail::coord(cx + half) + "\" y2=\"" + detail::coord(y(b.median)) +
             "\" stroke=\"#000\" stroke-width=\"2\"/>\n";
        for (double o : b.outliers)
            s += "<circle class=\"outlier\" cx=\"" + detail::coord(cx) + "\" cy=\"" + detail::coord(y(o)) +
                 "\" r=\"3\" fill=\"none\" stroke=\"#333\"/>\n";
        const double my = y(b.mean);
        s += "<path class=\"mean\" d=\"M" + detail::coord(cx) + " " + detail::coord(my - 6) + " L" +
             detail::coord(cx + 6) + " " + detail::coord(my) + " L" + detail::coord(cx) + " " + detail::coord(my + 6) +
             " L" + detail::coord(cx - 6) + " " + detail::coord(my) + " Z\" fill=\"#b2182b\"/>\n";
        s += "<text x=\"" + detail::coord(cx + half + 8) + "\" y=\"" + detail::coord(my + 4) +
             "\" font-size=\"12\">mean " + html_escape(text::format_compact(b.mean, 4)) + "</text>\n";
        s += "<text x=\"" + detail::coord(cx) + "\" y=\"" + detail::coord(bottom + 24) +
             "\" text-anchor=\"middle\" font-size=\"13\">" + html_escape(labels[g]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

/// Sorted misclassified distances of one group with the elbow marked.
inline std::string distance_curve_svg(const GroupThreshold& g, const std::string& title) {
    std::string s = "<svg class=\"distance-curve\" viewBox=\"0 0 640 300\" width=\"640\" height=\"300\" role=\"img\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"300\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" font-weight=\"bold\">" + html_escape(title) +
         "</text>\n";
    const auto& v = g.sorted_distances;
    if (v.empty()) {
        s += "<text x=\"320\" y=\"150\" text-anchor=\"middle\" font-size=\"13\">no misclassified samples</text>\n</svg>\n";
        return s;
    }
    constexpr double top = 50.0, bottom = 260.0, left = 70.0, right = 610.0;
    const double hi = v.front() > 0 ? v.front() * 1.05 : 1.0;
    const auto px = [&](std::size_t i) {
        return v.size() == 1 ? (left + right) / 2 : left + (right - left) * static_cast<double>(i) / static_cast<double>(v.size() - 1);
    };
    const auto py = [&](double d) { return bottom - d / hi * (bottom - top); };
    s += "<line x1=\"" + detail::coord(left) + "\" y1=\"" + detail::coord(bottom) + "\" x2=\"" + detail::coord(right) +
         "\" y2=\"" + detail::coord(bottom) + "\" stroke=\"#333\"/>\n";
    s += "<line x1=\"" + detail::coord(left) + "\" y1=\"" + detail::coord(top) + "\" x2=\"" + detail::coord(left) +
         "\" y2=\"" + detail::coord(bottom) + "\" stroke=\"#333\"/>\n";
    s += "<text x=\"" + detail::coord(left - 6) + "\" y=\"" + detail::coord(py(v.front()) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + html_escape(text::format_compact(v.front(), 3)) + "</text>\n";
    std::string points;
    for (std::size_t i = 0; i < v.size(); ++i) points += (i ? " " : "") + detail::coord(px(i)) + "," + detail::coord(py(v[i]));
    s += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"#2166ac\" stroke-width=\"1.5\"/>\n";
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool flagged = !g.elbow_index || v[i] > g.threshold;
        s += "<circle cx=\"" + detail::coord(px(i)) + "\" cy=\"" + detail::coord(py(v[i])) + "\" r=\"3\" fill=\"" +
             (flagged ? "#b2182b" : "#2166ac") + "\"/>\n";
    }
    if (g.elbow_index) {
        const std::size_t e = *g.elbow_index - 1;
        s += "<line class=\"threshold\" x1=\"" + detail::coord(left) + "\" y1=\"" + detail::coord(py(g.threshold)) +
             "\" x2=\"" + detail::coord(right) + "\" y2=\"" + detail::coord(py(g.threshold)) +
             "\" stroke=\"#b2182b\" stroke-dasharray=\"4 3\"/>\n";
        s += "<circle class=\"elbow\" cx=\"" + detail::coord(px(e)) + "\" cy=\"" + detail::coord(py(v[e])) +
             "\" r=\"7\" fill=\"none\" stroke=\"#000\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + detail::coord(right) + "\" y=\"" + detail::coord(py(g.threshold) - 6) +
             "\" text-anchor=\"end\" font-size=\"12\">elbow threshold " +
             html_escape(text::format_compact(g.threshold, 4)) + "</text>\n";
    } else {
        s += "<text x=\"" + detail::coord(right) + "\" y=\"" + detail::coord(top) +
             "\" text-anchor=\"end\" font-size=\"12\">fewer than 3 misclassified: all flagged</text>\n";
    }
    s += "<text x=\"320\" y=\"290\" text-anchor=\"middle\" font-size=\"12\">misclassified samples ranked by distance</text>\n";
    s += "</svg>\n";
    return s;
}

namespace detail {

inline constexpr std::string_view report_style = R"(body{font-family:Helvetica,Arial,sans-serif;margin:2em auto;max-width:1200px;color:#222}
h1{font-size:1.6em}h2{border-bottom:2px solid #ccc;padding-bottom:.2em;margin-top:2em}
table{border-collapse:collapse;margin:1em 0;font-size:.9em}th,td{border:1px solid #ccc;padding:4px 8px;text-align:left}
th{background:#f0f0f0;cursor:pointer}tr.best td{background:#fff3c4}
tr.sample{cursor:pointer}tr.sample:hover td{background:#eef5ff}tr.detail td{background:#fafafa}
.supports{color:#1a7f37;font-weight:bold}.opposes{color:#b2182b;font-weight:bold}.na{color:#888}
.cols{display:flex;gap:3em}.cols ul{list-style-type:none;padding-left:0}.explanation{max-width:60em}
.muted{color:#666;font-size:.9em}
)";

inline constexpr std::string_view report_script = R"(document.querySelectorAll('tr.sample').forEach(function(row){
  row.addEventListener('click',function(){
    var d=document.getElementById(row.getAttribute('data-detail'));
    if(d){d.hidden=!d.hidden;}
  });
});
document.querySelectorAll('table.sortable th').forEach(function(th,col){
  th.addEventListener('click',function(){
    var table=th.closest('table');var body=table.tBodies[0];
    var asc=th.getAttribute('data-dir')!=='asc';th.setAttribute('data-dir',asc?'asc':'desc');
    var groups=[];var rows=Array.prototype.slice.call(body.rows);
    for(var i=0;i<rows.length;i++){
      if(rows[i].classList.contains('detail')){continue;}
      var next=rows[i+1]&&rows[i+1].classList.contains('detail')?rows[i+1]:null;
      groups.push([rows[i],next]);
    }
    function key(r){var c=r.cells[col];var v=c?(c.getAttribute('data-sort')||c.textContent):'';var n=parseFloat(v);return isNaN(n)?v:n;}
    groups.sort(function(a,b){var x=key(a[0]),y=key(b[0]);if(x<y)return asc?-1:1;if(x>y)return asc?1:-1;return 0;});
    groups.forEach(function(g){body.appendChild(g[0]);if(g[1]){body.appendChild(g[1]);}});
  });
});
)";

inline std::string td(const std::string& s) { return "<td>" + html_escape(s) + "</td>"; }
inline std::string th(const std::string& s) { return "<th>" + html_escape(s) + "</th>"; }

inline std::string gamma_text(const HyperCell& c) {
    return c.kernel.kind == KernelSpec::Kind::Rbf ? text::format_real(c.kernel.gamma) : "-";
}

inline std::string cell_text(const HyperCell& c) {
    std::string s = kernel_name(c.kernel.kind) + ", C = " + text::format_real(c.cost);
    if (c.kernel.kind == KernelSpec::Kind::Rbf) s += ", gamma = " + text::format_real(c.kernel.gamma);
    return s;
}

} // namespace detail

/// Complete standalone report. Output is a pure function of the artifact.
inline std::string render_html(const RunArtifact& a) {
    using detail::td;
    using detail::th;
    std::string h = "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
    h += "<title>Anomalous sample report: " + html_escape(a.target_name) + "</title>\n<style>\n";
    h += detail::report_style;
    h += "</style>\n</head>\n<body>\n";
    h += "<h1>Anomalous sample report (" + html_escape(a.target_name) + ": " + html_escape(a.control_level) + " vs " +
         html_escape(a.case_level) + ")</h1>\n";
    h += "<p class=\"muted\">tool version " + html_escape(a.provenance.tool_version) + " &middot; seed " +
         std::to_string(a.provenance.seed) + " &middot; generated " + html_escape(a.provenance.timestamp) + "</p>\n";

    // (i) classifier
    const auto& cv = a.cv;
    const auto& cm = cv.pooled_confusion;
    h += "<section id=\"classifier\">\n<h2>1. Classifier performance</h2>\n";
    h += "<p>Selected hyperparameters: <b>" + html_escape(detail::cell_text(cv.best_cell)) + "</b> (" +
         std::to_string(cv.k) + "-fold stratified cross-validation, majority class downsampled in every training split).</p>\n";
    h += "<table class=\"metrics\">\n<tbody>\n";
    h += "<tr>" + td("Balanced accuracy") + td(text::format_fixed(cv.balanced_accuracy, 3)) + "</tr>\n";
    h += "<tr>" + td("Accuracy (95% CI)") + td(text::format_fixed(cm.accuracy(), 3) + " [" +
                                                 text::format_fixed(cv.acc_ci.first, 3) + ", " +
                                                 text::format_fixed(cv.acc_ci.second, 3) + "]") + "</tr>\n";
    h += "<tr>" + td("P-value [Acc > NIR]") + td(text::format_pvalue(cv.nir_pvalue)) + "</tr>\n";
    h += "<tr>" + td("McNemar's test P-value") + td(text::format_pvalue(cv.mcnemar_pvalue)) + "</tr>\n";
    h += "<tr>" + td("Support vectors (final model)") + td(std::to_string(a.model.n_support)) + "</tr>\n";
    h += "</tbody>\n</table>\n";
    h += "<table class=\"confusion\">\n<thead><tr>" + th("truth \\ predicted") + th(a.case_level) + th(a.control_level) +
         "</tr></thead>\n<tbody>\n";
    h += "<tr>" + td(a.case_level) + td(std::to_string(cm.tp)) + td(std::to_string(cm.fn)) + "</tr>\n";
    h += "<tr>" + td(a.control_level) + td(std::to_string(cm.fp)) + td(std::to_string(cm.tn)) + "</tr>\n";
    h += "</tbody>\n</table>\n";
    h += "<h3>Hyperparameter grid</h3>\n<table class=\"grid sortable\">\n<thead><tr>" + th("kernel") + th("C") +
         th("gamma") + th("balanced accuracy") + th("accuracy") + "</tr></thead>\n<tbody>\n";
    for (std::size_t c = 0; c < cv.per_cell.size(); ++c) {
        const auto& cr = cv.per_cell[c];
        h += std::string(c == cv.best_index ? "<tr class=\"best\">" : "<tr>") + td(kernel_name(cr.cell.kernel.kind)) +
             td(text::format_real(cr.cell.cost)) + td(detail::gamma_text(cr.cell)) +
             td(text::format_fixed(cr.balanced_accuracy, 4)) + td(text::format_fixed(cr.accuracy, 4)) + "</tr>\n";
    }
    h += "</tbody>\n</table>\n";
    h += "<h3>Distances of misclassified samples to the hyperplane</h3>\n";
    for (Group g : {Group::Control, Group::Case}) {
        const auto& gt = a.anomalies.threshold_for(g);
        h += distance_curve_svg(gt, a.level_name(g) + " samples predicted as " + a.level_name(opposite(g)) + " (" +
                                        std::to_string(gt.n_flagged) + " flagged)");
    }
    h += "</section>\n";

    // (ii) group level
    h += "<section id=\"group-level\">\n<h2>2. Group-level annotation</h2>\n";
    for (const auto& g : a.groups) {
        h += "<h3>" + html_escape(g.anomalous_name) + " vs " + html_escape(g.origin_name) + " (" +
             std::to_string(g.flagged_ids.size()) + " anomalous samples)</h3>\n";
        if (g.flagged_ids.empty()) {
            h += "<p>No anomalous samples in this group.</p>\n";
            continue;
        }
        if (g.categorical.empty()) {
            h += "<p>No significant categorical covariates.</p>\n";
        } else {
            for (std::size_t i = 0; i < g.categorical.size(); ++i) {
                const auto& f = g.categorical[i];
                h += "<div class=\"explanation\">\n<h4>Covariate: " + html_escape(f.covariate) + "</h4>\n";
                std::string para = i < g.explanations.size() ? g.explanations[i] : std::string{};
                std::size_t start = 0;
                while (start <= para.size()) {
                    const auto stop = para.find("\n\n", start);
                    const auto piece = para.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
                    if (!piece.empty()) h += "<p>" + html_escape(piece) + "</p>\n";
                    if (stop == std::string::npos) break;
                    start = stop + 2;
                }
                h += "</div>\n";
            }
            h += "<table class=\"categorical sortable\">\n<thead><tr>" + th("OR") + th("P-value") + th("Covariate") +
                 th("Value") + th("Relative to") + th("Other Values") + th(g.anomalous_name + " Value") +
                 th(g.origin_name + " Value") + th(g.anomalous_name + " Other Value") +
                 th(g.origin_name + " Other Value") + th("Test") + "</tr></thead>\n<tbody>\n";
            for (const auto& f : g.categorical) {
                h += "<tr class=\"finding\">" + td(text::format_compact(f.test.odds_ratio, 3)) + td(text::format_pvalue(f.p_adjusted)) +
                     td(f.covariate) + td(f.level) + td(f.relative_to) + td(text::join(f.other_levels, ",")) +
                     td(std::to_string(f.counts.a)) + td(std::to_string(f.counts.b)) + td(std::to_string(f.counts.c)) +
                     td(std::to_string(f.counts.d)) + td(method_name(f.test.method)) + "</tr>\n";
            }
            h += "</tbody>\n</table>\n";
        }
        if (g.numeric.empty()) {
            h += "<p>No significant numerical covariates.</p>\n";
        } else {
            for (const auto& f : g.numeric) {
                h += "<figure class=\"finding\">\n" +
                     boxplot_svg(f.flagged_values, f.origin_values, f.covariate, f.expectation, f.p_adjusted,
                                 g.anomalous_name, g.origin_name) +
                     "<figcaption>" + html_escape(f.covariate) + ": mean " +
                     html_escape(text::format_compact(f.test.mean_first, 4)) + " (" + html_escape(g.anomalous_name) +
                     ") vs " + html_escape(text::format_compact(f.test.mean_second, 4)) + " (" +
                     html_escape(g.origin_name) + "), P = " + html_escape(text::format_pvalue(f.p_adjusted)) +
                     "</figcaption>\n</figure>\n";
            }
        }
        for (const auto& sk : g.skipped)
            h += "<p class=\"muted\">Skipped " + html_escape(sk.covariate) + ": " + html_escape(sk.reason) + "</p>\n";
    }
    h += "</section>\n";

    // (iii) individual level
    h += "<section id=\"individual-level\">\n<h2>3. Individual annotation</h2>\n";
    if (a.annotations.empty()) {
        h += "<p class=\"no-anomalies\">No anomalous samples detected.</p>\n";
    } else {
        h += "<p>Click a row to list the covariates that support and do not support the change. "
             "<span class=\"supports\">+</span> supports, <span class=\"opposes\">-</span> does not support, "
             "<span class=\"na\">NA</span> missing.</p>\n";
        h += "<table class=\"individual sortable\">\n<thead><tr>" + th("ID") + th("Clinic Supports Ratio") + th("Group");
        for (const auto& f : a.dekt_features) h += th(f);
        h += "</tr></thead>\n<tbody>\n";
        const std::size_t ncols = 3 + a.dekt_features.size();
        for (std::size_t r = 0; r < a.annotations.size(); ++r) {
            const auto& ann = a.annotations[r];
            const std::string detail_id = "detail-" + std::to_string(r);
            const std::string group_label = "A" + a.level_name(ann.given);
            h += "<tr class=\"sample\" data-id=\"" + html_escape(ann.sample_id) + "\" data-detail=\"" + detail_id +
                 "\">" + td(ann.sample_id) +
                 "<td data-sort=\"" + std::to_string(ann.n_supports) + "\">" + html_escape(ann.ratio_text()) + "</td>" +
                 td(group_label);
            for (const auto& e : ann.evidence) {
                const char* cls = e.outcome == Support::Supports ? "supports"
                                  : e.outcome == Support::Opposes ? "opposes"
                                                                   : "na";
                const char* mark = e.outcome == Support::Supports ? "+" : e.outcome == Support::Opposes ? "-" : "";
                h += "<td>" + html_escape(e.observed) + (*mark ? std::string(" <span class=\"") + cls + "\">" + mark + "</span>" : "") +
                     "</td>";
            }
            h += "</tr>\n";
            h += "<tr class=\"detail\" id=\"" + detail_id + "\" hidden><td colspan=\"" + std::to_string(ncols) +
                 "\"><div class=\"cols\"><div><p>Covariates that support the change:</p><ul>";
            for (const auto& e : ann.with_outcome(Support::Supports))
                h += "<li>" + html_escape(e.feature + ": " + e.observed + " (" + e.condition + ")") + "</li>";
            h += "</ul></div><div><p>Covariates that do not support the change:</p><ul>";
            for (const auto& e : ann.with_outcome(Support::Opposes))
                h += "<li>" + html_escape(e.feature + ": " + e.observed + " (" + e.condition + ")") + "</li>";
            h += "</ul></div></div></td></tr>\n";
        }
        h += "</tbody>\n</table>\n";
    }
    h += "</section>\n<script>\n";
    h += detail::report_script;
    h += "</script>\n</body>\n</html>\n";
    return h;
}

inline std::string group_tests_csv(const RunArtifact& a) {
    std::string out = "Direction,OR,P-value,Covariate,Value,Relative to,Other Values,Anomalous Value,Origin Value,"
                      "Anomalous Other Value,Origin Other Value,Test\n";
    for (const auto& g : a.groups) {
        for (const auto& f : g.categorical) {
            out += text::quote_cell(g.anomalous_name + " vs " + g.origin_name) + "," +
                   text::format_real(f.test.odds_ratio) + "," + text::format_real(f.p_adjusted) + "," +
                   text::quote_cell(f.covariate) + "," + text::quote_cell(f.level) + "," + f.relative_to + "," +
                   text::quote_cell(text::join(f.other_levels, ",")) + "," + std::to_string(f.counts.a) + "," +
                   std::to_string(f.counts.b) + "," + std::to_string(f.counts.c) + "," + std::to_string(f.counts.d) +
                   "," + method_name(f.test.method) + "\n";
        }
    }
    return out;
}

} // namespace cohort_audit

#endif

#include <regex>

#include <gtest/gtest.h>

#include "cohort_audit/artifact.hpp"
#include "cohort_audit/pipeline.hpp"
#include "cohort_audit/report.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace cohort_audit;

namespace {

const RunArtifact& small_artifact() {
    static const RunArtifact artifact = [] {
        testutil::TempDir dir;
        return analyze(load_run_config(fixtures::write_small_cohort(dir.path())));
    }();
    return artifact;
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

} // namespace

TEST(SignificanceStars, Thresholds) {
    EXPECT_EQ(significance_stars(0.04), "*");
    EXPECT_EQ(significance_stars(0.009), "**");
    EXPECT_EQ(significance_stars(0.0009), "***");
    EXPECT_EQ(significance_stars(0.2), "");
    EXPECT_EQ(significance_stars(0.05), "");
}

TEST(BoxStats, TypeSevenQuartilesAndFences) {
    const auto b = box_stats({9, 1, 8, 2, 7, 3, 6, 4, 5, 100});
    EXPECT_DOUBLE_EQ(b.median, 5.5);
    EXPECT_DOUBLE_EQ(b.q1, 3.25);
    EXPECT_DOUBLE_EQ(b.q3, 7.75);
    EXPECT_EQ(b.outliers, std::vector<double>{100});
    EXPECT_DOUBLE_EQ(b.whisker_hi, 9);
    EXPECT_DOUBLE_EQ(b.whisker_lo, 1);
    EXPECT_DOUBLE_EQ(b.mean, 14.5);
}

TEST(BoxplotSvg, TitleStarsAndDeterminism) {
    const std::vector<double> a{1, 2, 3, 4}, b{3, 4, 5, 6, 7};
    const auto svg = boxplot_svg(a, b, "age", "higher in PD (>61)", 0.04, "AHC", "HC");
    EXPECT_NE(svg.find("age \xE2\x80\x94 higher in PD (&gt;61)"), std::string::npos);
    EXPECT_NE(svg.find("Mann-Whitney P = 4.000e-02 *"), std::string::npos) << svg;
    EXPECT_EQ(svg, boxplot_svg(a, b, "age", "higher in PD (>61)", 0.04, "AHC", "HC"));
    const auto plain = boxplot_svg(a, b, "age", "x", 0.2, "AHC", "HC");
    EXPECT_EQ(plain.find("e-01 *"), std::string::npos);
    const std::vector<double> flat{2, 2, 2};
    EXPECT_NO_THROW(boxplot_svg(flat, flat, "c", "x", 1.0, "AHC", "HC"));
    EXPECT_THROW(boxplot_svg(std::vector<double>{}, b, "c", "x", 1.0, "AHC", "HC"), DataError);
}

TEST(RenderHtml, SelfContainedAndDeterministic) {
    const auto& a = small_artifact();
    const auto html = render_html(a);
    EXPECT_EQ(html, render_html(a));
    EXPECT_EQ(html.find("http://"), std::string::npos);
    EXPECT_EQ(html.find("https://"), std::string::npos);
    EXPECT_EQ(html.find("file:"), std::string::npos);
    EXPECT_FALSE(std::regex_search(html, std::regex("(src|href)\\s*=")));
    for (const char* id : {"id=\"classifier\"", "id=\"group-level\"", "id=\"individual-level\""})
        EXPECT_NE(html.find(id), std::string::npos) << id;
}

TEST(RenderHtml, EveryFlaggedSampleAndFindingAppearsOnce) {
    const auto& a = small_artifact();
    const auto html = render_html(a);
    ASSERT_FALSE(a.annotations.empty());
    for (const auto& ann : a.annotations)
        EXPECT_EQ(count(html, "<tr class=\"sample\" data-id=\"" + ann.sample_id + "\""), 1u) << ann.sample_id;
    std::size_t findings = 0;
    for (const auto& g : a.groups) findings += g.categorical.size() + g.numeric.size();
    EXPECT_EQ(count(html, "class=\"finding\""), findings);
}

TEST(RenderHtml, NoAnomaliesMessage) {
    auto a = small_artifact();
    for (auto& r : a.anomalies.records) r.flagged = false;
    a.annotations.clear();
    for (auto& g : a.groups) {
        g.flagged_ids.clear();
        g.categorical.clear();
        g.numeric.clear();
    }
    const auto html = render_html(a);
    EXPECT_NE(html.find("No anomalous samples detected."), std::string::npos);
}

TEST(RenderHtml, PopupRendersValueAndCondition) {
    auto a = small_artifact();
    ASSERT_FALSE(a.annotations.empty());
    a.annotations[0].evidence.push_back({"b_cells_naive", "0.087", "<=0.09", Support::Supports});
    const auto html = render_html(a);
    EXPECT_NE(html.find("b_cells_naive: 0.087 (&lt;=0.09)"), std::string::npos);
}

TEST(ExportJson, RoundTripIsLossless) {
    const auto& a = small_artifact();
    const auto text = export_json(a);
    const auto back = import_json(text);
    EXPECT_EQ(back, a);
    EXPECT_EQ(export_json(back), text);
    EXPECT_EQ(render_html(back), render_html(a));
    for (const auto& [name, digest] : a.provenance.input_digests) {
        EXPECT_EQ(digest.size(), 64u) << name;
        EXPECT_TRUE(std::regex_match(digest, std::regex("[0-9a-f]{64}"))) << name;
    }
}

TEST(ExportJson, EmptyAnomalyListSerializesAsEmptyArray) {
    auto a = small_artifact();
    a.annotations.clear();
    const auto j = nlohmann::json::parse(export_json(a));
    EXPECT_TRUE(j.at("annotations").is_array());
    EXPECT_TRUE(j.at("annotations").empty());
}

TEST(GroupTestsCsv, HeaderAndRowCount) {
    const auto& a = small_artifact();
    const auto csv = group_tests_csv(a);
    EXPECT_TRUE(csv.starts_with("Direction,OR,P-value,Covariate,Value,Relative to,Other Values,Anomalous Value,"
                                "Origin Value,Anomalous Other Value,Origin Other Value,Test\n"));
    std::size_t findings = 0;
    for (const auto& g : a.groups) findings += g.categorical.size() + g.numeric.size();
    EXPECT_EQ(count(csv, "\n"), findings + 1);
}

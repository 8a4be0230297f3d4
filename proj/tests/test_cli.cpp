#include <cstdlib>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cohort_audit/config.hpp"
#include "cohort_audit/pipeline.hpp"
#include "cohort_audit/synth.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace cohort_audit;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const testutil::TempDir& scratch) {
    const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd = std::string(COHORT_AUDIT_CLI) + " " + args + " > '" + out.string() + "' 2> '" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::slurp(out), testutil::slurp(err)};
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(testutil::slurp(p)); }

void write_json(const std::filesystem::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

} // namespace

TEST(RunConfig, MissingDektFieldIsNamed) {
    testutil::TempDir dir;
    const auto cfg_path = fixtures::write_small_cohort(dir.path());
    auto doc = read_json(cfg_path);
    doc["inputs"].erase("dekt");
    try {
        parse_run_config(doc, dir.path());
        FAIL() << "expected a configuration error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("inputs.dekt"), std::string::npos) << e.what();
    }
    write_json(cfg_path, doc);
    const auto r = run_cli("run --config '" + cfg_path.string() + "'", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("inputs.dekt"), std::string::npos) << r.err;
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
    testutil::TempDir dir;
    const auto base = read_json(fixtures::write_small_cohort(dir.path()));
    const auto expect_field = [&](nlohmann::json doc, const std::string& field) {
        try {
            parse_run_config(doc, dir.path());
            ADD_FAILURE() << "accepted invalid field " << field;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    auto doc = base;
    doc["colour"] = "blue";
    expect_field(doc, "colour");
    doc = base;
    doc["k"] = 1;
    expect_field(doc, "k");
    doc = base;
    doc["alpha"] = 1.5;
    expect_field(doc, "alpha");
    doc = base;
    doc["inputs"]["matrix"] = "absent.tsv";
    expect_field(doc, "inputs.matrix");
    doc = base;
    doc["test_rule"] = "sometimes";
    EXPECT_THROW(parse_run_config(doc, dir.path()), ConfigError);
    doc = base;
    doc["grid"]["kernels"] = {"polynomial"};
    expect_field(doc, "grid.kernels");
}

TEST(RunConfig, ParsesTheCommittedExample) {
    const auto example = std::filesystem::path(COHORT_AUDIT_SOURCE_DIR) / "config" / "example_run.json";
    const auto doc = read_json(example);
    EXPECT_TRUE(doc.contains("inputs"));
    testutil::TempDir dir;
    fixtures::write_small_cohort(dir.path());
    // Point the example at the generated files; every other key must parse as written.
    auto patched = doc;
    patched["inputs"] = {{"matrix", "matrix.tsv"}, {"clinical", "clinical.tsv"}, {"dekt", "dekt.csv"}};
    const auto cfg = parse_run_config(patched, dir.path());
    EXPECT_EQ(cfg.k, 10u);
    EXPECT_EQ(cfg.grid.costs.size(), 7u);
    EXPECT_EQ(cfg.grid.gammas.size(), 11u);
}

TEST(Simulate, SameSeedGivesIdenticalFiles) {
    testutil::TempDir a, b, c;
    auto spec = fixtures::small_spec(9);
    simulate(spec, a.path());
    simulate(spec, b.path());
    spec.seed = 10;
    simulate(spec, c.path());
    for (const auto& f : synth_files()) EXPECT_EQ(testutil::slurp(a / f), testutil::slurp(b / f)) << f;
    EXPECT_NE(testutil::slurp(a / "matrix.tsv"), testutil::slurp(c / "matrix.tsv"));
}

TEST(Simulate, OutputPassesTheLoaders) {
    testutil::TempDir dir;
    const auto cohort = simulate(fixtures::small_spec(), dir.path());
    const auto cfg = load_run_config(dir / "config.json");
    const auto m = load_matrix(cfg.matrix);
    const auto clin = load_clinical(cfg.clinical, cfg.schema, cfg.target);
    const auto dekt = load_dekt(cfg.dekt, clin);
    EXPECT_EQ(m.n_samples(), 80u);
    EXPECT_EQ(m.n_features(), 12u);
    std::size_t with_effect = 0;
    for (const auto& c : fixtures::small_spec().covariates) with_effect += c.effect != 0.0;
    EXPECT_EQ(dekt.size(), with_effect); // covariates without a class effect get no expert entry
    EXPECT_EQ(cohort.truth.size(), 6u);
}

TEST(Simulate, CliSubcommandMatchesLibrary) {
    testutil::TempDir dir;
    const nlohmann::json spec = {{"n_per_group", 20}, {"n_features", 8}, {"n_informative", 3},
                                 {"separation", 3.0}, {"n_planted_per_group", 2}, {"seed", 4}};
    write_json(dir / "spec.json", spec);
    const auto r = run_cli("simulate --spec '" + (dir / "spec.json").string() + "' --out '" + (dir / "cli").string() + "'",
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    simulate(parse_synth_spec(spec), dir / "lib");
    for (const auto& f : synth_files()) EXPECT_EQ(testutil::slurp(dir / "cli" / f), testutil::slurp(dir / "lib" / f)) << f;
}

TEST(ScoreDetection, Conventions) {
    const std::vector<std::string> truth{"a", "b", "c", "d"};
    const auto same = score_detection(truth, truth);
    EXPECT_DOUBLE_EQ(same.precision, 1.0);
    EXPECT_DOUBLE_EQ(same.recall, 1.0);
    const auto none = score_detection({}, truth);
    EXPECT_FALSE(none.precision_defined);
    EXPECT_DOUBLE_EQ(none.precision, 1.0);
    EXPECT_DOUBLE_EQ(none.recall, 0.0);
    const auto half = score_detection({"a", "b", "x", "y"}, truth);
    EXPECT_DOUBLE_EQ(half.precision, 0.5);
    EXPECT_DOUBLE_EQ(half.recall, 0.5);
}

TEST(ScoreDetection, CliReportsNotApplicablePrecision) {
    testutil::TempDir dir;
    dir.write("run/anomalies.csv",
              "sample_id,given_label,predicted_label,decision_value,distance,group_threshold,flagged\n"
              "S1,HC,PD,1,1,0,false\n");
    dir.write("truth.csv", "sample_id,nominal_label,true_label\nS1,HC,PD\n");
    const auto r = run_cli("score --run '" + (dir / "run").string() + "' --truth '" + (dir / "truth.csv").string() + "'",
                           dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("precision\tn/a"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("recall\t0.0000"), std::string::npos) << r.out;
}

TEST(Run, WritesFiveParseableOutputsDeterministically) {
    testutil::TempDir dir;
    const auto cfg_path = fixtures::write_small_cohort(dir.path());
    auto first = run_cli("run --threads 1 --config '" + cfg_path.string() + "'", dir);
    ASSERT_EQ(first.code, 0) << first.err;
    const auto out = dir / "run";
    for (const auto& f : output_files()) ASSERT_TRUE(std::filesystem::exists(out / f)) << f;
    const auto run_json = read_json(out / "run.json");
    EXPECT_EQ(import_json(testutil::slurp(out / "run.json")).provenance.timestamp, "2000-01-01T00:00:00Z");
    EXPECT_TRUE(run_json.contains("anomalies"));
    EXPECT_TRUE(testutil::slurp(out / "anomalies.csv").starts_with("sample_id,given_label,predicted_label"));
    EXPECT_TRUE(testutil::slurp(out / "grid.csv").starts_with("kernel,C,gamma,balanced_accuracy,accuracy\n"));
    EXPECT_TRUE(testutil::slurp(out / "group_tests.csv").starts_with("Direction,OR,P-value"));
    EXPECT_NE(testutil::slurp(out / "report.html").find("</html>"), std::string::npos);

    const auto json1 = testutil::slurp(out / "run.json"), html1 = testutil::slurp(out / "report.html");
    const auto second = run_cli("run --threads 3 --config '" + cfg_path.string() + "'", dir);
    ASSERT_EQ(second.code, 0) << second.err;
    EXPECT_EQ(testutil::slurp(out / "run.json"), json1);
    EXPECT_EQ(testutil::slurp(out / "report.html"), html1);

    // The digests recorded in provenance match the inputs on disk.
    const auto cfg = load_run_config(cfg_path);
    EXPECT_EQ(run_json["provenance"]["input_digests"]["matrix"], sha256_file(cfg.matrix));
}

TEST(Run, SeedOverrideIsRecorded) {
    testutil::TempDir dir;
    const auto cfg_path = fixtures::write_small_cohort(dir.path());
    const auto r = run_cli("run --threads 1 --seed 77 --config '" + cfg_path.string() + "'", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = read_json(dir / "run" / "run.json");
    EXPECT_EQ(j["provenance"]["seed"], 77);
    EXPECT_EQ(j["provenance"]["config"]["seed"], 77);
}

TEST(Run, DataErrorsExitWithCodeThree) {
    testutil::TempDir dir;
    const auto cfg_path = fixtures::write_small_cohort(dir.path());
    dir.write("matrix.tsv", "feature\tS0001\nf1\tnot-a-number\n");
    const auto r = run_cli("run --config '" + cfg_path.string() + "'", dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("error [ingest]"), std::string::npos) << r.err;
    EXPECT_EQ(run_cli("run", dir).code, 2);
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
}

TEST(Preprocess, TogglesOffLeaveTheRawMatrix) {
    testutil::TempDir dir;
    const auto cfg = load_run_config(fixtures::write_small_cohort(dir.path()));
    ASSERT_FALSE(cfg.preprocess.normalize);
    ASSERT_FALSE(cfg.preprocess.filter);
    ASSERT_TRUE(cfg.preprocess.remove_covariates.empty());
    const auto prepared = prepare_cohort(cfg);
    EXPECT_EQ(prepared.matrix, load_matrix(cfg.matrix));

    // And the grid search sees exactly what it would see on the raw matrix.
    const auto raw = load_matrix(cfg.matrix);
    const auto clin = load_clinical(cfg.clinical, cfg.schema, cfg.target).aligned_to(raw.sample_ids);
    GridSearchOptions opt;
    opt.k = cfg.k;
    opt.seed = cfg.seed;
    EXPECT_EQ(grid_search_cv(raw.sample_rows(), clin.labels(), cfg.grid, opt), analyze(cfg).cv);
}

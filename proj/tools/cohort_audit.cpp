// Command-line front end: run, simulate, score.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cohort_audit/config.hpp"
#include "cohort_audit/error.hpp"
#include "cohort_audit/parallel.hpp"
#include "cohort_audit/pipeline.hpp"
#include "cohort_audit/synth.hpp"
#include "cohort_audit/text.hpp"

namespace ca = cohort_audit;

namespace {

unsigned thread_count(const std::optional<unsigned>& flag) {
    if (flag) return ca::resolve_threads(*flag);
    if (const char* env = std::getenv("COHORT_AUDIT_THREADS"); env && *env) {
        const auto v = ca::text::parse_double(env);
        if (!v || *v < 0 || *v != static_cast<double>(static_cast<unsigned>(*v)))
            throw ca::ConfigError("cli", "COHORT_AUDIT_THREADS must be a non-negative integer, got '" + std::string(env) + "'");
        return ca::resolve_threads(static_cast<unsigned>(*v));
    }
    return ca::resolve_threads(0);
}

int cmd_run(const std::string& config_path, const std::optional<unsigned>& threads, const std::optional<std::uint64_t>& seed) {
    auto cfg = ca::load_run_config(config_path);
    if (seed) ca::override_seed(cfg, *seed);
    const auto artifact = ca::run(cfg, thread_count(threads));
    std::size_t flagged = 0;
    for (const auto& r : artifact.anomalies.records) flagged += r.flagged;
    std::cout << "balanced accuracy " << ca::text::format_fixed(artifact.cv.balanced_accuracy, 3) << ", " << flagged
              << " anomalous samples; outputs in " << cfg.output_dir.string() << "\n";
    return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir) {
    const auto spec = ca::load_synth_spec(spec_path);
    const auto cohort = ca::simulate(spec, out_dir);
    std::cout << "wrote " << cohort.matrix.n_samples() << " samples, " << cohort.matrix.n_features() << " features, "
              << cohort.truth.size() << " planted to " << out_dir << "\n";
    return 0;
}

int cmd_score(const std::string& run_dir, const std::string& truth) {
    const auto s = ca::score_run_directory(run_dir, truth);
    std::cout << "flagged\t" << s.n_flagged << "\n"
              << "truth\t" << s.n_truth << "\n"
              << "true_positives\t" << s.n_true_positive << "\n"
              << "precision\t" << (s.precision_defined ? ca::text::format_fixed(s.precision, 4) : std::string("n/a")) << "\n"
              << "recall\t" << ca::text::format_fixed(s.recall, 4) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detect and explain samples whose omics profile contradicts their group label"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "run the full pipeline from a configuration file");
    run->add_option("--config", config_path, "path to the JSON run configuration")->required();
    run->add_option("--threads", threads, "worker threads (0 = all cores; default COHORT_AUDIT_THREADS or all cores)");
    run->add_option("--seed", seed, "override the configured seed");

    std::string spec_path, out_dir;
    auto* sim = app.add_subcommand("simulate", "write a synthetic cohort with planted mislabeled samples");
    sim->add_option("--spec", spec_path, "path to the JSON synthetic-cohort spec")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    std::string run_dir, truth;
    auto* score = app.add_subcommand("score", "precision and recall of a run against a plant list");
    score->add_option("--run", run_dir, "run output directory")->required();
    score->add_option("--truth", truth, "truth.csv written by simulate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ca::exit_code(ca::ErrorKind::Config);
    }

    try {
        if (*run) return cmd_run(config_path, threads, seed);
        if (*sim) return cmd_simulate(spec_path, out_dir);
        if (*score) return cmd_score(run_dir, truth);
    } catch (const ca::Error& e) {
        std::cerr << "error [" << e.module() << "]: " << e.what() << "\n";
        return ca::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

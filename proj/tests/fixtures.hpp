#ifndef COHORT_AUDIT_TESTS_FIXTURES_HPP
#define COHORT_AUDIT_TESTS_FIXTURES_HPP

#include <filesystem>

#include <nlohmann/json.hpp>

#include "cohort_audit/config.hpp"
#include "cohort_audit/synth.hpp"
#include "cohort_audit/text.hpp"

namespace fixtures {

/// A small synthetic cohort that runs end to end in well under a second.
inline cohort_audit::SynthSpec small_spec(std::uint64_t seed = 5) {
    auto s = cohort_audit::SynthSpec::defaults();
    s.n_per_group = 40;
    s.n_features = 12;
    s.n_informative = 4;
    s.separation = 4.0;
    s.n_planted_per_group = 3;
    s.seed = seed;
    return s;
}

inline nlohmann::json small_grid_json() {
    return {{"costs", {0.1, 1.0, 10.0}}, {"gammas", {0.01, 0.1}}, {"kernels", {"linear", "rbf"}}};
}

/// Simulates into `dir` and rewrites its config.json with a small grid and 5 folds.
inline std::filesystem::path write_small_cohort(const std::filesystem::path& dir, std::uint64_t seed = 5) {
    cohort_audit::simulate(small_spec(seed), dir);
    auto cfg = nlohmann::json::parse(cohort_audit::text::read_file(dir / "config.json", "test"));
    cfg["grid"] = small_grid_json();
    cfg["k"] = 5;
    cohort_audit::text::write_file(dir / "config.json", cfg.dump(2) + "\n", "test");
    return dir / "config.json";
}

} // namespace fixtures

#endif

#ifndef COHORT_AUDIT_TESTS_REFERENCE_FIXTURES_HPP
#define COHORT_AUDIT_TESTS_REFERENCE_FIXTURES_HPP

// Cohort fragments with a known group-level table and a known individual annotation.

#include <string>
#include <vector>

#include "cohort_audit/dekt.hpp"
#include "test_util.hpp"

namespace reference {

using namespace cohort_audit;

inline const TargetSpec kTarget{"diagnosis", "HC", "PD"};

// One expert entry per covariate of the individual popup fixture, keyed to the case group.
struct FixtureRow {
    const char* feature;
    CovariateKind kind;
    const char* observed; // value of the flagged control
    const char* condition;
};

// Thirteen observations matching the case-typical condition ...
inline const std::vector<FixtureRow> kSupporting = {
    {"sex", CovariateKind::Categorical, "Male", "Male"},
    {"b_cells_naive", CovariateKind::Numeric, "0.0871", "<=0.09"},
    {"monocytes_progenitor", CovariateKind::Numeric, "0.0165", "<=0.031"},
    {"t_naive_cd4_cd8_t_memory_cd4", CovariateKind::Numeric, "0.1138", "<=0.155"},
    {"Tremor_Right_UM", CovariateKind::Numeric, "1", ">0"},
    {"Tremor_Left_UM", CovariateKind::Numeric, "1", ">0"},
    {"Tremor_all_UM", CovariateKind::Numeric, "2", ">0"},
    {"ess_summary_score", CovariateKind::Numeric, "11", ">=8"},
    {"Abeta", CovariateKind::Numeric, "377.4", "<850"},
    {"Tau", CovariateKind::Numeric, "96.48", "<=145"},
    {"sbr_caudate_r", CovariateKind::Numeric, "2.24", "<=2.4"},
    {"rbd_summary_score", CovariateKind::Numeric, "4", ">=3.5"},
    {"neutrophils_mature", CovariateKind::Numeric, "0.436", ">=0.36"},
};

// ... and thirteen that do not.
inline const std::vector<FixtureRow> kOpposing = {
    {"age_at_baseline", CovariateKind::Numeric, "59", ">61"},
    {"mutation", CovariateKind::Categorical, "Healthy Control", "LRRK2 - Aff"},
    {"nk_cells", CovariateKind::Numeric, "0.0021", ">0.0028"},
    {"code_upd2hy_hoehn_and_yahr_stage", CovariateKind::Categorical, "0", "1,2,3"},
    {"mds_updrs_part_iii_summary_score", CovariateKind::Numeric, "2", ">=10"},
    {"upd23a_medication_for_pd", CovariateKind::Categorical, "No", "Yes"},
    {"PIGD_UM", CovariateKind::Numeric, "0", ">0"},
    {"mds_updrs_part_i_summary_score", CovariateKind::Numeric, "0", ">=6"},
    {"mds_updrs_part_i_sub_score", CovariateKind::Numeric, "0", ">0"},
    {"code_upd2101_cognitive_impairment", CovariateKind::Categorical, "0", "1,2,3"},
    {"code_upd2102_hallucinations_and_psychosis", CovariateKind::Categorical, "0", "1,2,3"},
    {"code_upd2103_depressed_mood", CovariateKind::Categorical, "0", "1,2,3"},
    {"code_upd2104_anxious_mood", CovariateKind::Categorical, "0", "1,2,3"},
};

struct PopupFixture {
    testutil::TempDir dir;
    ClinicalTable clin;
    std::vector<DektEntry> dekt;
};

inline std::string csv_cell(const std::string& s) { return s.find(',') == std::string::npos ? s : "\"" + s + "\""; }

inline void build_popup_fixture(PopupFixture& fx) {
    std::vector<FixtureRow> rows = kSupporting;
    rows.insert(rows.end(), kOpposing.begin(), kOpposing.end());
    std::vector<std::string> missing_names;
    for (int i = 0; i < 10; ++i) missing_names.push_back("unrecorded_" + std::to_string(i));

    ClinicalSchema schema;
    std::string header = "id\tdiagnosis", flagged = "AHC1\tHC", other = "PD1\tPD";
    std::string dekt = "Group,Feature,Value,Sign\n";
    for (const auto& r : rows) {
        schema[r.feature] = {r.kind, {}};
        header += std::string("\t") + r.feature;
        flagged += std::string("\t") + r.observed;
        other += r.kind == CovariateKind::Numeric ? "\t5" : "\tother";
        dekt += std::string("PD,") + r.feature + "," + csv_cell(r.condition) + ",+\n";
    }
    for (const auto& name : missing_names) {
        schema[name] = {CovariateKind::Numeric, {}};
        header += "\t" + name;
        flagged += "\tNA";
        other += "\t1";
        dekt += "PD," + name + ",>0,+\n";
    }
    const auto clin_path = fx.dir.write("clinical.tsv", header + "\n" + flagged + "\n" + other + "\n");
    const auto dekt_path = fx.dir.write("dekt.csv", dekt);
    fx.clin = load_clinical(clin_path, schema, kTarget);
    fx.dekt = load_dekt(dekt_path, fx.clin);
}

inline ClinicalTable sex_table(int flagged_male, int flagged_female, int rest_male, int rest_female) {
    ClinicalTable t;
    t.target_name = "diagnosis";
    t.control_level = "HC";
    t.case_level = "PD";
    Covariate sex{"sex", CovariateKind::Categorical, {"Male", "Female"}, {}, {}};
    const auto add = [&](int count, int code) {
        for (int i = 0; i < count; ++i) {
            t.sample_ids.push_back("s" + std::to_string(t.sample_ids.size()));
            t.groups.push_back(Group::Control);
            sex.codes.push_back(code);
        }
    };
    add(flagged_male, 0);
    add(flagged_female, 1);
    add(rest_male, 0);
    add(rest_female, 1);
    t.covariates.push_back(std::move(sex));
    return t;
}

inline DektEntry sex_entry() { return {"PD", Group::Case, "sex", Equals{"Male"}, RiskSign::Increases}; }

} // namespace reference

#endif

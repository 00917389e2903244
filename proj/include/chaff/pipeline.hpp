#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chaff/validator.hpp"

namespace chaff {

inline constexpr int kReportSchemaVersion = 1;

struct RunConfig {
    uint64_t seed = 1;
    Thresholds thresholds;
    Quotas quotas;
    uint32_t stages = 2;
    uint32_t dataflow_depth = 2;
    bool crash_marker = false;
    uint32_t retries = 10;              // candidates tried per attack point
    Limits limits;
    std::vector<std::string> hot_functions;
    uint32_t constraint_samples = 10000;
    int heap_depth = 3;
};

nlohmann::json config_to_json(const RunConfig &c);
/// Fields present in `j` override `base`.
RunConfig config_from_json(const nlohmann::json &j, RunConfig base = {});
/// "oc-stack=3,oc-heap=1,unused-stack=2"
Quotas parse_quotas(const std::string &text);

struct Fixture {
    std::string source_path;
    std::string source;
    Program program;
    std::vector<std::string> input_names;
    std::vector<std::string> inputs;
};

/// Every regular file in `inputs_dir` except bug_*.bin, by name.
Fixture load_fixture(const std::string &source_path, const std::string &inputs_dir);

struct SeedAnalysis {
    size_t input = 0;
    Trace trace;
    DuaScan scan;
    std::vector<AttackPoint> atps;      // hot functions removed
};

std::vector<SeedAnalysis> analyze(const Fixture &fx, const RunConfig &cfg);

struct Attempt {
    BugType type = BugType::OCStack;
    size_t input = 0;
    NodeId atp = kNoNode;
    std::string function;
    uint32_t try_index = 0;             // 1-based within the attack point
    bool ok = false;
    std::string reason;
};

struct InjectResult {
    std::vector<PlannedBug> plans;
    Synthesis synthesis;
    std::vector<TriggerInput> triggers;
    CleanResult clean;
    std::vector<BugValidation> validation;
    std::vector<Attempt> attempts;
    bool roundtrip = false;
    std::map<BugType, uint32_t> placed;
    nlohmann::json report;              // generated_at left null

    bool all_requested_validated(const Quotas &q) const;
};

/// Throws QuotaInfeasible before any synthesis when a type has too few
/// usable attack points across the seed inputs.
InjectResult inject(const Fixture &fx, const RunConfig &cfg);

struct SurveyResult {
    std::vector<std::optional<uint32_t>> first_success;
    std::vector<double> curve;
    nlohmann::json report;
};

/// Sample `atps` attack points, try up to `retries` candidates at each.
SurveyResult survey(const Fixture &fx, const RunConfig &cfg, size_t atps, uint32_t retries);

struct CoverageSummary {
    std::vector<std::string> functions;
    std::vector<std::string> covered;
    std::vector<std::string> covered_after_input;
    std::vector<std::string> atp_functions;
    double coverage = 0;
    double adjusted_coverage = 0;       // entered after the first input read
    double atp_coverage = 0;
    nlohmann::json report;
};

CoverageSummary coverage(const Fixture &fx, const RunConfig &cfg);

nlohmann::json fault_json(const FaultReport &f);
nlohmann::json spec_json(const BugSpec &s);
nlohmann::json case_table_json(const heap::CaseTable &t, bool rows);

} // namespace chaff

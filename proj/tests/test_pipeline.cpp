#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "chaff/corpus.hpp"

using namespace chaff;
namespace fs = std::filesystem;

namespace {

Fixture from_corpus(const std::string &name)
{
    Manifest m = load_manifest(std::string(CHAFF_SOURCE_DIR) + "/corpus/" + name);
    return load_fixture(m.source, m.inputs_dir);
}

/// A throwaway fixture on disk: one source file, one input.
Fixture scratch(const std::string &tag, const std::string &src, const std::string &input)
{
    fs::path dir = fs::temp_directory_path() / ("chaff_pipeline_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir / "inputs");
    std::ofstream(dir / "p.c") << src;
    std::ofstream(dir / "inputs" / "seed0.bin", std::ios::binary) << input;
    return load_fixture((dir / "p.c").string(), (dir / "inputs").string());
}

} // namespace

TEST_CASE("quota strings")
{
    Quotas q = parse_quotas("oc-stack=3,oc-heap=1,unused-stack=2");
    CHECK(q.oc_stack == 3);
    CHECK(q.oc_heap == 1);
    CHECK(q.unused_stack == 2);
    CHECK(parse_quotas("").total() == 0);
    CHECK_THROWS(parse_quotas("oc-stak=1"));
    CHECK_THROWS(parse_quotas("oc-stack"));
}

TEST_CASE("config survives a JSON round trip; absent fields keep the base")
{
    RunConfig c;
    c.seed = 42;
    c.stages = 4;
    c.quotas.oc_heap = 7;
    c.hot_functions = {"crc_step"};
    c.thresholds.liveness_max = 3;
    c.crash_marker = true;
    RunConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));

    RunConfig partial = config_from_json(nlohmann::json{{"seed", 9}}, c);
    CHECK(partial.seed == 9);
    CHECK(partial.stages == 4);
}

TEST_CASE("inject twice: identical reports")
{
    Fixture fx = from_corpus("kvstore");
    RunConfig cfg;
    cfg.quotas = parse_quotas("oc-stack=2,oc-heap=2,unused-stack=2");
    cfg.constraint_samples = 2000;
    InjectResult a = inject(fx, cfg);
    InjectResult b = inject(fx, cfg);
    CHECK(a.report.dump() == b.report.dump());
    CHECK(a.report["generated_at"].is_null());
    CHECK(a.all_requested_validated(cfg.quotas));
    CHECK(a.report["bugs"].size() == 6);

    cfg.seed = 2;
    CHECK(inject(fx, cfg).report.dump() != a.report.dump());
}

TEST_CASE("no attack points: QuotaInfeasible before anything is written")
{
    Fixture fx = from_corpus("noatp");
    RunConfig cfg;
    cfg.quotas.unused_stack = 5;
    try {
        inject(fx, cfg);
        FAIL("expected QuotaInfeasible");
    } catch (const QuotaInfeasible &e) {
        CHECK(e.type() == BugType::UnusedStack);
        CHECK(e.available() == 0);
    }
}

TEST_CASE("coverage: a single reachable function is fully covered")
{
    const char *one = R"(int main(void)
{
    char b[4];
    int v;
    read_input(b, 4);
    v = b[0] + 1;
    print_int(v);
    return 0;
}
)";
    CoverageSummary c = coverage(scratch("one", one, "abcd"), RunConfig{});
    CHECK(c.functions == std::vector<std::string>{"main"});
    CHECK(c.coverage == doctest::Approx(1.0));
    CHECK(c.atp_functions == std::vector<std::string>{"main"});
}

TEST_CASE("coverage: a function never called has no attack points")
{
    const char *two = R"(int unused(int x)
{
    return x + 1;
}

int main(void)
{
    char b[4];
    int v;
    read_input(b, 4);
    v = b[0];
    print_int(v);
    return 0;
}
)";
    CoverageSummary c = coverage(scratch("two", two, "abcd"), RunConfig{});
    CHECK(c.functions.size() == 2);
    CHECK(c.coverage == doctest::Approx(0.5));
    CHECK(std::find(c.atp_functions.begin(), c.atp_functions.end(), "unused") == c.atp_functions.end());
}

TEST_CASE("survey: deterministic, monotone, one point per retry")
{
    Fixture fx = from_corpus("inventory");
    RunConfig cfg;
    cfg.constraint_samples = 1000;
    SurveyResult a = survey(fx, cfg, 20, 10);
    SurveyResult b = survey(fx, cfg, 20, 10);
    CHECK(a.report.dump() == b.report.dump());
    REQUIRE(a.curve.size() == 10);
    CHECK(std::is_sorted(a.curve.begin(), a.curve.end()));
    CHECK(a.first_success.size() == 20);

    SurveyResult once = survey(fx, cfg, 20, 1);
    REQUIRE(once.curve.size() == 1);
    CHECK(once.curve[0] <= a.curve.back());
    CHECK_THROWS_AS(survey(fx, cfg, 100000, 10), QuotaInfeasible);
}

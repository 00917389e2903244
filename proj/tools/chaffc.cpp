// chaffc: inject, survey, heap-check, coverage, validate.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "chaff/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chaff;

namespace {

std::string now_utc()
{
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path &p, const std::string &data)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + p.string());
    out << data;
}

void emit(json report, const std::string &out_file)
{
    report["generated_at"] = now_utc();
    std::string text = report.dump(2) + "\n";
    if (out_file.empty() || out_file == "-")
        std::cout << text;
    else
        spit(out_file, text);
}

/// Machine-readable error record on stdout; exit code chosen by the caller.
int fail(const std::string &kind, const std::string &message, json extra = json::object())
{
    json e = {{"schema_version", kReportSchemaVersion}, {"generated_at", now_utc()},
              {"error", {{"kind", kind}, {"message", message}}}};
    for (auto &[k, v] : extra.items())
        e["error"][k] = v;
    std::cout << e.dump(2) << "\n";
    spdlog::error("{}: {}", kind, message);
    return kind == "quota-infeasible" ? 2 : 1;
}

std::vector<std::string> split(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

/// Command-line overrides; unset members leave the file/default value alone.
struct Overrides {
    std::string config_file;
    std::optional<uint64_t> seed;
    std::string bugs;
    std::optional<uint32_t> stages, dataflow_depth, retries, tcn_max, liveness_max, samples;
    std::optional<int> heap_depth;
    std::optional<uint64_t> max_steps;
    bool crash_marker = false;
    std::string hot;

    void add(CLI::App *app)
    {
        app->add_option("--config", config_file, "JSON config file; flags override it")->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "RNG seed");
        app->add_option("--stages", stages, "constraint stages per overconstrained bug");
        app->add_option("--dataflow-depth", dataflow_depth, "callers threaded for unused-stack dataflow");
        app->add_option("--tcn-max", tcn_max, "taint compute number threshold");
        app->add_option("--liveness-max", liveness_max, "liveness threshold");
        app->add_option("--constraint-samples", samples, "random inputs per constraint subset check");
        app->add_option("--heap-depth", heap_depth, "heap case-analysis depth");
        app->add_option("--max-steps", max_steps, "interpreter step budget per run");
        app->add_option("--hot", hot, "comma-separated functions excluded from injection");
        app->add_flag("--crash-marker", crash_marker, "unused-stack bugs end in a divide-by-zero marker");
    }

    RunConfig resolve() const
    {
        RunConfig c;
        if (!config_file.empty())
            c = config_from_json(json::parse(slurp(config_file)), c);
        if (seed) c.seed = *seed;
        if (!bugs.empty()) c.quotas = parse_quotas(bugs);
        if (stages) c.stages = *stages;
        if (dataflow_depth) c.dataflow_depth = *dataflow_depth;
        if (retries) c.retries = *retries;
        if (tcn_max) c.thresholds.tcn_max = *tcn_max;
        if (liveness_max) c.thresholds.liveness_max = *liveness_max;
        if (samples) c.constraint_samples = *samples;
        if (heap_depth) c.heap_depth = *heap_depth;
        if (max_steps) c.limits.max_steps = *max_steps;
        if (crash_marker) c.crash_marker = true;
        if (!hot.empty()) c.hot_functions = split(hot);
        return c;
    }
};

int cmd_inject(const std::string &prog, const std::string &inputs, const Overrides &ov, const std::string &out)
{
    RunConfig cfg = ov.resolve();
    Fixture fx = load_fixture(prog, inputs);
    spdlog::info("{}: {} seed inputs", prog, fx.inputs.size());
    InjectResult res = inject(fx, cfg);
    fs::create_directories(out);
    spit(fs::path(out) / "original.c", print(fx.program));
    spit(fs::path(out) / "transformed.c", print(res.synthesis.transformed));
    for (const auto &t : res.triggers)
        spit(fs::path(out) / ("bug_" + std::to_string(t.bug_id) + ".bin"), t.bytes);
    json report = res.report;
    report["tool"] = "chaffc";
    report["program"]["inputs_dir"] = inputs;
    emit(report, (fs::path(out) / "report.json").string());

    for (const auto &[type, n] : res.placed)
        spdlog::info("{}: placed {} of {}", to_string(type), n, cfg.quotas.of(type));
    spdlog::info("attempt success rate {:.3f}", report["validation"]["attempt_success_rate"].get<double>());
    if (!res.all_requested_validated(cfg.quotas)) {
        spdlog::warn("not every requested bug was placed and validated");
        return 1;
    }
    return 0;
}

int cmd_survey(const std::string &prog, const std::string &inputs, const Overrides &ov, size_t atps, uint32_t retries,
               const std::string &out)
{
    RunConfig cfg = ov.resolve();
    Fixture fx = load_fixture(prog, inputs);
    SurveyResult s = survey(fx, cfg, atps, retries);
    json r = s.report;
    r["tool"] = "chaffc";
    emit(r, out);
    return 0;
}

int cmd_heap_check(int depth, bool rows, bool baseline, const std::string &out)
{
    auto t0 = std::chrono::steady_clock::now();
    heap::CaseTable t = heap::check_corruption_cases(heap::OverflowValues{}, depth);
    json r = {{"schema_version", kReportSchemaVersion}, {"generated_at", nullptr}, {"tool", "chaffc"},
              {"command", "heap-check"}, {"values", {{"fake_size", 16}, {"prev_size", 12}, {"size", 0}}},
              {"corrupted", case_table_json(t, rows)}};
    if (baseline)
        r["baseline"] = case_table_json(heap::check_corruption_cases(std::nullopt, depth), rows);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("heap-check depth {}: {} rows in {:.2f}s", depth, t.rows.size(), secs);
    emit(r, out);
    return t.count(heap::Outcome::CorruptionEscaped) == 0 ? 0 : 1;
}

int cmd_coverage(const std::string &prog, const std::string &inputs, const Overrides &ov, const std::string &out)
{
    CoverageSummary c = coverage(load_fixture(prog, inputs), ov.resolve());
    json r = c.report;
    r["tool"] = "chaffc";
    emit(r, out);
    return 0;
}

/// Re-check an inject output directory from what it contains: clean
/// equivalence on the recorded inputs, print fixpoint, and each trigger's
/// fault against the report.
int cmd_validate(const std::string &dir, const std::string &inputs_override, const std::string &out)
{
    fs::path d(dir);
    json report = json::parse(slurp(d / "report.json"));
    std::string inputs = inputs_override.empty() ? report["program"].value("inputs_dir", "") : inputs_override;
    if (inputs.empty())
        return fail("usage", "report has no inputs_dir; pass --inputs");
    RunConfig cfg = config_from_json(report["config"]);
    Program original = parse(slurp(d / "original.c"), "original.c");
    std::string transformed_text = slurp(d / "transformed.c");
    Program transformed = parse(transformed_text, "transformed.c");

    std::vector<std::string> corpus;
    for (const auto &name : report["inputs"])
        corpus.push_back(slurp(fs::path(inputs) / name.get<std::string>()));

    json checks = json::array();
    bool all = true;
    auto check = [&](const std::string &what, bool ok, json detail = nullptr) {
        json c = {{"check", what}, {"ok", ok}};
        if (!detail.is_null())
            c["detail"] = detail;
        checks.push_back(c);
        all = all && ok;
    };

    CleanResult clean = validate_clean(original, transformed, corpus, cfg.limits);
    check("clean-equivalence", clean.equivalent(), {{"inputs", clean.inputs}, {"divergences", clean.divergences.size()}});
    check("print-fixpoint", print(transformed) == transformed_text);

    RunOptions opt;
    opt.limits = cfg.limits;
    opt.trace = TraceLevel::None;
    opt.audit = true;
    for (const auto &b : report["bugs"]) {
        uint32_t id = b["id"];
        std::string bytes = slurp(d / b["trigger_input"]["file"].get<std::string>());
        RunResult r = run(transformed, bytes, opt);
        bool wrote = std::any_of(r.audit.begin(), r.audit.end(), [&](const AuditWrite &w) { return w.bug_id == id; });
        const json &v = b["validation"];
        bool ok = wrote;
        json detail = {{"id", id}, {"triggered", wrote}};
        if (v.contains("fault")) {
            ok = ok && r.fault && to_string(r.fault->kind) == v["fault"]["kind"].get<std::string>() &&
                 r.fault->address == v["fault"]["address"].get<uint32_t>();
            if (r.fault)
                detail["fault"] = fault_json(*r.fault);
        } else {
            ok = ok && !r.fault;
        }
        if (b.contains("constraint_chain")) {
            std::vector<uint32_t> masks;
            for (const auto &s : b["constraint_chain"])
                masks.push_back(s["mask"]);
            bool sound = check_chain_subsets(masks, cfg.constraint_samples, id).sound();
            detail["constraint_sound"] = sound;
            ok = ok && sound;
        }
        check("bug", ok, detail);
    }
    json r = {{"schema_version", kReportSchemaVersion}, {"generated_at", nullptr}, {"tool", "chaffc"},
              {"command", "validate"}, {"directory", dir}, {"checks", checks}, {"ok", all}};
    emit(r, out);
    return all ? 0 : 1;
}

} // namespace

int main(int argc, char **argv)
{
    auto logger = spdlog::stderr_color_mt("chaffc");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char *lvl = std::getenv("CHAFFC_LOG"))
        spdlog::set_level(spdlog::level::from_str(lvl));

    CLI::App app{"chaff bug injector for mini-C programs"};
    app.require_subcommand(1);

    std::string prog, inputs, out;
    Overrides ov;

    auto *inj = app.add_subcommand("inject", "inject non-exploitable bugs and write triggers");
    inj->add_option("program", prog, "mini-C source")->required()->check(CLI::ExistingFile);
    inj->add_option("--inputs", inputs, "directory of seed inputs")->required()->check(CLI::ExistingDirectory);
    inj->add_option("--bugs", ov.bugs, "quotas, e.g. oc-stack=3,oc-heap=1,unused-stack=2");
    inj->add_option("--out", out, "output directory")->required();
    inj->add_option("--retries", ov.retries, "candidates tried per attack point");
    ov.add(inj);

    size_t n_atps = 20;
    uint32_t survey_retries = 10;
    auto *sur = app.add_subcommand("survey", "success-after-k-tries curve over sampled attack points");
    sur->add_option("program", prog)->required()->check(CLI::ExistingFile);
    sur->add_option("--inputs", inputs)->required()->check(CLI::ExistingDirectory);
    sur->add_option("--atps", n_atps, "attack points sampled");
    sur->add_option("--retries", survey_retries, "retry cap");
    sur->add_option("-o,--output", out, "report file (default stdout)");
    ov.add(sur);

    int depth = 3;
    bool rows = false, baseline = false;
    auto *hc = app.add_subcommand("heap-check", "allocator case analysis for the heap overflow values");
    hc->add_option("--depth", depth, "operation sequence length");
    hc->add_flag("--rows", rows, "list every case");
    hc->add_flag("--baseline", baseline, "also run with uncorrupted metadata");
    hc->add_option("-o,--output", out, "report file (default stdout)");

    auto *cov = app.add_subcommand("coverage", "function and attack-point coverage of the seed inputs");
    cov->add_option("program", prog)->required()->check(CLI::ExistingFile);
    cov->add_option("--inputs", inputs)->required()->check(CLI::ExistingDirectory);
    cov->add_option("-o,--output", out, "report file (default stdout)");
    ov.add(cov);

    std::string dir;
    auto *val = app.add_subcommand("validate", "re-check an inject output directory");
    val->add_option("dir", dir, "inject --out directory")->required()->check(CLI::ExistingDirectory);
    val->add_option("--inputs", inputs, "seed inputs (default: the directory recorded in the report)");
    val->add_option("-o,--output", out, "report file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (inj->parsed())
            return cmd_inject(prog, inputs, ov, out);
        if (sur->parsed())
            return cmd_survey(prog, inputs, ov, n_atps, survey_retries, out);
        if (hc->parsed())
            return cmd_heap_check(depth, rows, baseline, out);
        if (cov->parsed())
            return cmd_coverage(prog, inputs, ov, out);
        if (val->parsed())
            return cmd_validate(dir, inputs, out);
    } catch (const QuotaInfeasible &e) {
        return fail("quota-infeasible", e.what(), {{"type", to_string(e.type())}, {"available", e.available()}});
    } catch (const SyntaxError &e) {
        return fail("syntax-error", e.what());
    } catch (const UnsupportedConstruct &e) {
        return fail("unsupported-construct", e.what());
    } catch (const RuntimeError &e) {
        return fail("runtime-error", e.what());
    } catch (const json::exception &e) {
        return fail("bad-json", e.what());
    } catch (const std::exception &e) {
        return fail("error", e.what());
    }
    return 0;
}

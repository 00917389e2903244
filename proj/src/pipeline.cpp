#include "chaff/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace chaff {

// ---- configuration ---------------------------------------------------------

json config_to_json(const RunConfig &c)
{
    return {
        {"seed", c.seed},
        {"thresholds", {{"tcn_max", c.thresholds.tcn_max}, {"liveness_max", c.thresholds.liveness_max}}},
        {"quotas", {{"oc-stack", c.quotas.oc_stack}, {"oc-heap", c.quotas.oc_heap}, {"unused-stack", c.quotas.unused_stack}}},
        {"stages", c.stages},
        {"dataflow_depth", c.dataflow_depth},
        {"crash_marker", c.crash_marker},
        {"retries", c.retries},
        {"budgets", {{"max_steps", c.limits.max_steps}, {"heap_bytes", c.limits.heap_bytes}, {"stack_bytes", c.limits.stack_bytes}}},
        {"hot_functions", c.hot_functions},
        {"constraint_samples", c.constraint_samples},
        {"heap_depth", c.heap_depth},
    };
}

RunConfig config_from_json(const json &j, RunConfig c)
{
    auto get = [&](const json &o, const char *key, auto &dst) {
        if (o.contains(key))
            o.at(key).get_to(dst);
    };
    get(j, "seed", c.seed);
    if (j.contains("thresholds")) {
        get(j["thresholds"], "tcn_max", c.thresholds.tcn_max);
        get(j["thresholds"], "liveness_max", c.thresholds.liveness_max);
    }
    if (j.contains("quotas")) {
        get(j["quotas"], "oc-stack", c.quotas.oc_stack);
        get(j["quotas"], "oc-heap", c.quotas.oc_heap);
        get(j["quotas"], "unused-stack", c.quotas.unused_stack);
    }
    get(j, "stages", c.stages);
    get(j, "dataflow_depth", c.dataflow_depth);
    get(j, "crash_marker", c.crash_marker);
    get(j, "retries", c.retries);
    if (j.contains("budgets")) {
        get(j["budgets"], "max_steps", c.limits.max_steps);
        get(j["budgets"], "heap_bytes", c.limits.heap_bytes);
        get(j["budgets"], "stack_bytes", c.limits.stack_bytes);
    }
    get(j, "hot_functions", c.hot_functions);
    get(j, "constraint_samples", c.constraint_samples);
    get(j, "heap_depth", c.heap_depth);
    return c;
}

Quotas parse_quotas(const std::string &text)
{
    Quotas q;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("bug quota '" + item + "' is not type=count");
        std::string type = item.substr(0, eq);
        uint32_t n = static_cast<uint32_t>(std::stoul(item.substr(eq + 1)));
        if (type == "oc-stack")
            q.oc_stack = n;
        else if (type == "oc-heap")
            q.oc_heap = n;
        else if (type == "unused-stack")
            q.unused_stack = n;
        else
            throw std::invalid_argument("unknown bug type '" + type + "'");
    }
    return q;
}

// ---- inputs and analysis ---------------------------------------------------

namespace {

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

Fixture load_fixture(const std::string &source_path, const std::string &inputs_dir)
{
    Fixture fx;
    fx.source_path = source_path;
    fx.source = slurp(source_path);
    fx.program = parse(fx.source, fs::path(source_path).filename().string());
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(inputs_dir)) {
        std::string name = e.path().filename().string();
        if (e.is_regular_file() && !(name.rfind("bug_", 0) == 0 && e.path().extension() == ".bin"))
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
        fx.input_names.push_back(f.filename().string());
        fx.inputs.push_back(slurp(f));
    }
    if (fx.inputs.empty())
        throw std::runtime_error("no seed inputs in " + inputs_dir);
    return fx;
}

std::vector<SeedAnalysis> analyze(const Fixture &fx, const RunConfig &cfg)
{
    std::vector<SeedAnalysis> out(fx.inputs.size());
    RunOptions opt;
    opt.limits = cfg.limits;
    for (size_t i = 0; i < fx.inputs.size(); ++i) {
        SeedAnalysis &a = out[i];
        a.input = i;
        RunResult r = run(fx.program, fx.inputs[i], opt);
        a.trace = std::move(r.trace);
        a.scan = find_duas(a.trace, cfg.thresholds);
        for (auto &atp : find_attack_points(a.trace, fx.program))
            if (std::find(cfg.hot_functions.begin(), cfg.hot_functions.end(), atp.function) == cfg.hot_functions.end())
                a.atps.push_back(std::move(atp));
    }
    return out;
}

// ---- JSON ----------------------------------------------------------------

json fault_json(const FaultReport &f)
{
    json j = {{"kind", to_string(f.kind)}, {"address", f.address}, {"function", f.function}, {"node", f.node}};
    if (!f.assertion.empty())
        j["assertion"] = f.assertion;
    if (f.bug_id)
        j["bug_id"] = *f.bug_id;
    return j;
}

json spec_json(const BugSpec &s)
{
    json j = {
        {"id", s.id},
        {"type", to_string(s.candidate.type)},
        {"function", s.function},
        {"attack_point", s.atp_anchor},
        {"seed_input", s.candidate.seed_input},
        {"magic", s.magic},
        {"trigger_global", s.trigger_global},
        {"buffer", s.buffer},
        {"overflow_offset", s.overflow_offset},
        {"overflow_length", s.overflow_length},
    };
    if (!s.attack_global.empty())
        j["attack_global"] = s.attack_global;
    switch (s.candidate.type) {
    case BugType::OCStack:
        j["target"] = to_string(s.candidate.target);
        j["target_distance"] = s.target_distance;
        j["copied_args_skip"] = s.copied_args_skip;
        j["final_value"] = s.final_value;
        break;
    case BugType::OCHeap:
        j["alloc_size"] = s.alloc_size;
        j["metadata"] = {{"fake_size", s.heap_values.fake_size},
                         {"prev_size", s.heap_values.prev_size},
                         {"size", s.heap_values.size}};
        break;
    case BugType::UnusedStack: {
        json d = json::array();
        for (const auto &x : s.dummies)
            d.push_back({{"name", x.name}, {"size", x.size}});
        j["dummies"] = d;
        j["crash_marker"] = s.crash_marker;
        json df = {{"threaded", s.dataflow.threaded}, {"root", s.dataflow.root_function},
                   {"degenerate", s.dataflow.degenerate}};
        if (!s.dataflow.note.empty())
            df["note"] = s.dataflow.note;
        j["dataflow"] = df;
        break;
    }
    }
    if (!s.chain.stages.empty()) {
        json st = json::array();
        for (const auto &c : s.chain.stages)
            st.push_back({{"anchor", c.anchor.node}, {"function", c.anchor.function}, {"global", c.global}, {"mask", c.mask}});
        j["constraint_chain"] = st;
    }
    return j;
}

json case_table_json(const heap::CaseTable &t, bool rows)
{
    json j = {
        {"depth", t.depth},
        {"corrupted", t.corrupted},
        {"rows", t.rows.size()},
        {"abort", t.count(heap::Outcome::Abort)},
        {"silent", t.count(heap::Outcome::Silent)},
        {"corruption_escaped", t.count(heap::Outcome::CorruptionEscaped)},
        {"silent_consulted", t.silent_consulted()},
    };
    json per = json::object();
    for (auto s : heap::kSuccessorStates) {
        json &e = per[heap::to_string(s)];
        e = {{"abort", 0}, {"silent", 0}, {"corruption_escaped", 0}};
        for (const auto &r : t.rows)
            if (r.successor == s) {
                auto &n = e[r.outcome == heap::Outcome::Abort    ? "abort"
                            : r.outcome == heap::Outcome::Silent ? "silent"
                                                                 : "corruption_escaped"];
                n = n.get<int>() + 1;
            }
    }
    j["by_successor"] = per;
    if (rows) {
        json list = json::array();
        for (const auto &r : t.rows) {
            std::string ops;
            for (const auto &op : r.ops)
                ops += (ops.empty() ? "" : " ") + op.describe();
            json row = {{"successor", heap::to_string(r.successor)}, {"ops", ops}, {"outcome", heap::to_string(r.outcome)},
                        {"consulted", r.consulted}};
            if (!r.assertion.empty())
                row["assertion"] = r.assertion;
            if (!r.note.empty())
                row["note"] = r.note;
            list.push_back(row);
        }
        j["cases"] = list;
    }
    return j;
}

namespace {

json proofs_json(const ProofBundle &b)
{
    json j = {{"write_audit", {{"passed", b.write_audit}, {"writes", b.audited_writes}, {"objects", b.audited_objects}}}};
    if (b.constraint)
        j["constraint"] = {{"sound", b.constraint->sound()},
                           {"algebraic_zero", b.constraint->algebraic_zero},
                           {"orderings", b.constraint->orderings},
                           {"inputs", b.constraint->inputs},
                           {"evaluations", b.constraint->evaluations}};
    if (b.heap)
        j["heap_case_table"] = {{"depth", b.heap->depth}, {"rows", b.heap->rows}, {"abort", b.heap->aborts},
                                {"corruption_escaped", b.heap->escaped}};
    if (b.taint_non_escape)
        j["taint_non_escape"] = {{"passed", *b.taint_non_escape}, {"runs", b.taint_runs}};
    return j;
}

json validation_json(const BugValidation &v)
{
    json j = {{"validated", v.validated}, {"reason", v.reason}};
    if (v.fault)
        j["fault"] = fault_json(*v.fault);
    if (v.classification)
        j["classification"] = {{"label", v.classification->label}, {"rationale", v.classification->rationale}};
    if (v.proofs)
        j["proofs"] = proofs_json(*v.proofs);
    if (v.counterexample)
        j["counterexample"] = {{"kind", v.counterexample->kind()}, {"witness", v.counterexample->witness()}};
    return j;
}

// ---- candidate trials ----------------------------------------------------

struct Group {
    size_t input = 0;
    std::vector<BugCandidate> tries;
};

/// Usable attack points of one type across all seeds, round-robin by seed.
std::vector<Group> candidate_groups(const std::vector<SeedAnalysis> &seeds, BugType type, const RunConfig &cfg,
                                    uint32_t retries)
{
    std::vector<std::vector<Group>> per_seed;
    for (const auto &a : seeds) {
        PairPolicy pol;
        pol.seed = detail::mix_seed(cfg.seed, a.input);
        pol.retries = retries;
        pol.min_anchors = type == BugType::UnusedStack ? 0 : cfg.stages;
        pol.seed_input = static_cast<uint32_t>(a.input);
        switch (type) {
        case BugType::OCStack: pol.quotas.oc_stack = 1; break;
        case BugType::OCHeap: pol.quotas.oc_heap = 1; break;
        case BugType::UnusedStack: pol.quotas.unused_stack = 1; break;
        }
        std::vector<Group> groups;
        try {
            for (const auto &c : pair_candidates(a.trace, a.scan.accepted, a.atps, pol)) {
                if (groups.empty() || groups.back().tries.front().atp != c.atp)
                    groups.push_back({a.input, {}});
                groups.back().tries.push_back(c);
            }
        } catch (const QuotaInfeasible &) {
        }
        per_seed.push_back(std::move(groups));
    }
    std::vector<Group> out;
    for (size_t round = 0;; ++round) {
        bool any = false;
        for (const auto &g : per_seed)
            if (round < g.size()) {
                out.push_back(g[round]);
                any = true;
            }
        if (!any)
            break;
    }
    return out;
}

struct Trial {
    bool ok = false;
    std::string reason;
    PlannedBug plan;
    TriggerInput trigger;
};

class Trials {
public:
    Trials(const Fixture &fx, const RunConfig &cfg, const std::vector<SeedAnalysis> &seeds, const heap::CaseTable &cases)
        : fx_(fx), cfg_(cfg), seeds_(seeds), cases_(cases)
    {
        for (const auto &in : fx.inputs)
            expected_.push_back(clean_run(fx.program, in, cfg.limits));
        synth_.stages = cfg.stages;
        synth_.dataflow_depth = cfg.dataflow_depth;
        synth_.crash_marker = cfg.crash_marker;
        synth_.seed = cfg.seed;
    }

    const std::vector<CleanRun> &expected() const { return expected_; }
    const SynthConfig &synth_config() const { return synth_; }

    PlannedBug plan(const BugCandidate &c, uint32_t id, const std::set<uint32_t> &magics) const
    {
        const SeedAnalysis &a = seeds_.at(c.seed_input);
        PlannedBug pb;
        pb.id = id;
        pb.candidate = c;
        pb.trigger = a.scan.accepted.at(c.trigger);
        if (c.attack)
            pb.attack = a.scan.accepted.at(*c.attack);
        pb.atp = a.atps.at(c.atp);
        if (pb.attack && c.type != BugType::UnusedStack)
            pb.stage_path = stage_anchor_candidates(a.trace, *pb.attack, pb.atp);
        pb.magic = choose_magic(fx_.inputs, detail::mix_seed(cfg_.seed, id), magics);
        return pb;
    }

    Trial run(const BugCandidate &c, uint32_t id, const std::set<uint32_t> &magics) const
    {
        Trial t;
        const SeedAnalysis &a = seeds_.at(c.seed_input);
        try {
            t.plan = plan(c, id, magics);
            t.trigger = make_trigger_input(fx_.program, fx_.inputs[c.seed_input], t.plan, a.trace, cfg_.limits);
        } catch (const BytesNotIndependent &) {
            t.reason = "bytes-not-independent";
            return t;
        }
        Synthesis syn;
        try {
            syn = synthesize(fx_.program, {t.plan}, synth_);
        } catch (const NotEnoughAnchors &) {
            t.reason = "not-enough-anchors";
            return t;
        } catch (const std::exception &e) {
            t.reason = std::string("synthesis: ") + e.what();
            return t;
        }
        CleanResult clean = validate_clean(expected_, syn.transformed, fx_.inputs, cfg_.limits);
        if (!clean.equivalent()) {
            t.reason = "clean-divergence";
            return t;
        }
        ValidationInputs vin;
        vin.transformed = &syn.transformed;
        vin.specs = &syn.specs;
        std::vector<TriggerInput> triggers = {t.trigger};
        vin.triggers = &triggers;
        vin.clean = &fx_.inputs;
        vin.cases = &cases_;
        vin.limits = cfg_.limits;
        vin.constraint_samples = cfg_.constraint_samples;
        BugValidation v = validate_bug(vin, 0);
        if (!v.validated) {
            t.reason = v.reason;
            return t;
        }
        t.ok = true;
        return t;
    }

private:
    const Fixture &fx_;
    const RunConfig &cfg_;
    const std::vector<SeedAnalysis> &seeds_;
    const heap::CaseTable &cases_;
    std::vector<CleanRun> expected_;
    SynthConfig synth_;
};

bool roundtrips(const Program &p)
{
    std::string once = print(p);
    Program again = parse(once, p.file);
    return print(again) == once && same_structure(p, again);
}

json analysis_json(const Fixture &fx, const std::vector<SeedAnalysis> &seeds)
{
    json out = json::array();
    for (const auto &a : seeds) {
        std::map<std::string, size_t> rejected;
        for (const auto &r : a.scan.rejected)
            ++rejected[r.reason];
        size_t stack = 0, heap = 0, string_offset = 0, trigger = 0;
        for (const auto &p : a.atps)
            (p.kind == AtpKind::StackFrameSite ? stack : heap)++;
        for (const auto &d : a.scan.accepted) {
            string_offset += d.string_offset;
            trigger += d.trigger_capable;
        }
        out.push_back({{"input", fx.input_names[a.input]},
                       {"events", a.trace.events.size()},
                       {"duas", a.scan.accepted.size()},
                       {"trigger_capable", trigger},
                       {"string_offset", string_offset},
                       {"rejected", rejected},
                       {"attack_points", {{"stack", stack}, {"heap", heap}}}});
    }
    return out;
}

} // namespace

bool InjectResult::all_requested_validated(const Quotas &q) const
{
    if (!clean.equivalent() || !roundtrip)
        return false;
    for (const auto &v : validation)
        if (!v.validated)
            return false;
    for (BugType t : {BugType::OCStack, BugType::OCHeap, BugType::UnusedStack}) {
        auto it = placed.find(t);
        if ((it == placed.end() ? 0 : it->second) < q.of(t))
            return false;
    }
    return true;
}

InjectResult inject(const Fixture &fx, const RunConfig &cfg)
{
    auto seeds = analyze(fx, cfg);
    const std::vector<BugType> types = {BugType::OCStack, BugType::OCHeap, BugType::UnusedStack};

    std::map<BugType, std::vector<Group>> groups;
    for (BugType t : types) {
        if (cfg.quotas.of(t) == 0)
            continue;
        groups[t] = candidate_groups(seeds, t, cfg, cfg.retries);
        std::set<NodeId> nodes;
        for (const auto &g : groups[t])
            nodes.insert(seeds[g.input].atps[g.tries.front().atp].anchor);
        if (nodes.size() < cfg.quotas.of(t))
            throw QuotaInfeasible(t, nodes.size());
    }

    heap::CaseTable cases;
    if (cfg.quotas.oc_heap > 0)
        cases = heap::check_corruption_cases(heap::OverflowValues{}, cfg.heap_depth);

    Trials trials(fx, cfg, seeds, cases);
    InjectResult res;
    std::set<NodeId> used;
    std::set<uint32_t> magics;
    uint32_t next_id = 1;
    for (BugType t : types) {
        uint32_t want = cfg.quotas.of(t);
        uint32_t &placed = res.placed[t];
        for (const auto &g : groups[t]) {
            if (placed >= want)
                break;
            const AttackPoint &atp = seeds[g.input].atps[g.tries.front().atp];
            if (used.count(atp.anchor))
                continue;
            for (size_t k = 0; k < g.tries.size(); ++k) {
                Trial tr = trials.run(g.tries[k], next_id, magics);
                res.attempts.push_back({t, g.input, atp.anchor, atp.function, static_cast<uint32_t>(k + 1), tr.ok, tr.reason});
                if (!tr.ok)
                    continue;
                res.plans.push_back(tr.plan);
                res.triggers.push_back(tr.trigger);
                magics.insert(tr.plan.magic);
                used.insert(atp.anchor);
                ++placed;
                ++next_id;
                break;
            }
        }
    }

    // All accepted bugs together.
    res.synthesis = synthesize(fx.program, res.plans, trials.synth_config());
    res.clean = validate_clean(trials.expected(), res.synthesis.transformed, fx.inputs, cfg.limits);
    res.roundtrip = roundtrips(res.synthesis.transformed);
    ValidationInputs vin;
    vin.transformed = &res.synthesis.transformed;
    vin.specs = &res.synthesis.specs;
    vin.triggers = &res.triggers;
    vin.clean = &fx.inputs;
    vin.cases = &cases;
    vin.limits = cfg.limits;
    vin.constraint_samples = cfg.constraint_samples;
    res.validation = validate_bugs(vin);

    // Report.
    json &r = res.report;
    r["schema_version"] = kReportSchemaVersion;
    r["generated_at"] = nullptr;
    r["command"] = "inject";
    r["program"] = {{"source", fx.source_path}, {"file", fx.program.file}};
    r["inputs"] = fx.input_names;
    r["config"] = config_to_json(cfg);
    r["analysis"] = analysis_json(fx, seeds);

    json bugs = json::array();
    for (size_t i = 0; i < res.synthesis.specs.size(); ++i) {
        json b = spec_json(res.synthesis.specs[i]);
        b["trigger_input"] = {{"file", "bug_" + std::to_string(res.triggers[i].bug_id) + ".bin"},
                              {"modified", res.triggers[i].modified}};
        b["validation"] = validation_json(res.validation[i]);
        bugs.push_back(b);
    }
    r["bugs"] = bugs;

    json attempts = json::array();
    std::map<std::string, size_t> reasons;
    size_t ok = 0;
    for (const auto &a : res.attempts) {
        attempts.push_back({{"type", to_string(a.type)}, {"input", fx.input_names[a.input]}, {"attack_point", a.atp},
                            {"function", a.function}, {"try", a.try_index}, {"ok", a.ok}, {"reason", a.reason}});
        ok += a.ok;
        if (!a.ok)
            ++reasons[a.reason];
    }
    r["attempts"] = attempts;
    r["failure_reasons"] = reasons;

    json counts = json::object();
    for (BugType t : types) {
        size_t attempted = 0, validated = 0;
        for (const auto &a : res.attempts)
            attempted += a.type == t;
        for (size_t i = 0; i < res.validation.size(); ++i)
            validated += res.synthesis.specs[i].candidate.type == t && res.validation[i].validated;
        counts[to_string(t)] = {{"requested", cfg.quotas.of(t)},
                                {"attempted", attempted},
                                {"placed", res.placed[t]},
                                {"validated", validated}};
    }
    r["counts"] = counts;

    json divergences = json::array();
    for (const auto &d : res.clean.divergences)
        divergences.push_back({{"input", fx.input_names[d.input]}, {"offset", d.offset}, {"note", d.note}});
    r["validation"] = {
        {"clean", {{"inputs", res.clean.inputs}, {"equivalent", res.clean.equivalent()}, {"divergences", divergences}}},
        {"roundtrip", res.roundtrip},
        {"attempts", res.attempts.size()},
        {"attempt_success_rate", res.attempts.empty() ? 0.0 : double(ok) / double(res.attempts.size())},
        {"all_requested_validated", res.all_requested_validated(cfg.quotas)},
    };
    if (cfg.quotas.oc_heap > 0)
        r["heap_case_table"] = case_table_json(cases, false);
    return res;
}

SurveyResult survey(const Fixture &fx, const RunConfig &cfg, size_t n, uint32_t retries)
{
    auto seeds = analyze(fx, cfg);
    heap::CaseTable cases = heap::check_corruption_cases(heap::OverflowValues{}, cfg.heap_depth);

    // Stack sites get overconstrained stack bugs, heap sites heap bugs.
    std::vector<std::pair<BugType, Group>> pool;
    std::set<NodeId> seen;
    for (BugType t : {BugType::OCStack, BugType::OCHeap})
        for (auto &g : candidate_groups(seeds, t, cfg, retries)) {
            NodeId node = seeds[g.input].atps[g.tries.front().atp].anchor;
            if (seen.insert(node).second)
                pool.emplace_back(t, std::move(g));
        }
    if (pool.size() < n)
        throw QuotaInfeasible(BugType::OCStack, pool.size());
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, 0x7375727665));
    detail::seeded_shuffle(pool, rng);
    pool.resize(n);

    Trials trials(fx, cfg, seeds, cases);
    SurveyResult res;
    json sites = json::array();
    uint32_t id = 1;
    for (const auto &[type, g] : pool) {
        std::optional<uint32_t> first;
        std::vector<std::string> reasons;
        for (size_t k = 0; k < g.tries.size() && k < retries; ++k) {
            Trial tr = trials.run(g.tries[k], id, {});
            reasons.push_back(tr.ok ? "ok" : tr.reason);
            if (tr.ok) {
                first = static_cast<uint32_t>(k + 1);
                break;
            }
        }
        ++id;
        const AttackPoint &atp = seeds[g.input].atps[g.tries.front().atp];
        json s = {{"attack_point", atp.anchor}, {"function", atp.function}, {"type", to_string(type)},
                  {"input", fx.input_names[g.input]}, {"tries", reasons}};
        s["first_success"] = first ? json(*first) : json(nullptr);
        sites.push_back(s);
        res.first_success.push_back(first);
    }
    res.curve = success_curve(res.first_success, retries);
    res.report = {{"schema_version", kReportSchemaVersion}, {"generated_at", nullptr}, {"command", "survey"},
                  {"program", {{"source", fx.source_path}, {"file", fx.program.file}}},
                  {"config", config_to_json(cfg)}, {"attack_points", n}, {"retries", retries},
                  {"sites", sites}, {"curve", res.curve}};
    return res;
}

CoverageSummary coverage(const Fixture &fx, const RunConfig &cfg)
{
    auto seeds = analyze(fx, cfg);
    CoverageSummary c;
    for (const auto &item : fx.program.items)
        if (const auto *f = std::get_if<Function>(&item); f && f->body)
            c.functions.push_back(f->name);
    std::set<std::string> covered, after, atp_fns;
    for (const auto &a : seeds) {
        size_t first = a.trace.first_input_read();
        for (size_t i = 0; i < a.trace.events.size(); ++i) {
            if (const auto *s = std::get_if<StmtEnter>(&a.trace.events[i])) {
                covered.insert(s->function);
                if (i > first)
                    after.insert(s->function);
            } else if (const auto *ce = std::get_if<CallEnter>(&a.trace.events[i])) {
                covered.insert(ce->layout.function);
                if (i > first)
                    after.insert(ce->layout.function);
            }
        }
        for (const auto &p : a.atps)
            atp_fns.insert(p.function);
    }
    for (const auto &f : c.functions) {
        if (covered.count(f))
            c.covered.push_back(f);
        if (after.count(f))
            c.covered_after_input.push_back(f);
        if (atp_fns.count(f))
            c.atp_functions.push_back(f);
    }
    double total = static_cast<double>(c.functions.size());
    if (total > 0) {
        c.coverage = c.covered.size() / total;
        c.atp_coverage = c.atp_functions.size() / total;
    }
    if (!c.covered.empty())
        c.adjusted_coverage = double(c.atp_functions.size()) / double(c.covered_after_input.size() ? c.covered_after_input.size() : 1);
    c.report = {{"schema_version", kReportSchemaVersion}, {"generated_at", nullptr}, {"command", "coverage"},
                {"program", {{"source", fx.source_path}, {"file", fx.program.file}}},
                {"functions", c.functions.size()}, {"covered", c.covered}, {"covered_after_input", c.covered_after_input},
                {"atp_functions", c.atp_functions}, {"function_coverage", c.coverage},
                {"atp_function_coverage", c.atp_coverage}, {"adjusted_coverage", c.adjusted_coverage},
                {"files", json::array({{{"file", fx.program.file}, {"functions", c.functions.size()},
                                        {"covered", c.covered.size()}, {"atp_functions", c.atp_functions.size()}}})}};
    return c;
}

} // namespace chaff

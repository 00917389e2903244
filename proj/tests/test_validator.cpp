#include "doctest.h"

#include <algorithm>
#include <functional>
#include <set>

#include "chaff/frontend.hpp"
#include "chaff/validator.hpp"

using namespace chaff;

namespace {

const char *kProgram = R"(struct msg {
    int a;
    int b;
    int c;
    int d;
};

int total;

int leafy(struct msg *q, int n)
{
    int x;
    int y;
    x = q->a;
    y = q->b;
    total = total + n;
    print_int(n);
    putchar(10);
    n = n + 1;
    print_int(y & 7);
    return n;
}

int work(struct msg *q)
{
    int k;
    int r;
    k = 3;
    r = leafy(q, k);
    r = r + k;
    print_int(r);
    return r;
}

int main(void)
{
    struct msg m;
    char *h;
    int z;
    read_input((char *)&m, 16);
    z = work(&m);
    h = malloc(8);
    free(h);
    print_int(z + total);
    return 0;
}
)";

const std::string kSeed("\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\x0b\x0c\x0d\x0e\x0f\x10", 16);
const std::vector<std::string> kCorpus = {kSeed, std::string(16, 'z'), std::string("\x00\x00\x00\x00", 4)};

struct Fx {
    Program program = parse(kProgram);
    Trace trace = run(program, kSeed).trace;
    DuaScan scan = find_duas(trace);
    std::vector<AttackPoint> atps = find_attack_points(trace, program);
    heap::CaseTable cases = heap::check_corruption_cases(heap::OverflowValues{}, 2);

    size_t dua(const std::string &path) const
    {
        for (size_t i = 0; i < scan.accepted.size(); ++i)
            if (scan.accepted[i].path.text() == path)
                return i;
        FAIL("no DUA " << path);
        return 0;
    }

    PlannedBug plan(uint32_t id, BugType type, StackTarget target, uint32_t magic, size_t nth = 1) const
    {
        size_t trig = dua("q->a"), atk = dua("q->b");
        AtpKind kind = type == BugType::OCHeap ? AtpKind::HeapAdjacentSite : AtpKind::StackFrameSite;
        PlannedBug pb;
        for (size_t i = 0; i < atps.size(); ++i)
            if (atps[i].function == "leafy" && atps[i].kind == kind && dua_reaches(scan.accepted[atk], atps[i]) &&
                nth-- == 0) {
                pb.candidate.atp = i;
                pb.atp = atps[i];
                break;
            }
        REQUIRE(pb.atp.anchor != kNoNode);
        pb.id = id;
        pb.candidate.type = type;
        pb.candidate.target = target;
        pb.candidate.trigger = trig;
        pb.candidate.attack = atk;
        pb.trigger = scan.accepted[trig];
        pb.attack = scan.accepted[atk];
        if (type != BugType::UnusedStack)
            pb.stage_path = stage_anchor_candidates(trace, *pb.attack, pb.atp);
        pb.magic = magic;
        return pb;
    }
};

SynthConfig cfg(uint32_t stages = 1)
{
    SynthConfig c;
    c.stages = stages;
    return c;
}

/// Rewrite every `lava_i_<id> < N` loop bound in place.
void stretch_loops(Program &p, uint32_t id, int64_t extra)
{
    std::string name = "lava_i_" + std::to_string(id);
    std::function<void(Expr &)> expr = [&](Expr &e) {
        if (e.kind == ExprKind::Binary && static_cast<BinaryOp>(e.op) == BinaryOp::Lt && e.kids.size() == 2 &&
            e.kids[0].kind == ExprKind::Ident && e.kids[0].text == name && e.kids[1].kind == ExprKind::IntLit)
            e.kids[1].value += extra;
        for (auto &k : e.kids)
            expr(k);
    };
    std::function<void(Stmt &)> stmt = [&](Stmt &s) {
        for (auto &e : s.exprs)
            expr(e);
        for (auto &b : s.body)
            stmt(b);
    };
    for (auto &item : p.items)
        if (auto *f = std::get_if<Function>(&item); f && f->body)
            stmt(*f->body);
}

struct Built {
    Synthesis syn;
    std::vector<TriggerInput> triggers;
};

Built build_bugs(const Fx &fx, const std::vector<PlannedBug> &plans, SynthConfig c = cfg())
{
    Built b;
    b.syn = synthesize(fx.program, plans, c);
    for (const auto &pb : plans)
        b.triggers.push_back(make_trigger_input(fx.program, kSeed, pb, fx.trace));
    return b;
}

ValidationInputs inputs_for(const Fx &fx, const Built &b)
{
    ValidationInputs in;
    in.transformed = &b.syn.transformed;
    in.specs = &b.syn.specs;
    in.triggers = &b.triggers;
    in.clean = &kCorpus;
    in.cases = &fx.cases;
    in.constraint_samples = 2000;
    return in;
}

} // namespace

TEST_CASE("an untouched program is equivalent to itself")
{
    Program p = parse(kProgram);
    CleanResult r = validate_clean(p, p, kCorpus);
    CHECK(r.inputs == kCorpus.size());
    CHECK(r.equivalent());
}

TEST_CASE("a magic value that occurs in the corpus shows up as a divergence")
{
    Fx fx;
    // bytes 0..3 of the seed, little-endian: the clean run itself triggers
    PlannedBug pb = fx.plan(1, BugType::OCStack, StackTarget::ReturnAddress, 0x04030201u);
    Synthesis syn = synthesize(fx.program, {pb}, cfg());
    CleanResult r = validate_clean(fx.program, syn.transformed, kCorpus);
    REQUIRE(r.divergences.size() == 1);
    CHECK(r.divergences[0].input == 0);

    PlannedBug good = fx.plan(1, BugType::OCStack, StackTarget::ReturnAddress, choose_magic(kCorpus, 1));
    CHECK(validate_clean(fx.program, synthesize(fx.program, {good}, cfg()).transformed, kCorpus).equivalent());
}

TEST_CASE("classification covers every fault kind")
{
    const std::set<std::string> labels = {"EXPLOITABLE_MIMIC", "PROBABLY_EXPLOITABLE_MIMIC", "ABORT"};
    for (FaultKind k : {FaultKind::WriteUnmapped, FaultKind::ReadUnmapped, FaultKind::PcUnmapped,
                        FaultKind::AllocatorAbort, FaultKind::DivZeroMarker}) {
        FaultReport f;
        f.kind = k;
        Classification c = classify(f);
        CHECK(labels.count(c.label) == 1);
        CHECK(!c.rationale.empty());
    }
    FaultReport pc;
    pc.kind = FaultKind::PcUnmapped;
    CHECK(classify(pc).label == "PROBABLY_EXPLOITABLE_MIMIC");
    FaultReport heap;
    heap.kind = FaultKind::AllocatorAbort;
    heap.assertion = "unlink-corruption";
    CHECK(classify(heap).label == "EXPLOITABLE_MIMIC");
    FaultReport marker;
    marker.kind = FaultKind::DivZeroMarker;
    CHECK(classify(marker).label == "ABORT");
}

TEST_CASE("well-formed bugs of every type carry a complete proof bundle")
{
    Fx fx;
    std::vector<PlannedBug> plans = {
        fx.plan(1, BugType::OCStack, StackTarget::ReturnAddress, 0xA1B2C3D4u, 1),
        fx.plan(2, BugType::OCHeap, StackTarget::ReturnAddress, 0xA1B2C3D5u, 1),
        fx.plan(3, BugType::UnusedStack, StackTarget::ReturnAddress, 0xA1B2C3D6u, 1),
    };
    // one at a time: each trigger's fault must not be masked by another bug
    for (const auto &pb : plans) {
        Built b = build_bugs(fx, {pb});
        BugValidation v = validate_bug(inputs_for(fx, b), 0);
        INFO(to_string(pb.candidate.type) << ": " << v.reason);
        CHECK(v.validated);
        REQUIRE(v.proofs);
        CHECK(v.proofs->complete(pb.candidate.type));
        CHECK(v.proofs->write_audit);
        if (pb.candidate.type == BugType::UnusedStack) {
            CHECK(v.proofs->taint_non_escape.value_or(false));
            CHECK(v.proofs->taint_runs == 1 + kCorpus.size());
            CHECK(!v.classification);
        } else {
            REQUIRE(v.proofs->constraint);
            CHECK(v.proofs->constraint->sound());
            CHECK(v.classification);
        }
        if (pb.candidate.type == BugType::OCHeap) {
            REQUIRE(v.proofs->heap);
            CHECK(v.proofs->heap->escaped == 0);
            CHECK(v.classification->label == "EXPLOITABLE_MIMIC");
        }
    }
}

TEST_CASE("overflow stretched past the return address: write-audit counterexample")
{
    Fx fx;
    PlannedBug pb = fx.plan(1, BugType::OCStack, StackTarget::ReturnAddress, 0xA1B2C3D4u);
    Built b = build_bugs(fx, {pb});
    stretch_loops(b.syn.transformed, 1, 8);
    BugValidation v = validate_bug(inputs_for(fx, b), 0);
    CHECK(!v.validated);
    REQUIRE(v.counterexample);
    CHECK(v.counterexample->kind() == "write-audit");
}

TEST_CASE("masks that do not AND to zero: constraint counterexample with witness bytes")
{
    Fx fx;
    PlannedBug pb = fx.plan(1, BugType::OCStack, StackTarget::ReturnAddress, 0xA1B2C3D4u);
    Built b = build_bugs(fx, {pb});
    b.syn.specs[0].chain.stages[0].mask = 0xFFFFFFFFu;
    BugValidation v = validate_bug(inputs_for(fx, b), 0);
    CHECK(!v.validated);
    REQUIRE(v.counterexample);
    CHECK(v.counterexample->kind() == "constraint");
    CHECK(v.counterexample->witness().find("attack bytes") != std::string::npos);
}

TEST_CASE("dummy bytes reaching output: taint counterexample")
{
    Fx fx;
    PlannedBug pb = fx.plan(1, BugType::UnusedStack, StackTarget::ReturnAddress, 0xA1B2C3D4u);
    Built b = build_bugs(fx, {pb});
    // leak the overwritten dummy right after the attack point
    EditScript leak;
    leak.edits.push_back(InsertStatement{
        pb.atp.anchor, InsertPos::Before,
        build::expr_stmt(build::call("print_int", {build::index(build::ident("lava_d1_1"), build::int_lit(0))}))});
    b.syn.transformed = apply_edits(b.syn.transformed, leak);
    BugValidation v = validate_bug(inputs_for(fx, b), 0);
    CHECK(!v.validated);
    REQUIRE(v.counterexample);
    CHECK(v.counterexample->kind() == "taint");
}

TEST_CASE("parallel validation matches the serial reference")
{
    Fx fx;
    std::vector<PlannedBug> plans;
    for (uint32_t i = 0; i < 3; ++i)
        plans.push_back(fx.plan(i + 1, BugType::UnusedStack, StackTarget::ReturnAddress, 0xBEEF0000u + i, i + 1));
    Built b = build_bugs(fx, plans);
    auto in = inputs_for(fx, b);
    auto par = validate_bugs(in);
    auto ser = validate_bugs_serial(in);
    REQUIRE(par.size() == ser.size());
    for (size_t i = 0; i < par.size(); ++i) {
        CHECK(par[i].id == ser[i].id);
        CHECK(par[i].validated == ser[i].validated);
        CHECK(par[i].reason == ser[i].reason);
        CHECK(par[i].fault.has_value() == ser[i].fault.has_value());
    }
}

TEST_CASE("success curve is cumulative and ends at the overall success rate")
{
    std::vector<std::optional<uint32_t>> first = {1, 3, std::nullopt, 2, 1};
    auto c = success_curve(first, 4);
    REQUIRE(c.size() == 4);
    CHECK(c[0] == doctest::Approx(0.4));
    CHECK(c[1] == doctest::Approx(0.6));
    CHECK(c[2] == doctest::Approx(0.8));
    CHECK(c[3] == doctest::Approx(0.8));
    CHECK(success_curve(first, 1).size() == 1);
    CHECK(std::is_sorted(c.begin(), c.end()));
}

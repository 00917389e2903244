#include "doctest.h"

#include <algorithm>
#include <cstring>

#include "chaff/frontend.hpp"
#include "chaff/synth.hpp"
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

const std::string kSeed = std::string("\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\x0b\x0c\x0d\x0e\x0f\x10", 16);

struct Setup {
    Program program;
    Trace trace;
    DuaScan scan;
    std::vector<AttackPoint> atps;

    explicit Setup(const char *src = kProgram, const std::string &input = kSeed, Thresholds th = {})
    {
        program = parse(src);
        trace = run(program, input).trace;
        scan = find_duas(trace, th);
        atps = find_attack_points(trace, program);
    }

    size_t dua(const std::string &path) const
    {
        for (size_t i = 0; i < scan.accepted.size(); ++i)
            if (scan.accepted[i].path.text() == path)
                return i;
        FAIL("no DUA " << path);
        return 0;
    }

    /// First attack point in `fn` of `kind` whose statement comes after `dua`'s siphon.
    size_t atp(const std::string &fn, AtpKind kind, size_t after_dua, size_t skip = 0) const
    {
        for (size_t i = 0; i < atps.size(); ++i)
            if (atps[i].function == fn && atps[i].kind == kind && dua_reaches(scan.accepted[after_dua], atps[i])) {
                if (skip == 0)
                    return i;
                --skip;
            }
        FAIL("no attack point in " << fn);
        return 0;
    }

    PlannedBug plan(uint32_t id, BugType type, size_t trig, std::optional<size_t> atk, size_t at,
                    StackTarget target = StackTarget::ReturnAddress, uint32_t magic = 0x5A17C0DE) const
    {
        PlannedBug pb;
        pb.id = id;
        pb.candidate.type = type;
        pb.candidate.target = target;
        pb.candidate.trigger = trig;
        pb.candidate.attack = atk;
        pb.candidate.atp = at;
        pb.trigger = scan.accepted[trig];
        if (atk)
            pb.attack = scan.accepted[*atk];
        pb.atp = atps[at];
        if (atk && type != BugType::UnusedStack)
            pb.stage_path = stage_anchor_candidates(trace, *pb.attack, pb.atp);
        pb.magic = magic;
        return pb;
    }
};

SynthConfig one_stage()
{
    SynthConfig c;
    c.stages = 1;
    return c;
}

bool occurs(const std::string &s, uint32_t v)
{
    for (size_t i = 0; i + 4 <= s.size(); ++i) {
        uint32_t w;
        std::memcpy(&w, s.data() + i, 4);
        if (w == v)
            return true;
    }
    return false;
}

} // namespace

TEST_CASE("magic value avoids every 4-byte window of the corpus")
{
    std::vector<std::string> corpus = {"AAAA"};
    uint32_t m = choose_magic(corpus, 7);
    CHECK(m != 0x41414141u);
    CHECK(m != 0u);
    CHECK(m == choose_magic(corpus, 7));
    CHECK(m == 0x3B2CDBB6u);   // documented value for seed 7

    std::vector<std::string> noisy = {kSeed, std::string(64, '\xff'), "hello world, hello magic"};
    for (uint64_t seed = 1; seed < 50; ++seed) {
        uint32_t v = choose_magic(noisy, seed);
        for (const auto &s : noisy)
            CHECK(!occurs(s, v));
    }
    CHECK(choose_magic({""}, 1) != 0u);
    std::set<uint32_t> avoid = {m};
    CHECK(choose_magic(corpus, 7, avoid) != m);
}

TEST_CASE("trigger input: the trigger DUA's four input bytes carry the magic")
{
    Setup s;
    size_t a = s.dua("q->a");
    size_t at = s.atp("leafy", AtpKind::StackFrameSite, a);
    PlannedBug pb = s.plan(1, BugType::UnusedStack, a, std::nullopt, at);
    TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);
    CHECK(t.bytes.size() == kSeed.size());
    uint32_t got;
    std::memcpy(&got, t.bytes.data(), 4);
    CHECK(got == pb.magic);
    CHECK(t.bytes.substr(4) == kSeed.substr(4));
    CHECK(t.modified == std::vector<uint32_t>{0, 1, 2, 3});
}

TEST_CASE("return-address bug: on the trigger the function returns to address 0")
{
    Setup s;
    size_t trig = s.dua("q->a");
    size_t atk = s.dua("q->b");
    size_t at = s.atp("leafy", AtpKind::StackFrameSite, atk, 1);
    PlannedBug pb = s.plan(1, BugType::OCStack, trig, atk, at, StackTarget::ReturnAddress);
    Synthesis syn = synthesize(s.program, {pb}, one_stage());
    const BugSpec &spec = syn.specs.at(0);
    CHECK(spec.final_value == 0u);
    CHECK(spec.overflow_length <= spec.target_distance + 4);

    TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);
    TriggerOutcome o = validate_trigger(syn.transformed, t, spec);
    CHECK(o.ok);
    REQUIRE(o.fault);
    CHECK(o.fault->kind == FaultKind::PcUnmapped);
    CHECK(o.fault->address == 0u);
    CHECK(o.fault->bug_id == 1u);
    CHECK(classify(*o.fault).label == "PROBABLY_EXPLOITABLE_MIMIC");

    // the clean input still behaves
    CHECK(validate_clean(s.program, syn.transformed, {kSeed}).equivalent());
}

TEST_CASE("saved frame pointer bug: the caller's next local access faults near NULL")
{
    Setup s;
    size_t trig = s.dua("q->a");
    size_t atk = s.dua("q->b");
    size_t at = s.atp("leafy", AtpKind::StackFrameSite, atk, 1);
    REQUIRE(s.atps[at].caller_touches_locals);
    PlannedBug pb = s.plan(2, BugType::OCStack, trig, atk, at, StackTarget::SavedFP);
    Synthesis syn = synthesize(s.program, {pb}, one_stage());
    TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);
    TriggerOutcome o = validate_trigger(syn.transformed, t, syn.specs[0]);
    CHECK(o.ok);
    REQUIRE(o.fault);
    CHECK((o.fault->kind == FaultKind::ReadUnmapped || o.fault->kind == FaultKind::WriteUnmapped));
    CHECK(o.fault->address < kUnmappedLimit);
    CHECK(o.fault->function == "work");
    CHECK(classify(*o.fault).label == "EXPLOITABLE_MIMIC");
}

TEST_CASE("saved frame pointer bug whose caller returns straight away never faults")
{
    const char *src = R"(int leaf(int *p)
{
    int x;
    int y;
    x = p[0];
    y = p[1];
    print_int(y & 3);
    print_int(x & 3);
    return 1;
}

int mid(int *p)
{
    return leaf(p);
}

int main(void)
{
    int buf[4];
    int r;
    read_input((char *)buf, 16);
    r = mid(buf);
    print_int(r);
    return 0;
}
)";
    Setup s(src);
    size_t trig = s.dua("p[0]");
    size_t atk = s.dua("p[1]");
    size_t at = s.atp("leaf", AtpKind::StackFrameSite, atk, 1);
    CHECK(!s.atps[at].caller_touches_locals);
    PlannedBug pb = s.plan(1, BugType::OCStack, trig, atk, at, StackTarget::SavedFP);
    Synthesis syn = synthesize(s.program, {pb}, one_stage());
    TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);
    TriggerOutcome o = validate_trigger(syn.transformed, t, syn.specs[0]);
    CHECK(!o.ok);
    CHECK(o.reason == "fp-never-dereferenced");
    CHECK(!o.fault);
}

TEST_CASE("heap bug: the allocator aborts at a later call, not at the overflow")
{
    Setup s;
    size_t trig = s.dua("q->a");
    size_t atk = s.dua("q->b");
    size_t at = s.atp("leafy", AtpKind::HeapAdjacentSite, atk, 1);
    PlannedBug pb = s.plan(1, BugType::OCHeap, trig, atk, at);
    Synthesis syn = synthesize(s.program, {pb}, one_stage());
    const BugSpec &spec = syn.specs[0];
    CHECK(spec.heap_values.fake_size == 16u);
    CHECK(spec.heap_values.prev_size == 12u);
    CHECK(spec.heap_values.size == 0u);
    CHECK(spec.alloc_size == 24u);

    TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);
    // the attack bytes are filled with 0xFF: the chain must still produce 0
    CHECK(t.bytes.substr(4, 4) == std::string(4, '\xff'));
    TriggerOutcome o = validate_trigger(syn.transformed, t, spec);
    CHECK(o.ok);
    REQUIRE(o.fault);
    CHECK(o.fault->kind == FaultKind::AllocatorAbort);
    CHECK(o.fault->function == "main");
    // the faulting call is original code
    CHECK(find_stmt(s.program, o.fault->node) != nullptr);
    CHECK(classify(*o.fault).label == "EXPLOITABLE_MIMIC");
}

TEST_CASE("unused-stack bug: overwrites only the dummies, no crash unless the marker is on")
{
    Setup s;
    size_t trig = s.dua("q->a");
    size_t at = s.atp("leafy", AtpKind::StackFrameSite, trig, 1);
    PlannedBug pb = s.plan(1, BugType::UnusedStack, trig, s.dua("q->b"), at);
    Synthesis syn = synthesize(s.program, {pb}, SynthConfig{});
    const BugSpec &spec = syn.specs[0];
    TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);

    RunOptions audit;
    audit.audit = true;
    RunResult r = run(syn.transformed, t.bytes, audit);
    CHECK(!r.fault);
    size_t writes = 0;
    auto allowed = spec.allowed_objects();
    for (const auto &w : r.audit) {
        CHECK(w.bug_id == 1u);
        CHECK(std::find(allowed.begin(), allowed.end(), w.object) != allowed.end());
        CHECK(w.object != "leafy.lava_buf_1");
        writes += w.object.find("lava_d") != std::string::npos;
    }
    CHECK(writes == spec.overflow_length);
    TriggerOutcome o = validate_trigger(syn.transformed, t, spec);
    CHECK(o.ok);
    CHECK(o.reason == "no-crash-by-design");

    SynthConfig marker;
    marker.crash_marker = true;
    Synthesis with = synthesize(s.program, {pb}, marker);
    TriggerOutcome m = validate_trigger(with.transformed, t, with.specs[0]);
    CHECK(m.ok);
    REQUIRE(m.fault);
    CHECK(m.fault->kind == FaultKind::DivZeroMarker);
    CHECK(m.fault->function == "leafy");
    CHECK(classify(*m.fault).label == "ABORT");
}

TEST_CASE("trigger bytes that also steer an earlier branch: BytesNotIndependent")
{
    const char *src = R"(int main(void)
{
    char buf[8];
    int v;
    int w;
    read_input(buf, 8);
    if (buf[0] == 1) {
        print_int(1);
    }
    v = *(int *)buf;
    w = v;
    print_int(2);
    return 0;
}
)";
    Thresholds loose;
    loose.liveness_max = 10;
    std::string seed("\x01\x02\x03\x04\x05\x06\x07\x08", 8);
    Setup s(src, seed, loose);
    size_t trig = s.dua("v");
    CHECK(s.scan.accepted[trig].liveness[0] == 1u);
    size_t at = s.atps.size() - 1;   // the last statement, after the branch
    PlannedBug pb = s.plan(1, BugType::UnusedStack, trig, std::nullopt, at);
    CHECK_THROWS_AS(make_trigger_input(s.program, seed, pb, s.trace), BytesNotIndependent);
}

TEST_CASE("two bugs in one program: each trigger fires only its own bug")
{
    Setup s;
    size_t a = s.dua("q->a");
    size_t b = s.dua("q->b");
    PlannedBug one = s.plan(1, BugType::UnusedStack, a, std::nullopt, s.atp("leafy", AtpKind::StackFrameSite, a, 1),
                            StackTarget::ReturnAddress, 0x11223344);
    PlannedBug two = s.plan(2, BugType::UnusedStack, b, std::nullopt, s.atp("leafy", AtpKind::StackFrameSite, b, 1),
                            StackTarget::ReturnAddress, 0x55667788);
    Synthesis syn = synthesize(s.program, {one, two}, SynthConfig{});
    REQUIRE(syn.specs.size() == 2);
    CHECK(validate_clean(s.program, syn.transformed, {kSeed}).equivalent());
    RunOptions audit;
    audit.audit = true;
    for (const auto &pb : {one, two}) {
        TriggerInput t = make_trigger_input(s.program, kSeed, pb, s.trace);
        RunResult r = run(syn.transformed, t.bytes, audit);
        REQUIRE(!r.audit.empty());
        for (const auto &w : r.audit)
            CHECK(w.bug_id == pb.id);
    }
    // round-trips through the printer
    std::string text = print(syn.transformed);
    CHECK(print(parse(text)) == text);
}

TEST_CASE("string-offset DUA siphon is guarded by strlen")
{
    const char *src = R"(int main(void)
{
    char buf[16];
    char *s;
    int c;
    int n;
    read_input(buf, 15);
    buf[15] = 0;
    s = buf;
    c = s[7];
    n = 0;
    print_int(c + n);
    return 0;
}
)";
    std::string seed = "abcdefghijklmno";
    Setup s(src, seed);
    size_t trig = s.dua("s[7]");
    REQUIRE(s.scan.accepted[trig].string_offset);
    PlannedBug pb = s.plan(1, BugType::UnusedStack, trig, std::nullopt, s.atps.size() - 1);
    // a one-byte DUA cannot carry a 4-byte magic, so only its siphon is checked
    Synthesis syn = synthesize(s.program, {pb}, SynthConfig{});
    std::string text = print(syn.transformed);
    CHECK(text.find("strlen(s) > 7") != std::string::npos);
    // with a short string the guard keeps the siphon from reading past the terminator
    std::string short_input("abc\0efghijklmno", 15);
    CHECK(validate_clean(s.program, syn.transformed, {seed, short_input}).equivalent());
}

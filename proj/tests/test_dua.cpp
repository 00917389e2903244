#include "doctest.h"

#include <algorithm>
#include <map>

#include "chaff/dua.hpp"
#include "chaff/frontend.hpp"

using namespace chaff;

namespace {

struct Analysed {
    Program program;
    Trace trace;
    DuaScan scan;
    std::vector<AttackPoint> atps;
};

Analysed analyse(const std::string &src, const std::string &input, Thresholds th = {})
{
    Analysed a;
    a.program = parse(src);
    a.trace = run(a.program, input).trace;
    a.scan = find_duas(a.trace, th);
    a.atps = find_attack_points(a.trace, a.program);
    return a;
}

const DuaRecord *accepted(const Analysed &a, const std::string &path)
{
    for (const auto &d : a.scan.accepted)
        if (d.path.text() == path)
            return &d;
    return nullptr;
}

const char *kGuarded = R"(struct hdr {
    int len;
    int kind;
};

int inspect(struct hdr *h, int mode)
{
    struct hdr *p;
    int x;
    int y;
    if (mode == 0) {
        p = h;
    }
    y = h->kind;
    if (mode == 0) {
        x = p->len;
        print_int(x);
    }
    print_int(y);
    return 0;
}

int main(void)
{
    char mode[4];
    struct hdr h;
    read_input(mode, 4);
    read_input((char *)&h, 8);
    inspect(&h, mode[0]);
    return 0;
}
)";

const char *kDirect = R"(int main(void)
{
    char buf[8];
    int v;
    int w;
    w = 3;
    read_input(buf, 8);
    v = *(int *)buf;
    print_int(w);
    return 0;
}
)";

} // namespace

TEST_CASE("pointer initialized only under a branch: its siphon is rejected")
{
    auto a = analyse(kGuarded, std::string("\0\0\0\0", 4) + "ABCDEFGH");
    bool rejected = std::any_of(a.scan.rejected.begin(), a.scan.rejected.end(), [](const DuaRejection &r) {
        return r.path.text() == "p->len" && r.reason == "uninitialized";
    });
    CHECK(rejected);
    CHECK(accepted(a, "p->len") == nullptr);
    // the unguarded field next to it is fine
    CHECK(accepted(a, "h->kind") != nullptr);
}

TEST_CASE("value read straight from input, never branched on: accepted with tcn 0, liveness 0")
{
    auto a = analyse(kDirect, "\x10\x11\x12\x13zzzz");
    const DuaRecord *v = accepted(a, "v");
    REQUIRE(v);
    CHECK(v->max_tcn == 0);
    CHECK(v->trigger_capable);
    CHECK(v->first_label() == 0);
    for (uint32_t l : v->liveness)
        CHECK(l == 0);
}

TEST_CASE("constant char offset from a string base: accepted with a strlen guard")
{
    const char *src = R"(int main(void)
{
    char buf[16];
    char *s;
    int c;
    read_input(buf, 15);
    buf[15] = 0;
    s = buf;
    c = s[7];
    print_int(c);
    return 0;
}
)";
    auto a = analyse(src, "abcdefghijklmno");
    const DuaRecord *d = accepted(a, "s[7]");
    REQUIRE(d);
    CHECK(d->string_offset);
    CHECK(d->offset == 7);
}

TEST_CASE("statements before the first input read are not attack points")
{
    auto a = analyse(kDirect, "abcdefgh");
    // `w = 3;` runs before read_input
    const Function *main_fn = a.program.find_function("main");
    REQUIRE(main_fn);
    NodeId before = main_fn->body->body[0].id;
    for (const auto &atp : a.atps) {
        CHECK(atp.anchor != before);
        CHECK(atp.trace_index > a.trace.first_input_read());
    }
    CHECK(!a.atps.empty());
}

TEST_CASE("a function reached through a pointer is flagged indirect")
{
    const char *src = R"(int twice(int v)
{
    int r;
    r = v * 2;
    return r;
}

int main(void)
{
    char buf[4];
    int (*fn)(int);
    int x;
    read_input(buf, 4);
    fn = twice;
    x = fn(buf[0]);
    print_int(x);
    return 0;
}
)";
    auto a = analyse(src, "\x05xyz");
    bool seen = false;
    for (const auto &atp : a.atps)
        if (atp.function == "twice") {
            seen = true;
            CHECK(atp.indirect_reachable);
        } else {
            CHECK(!atp.indirect_reachable);
        }
    CHECK(seen);
}

TEST_CASE("a DUA is never paired with an attack point that runs before its siphon")
{
    auto a = analyse(kDirect, "\x10\x11\x12\x13zzzz");
    PairPolicy pol;
    pol.quotas.unused_stack = 1;
    auto cands = pair_candidates(a.trace, a.scan.accepted, a.atps, pol);
    REQUIRE(!cands.empty());
    for (const auto &c : cands) {
        const DuaRecord &t = a.scan.accepted[c.trigger];
        const AttackPoint &p = a.atps[c.atp];
        CHECK(t.siphon_done <= p.trace_index);   // siphon code precedes ATP code at a shared anchor
        CHECK(dua_reaches(t, p));
    }
    // directly: an attack point earlier than the DUA does not reach
    for (const auto &d : a.scan.accepted)
        for (const auto &p : a.atps)
            if (p.trace_index < d.siphon_done)
                CHECK(!dua_reaches(d, p));
}

TEST_CASE("stack bugs requested where only heap sites exist: QuotaInfeasible")
{
    auto a = analyse(kDirect, "\x10\x11\x12\x13zzzz");
    std::vector<AttackPoint> heap_only;
    for (auto p : a.atps) {
        p.kind = AtpKind::HeapAdjacentSite;
        heap_only.push_back(p);
    }
    PairPolicy pol;
    pol.quotas.unused_stack = 1;
    CHECK_THROWS_AS(pair_candidates(a.trace, a.scan.accepted, heap_only, pol), QuotaInfeasible);
}

TEST_CASE("no attack points at all: QuotaInfeasible for every type")
{
    const char *src = "int main(void)\n{\n    char b[8];\n    return read_input(b, 8);\n}\n";
    auto a = analyse(src, "12345678");
    CHECK(a.atps.empty());
    for (BugType t : {BugType::OCStack, BugType::OCHeap, BugType::UnusedStack}) {
        PairPolicy pol;
        if (t == BugType::OCStack) pol.quotas.oc_stack = 1;
        if (t == BugType::OCHeap) pol.quotas.oc_heap = 1;
        if (t == BugType::UnusedStack) pol.quotas.unused_stack = 1;
        try {
            pair_candidates(a.trace, a.scan.accepted, a.atps, pol);
            FAIL("expected QuotaInfeasible");
        } catch (const QuotaInfeasible &e) {
            CHECK(e.type() == t);
            CHECK(e.available() == 0);
        }
    }
}

TEST_CASE("same seed, same candidates; the list is grouped by attack point")
{
    auto a = analyse(kGuarded, std::string("\0\0\0\0", 4) + "ABCDEFGH");
    PairPolicy pol;
    pol.quotas.oc_stack = 1;
    pol.quotas.unused_stack = 1;
    pol.seed = 1;
    auto x = pair_candidates(a.trace, a.scan.accepted, a.atps, pol);
    auto y = pair_candidates(a.trace, a.scan.accepted, a.atps, pol);
    REQUIRE(x.size() == y.size());
    for (size_t i = 0; i < x.size(); ++i) {
        CHECK(x[i].atp == y[i].atp);
        CHECK(x[i].trigger == y[i].trigger);
        CHECK(x[i].attack == y[i].attack);
        CHECK(x[i].target == y[i].target);
    }
    // each attack point's tries are contiguous and capped by the retry count
    std::map<std::pair<int, size_t>, size_t> runs;
    for (size_t i = 0; i < x.size(); ++i)
        if (i == 0 || x[i].atp != x[i - 1].atp || x[i].type != x[i - 1].type)
            CHECK(runs.emplace(std::make_pair(int(x[i].type), x[i].atp), i).second);
    for (const auto &c : x)
        CHECK(a.scan.accepted[c.trigger].trigger_capable);
}

TEST_CASE("overconstrained candidates leave room for the constraint stages")
{
    auto a = analyse(kGuarded, std::string("\0\0\0\0", 4) + "ABCDEFGH");
    PairPolicy pol;
    pol.quotas.oc_stack = 1;
    pol.min_anchors = 2;
    auto cands = pair_candidates(a.trace, a.scan.accepted, a.atps, pol);
    for (const auto &c : cands) {
        REQUIRE(c.attack);
        CHECK(anchors_between(a.trace, a.scan.accepted[*c.attack], a.atps[c.atp]) >= 2);
        CHECK(c.trigger != *c.attack);
    }
}

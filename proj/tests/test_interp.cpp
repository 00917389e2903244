#include "doctest.h"

#include <set>
#include <sstream>

#include "chaff/frontend.hpp"
#include "chaff/interp.hpp"

using namespace chaff;

namespace {

RunResult exec(const std::string &src, const std::string &input, RunOptions opt = {})
{
    Program p = parse(src);
    return run(p, input, opt);
}

template <class T>
std::vector<T> events(const Trace &t)
{
    std::vector<T> out;
    for (const auto &e : t.events)
        if (const auto *x = std::get_if<T>(&e))
            out.push_back(*x);
    return out;
}

const LvalueObserved *find_obs(const std::vector<LvalueObserved> &obs, const std::string &path, bool write)
{
    for (const auto &o : obs)
        if (o.path.text() == path && o.is_write == write)
            return &o;
    return nullptr;
}

} // namespace

TEST_CASE("branch on an input byte records its label")
{
    auto r = exec("int main(void)\n{\n    char in[8];\n    int x;\n    read_input(in, 8);\n    x = in[4];\n"
                  "    if (x == 1) {\n        print_int(1);\n    }\n    return 0;\n}\n",
                  "abcd\x01xyz");
    CHECK(r.output == "1");
    auto br = events<BranchEval>(r.trace);
    REQUIRE(br.size() == 1);
    CHECK(br[0].taint == TaintSet{4});
}

TEST_CASE("sum of two input bytes: union of labels, tcn 1")
{
    auto r = exec("int main(void)\n{\n    char buf[4];\n    int y;\n    read_input(buf, 4);\n"
                  "    y = buf[0] + buf[1];\n    print_int(y);\n    return 0;\n}\n",
                  "\x01\x02\x03\x04");
    CHECK(r.output == "3");
    auto obs = events<LvalueObserved>(r.trace);
    const auto *y = find_obs(obs, "y", true);
    REQUIRE(y);
    CHECK(y->width == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(y->taint[i] == TaintSet{0, 1});
        CHECK(y->tcn[i] == 1);
    }
    // the operands themselves are raw input bytes
    const auto *b0 = find_obs(obs, "buf[0]", false);
    REQUIRE(b0);
    CHECK(b0->taint[0] == TaintSet{0});
    CHECK(b0->tcn[0] == 0);
}

TEST_CASE("copy chains keep the source tcn")
{
    auto r = exec("int main(void)\n{\n    char buf[4];\n    int a;\n    int b;\n    int c;\n"
                  "    read_input(buf, 4);\n    a = buf[0] * 3;\n    b = a;\n    c = b;\n    return c;\n}\n",
                  "\x02zzz");
    CHECK(r.exit_code == 6);
    auto obs = events<LvalueObserved>(r.trace);
    const auto *a = find_obs(obs, "a", true);
    const auto *c = find_obs(obs, "c", true);
    REQUIRE(a);
    REQUIRE(c);
    CHECK(a->tcn == c->tcn);
    CHECK(c->taint[0] == TaintSet{0});
}

TEST_CASE("4-byte copies keep per-byte singleton labels")
{
    auto r = exec("struct hdr {\n    int magic;\n    int len;\n};\n"
                  "int main(void)\n{\n    struct hdr h;\n    int m;\n    read_input(&h, sizeof(struct hdr));\n"
                  "    m = h.len;\n    print_int(m);\n    return 0;\n}\n",
                  std::string("ABCD\x05\x00\x00\x00", 8));
    CHECK(r.output == "5");
    auto obs = events<LvalueObserved>(r.trace);
    const auto *f = find_obs(obs, "h.len", false);
    REQUIRE(f);
    for (uint32_t i = 0; i < 4; ++i) {
        CHECK(f->taint[i] == TaintSet{4 + i});
        CHECK(f->tcn[i] == 0);
    }
    CHECK(f->siphonable);
    CHECK_FALSE(f->siphon_after);
    CHECK(f->initialized);
}

TEST_CASE("corrupted saved frame pointer faults in the caller near null")
{
    const char *src = "int g(void)\n{\n    int i;\n    char b[4];\n"
                      "    for (i = 0; i < 4; i++) {\n        b[8 + i] = 0;\n    }\n    return 0;\n}\n"
                      "int f(void)\n{\n    int x;\n    x = 5;\n    g();\n    print_int(x);\n    return 0;\n}\n"
                      "int main(void)\n{\n    f();\n    return 0;\n}\n";
    auto r = exec(src, "");
    REQUIRE(r.fault);
    CHECK((r.fault->kind == FaultKind::ReadUnmapped || r.fault->kind == FaultKind::WriteUnmapped));
    CHECK(r.fault->address < kUnmappedLimit);
    CHECK(r.fault->function == "f");
    CHECK(r.output.empty());
}

TEST_CASE("corrupted saved frame pointer is harmless when the caller never touches locals")
{
    const char *src = "int g(void)\n{\n    int i;\n    char b[4];\n"
                      "    for (i = 0; i < 4; i++) {\n        b[8 + i] = 0;\n    }\n    return 0;\n}\n"
                      "int f(void)\n{\n    g();\n    return 7;\n}\n"
                      "int main(void)\n{\n    print_int(f());\n    return 0;\n}\n";
    auto r = exec(src, "");
    CHECK_FALSE(r.fault);
    CHECK(r.output == "7");
}

TEST_CASE("zeroed return address faults on the program counter")
{
    const char *src = "int g(void)\n{\n    int i;\n    char b[4];\n"
                      "    for (i = 0; i < 4; i++) {\n        b[12 + i] = 0;\n    }\n    return 0;\n}\n"
                      "int main(void)\n{\n    g();\n    return 0;\n}\n";
    auto r = exec(src, "");
    REQUIRE(r.fault);
    CHECK(r.fault->kind == FaultKind::PcUnmapped);
    CHECK(r.fault->address == 0);
    CHECK(r.fault->function == "g");
}

TEST_CASE("page zero is unmapped")
{
    auto r = exec("int main(void)\n{\n    int *p;\n    p = 0;\n    *p = 1;\n    return 0;\n}\n", "");
    REQUIRE(r.fault);
    CHECK(r.fault->kind == FaultKind::WriteUnmapped);
    CHECK(r.fault->address == 0);
}

TEST_CASE("division by zero is the crash marker")
{
    auto r = exec("int main(void)\n{\n    int z;\n    z = 0;\n    return 1 / z;\n}\n", "");
    REQUIRE(r.fault);
    CHECK(r.fault->kind == FaultKind::DivZeroMarker);
}

TEST_CASE("heap header corruption aborts in the allocator")
{
    const char *src = "int main(void)\n{\n    char *p;\n    char *q;\n    int i;\n"
                      "    p = malloc(24);\n    q = malloc(24);\n"
                      "    for (i = 0; i < 4; i++) {\n        p[28 + i] = 0;\n    }\n"
                      "    print_int(1);\n    free(q);\n    print_int(2);\n    return 0;\n}\n";
    auto r = exec(src, "");
    REQUIRE(r.fault);
    CHECK(r.fault->kind == FaultKind::AllocatorAbort);
    CHECK(r.fault->assertion == "invalid-size");
    CHECK(r.output == "1");
}

TEST_CASE("reading never-written memory is reported")
{
    CHECK_THROWS_AS(exec("int main(void)\n{\n    int x;\n    print_int(x);\n    return 0;\n}\n", ""),
                    UninitializedRead);
}

TEST_CASE("step budget")
{
    RunOptions opt;
    opt.limits.max_steps = 1000;
    CHECK_THROWS_AS(exec("int main(void)\n{\n    while (1) {\n    }\n    return 0;\n}\n", "", opt), BudgetExceeded);
}

TEST_CASE("frame geometry follows the layout formula")
{
    const char *src = "int leaf(void)\n{\n    char buf[8];\n    buf[0] = 0;\n    return 0;\n}\n"
                      "int wide(void)\n{\n    int a;\n    int b;\n    int c;\n    int d;\n    char buf[4];\n"
                      "    a = 0;\n    return a;\n}\n"
                      "int args(int x, int y)\n{\n    int a;\n    char buf[4];\n    a = x + y;\n    return a;\n}\n"
                      "int main(void)\n{\n    leaf();\n    wide();\n    args(1, 2);\n    return 0;\n}\n";
    Program p = parse(src);
    auto r = run(p, "");
    REQUIRE_FALSE(r.fault);

    auto wide = measure_frame_geometry(r.trace, "wide");
    CHECK(wide.buffer == "buf");
    CHECK(wide.saved_fp_distance == 16);
    CHECK(wide.return_address_distance == 20);
    CHECK(wide.copied_args_skip == 0);

    auto leaf = measure_frame_geometry(r.trace, "leaf");
    CHECK(leaf.saved_fp_distance == 0);
    CHECK(leaf.return_address_distance == 4);

    auto args = measure_frame_geometry(r.trace, "args");
    CHECK(args.copied_args_skip == 8);
    CHECK(args.saved_fp_distance == 12);   // copied args plus one int

    CHECK_THROWS_AS(measure_frame_geometry(r.trace, "nowhere"), FunctionNotInTrace);

    // the trace layout agrees with the static formula
    FrameLayout l = compute_frame_layout(p, *p.find_function("args"));
    CHECK(l.saved_fp_offset == 16);
    CHECK(l.local("buf")->offset == 0);
    CHECK(l.params[0].offset == 4);
    CHECK(l.local("a")->offset == 12);
}

TEST_CASE("branch-guarded initialization lacks in-scope evidence")
{
    const char *src = "struct hdr {\n    int len;\n};\n"
                      "int main(void)\n{\n    char c[1];\n    struct hdr h;\n    struct hdr *p;\n    int x;\n"
                      "    read_input(c, 1);\n    read_input(&h, 4);\n"
                      "    if (c[0] == 0) {\n        p = &h;\n    }\n"
                      "    if (c[0] == 0) {\n        x = p->len;\n        print_int(x);\n    }\n"
                      "    x = h.len;\n    return 0;\n}\n";
    auto r = exec(src, std::string("\x00\x07\x00\x00\x00", 5));
    CHECK(r.output == "7");
    auto obs = events<LvalueObserved>(r.trace);
    const auto *guarded = find_obs(obs, "p->len", false);
    REQUIRE(guarded);
    CHECK_FALSE(guarded->initialized);
    const auto *direct = find_obs(obs, "h.len", false);
    REQUIRE(direct);
    CHECK(direct->initialized);
}

TEST_CASE("string offsets are flagged with the run's strlen")
{
    const char *src = "int main(void)\n{\n    char buf[16];\n    char *s;\n    int x;\n"
                      "    read_input(buf, 15);\n    buf[15] = 0;\n    s = buf;\n    x = s[7];\n    return x;\n}\n";
    auto r = exec(src, "abcdefghijklmno");
    auto obs = events<LvalueObserved>(r.trace);
    const auto *o = find_obs(obs, "s[7]", false);
    REQUIRE(o);
    CHECK(o->string_offset);
    CHECK(o->offset == 7);
    CHECK(o->base_strlen == 15);
    CHECK(o->width == 1);
}

TEST_CASE("siphon flags for reads and writes")
{
    const char *src = "int main(void)\n{\n    char buf[4];\n    int i;\n    int t;\n"
                      "    read_input(buf, 4);\n    t = 0;\n"
                      "    for (i = 0; i < 2; i++) {\n        t = t + buf[0];\n    }\n    return t;\n}\n";
    auto r = exec(src, "\x03zzz");
    CHECK(r.exit_code == 6);
    auto obs = events<LvalueObserved>(r.trace);
    int fresh_t_reads = 0;
    for (const auto &o : obs)
        if (o.path.text() == "t" && !o.is_write && o.siphonable)
            ++fresh_t_reads;
    CHECK(fresh_t_reads == 2);   // second iteration's `t + buf[0]` and the return
    const auto *w = find_obs(obs, "t", true);
    REQUIRE(w);
    CHECK(w->siphonable);
    CHECK(w->siphon_after);
}

TEST_CASE("indirect calls are marked")
{
    const char *src = "int handler(int v)\n{\n    return v + 1;\n}\n"
                      "int main(void)\n{\n    int (*fp)(int);\n    fp = handler;\n    return fp(4);\n}\n";
    auto r = exec(src, "");
    CHECK(r.exit_code == 5);
    auto calls = events<CallEnter>(r.trace);
    REQUIRE(calls.size() == 2);
    CHECK_FALSE(calls[0].indirect);
    CHECK(calls[1].indirect);
    CHECK(calls[1].chain == std::vector<std::string>{"main", "handler"});
    CHECK(events<Return>(r.trace).size() == 2);
}

TEST_CASE("strlen over input is a tainted branch")
{
    auto r = exec("int main(void)\n{\n    char b[4];\n    read_input(b, 3);\n    b[3] = 0;\n"
                  "    print_int(strlen(b));\n    return 0;\n}\n",
                  std::string("ab\0", 3));
    auto br = events<BranchEval>(r.trace);
    REQUIRE(br.size() == 1);
    CHECK(br[0].taint == TaintSet{0, 1, 2});
    CHECK(r.output == "2");
}

TEST_CASE("trace serialization round-trips")
{
    auto r = exec("int main(void)\n{\n    char in[8];\n    int x;\n    char *p;\n    read_input(in, 8);\n"
                  "    x = in[4];\n    p = malloc(8);\n    free(p);\n    if (x == 1) {\n        print_int(1);\n    }\n"
                  "    return 0;\n}\n",
                  "abcd\x01xyz");
    std::stringstream ss;
    write_trace(ss, r.trace);
    Trace back = read_trace(ss);
    CHECK(back.input_length == 8);
    CHECK(back.events.size() == r.trace.events.size());
    CHECK(dump_trace(back) == dump_trace(r.trace));
    std::stringstream again;
    write_trace(again, back);
    std::stringstream first;
    write_trace(first, r.trace);
    CHECK(again.str() == first.str());

    std::stringstream bad("garbage");
    CHECK_THROWS_AS(read_trace(bad), TraceFormatError);
}

TEST_CASE("statement-level traces keep only control events")
{
    RunOptions opt;
    opt.trace = TraceLevel::Statements;
    auto r = exec("int main(void)\n{\n    char in[2];\n    read_input(in, 2);\n    if (in[0] == 1) {\n"
                  "        print_int(1);\n    }\n    return 0;\n}\n",
                  "\x01z", opt);
    for (const auto &e : r.trace.events)
        CHECK((std::holds_alternative<StmtEnter>(e) || std::holds_alternative<CallEnter>(e) ||
               std::holds_alternative<Return>(e) || std::holds_alternative<InputRead>(e)));
    CHECK(r.trace.first_input_read() < r.trace.events.size());
}

TEST_CASE("runs are deterministic")
{
    const char *src = "int main(void)\n{\n    char in[8];\n    int i;\n    int s;\n    read_input(in, 8);\n"
                      "    s = 0;\n    for (i = 0; i < 8; i++) {\n        s = s * 31 + in[i];\n    }\n"
                      "    print_int(s);\n    return 0;\n}\n";
    auto a = exec(src, "12345678");
    auto b = exec(src, "12345678");
    std::stringstream sa, sb;
    write_trace(sa, a.trace);
    write_trace(sb, b.trace);
    CHECK(sa.str() == sb.str());
    CHECK(a.output == b.output);
}

TEST_CASE("taint soundness on straight-line code")
{
    // Flipping an input byte may change output only if some observation or
    // branch carries that byte's label.
    const char *src = "struct rec {\n    int a;\n    int b;\n};\n"
                      "int main(void)\n{\n    struct rec r;\n    char c[4];\n    int x;\n    int y;\n"
                      "    read_input(&r, 8);\n    read_input(c, 4);\n"
                      "    x = r.a ^ (c[1] << 3);\n    y = r.b - c[3];\n"
                      "    if (c[0] > 64) {\n        print_int(x);\n    }\n    print_int(y & 255);\n    return 0;\n}\n";
    std::string seed = "\x10\x20\x30\x40\x01\x02\x03\x04" "ABCD";
    auto base = exec(src, seed);
    std::set<Label> seen;
    for (const auto &e : base.trace.events) {
        if (const auto *b = std::get_if<BranchEval>(&e))
            seen.insert(b->taint.begin(), b->taint.end());
        if (const auto *o = std::get_if<LvalueObserved>(&e))
            for (const auto &t : o->taint)
                seen.insert(t.begin(), t.end());
    }
    for (uint32_t i = 0; i < seed.size(); ++i) {
        for (int bit = 0; bit < 8; ++bit) {
            std::string in = seed;
            in[i] = char(in[i] ^ (1 << bit));
            auto r = exec(src, in);
            if (r.output != base.output)
                CHECK_MESSAGE(seen.count(i), "byte ", i, " changes output without a recorded use");
        }
    }
}

TEST_CASE("audit mode attributes injected stores")
{
    const char *src = "int g(void)\n{\n    int lava_i_3;\n    char lava_buf_3[4];\n"
                      "    for (lava_i_3 = 0; lava_i_3 < 4; lava_i_3++) {\n        lava_buf_3[12 + lava_i_3] = 0;\n    }\n"
                      "    return 0;\n}\n"
                      "int main(void)\n{\n    g();\n    return 0;\n}\n";
    RunOptions opt;
    opt.audit = true;
    auto r = exec(src, "", opt);
    REQUIRE(r.fault);
    CHECK(r.fault->bug_id == 3u);
    REQUIRE(r.audit.size() == 4);
    for (const auto &w : r.audit) {
        CHECK(w.bug_id == 3);
        CHECK(w.object == "g#return-address");
        CHECK(w.size == 1);
    }
}

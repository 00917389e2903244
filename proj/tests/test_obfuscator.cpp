#include "doctest.h"

#include <algorithm>
#include <random>

#include "chaff/dua.hpp"
#include "chaff/frontend.hpp"
#include "chaff/obfuscator.hpp"

using namespace chaff;

namespace {

// Independent model of the inserted code: one global per stage, zeroed at
// start; a stage stores attack & mask; the attack point reads the AND of all.
uint32_t simulate(const std::vector<uint32_t> &masks, const std::vector<int> &executed, uint32_t attack)
{
    std::vector<uint32_t> globals(masks.size(), 0);
    for (int j : executed)
        globals[j] = attack & masks[j];
    uint32_t v = ~0u;
    for (uint32_t g : globals)
        v &= g;
    return v;
}

/// Every ordered selection of stages, checked against `inputs`.
bool all_orders_zero(const std::vector<uint32_t> &masks, const std::vector<uint32_t> &inputs)
{
    const int k = static_cast<int>(masks.size());
    for (uint32_t subset = 0; subset < (1u << k); ++subset) {
        std::vector<int> chosen;
        for (int j = 0; j < k; ++j)
            if (subset >> j & 1)
                chosen.push_back(j);
        do {
            for (uint32_t in : inputs)
                if (simulate(masks, chosen, in) != 0)
                    return false;
        } while (std::next_permutation(chosen.begin(), chosen.end()));
    }
    return true;
}

std::vector<uint32_t> random_inputs(size_t n, uint32_t seed)
{
    std::mt19937 rng(seed);
    std::vector<uint32_t> v = {0u, ~0u};
    while (v.size() < n)
        v.push_back(rng());
    return v;
}

std::vector<StageAnchor> anchors(size_t n)
{
    std::vector<StageAnchor> out;
    for (size_t i = 0; i < n; ++i)
        out.push_back({static_cast<NodeId>(100 + i), i % 2 ? "f" : "g", 10 * i});
    return out;
}

AttackPoint atp_in(const Program &p, const std::string &input, const std::string &fn)
{
    Trace t = run(p, input).trace;
    for (auto &a : find_attack_points(t, p))
        if (a.function == fn && a.kind == AtpKind::StackFrameSite)
            return a;
    FAIL("no attack point in " << fn);
    return {};
}

const char *kChain = R"(int g(int v)
{
    int r;
    r = v + 1;
    return r;
}

int f(int v)
{
    int s;
    s = g(v);
    return s;
}

int main(void)
{
    char buf[4];
    int x;
    read_input(buf, 4);
    x = f(buf[0]);
    print_int(x);
    return 0;
}
)";

} // namespace

TEST_CASE("two stages: lower half first, then upper half")
{
    auto m = plan_masks(2, 1);
    REQUIRE(m.size() == 2);
    CHECK(m[0] == 0x0000FFFFu);
    CHECK(m[1] == 0xFFFF0000u);
    CHECK((m[0] & m[1]) == 0u);
    CHECK(fold_stages(m, {0, 1}, 0xDEADBEEF) == 0u);
}

TEST_CASE("one stage masks everything")
{
    auto m = plan_masks(1, 1);
    REQUIRE(m.size() == 1);
    CHECK(m[0] == 0u);
}

TEST_CASE("k = 1..5: every subset in every order gives 0 on 10^4 inputs")
{
    auto inputs = random_inputs(10002, 99);
    for (uint32_t k = 1; k <= 5; ++k)
        for (uint64_t seed : {1ull, 3ull, 17ull}) {
            auto m = plan_masks(k, seed);
            REQUIRE(m.size() == k);
            uint32_t all = ~0u;
            for (uint32_t x : m)
                all &= x;
            CHECK(all == 0u);
            CHECK(all_orders_zero(m, inputs));

            SubsetCheck par = check_chain_subsets(m, 10000, seed);
            SubsetCheck ser = check_chain_subsets_serial(m, 10000, seed);
            CHECK(par.sound());
            CHECK(ser.sound());
            CHECK(par.orderings == ser.orderings);
            CHECK(par.evaluations == ser.evaluations);
            CHECK(par.inputs >= 10000);
        }
}

TEST_CASE("k = 4 with seed 3: all 16 subsets, every order")
{
    auto m = plan_masks(4, 3);
    SubsetCheck c = check_chain_subsets(m, 10000, 3);
    CHECK(c.sound());
    // sum over subsets of |S|! = 1 + 4 + 12 + 24 + 24
    CHECK(c.orderings == 65);
}

TEST_CASE("stage masks partition the word for k > 2")
{
    for (uint32_t k = 3; k <= 8; ++k) {
        auto m = plan_masks(k, 5);
        // each bit is cleared by exactly one stage
        for (int bit = 0; bit < 32; ++bit) {
            int cleared = 0;
            for (uint32_t x : m)
                cleared += !(x >> bit & 1);
            CHECK(cleared == 1);
        }
    }
}

TEST_CASE("a broken chain yields a witness")
{
    std::vector<uint32_t> bad = {0xFFFF0000u, 0xFF00FF00u};   // AND keeps 0xFF000000
    SubsetCheck par = check_chain_subsets(bad, 1000, 1);
    SubsetCheck ser = check_chain_subsets_serial(bad, 1000, 1);
    CHECK(!par.algebraic_zero);
    REQUIRE(par.witness);
    REQUIRE(ser.witness);
    CHECK(par.witness->value != 0u);
    CHECK(fold_stages(bad, par.witness->order, par.witness->input) == par.witness->value);
    // serial and parallel report the same first failure
    CHECK(par.witness->order == ser.witness->order);
    CHECK(par.witness->input == ser.witness->input);
    std::vector<int> order(par.witness->order.begin(), par.witness->order.end());
    CHECK(simulate(bad, order, par.witness->input) == par.witness->value);
}

TEST_CASE("constraint chain: k anchors, distinct globals, spread over functions")
{
    auto path = anchors(6);
    ConstraintChain c = plan_constraint_chain(path, 2, 1, 7);
    REQUIRE(c.stages.size() == 2);
    CHECK(c.stages[0].global == "lava_c1_7");
    CHECK(c.stages[1].global == "lava_c2_7");
    CHECK(c.stages[0].anchor.function != c.stages[1].anchor.function);
    CHECK(c.stages[0].anchor.trace_index < c.stages[1].anchor.trace_index);
    CHECK(c.masks() == plan_masks(2, 1));
    CHECK_THROWS_AS(plan_constraint_chain(anchors(1), 2, 1, 7), NotEnoughAnchors);
}

TEST_CASE("fake dataflow: main is never modified, the value is threaded up to the caller")
{
    Program p = parse(kChain);
    AttackPoint a = atp_in(p, "\x05xyz", "g");
    DataflowPlan plan = plan_fake_dataflow(a, 2, p, 3);
    CHECK(!plan.degenerate);
    CHECK(plan.threaded == std::vector<std::string>{"g"});
    CHECK(plan.root_function == "f");
    CHECK(plan.param == "lava_out_3");

    Program q = apply_edits(p, dataflow_edits(plan, p));
    std::string text = print(q);
    CHECK(text.find("int g(int v, int *lava_out_3)") != std::string::npos);
    CHECK(text.find("int f(int v)") != std::string::npos);
    CHECK(text.find("s = g(v, &lava_root_3);") != std::string::npos);
    CHECK(text.find("int main(void)") != std::string::npos);
    // still a valid program with the same behaviour
    CHECK(run(q, "\x05xyz").output == run(p, "\x05xyz").output);
}

TEST_CASE("fake dataflow: a function reached through a pointer is left alone")
{
    const char *src = R"(int g(int v)
{
    int r;
    r = v + 1;
    return r;
}

int main(void)
{
    char buf[4];
    int (*fn)(int);
    int x;
    read_input(buf, 4);
    fn = g;
    x = fn(buf[0]);
    print_int(x);
    return 0;
}
)";
    Program p = parse(src);
    AttackPoint a = atp_in(p, "\x05xyz", "g");
    DataflowPlan plan = plan_fake_dataflow(a, 2, p, 1);
    CHECK(plan.degenerate);
    CHECK(plan.threaded.empty());
    Program q = apply_edits(p, dataflow_edits(plan, p));
    CHECK(print(q).find("int g(int v)") != std::string::npos);
    CHECK(print(q).find("lava_sink_1") != std::string::npos);
}

TEST_CASE("fake dataflow: depth 0 plans nothing")
{
    Program p = parse(kChain);
    AttackPoint a = atp_in(p, "\x05xyz", "g");
    DataflowPlan plan = plan_fake_dataflow(a, 0, p, 1);
    CHECK(plan.empty());
    CHECK(dataflow_edits(plan, p).empty());
    CHECK(!dataflow_sink(plan, build::int_lit(0)));
}

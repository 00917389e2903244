#include "doctest.h"

#include <algorithm>

#include "chaff/corpus.hpp"
#include "chaff/frontend.hpp"

using namespace chaff;

namespace {

const std::vector<Manifest> &corpus()
{
    static const std::vector<Manifest> all = load_corpus(std::string(CHAFF_SOURCE_DIR) + "/corpus");
    return all;
}

const Manifest &fixture(const std::string &name)
{
    for (const auto &m : corpus())
        if (m.name == name)
            return m;
    throw std::runtime_error("no fixture " + name);
}

std::vector<SeedAnalysis> analysed(const Manifest &m)
{
    return analyze(load_fixture(m.source, m.inputs_dir), RunConfig{});
}

} // namespace

TEST_CASE("the corpus is all there")
{
    CHECK(corpus().size() >= 12);
    for (const auto &m : corpus()) {
        INFO(m.name);
        CHECK(!m.inputs.empty());
        CHECK(!m.tags.empty());
    }
}

TEST_CASE("every fixture produces the recorded output and exit code")
{
    for (const auto &m : corpus()) {
        Fixture fx = load_fixture(m.source, m.inputs_dir);
        REQUIRE(fx.inputs.size() == m.inputs.size());
        for (size_t i = 0; i < m.inputs.size(); ++i) {
            INFO(m.name << " " << m.inputs[i]);
            RunResult r = run(fx.program, fx.inputs[i]);
            CHECK(!r.fault);
            CHECK(r.output == m.expected_outputs[i]);
            CHECK(r.exit_code == m.expected_exit_codes[i]);
        }
    }
}

TEST_CASE("every fixture prints to a fixpoint")
{
    for (const auto &m : corpus()) {
        INFO(m.name);
        Program p = parse(load_fixture(m.source, m.inputs_dir).source);
        std::string once = print(p);
        CHECK(print(parse(once)) == once);
    }
}

TEST_CASE("DUA flavours are represented")
{
    auto tok = analysed(fixture("tokenizer"));
    bool string_offset = false;
    for (const auto &a : tok)
        for (const auto &d : a.scan.accepted)
            string_offset |= d.string_offset;
    CHECK(string_offset);

    auto guarded = analysed(fixture("guarded"));
    bool uninit = false, plain = false;
    for (const auto &a : guarded) {
        for (const auto &r : a.scan.rejected)
            uninit |= r.reason == "uninitialized";
        for (const auto &d : a.scan.accepted)
            plain |= !d.string_offset;
    }
    CHECK(uninit);
    CHECK(plain);
}

TEST_CASE("heap fixtures have both attack-point kinds; noatp has none")
{
    for (const auto &m : corpus()) {
        if (!m.has_tag("heap"))
            continue;
        INFO(m.name);
        bool stack = false, heap = false;
        for (const auto &a : analysed(m))
            for (const auto &p : a.atps) {
                stack |= p.kind == AtpKind::StackFrameSite;
                heap |= p.kind == AtpKind::HeapAdjacentSite;
            }
        CHECK(stack);
        CHECK(heap);
    }
    for (const auto &a : analysed(fixture("noatp")))
        CHECK(a.atps.empty());
}

TEST_CASE("fixtures that carry a bug quota inject it in full")
{
    // a smaller sweep than the acceptance run: one stack and one heap fixture
    for (const char *name : {"calc", "kvstore"}) {
        const Manifest &m = fixture(name);
        REQUIRE(m.bugs);
        RunConfig cfg;
        cfg.quotas = *m.bugs;
        cfg.constraint_samples = 2000;
        InjectResult r = inject(load_fixture(m.source, m.inputs_dir), cfg);
        INFO(name);
        CHECK(r.all_requested_validated(cfg.quotas));
        CHECK(r.clean.equivalent());
        CHECK(r.roundtrip);
    }
}

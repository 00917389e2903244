// Runs the acceptance sweep over the fixture corpus and prints one PASS/FAIL
// line per criterion. Exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "chaff/corpus.hpp"
#include "chaff/frontend.hpp"

using namespace chaff;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    std::string id;
    bool pass = false;
    std::string detail;
};

struct Run {
    const Manifest *fixture = nullptr;
    Fixture fx;
    RunConfig cfg;
    InjectResult result;
};

/// What each bug shape must do on its trigger, stated without the validator.
bool faults_as_specified(const BugSpec &spec, const std::optional<FaultReport> &f)
{
    switch (spec.candidate.type) {
    case BugType::OCStack:
        if (!f)
            return false;
        if (spec.candidate.target == StackTarget::ReturnAddress)
            return f->kind == FaultKind::PcUnmapped && f->address == spec.final_value;
        // the restored frame pointer is dereferenced by the caller, near NULL
        return (f->kind == FaultKind::ReadUnmapped || f->kind == FaultKind::WriteUnmapped) &&
               f->address < kUnmappedLimit && f->function != spec.function;
    case BugType::OCHeap:
        return f && f->kind == FaultKind::AllocatorAbort;
    case BugType::UnusedStack:
        return spec.crash_marker ? f && f->kind == FaultKind::DivZeroMarker : !f;
    }
    return false;
}

bool reprints(const Program &p)
{
    std::string once = print(p);
    return print(parse(once)) == once;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"acceptance sweep over the fixture corpus"};
    std::string root = std::string(CHAFF_SOURCE_DIR) + "/corpus";
    std::string survey_fixture = "inventory";
    uint32_t samples = 10000;
    app.add_option("--corpus", root, "corpus directory")->check(CLI::ExistingDirectory);
    app.add_option("--survey-fixture", survey_fixture, "fixture the survey runs on");
    app.add_option("--samples", samples, "random inputs per constraint-chain check");
    CLI11_PARSE(app, argc, argv);

    std::vector<Manifest> corpus = load_corpus(root);
    std::vector<Verdict> out;

    // one inject per fixture that carries a quota
    auto t_inject = Clock::now();
    std::vector<Run> runs;
    for (const auto &m : corpus) {
        if (!m.bugs)
            continue;
        Run r;
        r.fixture = &m;
        r.fx = load_fixture(m.source, m.inputs_dir);
        r.cfg.quotas = *m.bugs;
        r.cfg.constraint_samples = samples;
        r.result = inject(r.fx, r.cfg);
        runs.push_back(std::move(r));
    }
    double inject_secs = seconds_since(t_inject);

    // A1: volume, all types, clean equivalence on every corpus input
    {
        size_t bugs = 0, inputs = 0, diverged = 0;
        std::map<BugType, size_t> by_type;
        for (const auto &r : runs) {
            for (size_t i = 0; i < r.result.synthesis.specs.size(); ++i)
                if (r.result.validation[i].validated) {
                    ++bugs;
                    ++by_type[r.result.synthesis.specs[i].candidate.type];
                }
            // recheck independently of the pipeline's own clean pass
            CleanResult c = validate_clean(r.fx.program, r.result.synthesis.transformed, r.fx.inputs, r.cfg.limits);
            inputs += c.inputs;
            diverged += c.divergences.size();
        }
        bool ok = bugs >= 100 && by_type.size() == 3 && diverged == 0 && inject_secs < 300;
        out.push_back({"A1", ok,
                       fmt::format("{} bugs (oc-stack {}, oc-heap {}, unused-stack {}) over {} fixtures; {} of {} "
                                   "inputs diverge; {:.1f}s",
                                   bugs, by_type[BugType::OCStack], by_type[BugType::OCHeap],
                                   by_type[BugType::UnusedStack], runs.size(), diverged, inputs, inject_secs)});
    }

    // A2: every reported bug faults as specified; attempt success rate
    {
        size_t reported = 0, faithful = 0, attempts = 0, succeeded = 0;
        std::map<std::string, size_t> reasons = {
            {"fp-never-dereferenced", 0}, {"bytes-not-independent", 0}, {"uninit-dua-rejected", 0}};
        for (const auto &r : runs) {
            const auto &specs = r.result.synthesis.specs;
            for (size_t i = 0; i < specs.size(); ++i) {
                ++reported;
                TriggerOutcome o = validate_trigger(r.result.synthesis.transformed, r.result.triggers[i], specs[i],
                                                    r.cfg.limits);
                bool as_spec = o.ok && faults_as_specified(specs[i], o.fault);
                faithful += as_spec && r.result.validation[i].validated;
            }
            for (const auto &a : r.result.attempts) {
                ++attempts;
                succeeded += a.ok;
                if (!a.ok)
                    ++reasons[a.reason];
            }
            for (const auto &seed : analyze(r.fx, r.cfg))
                for (const auto &rej : seed.scan.rejected)
                    if (rej.reason == "uninitialized")
                        ++reasons["uninit-dua-rejected"];
        }
        double rate = attempts ? double(succeeded) / attempts : 0;
        std::string why;
        for (const auto &[k, n] : reasons)
            why += fmt::format("{}{}={}", why.empty() ? "" : ", ", k, n);
        out.push_back({"A2", reported > 0 && faithful == reported && rate >= 0.8,
                       fmt::format("{}/{} reported bugs fault as specified; {}/{} attempts validate ({:.1f}%); "
                                   "failures: {}",
                                   faithful, reported, succeeded, attempts, 100 * rate, why.empty() ? "none" : why)});
    }

    // A3: complete proof bundles, no counterexamples
    {
        size_t bugs = 0, complete = 0, counter = 0, chains = 0;
        for (const auto &r : runs)
            for (size_t i = 0; i < r.result.validation.size(); ++i) {
                const auto &v = r.result.validation[i];
                BugType t = r.result.synthesis.specs[i].candidate.type;
                ++bugs;
                counter += v.counterexample.has_value();
                bool ok = v.proofs && v.proofs->complete(t);
                if (ok && v.proofs->constraint) {
                    ++chains;
                    ok = v.proofs->constraint->sound() && v.proofs->constraint->inputs >= 10000;
                }
                complete += ok;
            }
        out.push_back({"A3", bugs > 0 && complete == bugs && counter == 0,
                       fmt::format("{}/{} complete bundles ({} constraint chains, >= 10^4 inputs each); "
                                   "{} counterexamples",
                                   complete, bugs, chains, counter)});
    }

    // A4: heap case analysis at depth 3
    {
        auto t0 = Clock::now();
        heap::CaseTable corrupted = heap::check_corruption_cases(heap::OverflowValues{}, 3);
        heap::CaseTable baseline = heap::check_corruption_cases(std::nullopt, 3);
        double secs = seconds_since(t0);
        size_t consulted = 0, consulted_abort = 0;
        std::set<heap::ChunkState> classes;
        for (const auto &row : corrupted.rows) {
            classes.insert(row.successor);
            if (row.consulted) {
                ++consulted;
                consulted_abort += row.outcome == heap::Outcome::Abort;
            }
        }
        size_t escaped = corrupted.count(heap::Outcome::CorruptionEscaped);
        size_t base_aborts = baseline.count(heap::Outcome::Abort);
        bool ok = classes.size() == heap::kSuccessorStates.size() && consulted > 0 && consulted_abort == consulted &&
                  escaped == 0 && base_aborts == 0 && secs < 60;
        out.push_back({"A4", ok,
                       fmt::format("{} rows over {} successor classes; {}/{} consulting rows abort; {} escaped; "
                                   "baseline {} aborts; {:.2f}s",
                                   corrupted.rows.size(), classes.size(), consulted_abort, consulted, escaped,
                                   base_aborts, secs)});
    }

    // A5: stage masks
    {
        bool ok = true;
        uint64_t orderings = 0;
        for (uint32_t k = 1; k <= 5; ++k) {
            SubsetCheck c = check_chain_subsets_serial(plan_masks(k, 1), samples, k);
            ok &= c.sound() && c.inputs >= 10000;
            orderings += c.orderings;
        }
        auto two = plan_masks(2, 1);
        bool halves = two.size() == 2 && two[0] == 0x0000FFFFu && two[1] == 0xFFFF0000u;
        out.push_back({"A5", ok && halves,
                       fmt::format("k=1..5: {} orderings, all zero = {}; k=2 masks {:#010x} then {:#010x}", orderings,
                                   ok, two.size() > 0 ? two[0] : 0, two.size() > 1 ? two[1] : 0)});
    }

    // A6: classification by bug shape
    {
        struct Tally { size_t n = 0, ok = 0; };
        Tally heap, ra, fp;
        for (const auto &r : runs)
            for (size_t i = 0; i < r.result.validation.size(); ++i) {
                const auto &v = r.result.validation[i];
                const auto &c = r.result.synthesis.specs[i].candidate;
                if (c.type == BugType::UnusedStack)
                    continue;
                std::string label = v.classification ? v.classification->label : "";
                Tally &t = c.type == BugType::OCHeap ? heap : c.target == StackTarget::ReturnAddress ? ra : fp;
                ++t.n;
                std::string want = &t == &ra ? "PROBABLY_EXPLOITABLE_MIMIC" : "EXPLOITABLE_MIMIC";
                t.ok += label == want;
            }
        bool ok = heap.n && ra.n && fp.n && heap.ok == heap.n && ra.ok == ra.n && fp.ok == fp.n;
        out.push_back({"A6", ok,
                       fmt::format("oc-heap {}/{} EXPLOITABLE_MIMIC; return-address {}/{} PROBABLY_EXPLOITABLE_MIMIC; "
                                   "saved-fp {}/{} EXPLOITABLE_MIMIC",
                                   heap.ok, heap.n, ra.ok, ra.n, fp.ok, fp.n)});
    }

    // A7: survey curve
    {
        const Manifest *m = nullptr;
        for (const auto &c : corpus)
            if (c.name == survey_fixture)
                m = &c;
        Verdict v{"A7", false, "no fixture " + survey_fixture};
        if (m) {
            Fixture fx = load_fixture(m->source, m->inputs_dir);
            RunConfig cfg;
            cfg.constraint_samples = samples;
            try {
                SurveyResult a = survey(fx, cfg, 20, 10);
                SurveyResult b = survey(fx, cfg, 20, 10);
                bool mono = std::is_sorted(a.curve.begin(), a.curve.end());
                bool same = a.report.dump() == b.report.dump();
                std::string pts;
                for (double x : a.curve)
                    pts += fmt::format("{}{:.2f}", pts.empty() ? "" : " ", x);
                v.pass = mono && same && a.curve.size() == 10 && a.first_success.size() == 20;
                v.detail = fmt::format("{}: 20 ATPs, cap 10, curve [{}]; monotone = {}; repeat identical = {}",
                                       m->name, pts, mono, same);
            } catch (const QuotaInfeasible &e) {
                v.detail = fmt::format("{}: only {} attack points", m->name, e.available());
            }
        }
        out.push_back(v);
    }

    // A8: a second full inject reproduces every report
    {
        size_t same = 0;
        for (const auto &r : runs) {
            InjectResult again = inject(r.fx, r.cfg);
            nlohmann::json a = r.result.report, b = again.report;
            a.erase("generated_at");
            b.erase("generated_at");
            same += a.dump(2) == b.dump(2);
        }
        out.push_back({"A8", !runs.empty() && same == runs.size(),
                       fmt::format("{}/{} reports byte-identical on rerun", same, runs.size())});
    }

    // A9: printer fixpoint on fixtures and transformed outputs
    {
        size_t fixtures = 0, fixtures_ok = 0, outputs = 0, outputs_ok = 0;
        for (const auto &m : corpus) {
            ++fixtures;
            fixtures_ok += reprints(load_fixture(m.source, m.inputs_dir).program);
        }
        for (const auto &r : runs) {
            ++outputs;
            outputs_ok += reprints(r.result.synthesis.transformed);
        }
        out.push_back({"A9", fixtures_ok == fixtures && outputs_ok == outputs && fixtures > 0,
                       fmt::format("fixtures {}/{}, transformed outputs {}/{}", fixtures_ok, fixtures, outputs_ok,
                                   outputs)});
    }

    int failed = 0;
    for (const auto &v : out) {
        std::printf("%s %s  %s\n", v.id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
        failed += !v.pass;
    }
    return failed;
}

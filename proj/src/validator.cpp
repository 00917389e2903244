#include "chaff/validator.hpp"

#include <algorithm>
#include <cstdio>

namespace chaff {

namespace {

std::string hex32(uint32_t v)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

std::string le_bytes(uint32_t v)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02x%02x%02x%02x", v & 0xFF, (v >> 8) & 0xFF, (v >> 16) & 0xFF, v >> 24);
    return buf;
}

} // namespace

CleanRun clean_run(const Program &program, const std::string &input, const Limits &limits)
{
    RunOptions opt;
    opt.limits = limits;
    opt.trace = TraceLevel::None;
    CleanRun o;
    try {
        RunResult r = run(program, input, opt);
        o.output = std::move(r.output);
        o.exit_code = r.exit_code;
        o.fault = r.fault;
    } catch (const UninitializedRead &e) {
        o.error = "uninitialized-read";
        o.error_message = e.what();
    } catch (const BudgetExceeded &e) {
        o.error = "budget-exceeded";
        o.error_message = e.what();
    } catch (const std::exception &e) {
        o.error = "runtime-error";
        o.error_message = e.what();
    }
    return o;
}

CleanResult validate_clean(const std::vector<CleanRun> &expected, const Program &transformed,
                           const std::vector<std::string> &corpus, const Limits &limits)
{
    CleanResult res;
    res.inputs = corpus.size();
    for (size_t i = 0; i < corpus.size(); ++i) {
        const CleanRun &a = expected.at(i);
        CleanRun b = clean_run(transformed, corpus[i], limits);
        size_t n = std::min(a.output.size(), b.output.size());
        size_t off = std::mismatch(a.output.begin(), a.output.begin() + n, b.output.begin()).first - a.output.begin();
        if (off < n || a.output.size() != b.output.size()) {
            res.divergences.push_back({i, off, "output differs"});
        } else if (a.error != b.error) {
            res.divergences.push_back({i, n, "error differs: '" + a.error_message + "' vs '" + b.error_message + "'"});
        } else if (a.fault.has_value() != b.fault.has_value() ||
                   (a.fault && (a.fault->kind != b.fault->kind || a.fault->address != b.fault->address))) {
            res.divergences.push_back({i, n, "fault differs"});
        } else if (a.exit_code != b.exit_code) {
            res.divergences.push_back({i, n, "exit code differs"});
        }
    }
    return res;
}

CleanResult validate_clean(const Program &original, const Program &transformed, const std::vector<std::string> &corpus,
                           const Limits &limits)
{
    std::vector<CleanRun> expected;
    for (const auto &in : corpus)
        expected.push_back(clean_run(original, in, limits));
    return validate_clean(expected, transformed, corpus, limits);
}

TriggerOutcome validate_trigger(const Program &transformed, const TriggerInput &trigger, const BugSpec &spec,
                                const Limits &limits)
{
    TriggerOutcome t;
    RunOptions opt;
    opt.limits = limits;
    opt.trace = TraceLevel::None;
    opt.audit = true;
    try {
        t.run = run(transformed, trigger.bytes, opt);
    } catch (const std::exception &e) {
        t.reason = std::string("runtime-error: ") + e.what();
        return t;
    }
    t.fault = t.run.fault;
    bool wrote = std::any_of(t.run.audit.begin(), t.run.audit.end(),
                             [&](const AuditWrite &w) { return w.bug_id == spec.id; });
    if (!wrote) {
        t.reason = "not-triggered";
        return t;
    }

    auto expect = spec.expected_fault();
    if (!expect) {
        if (t.fault) {
            t.reason = "unexpected-fault: " + t.fault->describe();
            return t;
        }
        t.ok = true;
        t.reason = "no-crash-by-design";
        return t;
    }
    if (!t.fault) {
        bool saved_fp = spec.candidate.type == BugType::OCStack && spec.candidate.target == StackTarget::SavedFP;
        t.reason = saved_fp ? "fp-never-dereferenced" : "no-fault";
        return t;
    }
    const FaultReport &f = *t.fault;
    bool kind_ok = f.kind == *expect;
    if (spec.candidate.type == BugType::OCStack && spec.candidate.target == StackTarget::SavedFP)
        kind_ok = (f.kind == FaultKind::ReadUnmapped || f.kind == FaultKind::WriteUnmapped) &&
                  f.address < kUnmappedLimit;
    if (spec.candidate.type == BugType::OCStack && spec.candidate.target == StackTarget::ReturnAddress)
        kind_ok = kind_ok && f.address == spec.final_value;
    if (!kind_ok) {
        t.reason = "wrong-fault: " + f.describe();
        return t;
    }
    if (f.bug_id && *f.bug_id != spec.id) {
        t.reason = "fault attributed to bug " + std::to_string(*f.bug_id);
        return t;
    }
    t.ok = true;
    return t;
}

bool ProofBundle::complete(BugType type) const
{
    if (!write_audit || audited_writes == 0)
        return false;
    switch (type) {
    case BugType::OCStack:
        return constraint && constraint->sound();
    case BugType::OCHeap:
        return constraint && constraint->sound() && heap && heap->escaped == 0 && heap->aborts > 0;
    case BugType::UnusedStack:
        return taint_non_escape.value_or(false);
    }
    return false;
}

ProofBundle prove_non_exploitable(const Program &transformed, const BugSpec &spec, const TriggerOutcome &trigger,
                                  const std::vector<std::string> &clean_inputs, const heap::CaseTable &cases,
                                  const Limits &limits, uint32_t constraint_samples)
{
    ProofBundle b;
    const BugType type = spec.candidate.type;

    if (type != BugType::UnusedStack) {
        auto masks = spec.chain.masks();
        if (masks.empty())
            throw Counterexample("constraint", "no constraint stages");
        SubsetCheck c = check_chain_subsets(masks, constraint_samples, spec.id);
        if (!c.sound()) {
            uint32_t input = c.witness ? c.witness->input : ~0u;
            throw Counterexample("constraint", "attack bytes " + le_bytes(input) + " give " +
                                                   hex32(c.witness ? c.witness->value : input));
        }
        b.constraint = c;
    }

    auto allowed = spec.allowed_objects();
    for (const auto &w : trigger.run.audit) {
        if (w.bug_id != spec.id)
            continue;
        bool ok = std::find(allowed.begin(), allowed.end(), w.object) != allowed.end();
        if (ok && type == BugType::OCHeap) {
            uint32_t off = w.address - w.root_base;
            ok = w.size == 1 && ((off >= 16 && off < 20) || (off >= 24 && off < 32));
        }
        if (!ok)
            throw Counterexample("write-audit", "store to " + hex32(w.address) + " (" + w.object + ")");
        ++b.audited_writes;
        if (std::find(b.audited_objects.begin(), b.audited_objects.end(), w.object) == b.audited_objects.end())
            b.audited_objects.push_back(w.object);
    }
    // The attack point may run more than once before the fault; each run
    // writes exactly the planned bytes.
    if (type != BugType::OCHeap && (b.audited_writes == 0 || b.audited_writes % spec.overflow_length != 0))
        throw Counterexample("write-audit", std::to_string(b.audited_writes) + " injected stores, expected a multiple of " +
                                                std::to_string(spec.overflow_length));
    b.write_audit = b.audited_writes > 0;

    if (type == BugType::OCHeap) {
        HeapReference ref{cases.depth, cases.rows.size(), cases.count(heap::Outcome::Abort),
                          cases.count(heap::Outcome::CorruptionEscaped)};
        if (ref.escaped > 0 || !cases.corrupted)
            throw Counterexample("heap", std::to_string(ref.escaped) + " escaping case rows");
        b.heap = ref;
    }

    if (type == BugType::UnusedStack) {
        auto leaked = [&](const RunResult &r) {
            return r.synthetic_in_branches.count(spec.id) || r.synthetic_in_output.count(spec.id);
        };
        if (leaked(trigger.run))
            throw Counterexample("taint", "overwritten dummy bytes reach a branch or output on the trigger input");
        RunOptions opt;
        opt.limits = limits;
        opt.trace = TraceLevel::None;
        opt.audit = true;
        b.taint_runs = 1;
        for (const auto &in : clean_inputs) {
            try {
                if (leaked(run(transformed, in, opt)))
                    throw Counterexample("taint", "overwritten dummy bytes escape on a clean input");
            } catch (const RuntimeError &) {
                // clean equivalence reports these
            }
            ++b.taint_runs;
        }
        b.taint_non_escape = true;
    }
    return b;
}

Classification classify(const FaultReport &fault)
{
    switch (fault.kind) {
    case FaultKind::AllocatorAbort:
        return {"EXPLOITABLE_MIMIC", "heap metadata corruption detected by the allocator (" + fault.assertion + ")"};
    case FaultKind::WriteUnmapped:
        return {"EXPLOITABLE_MIMIC", "write to unmapped " + hex32(fault.address) + " at the destination operand"};
    case FaultKind::ReadUnmapped:
        return {"EXPLOITABLE_MIMIC", "access violation at " + hex32(fault.address) + " through a restored frame pointer"};
    case FaultKind::PcUnmapped:
        return {"PROBABLY_EXPLOITABLE_MIMIC", "program counter " + hex32(fault.address) + " near NULL"};
    case FaultKind::DivZeroMarker:
        return {"ABORT", "divide-by-zero marker"};
    }
    return {"ABORT", "unknown fault"};
}

BugValidation validate_bug(const ValidationInputs &in, size_t i)
{
    const BugSpec &spec = in.specs->at(i);
    BugValidation v;
    v.id = spec.id;
    TriggerOutcome t = validate_trigger(*in.transformed, in.triggers->at(i), spec, in.limits);
    v.fault = t.fault;
    v.reason = t.reason;
    if (!t.ok)
        return v;
    try {
        v.proofs = prove_non_exploitable(*in.transformed, spec, t, *in.clean, *in.cases, in.limits,
                                         in.constraint_samples);
    } catch (const Counterexample &c) {
        v.counterexample = c;
        v.reason = c.what();
        return v;
    }
    if (!v.proofs->complete(spec.candidate.type)) {
        v.reason = "incomplete proof bundle";
        return v;
    }
    if (t.fault)
        v.classification = classify(*t.fault);
    v.validated = true;
    return v;
}

std::vector<BugValidation> validate_bugs(const ValidationInputs &in)
{
    const auto n = static_cast<int64_t>(in.specs->size());
    std::vector<BugValidation> out(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] = validate_bug(in, static_cast<size_t>(i));
    return out;
}

std::vector<BugValidation> validate_bugs_serial(const ValidationInputs &in)
{
    std::vector<BugValidation> out;
    for (size_t i = 0; i < in.specs->size(); ++i)
        out.push_back(validate_bug(in, i));
    return out;
}

std::vector<double> success_curve(const std::vector<std::optional<uint32_t>> &first_success, uint32_t cap)
{
    std::vector<double> curve(cap, 0.0);
    if (first_success.empty())
        return curve;
    for (uint32_t k = 1; k <= cap; ++k) {
        size_t hits = 0;
        for (const auto &s : first_success)
            hits += s && *s <= k;
        curve[k - 1] = static_cast<double>(hits) / static_cast<double>(first_success.size());
    }
    return curve;
}

} // namespace chaff

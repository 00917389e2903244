#include "chaff/dua.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "rng.hpp"
#include "sema.hpp"
#include "chaff/frontend.hpp"
#include "chaff/heap.hpp"

namespace chaff {

std::vector<Label> DuaRecord::labels() const
{
    std::set<Label> s;
    for (const auto &t : taint)
        s.insert(t.begin(), t.end());
    return {s.begin(), s.end()};
}

std::string to_string(AtpKind k)
{
    return k == AtpKind::StackFrameSite ? "StackFrameSite" : "HeapAdjacentSite";
}

std::string to_string(BugType t)
{
    switch (t) {
    case BugType::OCStack: return "oc-stack";
    case BugType::OCHeap: return "oc-heap";
    case BugType::UnusedStack: return "unused-stack";
    }
    return "?";
}

std::string to_string(StackTarget t)
{
    return t == StackTarget::SavedFP ? "saved-fp" : "return-address";
}

uint32_t Quotas::of(BugType t) const
{
    switch (t) {
    case BugType::OCStack: return oc_stack;
    case BugType::OCHeap: return oc_heap;
    case BugType::UnusedStack: return unused_stack;
    }
    return 0;
}

namespace {

constexpr size_t kInstancesPerSite = 8;

// Call depth after each event.
std::vector<uint32_t> depths(const Trace &trace)
{
    std::vector<uint32_t> d(trace.events.size());
    uint32_t cur = 0;
    for (size_t i = 0; i < trace.events.size(); ++i) {
        if (std::holds_alternative<CallEnter>(trace.events[i]))
            ++cur;
        else if (std::holds_alternative<Return>(trace.events[i]))
            --cur;
        d[i] = cur;
    }
    return d;
}

bool consecutive_copy(const LvalueObserved &o)
{
    if (o.width != 4)
        return false;
    for (uint32_t i = 0; i < 4; ++i) {
        if (o.taint[i].size() != 1 || o.tcn[i] != 0)
            return false;
        if (o.taint[i][0] != o.taint[0][0] + i || o.taint[i][0] >= kSyntheticLabel)
            return false;
    }
    return true;
}

} // namespace

DuaScan find_duas(const Trace &trace, const Thresholds &th)
{
    DuaScan out;
    const auto &ev = trace.events;
    auto depth = depths(trace);

    // Next StmtEnter of each node after a given index, found by scanning
    // forward from the end.
    std::vector<size_t> next_same(ev.size(), SIZE_MAX);
    {
        std::unordered_map<NodeId, size_t> seen;
        for (size_t i = ev.size(); i-- > 0;)
            if (const auto *s = std::get_if<StmtEnter>(&ev[i])) {
                auto it = seen.find(s->node);
                next_same[i] = it == seen.end() ? SIZE_MAX : it->second;
                seen[s->node] = i;
            }
    }

    std::unordered_map<Label, uint32_t> live;
    std::unordered_map<NodeId, size_t> last_enter;
    std::map<std::tuple<NodeId, bool, std::string>, size_t> per_site;

    for (size_t i = 0; i < ev.size(); ++i) {
        if (const auto *b = std::get_if<BranchEval>(&ev[i])) {
            for (Label l : b->taint)
                ++live[l];
            continue;
        }
        if (const auto *s = std::get_if<StmtEnter>(&ev[i])) {
            last_enter[s->node] = i;
            continue;
        }
        const auto *o = std::get_if<LvalueObserved>(&ev[i]);
        if (!o)
            continue;

        auto reject = [&](const char *why) { out.rejected.push_back({i, o->path, why}); };
        if (!o->initialized) {
            reject("uninitialized");
            continue;
        }
        if (!o->siphonable) {
            reject("not-siphonable");
            continue;
        }
        if (o->max_tcn() > th.tcn_max) {
            reject("complicated");
            continue;
        }
        std::vector<uint32_t> liveness;
        bool dead = true;
        for (const auto &t : o->taint) {
            uint32_t m = 0;
            for (Label l : t)
                if (auto it = live.find(l); it != live.end())
                    m = std::max(m, it->second);
            liveness.push_back(m);
            dead = dead && m <= th.liveness_max;
        }
        if (!dead) {
            reject("live");
            continue;
        }

        DuaRecord d;
        d.trace_index = i;
        d.stmt = o->stmt;
        d.function = o->function;
        d.path = o->path;
        d.width = o->width;
        d.taint = o->taint;
        d.max_tcn = o->max_tcn();
        d.liveness = std::move(liveness);
        d.evidence_index = o->evidence_index;
        d.string_offset = o->string_offset;
        d.offset = o->offset;
        d.siphon_anchor = o->siphon_anchor;
        d.siphon_after = o->siphon_after;
        d.trigger_capable = consecutive_copy(*o);

        if (o->in_decl_init) {
            // runs at the function's first statement
            size_t j = i + 1;
            while (j < ev.size()) {
                const auto *s = std::get_if<StmtEnter>(&ev[j]);
                if (s && s->node == d.siphon_anchor && depth[j] == depth[i])
                    break;
                ++j;
            }
            if (j == ev.size())
                continue;
            d.siphon_done = j;
            d.superseded_at = next_same[j];
        } else if (o->siphon_after) {
            size_t j = i + 1;
            while (j < ev.size()) {
                if (std::holds_alternative<StmtEnter>(ev[j]) && depth[j] == depth[i])
                    break;
                if (std::holds_alternative<Return>(ev[j]) && depth[j] + 1 == depth[i])
                    break;
                ++j;
            }
            d.siphon_done = j;
            auto it = last_enter.find(d.siphon_anchor);
            d.superseded_at = it == last_enter.end() ? SIZE_MAX : next_same[it->second];
        } else {
            auto it = last_enter.find(d.siphon_anchor);
            if (it == last_enter.end())
                continue;
            d.siphon_done = it->second;
            d.superseded_at = next_same[it->second];
        }

        auto key = std::make_tuple(d.siphon_anchor, d.siphon_after, d.path.text());
        if (per_site[key]++ >= kInstancesPerSite)
            continue;
        out.accepted.push_back(std::move(d));
    }
    return out;
}

std::vector<AttackPoint> find_attack_points(const Trace &trace, const Program &program)
{
    sema::Info info(program);
    const auto &ev = trace.events;
    size_t first_read = trace.first_input_read();

    // Local and parameter name ids per function.
    std::unordered_map<std::string, std::set<uint32_t>> own_names;
    for (const auto &fi : info.functions()) {
        auto &s = own_names[fi.fn->name];
        for (const auto *d : fi.locals)
            s.insert(info.name_id(d->name));
        for (const auto &p : fi.fn->params)
            s.insert(info.name_id(p.name));
    }
    auto touches = [&](const std::string &fn, NodeId stmt) {
        const sema::FuncInfo *fi = info.function(fn);
        if (!fi)
            return false;
        auto it = fi->stmts.find(stmt);
        if (it == fi->stmts.end())
            return false;
        const auto &names = own_names[fn];
        return std::any_of(it->second.mentions.begin(), it->second.mentions.end(),
                           [&](uint32_t n) { return names.count(n) > 0; });
    };

    // The statement a call returns into has already read its operands; only
    // a store into a local (assignment or initializer) still goes through
    // the frame pointer.
    auto stores_local_after_call = [&](const std::string &fn, NodeId stmt) {
        const Stmt *st = find_stmt(program, stmt);
        const sema::FuncInfo *fi = info.function(fn);
        if (!st || !fi)
            return false;
        const auto &names = own_names[fn];
        std::function<bool(const Expr &)> mentions = [&](const Expr &e) {
            if (e.kind == ExprKind::Ident && names.count(info.name_id(e.text)))
                return true;
            return std::any_of(e.kids.begin(), e.kids.end(), mentions);
        };
        if (st->kind == StmtKind::Decl)
            return st->decl.has_value();
        if (st->kind != StmtKind::Expr || st->exprs.empty() || st->exprs[0].kind != ExprKind::Assign)
            return false;
        return mentions(st->exprs[0].kids[0]);
    };

    std::vector<uint32_t> heap_after(ev.size() + 1, 0);
    for (size_t i = ev.size(); i-- > 0;)
        heap_after[i] = heap_after[i + 1] +
                        (std::holds_alternative<HeapAlloc>(ev[i]) || std::holds_alternative<HeapFree>(ev[i]) ? 1 : 0);
    std::vector<heap::RecordedOp> heap_ops;
    for (const auto &e : ev)
        if (const auto *a = std::get_if<HeapAlloc>(&e))
            heap_ops.push_back({true, a->address, a->size});
        else if (const auto *f = std::get_if<HeapFree>(&e))
            heap_ops.push_back({false, f->address, 0});

    struct Activation {
        const CallEnter *enter;
        size_t id;
        NodeId cur = kNoNode;
        std::vector<size_t> waiting;   // returned callee activations, caller not yet touched
    };
    std::vector<Activation> stack;
    std::vector<bool> touched;         // by activation id
    std::vector<std::pair<size_t, size_t>> stack_atps;   // (atp index, activation id)
    std::set<NodeId> seen;
    std::vector<AttackPoint> out;

    for (size_t i = 0; i < ev.size(); ++i) {
        if (const auto *c = std::get_if<CallEnter>(&ev[i])) {
            stack.push_back({c, touched.size(), kNoNode, {}});
            touched.push_back(false);
        } else if (std::holds_alternative<Return>(ev[i])) {
            size_t done = stack.back().id;
            stack.pop_back();
            if (!stack.empty()) {
                Activation &caller = stack.back();
                if (stores_local_after_call(caller.enter->layout.function, caller.cur))
                    touched[done] = true;
                else
                    caller.waiting.push_back(done);
            }
        } else if (const auto *s = std::get_if<StmtEnter>(&ev[i])) {
            Activation &a = stack.back();
            a.cur = s->node;
            if (!a.waiting.empty() && touches(a.enter->layout.function, s->node)) {
                for (size_t w : a.waiting)
                    touched[w] = true;
                a.waiting.clear();
            }
            if (i < first_read || !seen.insert(s->node).second)
                continue;
            AttackPoint p;
            p.trace_index = i;
            p.anchor = s->node;
            p.function = s->function;
            for (const auto &fr : stack) {
                p.chain.push_back(fr.enter->layout.function);
                p.chain_indirect.push_back(fr.enter->indirect);
            }
            p.layout = a.enter->layout;
            p.geometry = frame_geometry(p.layout);
            p.indirect_reachable = a.enter->indirect;
            p.later_heap_ops = heap_after[i];
            stack_atps.emplace_back(out.size(), a.id);
            out.push_back(p);
            // A heap site needs a later allocator call that trips over the
            // corrupted successor header.
            if (p.later_heap_ops > 0 &&
                heap::overflow_aborts(heap_ops, heap_ops.size() - p.later_heap_ops, heap::OverflowValues{}, kHeapBase,
                                      Limits{}.heap_bytes)) {
                p.kind = AtpKind::HeapAdjacentSite;
                out.push_back(p);
            }
        }
    }
    for (auto [idx, act] : stack_atps)
        out[idx].caller_touches_locals = touched[act];
    return out;
}

bool dua_reaches(const DuaRecord &dua, const AttackPoint &atp)
{
    if (dua.trace_index >= atp.trace_index || atp.trace_index >= dua.superseded_at)
        return false;
    return dua.siphon_after ? atp.trace_index >= dua.siphon_done : atp.trace_index > dua.siphon_done;
}

size_t anchors_between(const Trace &trace, const DuaRecord &dua, const AttackPoint &atp)
{
    size_t n = 0;
    for (size_t i = dua.siphon_done + 1; i < atp.trace_index && i < trace.events.size(); ++i)
        n += std::holds_alternative<StmtEnter>(trace.events[i]);
    return n;
}

std::vector<BugCandidate> pair_candidates(const Trace &trace, const std::vector<DuaRecord> &duas,
                                          const std::vector<AttackPoint> &atps, const PairPolicy &policy)
{
    std::vector<size_t> stmt_prefix(trace.events.size() + 1, 0);
    for (size_t i = 0; i < trace.events.size(); ++i)
        stmt_prefix[i + 1] = stmt_prefix[i] + std::holds_alternative<StmtEnter>(trace.events[i]);
    auto between = [&](const DuaRecord &d, const AttackPoint &a) -> size_t {
        size_t lo = d.siphon_done + 1, hi = a.trace_index;
        return hi > lo ? stmt_prefix[hi] - stmt_prefix[lo] : 0;
    };
    std::vector<std::vector<Label>> labels;
    for (const auto &d : duas)
        labels.push_back(d.labels());
    auto disjoint = [&](size_t a, size_t b) {
        const auto &x = labels[a], &y = labels[b];
        std::vector<Label> common;
        std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
        return common.empty();
    };

    // First branch each input byte steers. Pairs whose bytes steer nothing
    // before the attack point are tried first: rewriting them cannot change
    // the path to it.
    std::map<Label, size_t> first_branch;
    for (size_t i = 0; i < trace.events.size(); ++i)
        if (const auto *b = std::get_if<BranchEval>(&trace.events[i]))
            for (Label l : b->taint)
                first_branch.emplace(l, i);
    auto quiet = [&](size_t d, size_t before) {
        for (Label l : labels[d]) {
            auto it = first_branch.find(l);
            if (it != first_branch.end() && it->second < before)
                return false;
        }
        return true;
    };

    std::vector<BugCandidate> out;
    for (BugType type : {BugType::OCStack, BugType::OCHeap, BugType::UnusedStack}) {
        uint32_t want = policy.quotas.of(type);
        if (want == 0)
            continue;
        std::mt19937_64 rng(detail::mix_seed(policy.seed, static_cast<uint64_t>(type)));
        AtpKind kind = type == BugType::OCHeap ? AtpKind::HeapAdjacentSite : AtpKind::StackFrameSite;

        std::vector<std::vector<BugCandidate>> usable;
        for (size_t a = 0; a < atps.size(); ++a) {
            const AttackPoint &atp = atps[a];
            if (atp.kind != kind)
                continue;
            std::vector<size_t> reach;
            for (size_t d = 0; d < duas.size(); ++d)
                if (dua_reaches(duas[d], atp))
                    reach.push_back(d);
            std::vector<std::pair<size_t, std::optional<size_t>>> pairs;
            for (size_t t : reach) {
                if (!duas[t].trigger_capable)
                    continue;
                bool any_attack = false;
                for (size_t k : reach) {
                    if (k == t || !disjoint(t, k))
                        continue;
                    if (type != BugType::UnusedStack && between(duas[k], atp) < policy.min_anchors)
                        continue;
                    pairs.emplace_back(t, k);
                    any_attack = true;
                }
                if (type == BugType::UnusedStack && !any_attack)
                    pairs.emplace_back(t, std::nullopt);
            }
            if (pairs.empty())
                continue;
            detail::seeded_shuffle(pairs, rng);
            // Bytes that steer nothing at all first, then nothing before the
            // attack point, then the rest.
            auto rank = [&](const std::pair<size_t, std::optional<size_t>> &p) {
                auto both = [&](size_t before) {
                    return quiet(p.first, before) && (!p.second || quiet(*p.second, before));
                };
                return both(SIZE_MAX) ? 0 : both(atp.trace_index) ? 1 : 2;
            };
            std::stable_sort(pairs.begin(), pairs.end(),
                             [&](const auto &x, const auto &y) { return rank(x) < rank(y); });
            if (pairs.size() > policy.retries)
                pairs.resize(policy.retries);

            StackTarget target = StackTarget::ReturnAddress;
            if (type == BugType::OCStack && atp.caller_touches_locals && (rng() & 1))
                target = StackTarget::SavedFP;
            std::vector<BugCandidate> tries;
            for (auto [t, k] : pairs) {
                BugCandidate c;
                c.type = type;
                c.target = target;
                c.trigger = t;
                c.attack = k;
                c.atp = a;
                c.seed_input = policy.seed_input;
                tries.push_back(c);
            }
            usable.push_back(std::move(tries));
        }
        if (usable.size() < want)
            throw QuotaInfeasible(type, usable.size());
        detail::seeded_shuffle(usable, rng);
        std::stable_partition(usable.begin(), usable.end(), [&](const std::vector<BugCandidate> &tries) {
            const BugCandidate &c = tries.front();
            size_t before = atps[c.atp].trace_index;
            return quiet(c.trigger, before) && (!c.attack || quiet(*c.attack, before));
        });
        for (auto &tries : usable)
            out.insert(out.end(), tries.begin(), tries.end());
    }
    return out;
}

} // namespace chaff

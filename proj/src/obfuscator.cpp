#include "chaff/obfuscator.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "rng.hpp"

namespace chaff {

std::vector<uint32_t> ConstraintChain::masks() const
{
    std::vector<uint32_t> out;
    for (const auto &s : stages)
        out.push_back(s.mask);
    return out;
}

std::vector<uint32_t> plan_masks(uint32_t k, uint64_t seed)
{
    if (k == 0)
        throw std::invalid_argument("constraint chain needs at least one stage");
    if (k == 1)
        return {0};
    if (k == 2)
        return {0x0000FFFFu, 0xFFFF0000u};
    std::mt19937_64 rng(detail::mix_seed(seed, 0x6d61736b));
    std::vector<uint32_t> cleared(k, 0);
    for (uint32_t bit = 0; bit < 32; ++bit)
        cleared[rng() % k] |= 1u << bit;
    std::vector<uint32_t> masks;
    for (uint32_t c : cleared)
        masks.push_back(~c);
    return masks;
}

std::vector<StageAnchor> stage_anchor_candidates(const Trace &trace, const DuaRecord &attack, const AttackPoint &atp)
{
    std::vector<StageAnchor> out;
    std::set<NodeId> seen;
    for (size_t i = attack.siphon_done + 1; i < atp.trace_index && i < trace.events.size(); ++i) {
        const auto *s = std::get_if<StmtEnter>(&trace.events[i]);
        if (!s || s->node == atp.anchor || s->node == attack.siphon_anchor || !seen.insert(s->node).second)
            continue;
        out.push_back({s->node, s->function, i});
    }
    return out;
}

ConstraintChain plan_constraint_chain(const std::vector<StageAnchor> &path, uint32_t k, uint64_t seed,
                                      uint32_t bug_id)
{
    if (k == 0)
        throw std::invalid_argument("constraint chain needs at least one stage");
    if (path.size() < k)
        throw NotEnoughAnchors(k, path.size());

    // First anchor of each function in path order, then evenly spaced fill.
    std::vector<size_t> picked;
    std::set<std::string> fns;
    for (size_t i = 0; i < path.size() && picked.size() < k; ++i)
        if (fns.insert(path[i].function).second)
            picked.push_back(i);
    for (size_t step = 0; picked.size() < k; ++step) {
        size_t i = (step * path.size()) / k;
        while (std::find(picked.begin(), picked.end(), i) != picked.end())
            i = (i + 1) % path.size();
        picked.push_back(i);
    }
    std::sort(picked.begin(), picked.end());

    auto masks = plan_masks(k, detail::mix_seed(seed, bug_id));
    ConstraintChain chain;
    for (uint32_t j = 0; j < k; ++j)
        chain.stages.push_back(
            {path[picked[j]], "lava_c" + std::to_string(j + 1) + "_" + std::to_string(bug_id), masks[j]});
    return chain;
}

uint32_t fold_stages(const std::vector<uint32_t> &masks, const std::vector<uint8_t> &order, uint32_t input)
{
    uint32_t globals[32] = {};
    for (uint8_t j : order)
        globals[j] = input & masks[j];
    uint32_t v = ~0u;
    for (size_t j = 0; j < masks.size(); ++j)
        v &= globals[j];
    return v;
}

namespace {

std::vector<std::vector<uint8_t>> orderings(size_t k)
{
    if (k > 16)
        throw std::invalid_argument("too many constraint stages to enumerate");
    std::vector<std::vector<uint8_t>> out;
    for (uint32_t subset = 0; subset < (1u << k); ++subset) {
        std::vector<uint8_t> order;
        for (uint8_t j = 0; j < k; ++j)
            if (subset & (1u << j))
                order.push_back(j);
        if (k > 5) {
            out.push_back(order);
            continue;
        }
        do
            out.push_back(order);
        while (std::next_permutation(order.begin(), order.end()));
    }
    return out;
}

std::vector<uint32_t> sample_inputs(uint32_t samples, uint64_t seed)
{
    std::vector<uint32_t> in = {0u, ~0u};
    std::mt19937_64 rng(detail::mix_seed(seed, 0x696e70));
    for (uint32_t i = 0; i < samples; ++i)
        in.push_back(static_cast<uint32_t>(rng()));
    return in;
}

SubsetCheck prepare(const std::vector<uint32_t> &masks, size_t orders, size_t inputs)
{
    SubsetCheck c;
    c.algebraic_zero = std::accumulate(masks.begin(), masks.end(), ~0u, std::bit_and<uint32_t>()) == 0;
    c.orderings = orders;
    c.inputs = inputs;
    c.evaluations = static_cast<uint64_t>(orders) * inputs;
    return c;
}

void set_witness(SubsetCheck &c, const std::vector<uint32_t> &masks, const std::vector<std::vector<uint8_t>> &ords,
                 const std::vector<uint32_t> &in, uint64_t flat)
{
    SubsetWitness w;
    w.order = ords[flat / in.size()];
    w.input = in[flat % in.size()];
    w.value = fold_stages(masks, w.order, w.input);
    c.witness = w;
}

} // namespace

SubsetCheck check_chain_subsets(const std::vector<uint32_t> &masks, uint32_t samples, uint64_t seed)
{
    auto ords = orderings(masks.size());
    auto in = sample_inputs(samples, seed);
    SubsetCheck c = prepare(masks, ords.size(), in.size());

    const int64_t total = static_cast<int64_t>(c.evaluations);
    const int64_t width = static_cast<int64_t>(in.size());
    int64_t first_bad = total;
#pragma omp parallel for schedule(static) reduction(min : first_bad)
    for (int64_t flat = 0; flat < total; ++flat) {
        if (flat >= first_bad)
            continue;
        if (fold_stages(masks, ords[flat / width], in[flat % width]) != 0)
            first_bad = flat;
    }
    if (first_bad < total)
        set_witness(c, masks, ords, in, static_cast<uint64_t>(first_bad));
    return c;
}

SubsetCheck check_chain_subsets_serial(const std::vector<uint32_t> &masks, uint32_t samples, uint64_t seed)
{
    auto ords = orderings(masks.size());
    auto in = sample_inputs(samples, seed);
    SubsetCheck c = prepare(masks, ords.size(), in.size());
    for (uint64_t flat = 0; flat < c.evaluations; ++flat)
        if (fold_stages(masks, ords[flat / in.size()], in[flat % in.size()]) != 0) {
            set_witness(c, masks, ords, in, flat);
            break;
        }
    return c;
}

// ---- fabricated dataflow -------------------------------------------------

namespace {

bool has_prototype(const Program &program, const std::string &name)
{
    for (const auto &item : program.items)
        if (const auto *f = std::get_if<Function>(&item); f && f->name == name && !f->body)
            return true;
    return false;
}

} // namespace

DataflowPlan plan_fake_dataflow(const AttackPoint &atp, uint32_t depth, const Program &program, uint32_t bug_id)
{
    DataflowPlan plan;
    const std::string id = std::to_string(bug_id);
    plan.atp_function = atp.function;
    plan.param = "lava_out_" + id;
    plan.root_local = "lava_root_" + id;
    plan.sink_global = "lava_sink_" + id;
    if (depth == 0)
        return plan;

    auto taken = address_taken_functions(program);
    auto eligible = [&](const std::string &fn) {
        return fn != "main" && !is_intrinsic(fn) && !has_prototype(program, fn) &&
               std::find(taken.begin(), taken.end(), fn) == taken.end();
    };
    auto degenerate = [&](std::string why) {
        plan.threaded.clear();
        plan.root_function.clear();
        plan.degenerate = true;
        plan.note = std::move(why);
        return plan;
    };

    const auto &chain = atp.chain;
    if (chain.empty() || chain.back() != atp.function)
        return degenerate("no caller chain recorded");
    size_t at = chain.size() - 1;
    if (!eligible(atp.function) || (at < atp.chain_indirect.size() && atp.chain_indirect[at]))
        return degenerate("attack point function is main or reached through a pointer");

    std::vector<std::string> callers;
    std::set<std::string> seen = {atp.function};
    for (size_t i = at; i-- > 0 && callers.size() < depth;) {
        const std::string &fn = chain[i];
        if (!eligible(fn) || !seen.insert(fn).second)
            break;
        callers.push_back(fn);
        if (i < atp.chain_indirect.size() && atp.chain_indirect[i])
            break;   // entered through a pointer: cannot grow its signature
    }
    if (callers.empty())
        return degenerate("no eligible callers");

    plan.threaded.push_back(atp.function);
    plan.threaded.insert(plan.threaded.end(), callers.begin(), callers.end() - 1);
    plan.root_function = callers.back();
    return plan;
}

EditScript dataflow_edits(const DataflowPlan &plan, const Program &program)
{
    EditScript out;
    if (plan.empty())
        return out;
    VarDecl sink = build::var(build::scalar(BaseType::Int), plan.sink_global);
    sink.init = build::int_lit(0);
    out.edits.push_back(InsertGlobal{sink});
    if (plan.degenerate)
        return out;

    const Function *root = program.find_function(plan.root_function);
    if (!root || !root->body)
        throw EditError("dataflow root " + plan.root_function + " has no body");
    out.edits.push_back(InsertDeclaration{root->id, build::var(build::scalar(BaseType::Int), plan.root_local), -1});

    std::set<std::string> threaded(plan.threaded.begin(), plan.threaded.end());
    for (const auto &name : plan.threaded) {
        const Function *f = program.find_function(name);
        if (!f || !f->body)
            throw EditError("dataflow function " + name + " has no body");
        out.edits.push_back(AddParameter{f->id, build::var(build::scalar(BaseType::Int, 1), plan.param)});
        for (const Expr *call : call_sites_of(program, name)) {
            const Function *caller = enclosing_function(program, call->id);
            Expr arg;
            if (caller && threaded.count(caller->name))
                arg = build::ident(plan.param);
            else if (caller && caller->name == plan.root_function)
                arg = build::unary(UnaryOp::AddrOf, build::ident(plan.root_local));
            else
                arg = build::unary(UnaryOp::AddrOf, build::ident(plan.sink_global));
            out.edits.push_back(RewriteCallSite{call->id, std::move(arg)});
        }
    }
    return out;
}

std::optional<Stmt> dataflow_sink(const DataflowPlan &plan, Expr value)
{
    if (plan.empty())
        return std::nullopt;
    Expr target = plan.degenerate ? build::ident(plan.sink_global)
                                  : build::unary(UnaryOp::Deref, build::ident(plan.param));
    return build::expr_stmt(build::assign(std::move(target), std::move(value)));
}

} // namespace chaff

#include "chaff/synth.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <unordered_set>

#include "rng.hpp"
#include "sema.hpp"

namespace chaff {

std::vector<std::string> BugSpec::allowed_objects() const
{
    switch (candidate.type) {
    case BugType::OCStack:
        return {function + (candidate.target == StackTarget::SavedFP ? "#saved-fp" : "#return-address")};
    case BugType::OCHeap:
        return {"heap"};
    case BugType::UnusedStack: {
        std::vector<std::string> out;
        for (const auto &d : dummies)
            out.push_back(function + "." + d.name);
        return out;
    }
    }
    return {};
}

std::optional<FaultKind> BugSpec::expected_fault() const
{
    switch (candidate.type) {
    case BugType::OCStack:
        return candidate.target == StackTarget::ReturnAddress ? FaultKind::PcUnmapped : FaultKind::ReadUnmapped;
    case BugType::OCHeap:
        return FaultKind::AllocatorAbort;
    case BugType::UnusedStack:
        if (crash_marker)
            return FaultKind::DivZeroMarker;
        return std::nullopt;
    }
    return std::nullopt;
}

uint32_t choose_magic(const std::vector<std::string> &corpus, uint64_t seed, const std::set<uint32_t> &avoid)
{
    std::unordered_set<uint32_t> present;
    for (const auto &in : corpus)
        for (size_t i = 0; i + 4 <= in.size(); ++i) {
            uint32_t v = 0;
            for (size_t b = 0; b < 4; ++b)
                v |= static_cast<uint32_t>(static_cast<uint8_t>(in[i + b])) << (8 * b);
            present.insert(v);
        }
    auto usable = [&](uint32_t v) { return v != 0 && !present.count(v) && !avoid.count(v); };

    std::mt19937_64 rng(detail::mix_seed(seed, 0x6d61676963));
    for (int attempt = 0; attempt < 4096; ++attempt) {
        auto v = static_cast<uint32_t>(rng());
        if (usable(v))
            return v;
    }
    // Dense corpus: walk the space from a seeded start.
    const uint32_t start = static_cast<uint32_t>(rng());
    uint32_t v = start;
    do {
        if (usable(v))
            return v;
        ++v;
    } while (v != start);
    throw MagicExhausted();
}

namespace {

Expr member(Expr base, const std::string &field, bool arrow)
{
    Expr e;
    e.kind = ExprKind::Member;
    e.text = field;
    e.arrow = arrow;
    e.kids.push_back(std::move(base));
    return e;
}

Expr ulit(uint32_t v)
{
    return build::int_lit(v, LitStyle::Hex, true);
}

Expr ilit(int64_t v)
{
    return build::int_lit(v);
}

Expr id(const std::string &name)
{
    return build::ident(name);
}

Stmt assign_stmt(Expr l, Expr r)
{
    return build::expr_stmt(build::assign(std::move(l), std::move(r)));
}

Expr and_all(std::vector<Expr> terms)
{
    Expr e = std::move(terms.front());
    for (size_t i = 1; i < terms.size(); ++i)
        e = build::binary(BinaryOp::LogAnd, std::move(e), std::move(terms[i]));
    return e;
}

struct Rebuilt {
    Expr value;
    std::vector<Expr> guards;
};

/// Re-evaluate a DUA path as an expression, collecting the checks that make
/// the re-evaluation safe wherever the siphon lands.
Rebuilt rebuild_path(const sema::Info &info, const DuaRecord &dua)
{
    const sema::FuncInfo *fi = info.function(dua.function);
    const LvaluePath &path = dua.path;
    const TypeSpec *root = nullptr;
    if (fi) {
        for (const auto *l : fi->locals)
            if (l->name == path.root)
                root = &l->type;
        if (!root)
            for (const auto &p : fi->fn->params)
                if (p.name == path.root)
                    root = &p.type;
    }
    if (!root)
        for (const auto *g : info.globals())
            if (g->name == path.root)
                root = &g->type;
    if (!root)
        throw AnchorConflict("cannot resolve DUA root " + path.root + " in " + dua.function);

    Rebuilt r;
    r.value = id(path.root);
    TypeSpec cur = *root;
    for (size_t i = 0; i < path.steps.size(); ++i) {
        const PathStep &s = path.steps[i];
        switch (s.kind) {
        case PathStep::Kind::Dot:
            cur = info.field_type(cur.tag, info.field_index(cur.tag, s.field, {}));
            r.value = member(std::move(r.value), s.field, false);
            break;
        case PathStep::Kind::Arrow:
            r.guards.push_back(build::binary(BinaryOp::Ne, r.value, ilit(0)));
            cur = info.field_type(cur.tag, info.field_index(cur.tag, s.field, {}));
            r.value = member(std::move(r.value), s.field, true);
            break;
        case PathStep::Kind::Index:
            if (!cur.is_array())
                r.guards.push_back(build::binary(BinaryOp::Ne, r.value, ilit(0)));
            if (dua.string_offset && i + 1 == path.steps.size())
                r.guards.push_back(build::binary(BinaryOp::Gt, build::call("strlen", {r.value}),
                                                 ilit(static_cast<int64_t>(s.index))));
            cur = sema::Info::element(cur);
            r.value = build::index(std::move(r.value), ilit(s.index));
            break;
        }
    }
    return r;
}

Stmt siphon_stmt(const sema::Info &info, const DuaRecord &dua, const std::string &global)
{
    Rebuilt r = rebuild_path(info, dua);
    Stmt store = assign_stmt(id(global), build::cast(build::scalar(BaseType::Unsigned), std::move(r.value)));
    if (r.guards.empty())
        return store;
    return build::if_stmt(and_all(std::move(r.guards)), build::block({std::move(store)}));
}

/// target[offset + i] = (char)(value >> 8 * (i % 4)) for i in [0, length)
Stmt byte_loop(const std::string &index, const std::string &target, uint32_t offset, uint32_t length,
               const Expr &value)
{
    Expr i = id(index);
    Expr shift = build::binary(BinaryOp::Mul, ilit(8), build::binary(BinaryOp::Mod, i, ilit(4)));
    Stmt write = assign_stmt(build::index(id(target), build::binary(BinaryOp::Add, ilit(offset), i)),
                             build::cast(build::scalar(BaseType::Char), build::binary(BinaryOp::Shr, value, shift)));
    Stmt step = assign_stmt(i, build::binary(BinaryOp::Add, i, ilit(1)));
    return build::block({assign_stmt(i, ilit(0)),
                         build::while_stmt(build::binary(BinaryOp::Lt, i, ilit(length)),
                                           build::block({std::move(write), std::move(step)}))});
}

VarDecl global_zero(BaseType base, const std::string &name)
{
    VarDecl d = build::var(build::scalar(base), name);
    d.init = build::int_lit(0);
    return d;
}

const Function &function_named(const Program &p, const std::string &name)
{
    const Function *f = p.find_function(name);
    if (!f || !f->body)
        throw AnchorConflict("attack point function " + name + " has no body");
    return *f;
}

void require_stmt(const Program &p, NodeId node, const char *what)
{
    if (!find_stmt(p, node))
        throw AnchorConflict(std::string(what) + " anchor " + std::to_string(node) + " is not a statement");
}

} // namespace

Synthesis synthesize(const Program &program, const std::vector<PlannedBug> &bugs, const SynthConfig &config)
{
    sema::Info info(program);
    Synthesis out;
    EditScript &script = out.script;

    // Phase 1: names, globals, declarations, siphons, stages, dataflow.
    for (const auto &bug : bugs) {
        const std::string n = std::to_string(bug.id);
        const AttackPoint &atp = bug.atp;
        const Function &fn = function_named(program, atp.function);
        require_stmt(program, atp.anchor, "attack point");

        BugSpec spec;
        spec.id = bug.id;
        spec.candidate = bug.candidate;
        spec.function = atp.function;
        spec.atp_anchor = atp.anchor;
        spec.magic = bug.magic;
        spec.trigger_global = "lava_trig_" + n;
        spec.crash_marker = config.crash_marker && bug.candidate.type == BugType::UnusedStack;

        script.edits.push_back(InsertGlobal{global_zero(BaseType::Unsigned, spec.trigger_global)});
        if (bug.attack) {
            spec.attack_global = "lava_atk_" + n;
            script.edits.push_back(InsertGlobal{global_zero(BaseType::Unsigned, spec.attack_global)});
        }

        auto add_siphon = [&](const DuaRecord &d, const std::string &global) {
            require_stmt(program, d.siphon_anchor, "siphon");
            script.edits.push_back(InsertStatement{d.siphon_anchor, d.siphon_after ? InsertPos::After : InsertPos::Before,
                                                   siphon_stmt(info, d, global)});
        };
        add_siphon(bug.trigger, spec.trigger_global);
        if (bug.attack)
            add_siphon(*bug.attack, spec.attack_global);

        const auto i_decl = build::var(build::scalar(BaseType::Int), "lava_i_" + n);
        switch (bug.candidate.type) {
        case BugType::OCStack:
        case BugType::OCHeap: {
            if (!bug.attack)
                throw AnchorConflict("overconstrained bug " + n + " has no attack DUA");
            spec.chain = plan_constraint_chain(bug.stage_path, config.stages, config.seed, bug.id);
            for (const auto &st : spec.chain.stages) {
                script.edits.push_back(InsertGlobal{global_zero(BaseType::Unsigned, st.global)});
                script.edits.push_back(InsertStatement{
                    st.anchor.node, InsertPos::Before,
                    assign_stmt(id(st.global), build::binary(BinaryOp::BitAnd, id(spec.attack_global), ulit(st.mask)))});
            }
            script.edits.push_back(InsertDeclaration{fn.id, i_decl, -1});
            if (bug.candidate.type == BugType::OCStack) {
                spec.buffer = "lava_buf_" + n;
                spec.buffer_size = 4;
                spec.overflow_length = 4;
                script.edits.push_back(
                    InsertDeclaration{fn.id, build::var(build::array(BaseType::Char, spec.buffer_size), spec.buffer), -1});
            } else {
                spec.buffer = "lava_h_" + n;
                spec.alloc_size = 24;
                spec.overflow_offset = 16;
                spec.overflow_length = 16;
                script.edits.push_back(
                    InsertDeclaration{fn.id, build::var(build::scalar(BaseType::Char, 1), spec.buffer), -1});
            }
            break;
        }
        case BugType::UnusedStack: {
            spec.buffer = "lava_buf_" + n;
            spec.buffer_size = 8;
            spec.dummies = {{"lava_d0_" + n, 8}, {"lava_d1_" + n, 8}};
            spec.overflow_offset = spec.buffer_size;
            spec.overflow_length = 16;
            // Declared first so they sit above the buffer; the index local
            // goes last so the buffer never borders the copied arguments.
            script.edits.push_back(InsertDeclaration{fn.id, build::var(build::array(BaseType::Int, 2), spec.dummies[0].name), 0});
            script.edits.push_back(InsertDeclaration{fn.id, build::var(build::array(BaseType::Int, 2), spec.dummies[1].name), 1});
            script.edits.push_back(
                InsertDeclaration{fn.id, build::var(build::array(BaseType::Char, spec.buffer_size), spec.buffer), 2});
            script.edits.push_back(InsertDeclaration{fn.id, i_decl, -1});
            spec.dataflow = plan_fake_dataflow(atp, config.dataflow_depth, program, bug.id);
            script.append(dataflow_edits(spec.dataflow, program));
            break;
        }
        }
        out.specs.push_back(std::move(spec));
    }

    // Phase 2: geometry from the layout after every declaration and parameter.
    Program declared = apply_edits(program, script);
    sema::Info after(declared);
    for (auto &spec : out.specs) {
        const sema::FuncInfo *fi = after.function(spec.function);
        if (!fi)
            throw GeometryUnavailable("no layout for " + spec.function);
        const FrameLayout &layout = fi->layout;
        const std::string n = std::to_string(spec.id);
        const std::string index = "lava_i_" + n;
        std::vector<Stmt> body;

        switch (spec.candidate.type) {
        case BugType::OCStack: {
            const FrameSlot *buf = layout.local(spec.buffer);
            if (!buf)
                throw GeometryUnavailable("buffer " + spec.buffer + " missing from " + spec.function);
            uint32_t end = buf->offset + buf->size;
            uint32_t target = spec.candidate.target == StackTarget::SavedFP ? layout.saved_fp_offset
                                                                            : layout.return_address_offset;
            spec.target_distance = target - end;
            spec.copied_args_skip = layout.copied_args_size;
            spec.overflow_offset = spec.buffer_size + spec.target_distance;
            Expr final_value = id(spec.chain.stages.front().global);
            for (size_t j = 1; j < spec.chain.stages.size(); ++j)
                final_value = build::binary(BinaryOp::BitAnd, std::move(final_value), id(spec.chain.stages[j].global));
            body.push_back(byte_loop(index, spec.buffer, spec.overflow_offset, spec.overflow_length, final_value));
            break;
        }
        case BugType::OCHeap: {
            Expr final_value = id(spec.chain.stages.front().global);
            for (size_t j = 1; j < spec.chain.stages.size(); ++j)
                final_value = build::binary(BinaryOp::BitAnd, std::move(final_value), id(spec.chain.stages[j].global));
            const auto &hv = spec.heap_values;
            auto word = [&](uint32_t offset, uint32_t v) {
                return byte_loop(index, spec.buffer, offset, 4, build::binary(BinaryOp::BitOr, ulit(v), final_value));
            };
            body.push_back(assign_stmt(id(spec.buffer), build::call("malloc", {ilit(spec.alloc_size)})));
            body.push_back(build::if_stmt(build::binary(BinaryOp::Ne, id(spec.buffer), ilit(0)),
                                          build::block({word(16, hv.fake_size), word(24, hv.prev_size), word(28, hv.size)})));
            break;
        }
        case BugType::UnusedStack: {
            const FrameSlot *buf = layout.local(spec.buffer);
            const FrameSlot *d0 = layout.local(spec.dummies[0].name);
            const FrameSlot *d1 = layout.local(spec.dummies[1].name);
            if (!buf || !d0 || !d1 || d1->offset != buf->offset + buf->size || d0->offset != d1->offset + d1->size)
                throw GeometryUnavailable("dummies of bug " + n + " are not adjacent to its buffer");
            Expr payload = id(spec.attack_global.empty() ? spec.trigger_global : spec.attack_global);
            body.push_back(byte_loop(index, spec.buffer, spec.overflow_offset, spec.overflow_length, payload));
            if (auto sink = dataflow_sink(spec.dataflow, build::index(id(spec.dummies[0].name), ilit(0))))
                body.push_back(std::move(*sink));
            if (spec.crash_marker)
                body.push_back(assign_stmt(id(index), build::binary(BinaryOp::Div, id(index),
                                                                    build::binary(BinaryOp::Sub, id(index), id(index)))));
            break;
        }
        }
        Stmt trigger = build::if_stmt(build::binary(BinaryOp::Eq, id(spec.trigger_global), ulit(spec.magic)),
                                      build::block(std::move(body)));
        script.edits.push_back(InsertStatement{spec.atp_anchor, InsertPos::Before, std::move(trigger)});
    }

    out.transformed = apply_edits(program, script);
    return out;
}

namespace {

std::vector<NodeId> statement_sequence(const Trace &trace, size_t limit)
{
    std::vector<NodeId> out;
    for (size_t i = 0; i < trace.events.size() && out.size() < limit; ++i)
        if (const auto *s = std::get_if<StmtEnter>(&trace.events[i]))
            out.push_back(s->node);
    return out;
}

} // namespace

TriggerInput make_trigger_input(const Program &original, const std::string &seed_input, const PlannedBug &bug,
                                const Trace &seed_trace, const Limits &limits)
{
    if (!bug.trigger.trigger_capable)
        throw BytesNotIndependent("trigger DUA is not a copy of four consecutive input bytes");
    size_t stmts_to_atp = 0;
    for (size_t i = 0; i <= bug.atp.trace_index && i < seed_trace.events.size(); ++i)
        stmts_to_atp += std::holds_alternative<StmtEnter>(seed_trace.events[i]);
    const auto expected = statement_sequence(seed_trace, stmts_to_atp);

    auto attempt = [&](bool fill_attack) -> std::optional<TriggerInput> {
        TriggerInput t;
        t.bug_id = bug.id;
        t.bytes = seed_input;
        std::set<uint32_t> touched;
        uint32_t first = bug.trigger.first_label();
        if (first + 4 > t.bytes.size())
            return std::nullopt;
        for (uint32_t b = 0; b < 4; ++b) {
            t.bytes[first + b] = static_cast<char>((bug.magic >> (8 * b)) & 0xFF);
            touched.insert(first + b);
        }
        if (fill_attack && bug.attack)
            for (Label l : bug.attack->labels())
                if (l < t.bytes.size() && !touched.count(l)) {
                    t.bytes[l] = static_cast<char>(0xFF);
                    touched.insert(l);
                }
        for (uint32_t off : touched)
            if (t.bytes[off] != seed_input[off])
                t.modified.push_back(off);

        RunOptions opt;
        opt.limits = limits;
        opt.trace = TraceLevel::Statements;
        RunResult r;
        try {
            r = run(original, t.bytes, opt);
        } catch (const RuntimeError &) {
            return std::nullopt;
        }
        if (statement_sequence(r.trace, stmts_to_atp) != expected)
            return std::nullopt;
        return t;
    };

    if (auto t = attempt(true))
        return *t;
    if (bug.attack)
        if (auto t = attempt(false))
            return *t;
    throw BytesNotIndependent("changing the trigger bytes changes the path to the attack point");
}

} // namespace chaff

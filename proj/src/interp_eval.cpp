#include <algorithm>

#include "machine.hpp"

namespace chaff::detail {

namespace {

bool is_lvalue_expr(const Expr &e)
{
    return e.kind == ExprKind::Ident || e.kind == ExprKind::Index || e.kind == ExprKind::Member ||
           (e.kind == ExprKind::Unary && static_cast<UnaryOp>(e.op) == UnaryOp::Deref);
}

bool is_unsigned(const TypeSpec &t)
{
    return t.is_pointer() || t.is_array() || t.base == BaseType::Unsigned;
}

uint32_t sext8(uint32_t v)
{
    return uint32_t(int32_t(int8_t(uint8_t(v))));
}

} // namespace

void Machine::tick(const SourceSpan &span)
{
    if (++res_.steps > opt_.limits.max_steps)
        throw BudgetExceeded(span, "step budget exhausted");
    seq_ = static_cast<uint32_t>(res_.steps);
}

void Machine::check_mapped(uint32_t addr, uint32_t n, bool write)
{
    if (!mem_.mapped(addr, n))
        fault(write ? FaultKind::WriteUnmapped : FaultKind::ReadUnmapped, addr);
}

Val Machine::mix(const Val &a, const Val &b)
{
    TaintId u = 0;
    uint32_t n = 0;
    for (const Val *x : {&a, &b})
        for (int i = 0; i < 4; ++i)
            if (x->t[i]) {
                u = tt_.unite(u, x->t[i]);
                n = std::max<uint32_t>(n, x->n[i]);
            }
    Val r;
    if (u) {
        r.t.fill(u);
        r.n.fill(uint8_t(std::min<uint32_t>(255, n + 1)));
    }
    return r;
}

Val Machine::mix(const Val &a)
{
    return mix(a, Val{});
}

Val Machine::load_raw(uint32_t addr, const TypeSpec &t, const SourceSpan &span)
{
    uint32_t size = (t.base == BaseType::Char && t.pointers == 0) ? 1 : 4;
    check_mapped(addr, size, false);
    Val r;
    for (uint32_t i = 0; i < size; ++i) {
        if (!mem_.init(addr + i))
            throw UninitializedRead(span, addr + i);
        r.v |= uint32_t(mem_.byte(addr + i)) << (8 * i);
        r.t[i] = mem_.taint(addr + i);
        r.n[i] = mem_.tcn(addr + i);
    }
    if (size == 1) {
        r.v = sext8(r.v);
        for (int i = 1; i < 4; ++i) {
            r.t[i] = r.t[0];
            r.n[i] = r.n[0];
        }
    }
    return r;
}

void Machine::store_raw(uint32_t addr, uint32_t size, const Val &v)
{
    check_mapped(addr, size, true);
    for (uint32_t i = 0; i < size; ++i)
        mem_.set(addr + i, uint8_t(v.v >> (8 * i)), v.t[i], v.n[i], seq_);
}

uint32_t Machine::scan_strlen(uint32_t addr, TaintId *taint)
{
    uint32_t n = 0;
    for (;; ++n) {
        uint32_t a = addr + n;
        if (!mem_.mapped(a, 1)) {
            if (taint)
                fault(FaultKind::ReadUnmapped, a);
            return n;
        }
        if (!mem_.init(a)) {
            if (taint)
                throw UninitializedRead(frames_.back().cur ? frames_.back().cur->span : SourceSpan{}, a);
            return n;
        }
        if (taint && mem_.taint(a))
            *taint = tt_.unite(*taint, mem_.taint(a));
        if (mem_.byte(a) == 0)
            return n;
    }
}

void Machine::branch(NodeId node, const Val &cond)
{
    if (!cond.tainted())
        return;
    TaintId u = 0;
    for (auto t : cond.t)
        u = tt_.unite(u, t);
    if (opt_.audit)
        for (Label l : tt_.get(u))
            if (l >= kSyntheticLabel)
                res_.synthetic_in_branches.insert(l - kSyntheticLabel);
    if (full())
        emit(BranchEval{node, tt_.get(u)});
}

void Machine::observe(const LV &lv, const Val &v, bool is_write)
{
    if (!full() || !lv.has_path || !v.tainted() || frames_.empty())
        return;
    Frame &f = frames_.back();
    LvalueObserved o;
    o.stmt = f.cur ? f.cur->id : kNoNode;
    o.function = f.fi->fn->name;
    o.path = lv.path;
    o.address = lv.addr;
    o.width = (lv.type->base == BaseType::Char && lv.type->pointers == 0) ? 1 : 4;
    for (uint32_t i = 0; i < o.width; ++i) {
        o.taint.push_back(tt_.get(v.t[i]));
        o.tcn.push_back(v.n[i]);
    }
    o.is_write = is_write;
    o.string_offset = lv.string_offset;
    o.offset = lv.offset;
    if (lv.string_offset)
        o.base_strlen = scan_strlen(lv.str_base, nullptr);

    bool untouched = true;
    uint32_t last_write = 0;
    for (uint32_t i = 0; i < o.width; ++i) {
        last_write = std::max(last_write, mem_.wseq(lv.addr + i));
        if (mem_.wseq(lv.addr + i) > f.stmt_seq && !is_write)
            untouched = false;
    }
    size_t index = res_.trace.events.size();

    if (f.in_decl) {
        o.in_decl_init = true;
        o.siphon_anchor = f.fi->first_statement;
        o.siphon_after = false;
        o.siphonable = cond_depth_ == 0 && untouched && o.siphon_anchor != kNoNode;
        if (o.siphonable)
            f.pending.emplace_back(index, last_write);
    } else if (is_write) {
        o.siphon_anchor = f.cur->id;
        o.siphon_after = true;
        o.siphonable = cond_depth_ == 0 && f.cur->kind == StmtKind::Expr && lv.expr && lv.expr == f.top_store;
    } else {
        StmtKind k = f.cur->kind;
        o.siphon_anchor = f.cur->id;
        o.siphon_after = false;
        o.siphonable = cond_depth_ == 0 && f.fresh && untouched &&
                       (k == StmtKind::Expr || k == StmtKind::If || k == StmtKind::While ||
                        k == StmtKind::For || k == StmtKind::Return);
    }

    if (lv.path.root_global || lv.path.root_param) {
        o.initialized = true;
    } else if (is_write && o.siphonable) {
        o.initialized = true;
        o.evidence_index = static_cast<int64_t>(index);
    } else if (f.cur) {
        uint32_t nid = info_.name_id(lv.path.root);
        NodeId block = f.fi->stmts.at(f.cur->id).parent_block;
        while (block != kNoNode && !o.initialized) {
            auto it = f.first_mention.find({block, nid});
            if (it != f.first_mention.end() && it->second < f.stmt_clock) {
                o.initialized = true;
                o.evidence_index = static_cast<int64_t>(it->second);
            }
            block = f.fi->block_parent.at(block);
        }
    }
    emit(std::move(o));
}

Val Machine::load(const LV &lv)
{
    const SourceSpan &span = lv.expr ? lv.expr->span : frames_.back().fi->fn->span;
    Val v = load_raw(lv.addr, *lv.type, span);
    observe(lv, v, false);
    return v;
}

void Machine::store(const LV &lv, const Val &v)
{
    uint32_t size = (lv.type->base == BaseType::Char && lv.type->pointers == 0) ? 1 : 4;
    Val w = v;
    if (opt_.audit && lv.rooted)
        audit_store(lv, size);
    if (opt_.audit && lv.rooted && lv.path.root.rfind("lava_buf_", 0) == 0) {
        TaintId s = tt_.singleton(kSyntheticLabel + uint32_t(std::stoul(lv.path.root.substr(9))));
        for (auto &t : w.t)
            t = tt_.unite(t, s);
    }
    store_raw(lv.addr, size, w);
    observe(lv, w, true);
}

LV Machine::lvalue(const Expr &e)
{
    tick(e.span);
    LV lv;
    lv.expr = &e;
    lv.type = &info_.type(e);
    switch (e.kind) {
    case ExprKind::Ident: {
        sema::Ref r = info_.ref(e);
        Frame *f = frames_.empty() ? nullptr : &frames_.back();
        if (r.kind == sema::RefKind::Local) {
            lv.addr = local_addr(*f, f->fi->layout.locals[r.index].offset);
        } else if (r.kind == sema::RefKind::Param) {
            lv.addr = local_addr(*f, f->fi->layout.params[r.index].offset);
            lv.path.root_param = true;
        } else if (r.kind == sema::RefKind::Global) {
            lv.addr = global_addr_[r.index];
            lv.path.root_global = true;
        } else {
            throw RuntimeError(e.span, "function '" + e.text + "' is not an lvalue");
        }
        lv.has_path = paths_;
        lv.rooted = true;
        lv.path.root = e.text;
        return lv;
    }
    case ExprKind::Member: {
        const Expr &b = e.kids[0];
        LV base;
        std::string tag;
        if (e.arrow) {
            Val p;
            if (is_lvalue_expr(b)) {
                base = lvalue(b);
                p = load(base);
            } else {
                p = eval(b);
            }
            base.addr = p.v;
            tag = sema::Info::decay(info_.type(b)).tag;
        } else {
            base = lvalue(b);
            tag = info_.type(b).tag;
        }
        uint32_t idx = info_.field_index(tag, e.text, e.span);
        lv.addr = base.addr + info_.layout(tag).offsets[idx];
        lv.has_path = base.has_path;
        lv.rooted = base.rooted;
        lv.path = std::move(base.path);
        lv.path.steps.push_back({e.arrow ? PathStep::Kind::Arrow : PathStep::Kind::Dot, e.text, 0});
        lv.indexed = base.indexed;
        lv.root_base = base.root_base;
        return lv;
    }
    case ExprKind::Index:
    case ExprKind::Unary: {
        bool deref = e.kind == ExprKind::Unary;
        const Expr &b = e.kids[0];
        const TypeSpec &bt = info_.type(b);
        LV base;
        uint32_t ptr;
        if (bt.is_array()) {
            base = lvalue(b);
            ptr = base.addr;
        } else if (is_lvalue_expr(b)) {
            base = lvalue(b);
            ptr = load(base).v;
        } else {
            ptr = eval(b).v;
        }
        uint32_t k = 0;
        bool const_index = deref;
        if (!deref) {
            const Expr &ix = e.kids[1];
            k = eval(ix).v;
            const_index = ix.kind == ExprKind::IntLit;
        }
        lv.addr = ptr + k * info_.size_of(*lv.type);
        lv.has_path = base.has_path && const_index;
        lv.rooted = base.rooted;
        lv.path = std::move(base.path);
        lv.path.steps.push_back({PathStep::Kind::Index, {}, k});
        lv.indexed = true;
        lv.root_base = base.indexed ? base.root_base : ptr;
        if (lv.has_path && !deref && !bt.is_array() && bt.pointers == 1 && bt.base == BaseType::Char) {
            lv.string_offset = true;
            lv.offset = k;
            lv.str_base = ptr;
        }
        return lv;
    }
    default:
        throw RuntimeError(e.span, "expression is not an lvalue");
    }
}

Val Machine::arith(const Expr &e, BinaryOp op, const Val &l, const Val &r, const TypeSpec &lt, const TypeSpec &rt)
{
    Val out = mix(l, r);
    TypeSpec ld = sema::Info::decay(lt), rd = sema::Info::decay(rt);
    bool lp = ld.is_pointer(), rp = rd.is_pointer();
    bool uns = is_unsigned(ld) || is_unsigned(rd);
    uint32_t a = l.v, b = r.v;
    int32_t sa = int32_t(a), sb = int32_t(b);
    switch (op) {
    case BinaryOp::Add:
        if (lp)
            out.v = a + b * info_.size_of(sema::Info::element(ld));
        else if (rp)
            out.v = b + a * info_.size_of(sema::Info::element(rd));
        else
            out.v = a + b;
        break;
    case BinaryOp::Sub:
        if (lp && rp)
            out.v = uint32_t((sa - sb) / int32_t(std::max(1u, info_.size_of(sema::Info::element(ld)))));
        else if (lp)
            out.v = a - b * info_.size_of(sema::Info::element(ld));
        else
            out.v = a - b;
        break;
    case BinaryOp::Mul:
        out.v = a * b;
        break;
    case BinaryOp::Div:
    case BinaryOp::Mod:
        if (b == 0)
            fault(FaultKind::DivZeroMarker, 0);
        if (uns)
            out.v = op == BinaryOp::Div ? a / b : a % b;
        else if (sa == INT32_MIN && sb == -1)
            out.v = op == BinaryOp::Div ? a : 0;
        else
            out.v = uint32_t(op == BinaryOp::Div ? sa / sb : sa % sb);
        break;
    case BinaryOp::Shl:
        out.v = a << (b & 31);
        break;
    case BinaryOp::Shr:
        out.v = is_unsigned(ld) ? a >> (b & 31) : uint32_t(sa >> (b & 31));
        break;
    case BinaryOp::Lt: out.v = uns ? a < b : sa < sb; break;
    case BinaryOp::Le: out.v = uns ? a <= b : sa <= sb; break;
    case BinaryOp::Gt: out.v = uns ? a > b : sa > sb; break;
    case BinaryOp::Ge: out.v = uns ? a >= b : sa >= sb; break;
    case BinaryOp::Eq: out.v = a == b; break;
    case BinaryOp::Ne: out.v = a != b; break;
    case BinaryOp::BitAnd: out.v = a & b; break;
    case BinaryOp::BitXor: out.v = a ^ b; break;
    case BinaryOp::BitOr: out.v = a | b; break;
    default:
        throw RuntimeError(e.span, "bad operator");
    }
    if (info_.type(e).base == BaseType::Char && info_.type(e).pointers == 0)
        out.v = sext8(out.v);
    return out;
}

Val Machine::eval(const Expr &e)
{
    tick(e.span);
    switch (e.kind) {
    case ExprKind::None:
        return plain(1);
    case ExprKind::IntLit:
        return plain(uint32_t(e.value));
    case ExprKind::StrLit:
        return plain(string_literal(e));
    case ExprKind::Ident: {
        sema::Ref r = info_.ref(e);
        if (r.kind == sema::RefKind::Function) {
            if (r.index == UINT32_MAX)
                throw RuntimeError(e.span, "function '" + e.text + "' has no definition");
            return plain(kCodeBase + 16 * r.index);
        }
        LV lv = lvalue(e);
        if (lv.type->is_array())
            return plain(lv.addr);
        return load(lv);
    }
    case ExprKind::Index:
    case ExprKind::Member: {
        LV lv = lvalue(e);
        if (lv.type->is_array() || (lv.type->base == BaseType::Struct && lv.type->pointers == 0))
            return plain(lv.addr);
        return load(lv);
    }
    case ExprKind::Unary: {
        auto op = static_cast<UnaryOp>(e.op);
        const Expr &k = e.kids[0];
        switch (op) {
        case UnaryOp::Deref: {
            if (info_.type(e).base == BaseType::FuncPtr && info_.type(e).pointers == 0)
                return eval(k);
            LV lv = lvalue(e);
            if (lv.type->is_array() || (lv.type->base == BaseType::Struct && lv.type->pointers == 0))
                return plain(lv.addr);
            return load(lv);
        }
        case UnaryOp::AddrOf: {
            if (k.kind == ExprKind::Ident && info_.ref(k).kind == sema::RefKind::Function)
                return eval(k);
            return plain(lvalue(k).addr);
        }
        case UnaryOp::Neg: {
            Val a = eval(k);
            Val r = mix(a);
            r.v = 0u - a.v;
            return r;
        }
        case UnaryOp::BitNot: {
            Val a = eval(k);
            Val r = mix(a);
            r.v = ~a.v;
            return r;
        }
        case UnaryOp::Not: {
            Val a = eval(k);
            Val r = mix(a);
            r.v = a.v == 0;
            return r;
        }
        }
        break;
    }
    case ExprKind::Binary: {
        auto op = static_cast<BinaryOp>(e.op);
        if (op == BinaryOp::LogAnd || op == BinaryOp::LogOr) {
            Val l = eval(e.kids[0]);
            branch(e.id, l);
            bool l_true = l.v != 0;
            if (l_true == (op == BinaryOp::LogOr)) {
                Val r = mix(l);
                r.v = l_true;
                return r;
            }
            ++cond_depth_;
            Val rv = eval(e.kids[1]);
            --cond_depth_;
            Val r = mix(l, rv);
            r.v = rv.v != 0;
            return r;
        }
        Val l = eval(e.kids[0]);
        Val r = eval(e.kids[1]);
        return arith(e, op, l, r, info_.type(e.kids[0]), info_.type(e.kids[1]));
    }
    case ExprKind::Assign: {
        // Right-hand side first: a store after a call goes through the
        // frame pointer as restored by that call.
        auto op = static_cast<AssignOp>(e.op);
        Val rhs = eval(e.kids[1]);
        LV lv = lvalue(e.kids[0]);
        Val v = rhs;
        if (op != AssignOp::Assign) {
            Val old = load(lv);
            v = arith(e, op == AssignOp::AddAssign ? BinaryOp::Add : BinaryOp::Sub, old, rhs, *lv.type,
                      info_.type(e.kids[1]));
        }
        if (lv.type->base == BaseType::Char && lv.type->pointers == 0) {
            v.v = sext8(v.v);
            for (int i = 1; i < 4; ++i) {
                v.t[i] = v.t[0];
                v.n[i] = v.n[0];
            }
        }
        store(lv, v);
        return v;
    }
    case ExprKind::PreInc:
    case ExprKind::PreDec:
    case ExprKind::PostInc:
    case ExprKind::PostDec: {
        LV lv = lvalue(e.kids[0]);
        Val old = load(lv);
        bool inc = e.kind == ExprKind::PreInc || e.kind == ExprKind::PostInc;
        Val nv = mix(old);
        uint32_t step = lv.type->is_pointer() ? info_.size_of(sema::Info::element(*lv.type)) : 1;
        nv.v = inc ? old.v + step : old.v - step;
        if (lv.type->base == BaseType::Char && lv.type->pointers == 0)
            nv.v = sext8(nv.v);
        store(lv, nv);
        return (e.kind == ExprKind::PreInc || e.kind == ExprKind::PreDec) ? nv : old;
    }
    case ExprKind::Call:
        return call(e);
    case ExprKind::Cast: {
        Val v = eval(e.kids[0]);
        if (e.type.base == BaseType::Char && e.type.pointers == 0 && !e.type.is_array()) {
            v.v = sext8(v.v);
            for (int i = 1; i < 4; ++i) {
                v.t[i] = v.t[0];
                v.n[i] = v.n[0];
            }
        }
        return v;
    }
    case ExprKind::SizeofType:
        return plain(info_.size_of(e.type));
    }
    throw RuntimeError(e.span, "unhandled expression");
}

} // namespace chaff::detail

#include <algorithm>
#include <sstream>

#include "machine.hpp"

namespace chaff {

std::string to_string(FaultKind k)
{
    switch (k) {
    case FaultKind::WriteUnmapped: return "WriteUnmapped";
    case FaultKind::ReadUnmapped: return "ReadUnmapped";
    case FaultKind::PcUnmapped: return "PcUnmapped";
    case FaultKind::AllocatorAbort: return "AllocatorAbort";
    case FaultKind::DivZeroMarker: return "DivZeroMarker";
    }
    return "?";
}

std::string FaultReport::describe() const
{
    std::ostringstream os;
    os << to_string(kind) << " at 0x" << std::hex << address << std::dec << " in " << function;
    if (!assertion.empty())
        os << " (" << assertion << ")";
    if (bug_id)
        os << " [bug " << *bug_id << "]";
    return os.str();
}

RunResult run(const Program &program, const std::string &input, const RunOptions &options)
{
    detail::Machine m(program, input, options);
    return m.run();
}

} // namespace chaff

namespace chaff::detail {

namespace {

constexpr uint32_t kRodataCapacity = 64 * 1024;

uint32_t bug_suffix(const std::string &root)
{
    return uint32_t(std::stoul(root.substr(root.rfind('_') + 1)));
}

} // namespace

Machine::Machine(const Program &program, const std::string &input, const RunOptions &options)
    : prog_(program), info_(program), opt_(options), input_(input), backing_(mem_, seq_),
      heap_(backing_, kHeapBase, options.limits.heap_bytes)
{
    paths_ = opt_.trace == TraceLevel::Full || opt_.audit;
    mem_.map(kHeapBase, kHeapBase + opt_.limits.heap_bytes);
    mem_.map(kStackTop - opt_.limits.stack_bytes, kStackTop);
}

void Machine::emit(TraceEvent ev)
{
    if (opt_.trace == TraceLevel::None)
        return;
    if (opt_.trace == TraceLevel::Statements &&
        !(std::holds_alternative<StmtEnter>(ev) || std::holds_alternative<CallEnter>(ev) ||
          std::holds_alternative<Return>(ev) || std::holds_alternative<InputRead>(ev)))
        return;
    res_.trace.events.push_back(std::move(ev));
}

void Machine::fault(FaultKind kind, uint32_t address, std::string assertion)
{
    FaultReport r;
    r.kind = kind;
    r.address = address;
    r.trace_index = res_.trace.events.size();
    if (!frames_.empty()) {
        r.function = frames_.back().fi->fn->name;
        r.node = frames_.back().cur ? frames_.back().cur->id : kNoNode;
    }
    r.assertion = std::move(assertion);
    if (!res_.audit.empty())
        r.bug_id = res_.audit.back().bug_id;
    throw FaultSignal{std::move(r)};
}

std::string Machine::resolve(uint32_t addr) const
{
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
        const FrameLayout &l = it->fi->layout;
        const std::string &fn = l.function;
        uint32_t base = it->base, total = l.saved_fp_offset;
        if (addr >= base && addr < base + total) {
            uint32_t off = addr - base;
            for (const auto &s : l.locals)
                if (off >= s.offset && off < s.offset + s.size)
                    return fn + "." + s.name;
            for (const auto &s : l.params)
                if (off >= s.offset && off < s.offset + s.size)
                    return fn + "." + s.name;
            return fn + "#padding";
        }
        if (addr >= base + total && addr < base + total + 4)
            return fn + "#saved-fp";
        if (addr >= base + total + 4 && addr < base + total + 8)
            return fn + "#return-address";
        uint32_t nargs = static_cast<uint32_t>(l.params.size());
        if (addr >= base + total + 8 && addr < base + total + 8 + 4 * nargs)
            return fn + "#arg" + std::to_string((addr - base - total - 8) / 4);
    }
    const auto &globals = info_.globals();
    for (size_t i = 0; i < globals.size(); ++i)
        if (addr >= global_addr_[i] && addr < global_addr_[i] + info_.size_of(globals[i]->type))
            return globals[i]->name;
    if (addr >= kHeapBase && addr < kHeapBase + opt_.limits.heap_bytes)
        return "heap";
    if (addr >= kStackTop - opt_.limits.stack_bytes && addr < kStackTop)
        return "stack";
    return "unmapped";
}

void Machine::audit_store(const LV &lv, uint32_t size)
{
    const std::string &root = lv.path.root;
    if (!lv.indexed || !(root.rfind("lava_buf_", 0) == 0 || root.rfind("lava_h_", 0) == 0))
        return;
    AuditWrite w;
    w.bug_id = bug_suffix(root);
    w.root = root;
    w.address = lv.addr;
    w.size = size;
    w.root_base = lv.root_base;
    w.object = resolve(lv.addr);
    if (!frames_.empty()) {
        w.function = frames_.back().fi->fn->name;
        w.node = frames_.back().cur ? frames_.back().cur->id : kNoNode;
    }
    res_.audit.push_back(std::move(w));
}

uint32_t Machine::string_literal(const Expr &e)
{
    auto it = rodata_.find(e.id);
    if (it != rodata_.end())
        return it->second;
    uint32_t n = static_cast<uint32_t>(e.text.size()) + 1;
    if (rodata_next_ + n > rodata_end_)
        throw RuntimeError(e.span, "string literal space exhausted");
    uint32_t a = rodata_next_;
    for (uint32_t i = 0; i < n; ++i)
        mem_.set_raw(a + i, i + 1 < n ? uint8_t(e.text[i]) : 0, seq_);
    rodata_next_ += n;
    rodata_[e.id] = a;
    return a;
}

void Machine::init_globals()
{
    uint32_t a = kGlobalBase;
    for (const auto *g : info_.globals()) {
        uint32_t al = info_.align_of(g->type);
        a = (a + al - 1) / al * al;
        global_addr_.push_back(a);
        a += std::max(1u, info_.size_of(g->type));
    }
    rodata_next_ = (a + 3) / 4 * 4;
    rodata_end_ = rodata_next_ + kRodataCapacity;
    mem_.map(kGlobalBase, rodata_end_);
    for (uint32_t x = kGlobalBase; x < rodata_next_; ++x)
        mem_.set_raw(x, 0, 0);
    const auto &globals = info_.globals();
    for (size_t i = 0; i < globals.size(); ++i) {
        if (!globals[i]->init)
            continue;
        Val v = eval(*globals[i]->init);
        const TypeSpec &t = globals[i]->type;
        store_raw(global_addr_[i], (t.base == BaseType::Char && t.pointers == 0) ? 1 : 4, v);
    }
}

void Machine::enter_stmt(const Stmt &s)
{
    tick(s.span);
    Frame &f = frames_.back();
    f.cur = &s;
    f.stmt_seq = seq_;
    f.stmt_clock = res_.trace.events.size();
    f.fresh = true;
    f.in_decl = false;
    f.top_store = nullptr;
    if (s.kind == StmtKind::Expr && !s.exprs.empty()) {
        const Expr &top = s.exprs[0];
        if (top.kind == ExprKind::Assign || top.kind == ExprKind::PreInc || top.kind == ExprKind::PostInc ||
            top.kind == ExprKind::PreDec || top.kind == ExprKind::PostDec)
            f.top_store = &top.kids[0];
    }
    if (s.id == f.fi->first_statement && !f.pending.empty()) {
        for (auto [index, last_write] : f.pending) {
            auto &o = std::get<LvalueObserved>(res_.trace.events[index]);
            for (uint32_t i = 0; i < o.width; ++i)
                if (mem_.wseq(o.address + i) > last_write)
                    o.siphonable = false;
        }
        f.pending.clear();
    }
    if (!full() && opt_.trace != TraceLevel::Statements)
        return;
    const sema::StmtMeta &meta = f.fi->stmts.at(s.id);
    for (uint32_t nid : meta.mentions)
        f.first_mention.emplace(std::make_pair(meta.parent_block, nid), f.stmt_clock);
    if (s.kind != StmtKind::Decl)   // nothing can be inserted before a declaration
        emit(StmtEnter{s.id, f.fi->fn->name});
}

Flow Machine::exec(const Stmt &s)
{
    switch (s.kind) {
    case StmtKind::Block:
        for (const auto &c : s.body) {
            Flow fl = exec(c);
            if (fl != Flow::Normal)
                return fl;
        }
        return Flow::Normal;
    case StmtKind::Decl: {
        enter_stmt(s);
        if (!s.decl->init)
            return Flow::Normal;
        frames_.back().in_decl = true;
        Val v = eval(*s.decl->init);
        Frame &f = frames_.back();
        const sema::FuncInfo &fi = *f.fi;
        LV lv;
        for (size_t i = 0; i < fi.locals.size(); ++i)
            if (fi.locals[i] == &*s.decl)
                lv.addr = local_addr(f, fi.layout.locals[i].offset);
        lv.type = &s.decl->type;
        lv.has_path = paths_;
        lv.rooted = true;
        lv.path.root = s.decl->name;
        if (lv.type->base == BaseType::Char && lv.type->pointers == 0) {
            v.v = uint32_t(int32_t(int8_t(uint8_t(v.v))));
            for (int i = 1; i < 4; ++i) {
                v.t[i] = v.t[0];
                v.n[i] = v.n[0];
            }
        }
        store(lv, v);
        frames_.back().in_decl = false;
        return Flow::Normal;
    }
    case StmtKind::Expr:
        enter_stmt(s);
        eval(s.exprs[0]);
        return Flow::Normal;
    case StmtKind::If: {
        enter_stmt(s);
        Val c = eval(s.exprs[0]);
        branch(s.id, c);
        if (c.v)
            return exec(s.body[0]);
        if (s.body.size() > 1)
            return exec(s.body[1]);
        return Flow::Normal;
    }
    case StmtKind::While:
    case StmtKind::For: {
        bool is_for = s.kind == StmtKind::For;
        enter_stmt(s);
        if (is_for && s.exprs[0].kind != ExprKind::None)
            eval(s.exprs[0]);
        for (bool first = true;; first = false) {
            if (!first) {
                Frame &f = frames_.back();
                f.cur = &s;
                f.fresh = false;
                f.top_store = nullptr;
                if (is_for && s.exprs[2].kind != ExprKind::None)
                    eval(s.exprs[2]);
            }
            const Expr &cond = s.exprs[is_for ? 1 : 0];
            if (cond.kind != ExprKind::None) {
                Val c = eval(cond);
                branch(s.id, c);
                if (!c.v)
                    break;
            }
            tick(s.span);
            Flow fl = exec(s.body[0]);
            if (fl == Flow::Break)
                break;
            if (fl == Flow::Return)
                return fl;
        }
        return Flow::Normal;
    }
    case StmtKind::Return: {
        enter_stmt(s);
        Val v;
        if (!s.exprs.empty() && s.exprs[0].kind != ExprKind::None) {
            v = eval(s.exprs[0]);
            const TypeSpec &rt = frames_.back().fi->fn->ret;
            if (rt.base == BaseType::Char && rt.pointers == 0) {
                v.v = uint32_t(int32_t(int8_t(uint8_t(v.v))));
                for (int i = 1; i < 4; ++i) {
                    v.t[i] = v.t[0];
                    v.n[i] = v.n[0];
                }
            }
        }
        frames_.back().ret = v;
        return Flow::Return;
    }
    case StmtKind::Break:
        enter_stmt(s);
        return Flow::Break;
    case StmtKind::Continue:
        enter_stmt(s);
        return Flow::Continue;
    }
    return Flow::Normal;
}

Val Machine::call(const Expr &e)
{
    const Expr &callee = e.kids[0];
    sema::CallKind kind = info_.call_kind(e);
    const sema::FuncInfo *fi = nullptr;
    if (kind == sema::CallKind::Direct) {
        fi = info_.function(callee.text);
        if (!fi)
            throw RuntimeError(e.span, "call to undefined function '" + callee.text + "'");
    } else if (kind == sema::CallKind::Indirect) {
        uint32_t target = eval(callee).v;
        const auto &fns = info_.functions();
        if (target < kCodeBase || (target - kCodeBase) % 16 != 0 || (target - kCodeBase) / 16 >= fns.size())
            fault(FaultKind::PcUnmapped, target);
        fi = &fns[(target - kCodeBase) / 16];
    }
    std::vector<Val> args;
    for (size_t i = 1; i < e.kids.size(); ++i)
        args.push_back(eval(e.kids[i]));
    if (kind == sema::CallKind::Intrinsic)
        return intrinsic(e, callee.text, args);
    if (args.size() != fi->fn->params.size())
        throw RuntimeError(e.span, "argument count mismatch calling '" + fi->fn->name + "'");
    return call_function(*fi, args, e.id, kind == sema::CallKind::Indirect);
}

Val Machine::call_function(const sema::FuncInfo &fi, const std::vector<Val> &args, NodeId call_site, bool indirect)
{
    const FrameLayout &l = fi.layout;
    uint32_t total = l.saved_fp_offset;
    uint32_t n = static_cast<uint32_t>(args.size());
    uint32_t need = total + 8 + 4 * n;
    if (sp_ - (kStackTop - opt_.limits.stack_bytes) < need)
        throw RuntimeError(fi.fn->span, "stack exhausted");

    for (uint32_t i = n; i-- > 0;) {
        sp_ -= 4;
        store_raw(sp_, 4, args[i]);
    }
    uint32_t ra = kReturnSiteBase + 4 * call_site;
    sp_ -= 4;
    store_raw(sp_, 4, plain(ra));
    sp_ -= 4;
    store_raw(sp_, 4, plain(frames_.empty() ? 0 : frames_.back().fp));
    uint32_t base = sp_ - total;
    sp_ = base;
    mem_.invalidate(base, total);

    Frame f;
    f.fi = &fi;
    f.base = base;
    f.fp = base;
    f.ra_expected = ra;
    f.call_site = call_site;
    frames_.push_back(std::move(f));

    if (opt_.trace != TraceLevel::None) {
        CallEnter ce;
        ce.layout = l;
        ce.layout.frame_base = base;
        for (const auto &fr : frames_)
            ce.chain.push_back(fr.fi->fn->name);
        ce.call_site = call_site;
        ce.indirect = indirect;
        emit(std::move(ce));
    }

    for (uint32_t i = 0; i < n; ++i) {
        uint32_t src = base + total + 8 + 4 * i;
        for (uint32_t b = 0; b < 4; ++b)
            mem_.set(base + l.params[i].offset + b, mem_.byte(src + b), mem_.taint(src + b), mem_.tcn(src + b), seq_);
    }

    exec(*fi.fn->body);

    // Epilogue: the caller's frame pointer and the return address come from
    // this activation's true slots.
    Val saved = load_raw(base + total, TypeSpec{}, fi.fn->span);
    Val ret_addr = load_raw(base + total + 4, TypeSpec{}, fi.fn->span);
    if (ret_addr.v != ra)
        fault(FaultKind::PcUnmapped, ret_addr.v);
    Val result = frames_.back().ret;
    frames_.pop_back();
    if (!frames_.empty())
        frames_.back().fp = saved.v;
    sp_ = base + need;
    emit(Return{fi.fn->name});
    return result;
}

Val Machine::intrinsic(const Expr &e, const std::string &name, const std::vector<Val> &args)
{
    auto note_output = [&](TaintId t) {
        if (!opt_.audit || !t)
            return;
        for (Label l : tt_.get(t))
            if (l >= kSyntheticLabel)
                res_.synthetic_in_output.insert(l - kSyntheticLabel);
    };

    if (name == "malloc") {
        uint32_t p = 0;
        try {
            p = heap_.malloc(args[0].v);
        } catch (const heap::AllocatorAbort &a) {
            fault(FaultKind::AllocatorAbort, 0, a.assertion());
        } catch (const heap::OutOfArena &) {
            p = 0;
        }
        if (p) {
            mem_.invalidate(p, args[0].v);
            if (full())
                emit(HeapAlloc{p, args[0].v});
        }
        return plain(p);
    }
    if (name == "free") {
        uint32_t p = args[0].v;
        if (!p)
            return plain(0);
        try {
            heap_.free(p);
        } catch (const heap::AllocatorAbort &a) {
            fault(FaultKind::AllocatorAbort, p, a.assertion());
        }
        if (full())
            emit(HeapFree{p});
        return plain(0);
    }
    if (name == "strlen") {
        TaintId t = 0;
        uint32_t n = scan_strlen(args[0].v, &t);
        Val c;
        c.t.fill(t);
        branch(e.id, c);
        return plain(n);
    }
    if (name == "memcpy") {
        uint32_t d = args[0].v, s = args[1].v, n = args[2].v;
        if (n) {
            check_mapped(s, n, false);
            check_mapped(d, n, true);
        }
        for (uint32_t i = 0; i < n; ++i) {
            if (!mem_.init(s + i))
                throw UninitializedRead(e.span, s + i);
            mem_.set(d + i, mem_.byte(s + i), mem_.taint(s + i), mem_.tcn(s + i), seq_);
        }
        return plain(d);
    }
    if (name == "read_input") {
        uint32_t buf = args[0].v;
        uint32_t want = args[1].v;
        uint32_t avail = static_cast<uint32_t>(input_.size()) - in_pos_;
        uint32_t n = std::min(want, avail);
        if (n)
            check_mapped(buf, n, true);
        for (uint32_t i = 0; i < n; ++i)
            mem_.set(buf + i, uint8_t(input_[in_pos_ + i]), tt_.singleton(in_pos_ + i), 0, seq_);
        emit(InputRead{in_pos_, in_pos_ + n});
        in_pos_ += n;
        return plain(n);
    }
    if (name == "print_int") {
        for (auto t : args[0].t)
            note_output(t);
        res_.output += std::to_string(int32_t(args[0].v));
        return plain(0);
    }
    if (name == "print_str") {
        for (uint32_t a = args[0].v;; ++a) {
            check_mapped(a, 1, false);
            if (!mem_.init(a))
                throw UninitializedRead(e.span, a);
            if (mem_.byte(a) == 0)
                break;
            note_output(mem_.taint(a));
            res_.output.push_back(char(mem_.byte(a)));
        }
        return plain(0);
    }
    if (name == "putchar") {
        note_output(args[0].t[0]);
        res_.output.push_back(char(args[0].v));
        return plain(args[0].v & 0xFF);
    }
    throw RuntimeError(e.span, "unknown runtime function '" + name + "'");
}

RunResult Machine::run()
{
    res_.trace.input_length = static_cast<uint32_t>(input_.size());
    const sema::FuncInfo *main = info_.function("main");
    if (!main)
        throw RuntimeError({}, "program has no main function");
    if (!main->fn->params.empty())
        throw RuntimeError(main->fn->span, "main must take no parameters");
    try {
        init_globals();
        Val r = call_function(*main, {}, kNoNode, false);
        res_.exit_code = int32_t(r.v);
    } catch (FaultSignal &s) {
        res_.fault = std::move(s.report);
    }
    return std::move(res_);
}

} // namespace chaff::detail

#include "sema.hpp"

#include <algorithm>

namespace chaff::sema {

namespace {

TypeSpec make(BaseType b, int pointers = 0)
{
    TypeSpec t;
    t.base = b;
    t.pointers = pointers;
    return t;
}

const TypeSpec kInt = make(BaseType::Int);
const TypeSpec kUnsigned = make(BaseType::Unsigned);

bool is_ptr(const TypeSpec &t)
{
    return !t.is_array() && t.is_pointer();
}

bool is_integer(const TypeSpec &t)
{
    return !t.is_array() && t.pointers == 0 &&
           (t.base == BaseType::Int || t.base == BaseType::Unsigned || t.base == BaseType::Char);
}

TypeSpec promote(const TypeSpec &t)
{
    if (is_integer(t) && t.base == BaseType::Char)
        return kInt;
    return t;
}

TypeSpec arith(const TypeSpec &a, const TypeSpec &b)
{
    if ((is_integer(a) && a.base == BaseType::Unsigned) || (is_integer(b) && b.base == BaseType::Unsigned))
        return kUnsigned;
    return kInt;
}

uint32_t align_up(uint32_t v, uint32_t a)
{
    return (v + a - 1) / a * a;
}

} // namespace

TypeSpec Info::element(const TypeSpec &t)
{
    TypeSpec e = t;
    if (e.array_len)
        e.array_len.reset();
    else if (e.pointers > 0)
        --e.pointers;
    return e;
}

TypeSpec Info::pointer_to(TypeSpec t)
{
    if (t.base == BaseType::FuncPtr)
        return t;
    t.array_len.reset();
    ++t.pointers;
    return t;
}

TypeSpec Info::decay(const TypeSpec &t)
{
    if (!t.is_array())
        return t;
    return pointer_to(element(t));
}

uint32_t Info::size_of(const TypeSpec &t) const
{
    uint32_t n = 4;
    if (t.base == BaseType::FuncPtr || t.pointers > 0)
        n = 4;
    else if (t.base == BaseType::Char || t.base == BaseType::Void)
        n = 1;
    else if (t.base == BaseType::Struct)
        n = layout(t.tag).size;
    return t.array_len ? n * *t.array_len : n;
}

uint32_t Info::align_of(const TypeSpec &t) const
{
    if (t.base == BaseType::FuncPtr || t.pointers > 0)
        return 4;
    if (t.base == BaseType::Char)
        return 1;
    if (t.base == BaseType::Struct)
        return layout(t.tag).align;
    return 4;
}

const StructLayout &Info::layout(const std::string &tag) const
{
    auto it = structs_.find(tag);
    if (it == structs_.end())
        throw SemanticError({}, "incomplete struct type 'struct " + tag + "'");
    return it->second;
}

uint32_t Info::field_index(const std::string &tag, const std::string &field, const SourceSpan &span) const
{
    const StructDecl *s = prog_->find_struct(tag);
    if (!s)
        throw SemanticError(span, "unknown struct '" + tag + "'");
    for (uint32_t i = 0; i < s->fields.size(); ++i)
        if (s->fields[i].name == field)
            return i;
    throw SemanticError(span, "struct " + tag + " has no field '" + field + "'");
}

const TypeSpec &Info::field_type(const std::string &tag, uint32_t index) const
{
    return prog_->find_struct(tag)->fields.at(index).type;
}

const FuncInfo *Info::function(const std::string &name) const
{
    auto it = func_index_.find(name);
    return it == func_index_.end() ? nullptr : &funcs_[it->second];
}

uint32_t Info::intern(const std::string &name)
{
    auto [it, fresh] = names_.emplace(name, static_cast<uint32_t>(names_.size()));
    (void)fresh;
    return it->second;
}

uint32_t Info::name_id(const std::string &name) const
{
    auto it = names_.find(name);
    return it == names_.end() ? UINT32_MAX : it->second;
}

Info::Info(const Program &program) : prog_(&program)
{
    types_.resize(program.next_id);
    refs_.resize(program.next_id);
    calls_.resize(program.next_id);

    for (const auto &item : program.items) {
        if (const auto *s = std::get_if<StructDecl>(&item)) {
            StructLayout l;
            for (const auto &f : s->fields) {
                if (f.type.base == BaseType::Struct && f.type.pointers == 0 && f.type.tag == s->tag)
                    throw SemanticError(f.span, "struct contains itself");
                uint32_t a = align_of(f.type);
                l.size = align_up(l.size, a);
                l.offsets.push_back(l.size);
                l.size += size_of(f.type);
                l.align = std::max(l.align, a);
            }
            l.size = align_up(std::max(l.size, 1u), l.align);
            structs_[s->tag] = l;
        } else if (const auto *v = std::get_if<VarDecl>(&item)) {
            if (global_index_.count(v->name))
                throw SemanticError(v->span, "redefinition of '" + v->name + "'");
            global_index_[v->name] = static_cast<uint32_t>(globals_.size());
            globals_.push_back(v);
        } else {
            const auto &f = std::get<Function>(item);
            if (!f.body)
                continue;
            if (func_index_.count(f.name))
                throw SemanticError(f.span, "redefinition of function '" + f.name + "'");
            FuncInfo fi;
            fi.fn = &f;
            fi.index = static_cast<uint32_t>(funcs_.size());
            func_index_[f.name] = fi.index;
            funcs_.push_back(std::move(fi));
        }
    }

    for (const auto *g : globals_)
        if (g->init)
            check_expr(nullptr, *g->init);

    for (auto &fi : funcs_)
        check_function(fi);
}

void Info::check_function(FuncInfo &fi)
{
    const Function &f = *fi.fn;
    for (const auto &p : f.params)
        if (p.type.base == BaseType::Struct && p.type.pointers == 0)
            throw SemanticError(p.span, "struct parameters by value are not supported");
    for (const auto &s : f.body->body) {
        if (s.kind != StmtKind::Decl) {
            if (fi.first_statement == kNoNode)
                fi.first_statement = s.id;
            continue;
        }
        for (const auto *prev : fi.locals)
            if (prev->name == s.decl->name)
                throw SemanticError(s.span, "redeclaration of '" + s.decl->name + "'");
        fi.locals.push_back(&*s.decl);
        fi.decl_stmts.push_back(&s);
    }
    for (const auto &p : f.params)
        intern(p.name);
    check_stmt(fi, *f.body, kNoNode);

    // Layout: locals top-down in declaration order, the copied-arguments
    // region directly above the last-declared local.
    FrameLayout &l = fi.layout;
    l.function = f.name;
    uint32_t total = 4 * static_cast<uint32_t>(f.params.size());
    for (const auto *d : fi.locals)
        total += align_up(size_of(d->type), 4);
    uint32_t cur = total;
    for (size_t i = 0; i < fi.locals.size(); ++i) {
        if (i + 1 == fi.locals.size() || fi.locals.empty())
            break;
        uint32_t sz = size_of(fi.locals[i]->type);
        cur -= align_up(sz, 4);
        l.locals.push_back({fi.locals[i]->name, cur, sz});
    }
    l.copied_args_size = 4 * static_cast<uint32_t>(f.params.size());
    cur -= l.copied_args_size;
    l.copied_args_offset = cur;
    for (size_t j = 0; j < f.params.size(); ++j)
        l.params.push_back({f.params[j].name, cur + 4 * static_cast<uint32_t>(j), 4});
    if (!fi.locals.empty()) {
        uint32_t sz = size_of(fi.locals.back()->type);
        cur -= align_up(sz, 4);
        l.locals.push_back({fi.locals.back()->name, cur, sz});
    }
    l.saved_fp_offset = total;
    l.return_address_offset = total + 4;
}

void Info::collect_mentions(const Expr &e, std::vector<uint32_t> &out)
{
    if (e.kind == ExprKind::Ident)
        out.push_back(intern(e.text));
    for (const auto &k : e.kids)
        collect_mentions(k, out);
}

void Info::check_stmt(FuncInfo &fi, const Stmt &s, NodeId block)
{
    StmtMeta meta;
    meta.parent_block = block;
    for (const auto &e : s.exprs) {
        if (e.kind != ExprKind::None)
            check_expr(&fi, e);
        collect_mentions(e, meta.mentions);
    }
    if (s.decl && s.decl->init) {
        const TypeSpec &dt = s.decl->type;
        if (dt.is_array() || (dt.base == BaseType::Struct && dt.pointers == 0))
            throw SemanticError(s.span, "aggregate initializers are not supported");
        check_expr(&fi, *s.decl->init);
        meta.mentions.push_back(intern(s.decl->name));
        collect_mentions(*s.decl->init, meta.mentions);
    }
    std::sort(meta.mentions.begin(), meta.mentions.end());
    meta.mentions.erase(std::unique(meta.mentions.begin(), meta.mentions.end()), meta.mentions.end());
    fi.stmts[s.id] = std::move(meta);

    if (s.kind == StmtKind::Block) {
        fi.block_parent[s.id] = block;
        for (const auto &c : s.body)
            check_stmt(fi, c, s.id);
    } else {
        for (const auto &c : s.body)
            check_stmt(fi, c, block);
    }
}

TypeSpec Info::check_expr(const FuncInfo *fi, const Expr &e)
{
    auto fail = [&](const std::string &msg) -> TypeSpec { throw SemanticError(e.span, msg); };
    auto is_lvalue = [](const Expr &x) {
        return x.kind == ExprKind::Ident || x.kind == ExprKind::Index || x.kind == ExprKind::Member ||
               (x.kind == ExprKind::Unary && static_cast<UnaryOp>(x.op) == UnaryOp::Deref);
    };
    TypeSpec t;

    switch (e.kind) {
    case ExprKind::None:
        t = kInt;
        break;
    case ExprKind::IntLit:
        t = (e.unsigned_suffix || e.value > 0x7FFFFFFF) ? kUnsigned : kInt;
        break;
    case ExprKind::StrLit:
        t = make(BaseType::Char, 1);
        break;
    case ExprKind::Ident: {
        Ref r;
        if (fi) {
            for (uint32_t i = 0; i < fi->locals.size(); ++i)
                if (fi->locals[i]->name == e.text) {
                    r = {RefKind::Local, i};
                    t = fi->locals[i]->type;
                }
            if (r.kind == RefKind::None)
                for (uint32_t i = 0; i < fi->fn->params.size(); ++i)
                    if (fi->fn->params[i].name == e.text) {
                        r = {RefKind::Param, i};
                        t = fi->fn->params[i].type;
                    }
        }
        if (r.kind == RefKind::None) {
            if (auto it = global_index_.find(e.text); it != global_index_.end()) {
                r = {RefKind::Global, it->second};
                t = globals_[it->second]->type;
            }
        }
        if (r.kind == RefKind::None) {
            const Function *f = prog_->find_function(e.text);
            if (!f)
                return fail(is_intrinsic(e.text) ? "runtime function '" + e.text + "' used as a value"
                                                 : "undeclared identifier '" + e.text + "'");
            auto it = func_index_.find(e.text);
            r = {RefKind::Function, it == func_index_.end() ? UINT32_MAX : it->second};
            t = make(BaseType::FuncPtr);
            t.signature.push_back(f->ret);
            for (const auto &p : f->params)
                t.signature.push_back(p.type);
        }
        refs_[e.id] = r;
        break;
    }
    case ExprKind::Unary: {
        TypeSpec a = check_expr(fi, e.kids[0]);
        switch (static_cast<UnaryOp>(e.op)) {
        case UnaryOp::Neg:
        case UnaryOp::BitNot:
            if (!is_integer(a))
                return fail("arithmetic on non-integer operand");
            t = promote(a);
            break;
        case UnaryOp::Not:
            t = kInt;
            break;
        case UnaryOp::Deref: {
            TypeSpec d = decay(a);
            if (d.base == BaseType::FuncPtr) {
                t = d;
                break;
            }
            if (!is_ptr(d))
                return fail("dereference of non-pointer");
            t = element(d);
            if (t.base == BaseType::Void && t.pointers == 0)
                return fail("dereference of void pointer");
            break;
        }
        case UnaryOp::AddrOf:
            if (!is_lvalue(e.kids[0]) && !(e.kids[0].kind == ExprKind::Ident))
                return fail("address of non-lvalue");
            t = a.is_array() ? decay(a) : pointer_to(a);
            break;
        }
        break;
    }
    case ExprKind::Binary: {
        TypeSpec l = decay(check_expr(fi, e.kids[0]));
        TypeSpec r = decay(check_expr(fi, e.kids[1]));
        auto op = static_cast<BinaryOp>(e.op);
        switch (op) {
        case BinaryOp::Add:
            if (is_ptr(l) && is_integer(r))
                t = l;
            else if (is_integer(l) && is_ptr(r))
                t = r;
            else if (is_integer(l) && is_integer(r))
                t = arith(l, r);
            else
                return fail("invalid operands to +");
            break;
        case BinaryOp::Sub:
            if (is_ptr(l) && is_ptr(r))
                t = kInt;
            else if (is_ptr(l) && is_integer(r))
                t = l;
            else if (is_integer(l) && is_integer(r))
                t = arith(l, r);
            else
                return fail("invalid operands to -");
            break;
        case BinaryOp::Mul:
        case BinaryOp::Div:
        case BinaryOp::Mod:
        case BinaryOp::BitAnd:
        case BinaryOp::BitOr:
        case BinaryOp::BitXor:
            if (!is_integer(l) || !is_integer(r))
                return fail("arithmetic on non-integer operand");
            t = arith(l, r);
            break;
        case BinaryOp::Shl:
        case BinaryOp::Shr:
            if (!is_integer(l) || !is_integer(r))
                return fail("shift of non-integer operand");
            t = promote(l);
            break;
        default:
            t = kInt;
            break;
        }
        break;
    }
    case ExprKind::Assign: {
        if (!is_lvalue(e.kids[0]))
            return fail("assignment to non-lvalue");
        t = check_expr(fi, e.kids[0]);
        TypeSpec r = decay(check_expr(fi, e.kids[1]));
        if (t.is_array() || (t.base == BaseType::Struct && t.pointers == 0))
            return fail("assignment to aggregate");
        if (static_cast<AssignOp>(e.op) != AssignOp::Assign && !is_integer(t) && !(is_ptr(t) && is_integer(r)))
            return fail("invalid compound assignment");
        break;
    }
    case ExprKind::Call: {
        const Expr &callee = e.kids[0];
        bool named = callee.kind == ExprKind::Ident;
        bool shadowed = false;
        if (named && fi) {
            for (const auto *d : fi->locals)
                shadowed = shadowed || d->name == callee.text;
            for (const auto &p : fi->fn->params)
                shadowed = shadowed || p.name == callee.text;
        }
        if (named && !shadowed && global_index_.count(callee.text))
            shadowed = true;
        size_t nargs = e.kids.size() - 1;
        if (named && !shadowed && is_intrinsic(callee.text) && !func_index_.count(callee.text)) {
            calls_[e.id] = static_cast<uint8_t>(CallKind::Intrinsic);
            static const std::unordered_map<std::string, std::pair<TypeSpec, size_t>> sigs = {
                {"malloc", {make(BaseType::Void, 1), 1}},   {"free", {make(BaseType::Void), 1}},
                {"strlen", {kInt, 1}},                      {"memcpy", {make(BaseType::Void, 1), 3}},
                {"read_input", {kInt, 2}},                  {"print_int", {make(BaseType::Void), 1}},
                {"print_str", {make(BaseType::Void), 1}},   {"putchar", {kInt, 1}},
            };
            const auto &sig = sigs.at(callee.text);
            if (nargs != sig.second)
                return fail("wrong number of arguments to " + callee.text);
            t = sig.first;
        } else if (named && !shadowed && prog_->find_function(callee.text)) {
            const Function *f = prog_->find_function(callee.text);
            calls_[e.id] = static_cast<uint8_t>(CallKind::Direct);
            if (nargs != f->params.size())
                return fail("wrong number of arguments to " + callee.text);
            t = f->ret;
            types_[callee.id] = make(BaseType::FuncPtr);
        } else {
            TypeSpec ct = decay(check_expr(fi, callee));
            if (ct.base != BaseType::FuncPtr)
                return fail("called object is not a function");
            if (nargs + 1 != ct.signature.size())
                return fail("wrong number of arguments in indirect call");
            calls_[e.id] = static_cast<uint8_t>(CallKind::Indirect);
            t = ct.signature[0];
        }
        for (size_t i = 1; i < e.kids.size(); ++i) {
            TypeSpec a = check_expr(fi, e.kids[i]);
            if (a.base == BaseType::Struct && a.pointers == 0 && !a.is_array())
                return fail("struct arguments by value are not supported");
        }
        break;
    }
    case ExprKind::Index: {
        TypeSpec b = decay(check_expr(fi, e.kids[0]));
        TypeSpec i = check_expr(fi, e.kids[1]);
        if (!is_ptr(b) || b.base == BaseType::FuncPtr || !is_integer(i))
            return fail("invalid subscript");
        t = element(b);
        break;
    }
    case ExprKind::Member: {
        TypeSpec b = check_expr(fi, e.kids[0]);
        if (e.arrow) {
            b = decay(b);
            if (b.pointers != 1 || b.base != BaseType::Struct)
                return fail("'->' on non-struct-pointer");
        } else if (b.pointers != 0 || b.base != BaseType::Struct || b.is_array()) {
            return fail("'.' on non-struct");
        }
        t = field_type(b.tag, field_index(b.tag, e.text, e.span));
        break;
    }
    case ExprKind::Cast:
        check_expr(fi, e.kids[0]);
        t = e.type;
        break;
    case ExprKind::SizeofType:
        size_of(e.type);
        t = kUnsigned;
        break;
    case ExprKind::PreInc:
    case ExprKind::PreDec:
    case ExprKind::PostInc:
    case ExprKind::PostDec:
        if (!is_lvalue(e.kids[0]))
            return fail("increment of non-lvalue");
        t = check_expr(fi, e.kids[0]);
        if (!is_integer(t) && !is_ptr(t))
            return fail("increment of non-scalar");
        break;
    }
    types_.at(e.id) = t;
    return t;
}

} // namespace chaff::sema

namespace chaff {

uint32_t type_size(const Program &program, const TypeSpec &type)
{
    return sema::Info(program).size_of(type);
}

FrameLayout compute_frame_layout(const Program &program, const Function &fn)
{
    sema::Info info(program);
    const sema::FuncInfo *fi = info.function(fn.name);
    if (!fi)
        throw std::invalid_argument("function has no body: " + fn.name);
    return fi->layout;
}

FrameGeometry frame_geometry(const FrameLayout &layout)
{
    FrameGeometry g;
    g.copied_args_skip = layout.copied_args_size;
    uint32_t buffer_end = 0;
    if (!layout.locals.empty()) {
        const FrameSlot &bottom = layout.locals.back();
        g.buffer = bottom.name;
        buffer_end = bottom.offset + bottom.size;
    }
    g.saved_fp_distance = layout.saved_fp_offset - buffer_end;
    g.return_address_distance = layout.return_address_offset - buffer_end;
    return g;
}

FrameGeometry measure_frame_geometry(const Trace &trace, const std::string &function)
{
    for (const auto &ev : trace.events)
        if (const auto *c = std::get_if<CallEnter>(&ev); c && c->layout.function == function)
            return frame_geometry(c->layout);
    throw FunctionNotInTrace(function);
}

} // namespace chaff

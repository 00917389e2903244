#include <functional>
#include <map>
#include <set>

#include "chaff/frontend.hpp"

namespace chaff {

namespace {

void renumber(Expr &e, NodeId &next)
{
    e.id = next++;
    for (auto &k : e.kids)
        renumber(k, next);
}

void renumber(VarDecl &d, NodeId &next)
{
    d.id = next++;
    if (d.init)
        renumber(*d.init, next);
}

void renumber(Stmt &s, NodeId &next)
{
    s.id = next++;
    for (auto &b : s.body)
        renumber(b, next);
    for (auto &e : s.exprs)
        renumber(e, next);
    if (s.decl)
        renumber(*s.decl, next);
}

struct StmtSlot {
    std::vector<Stmt> *list = nullptr;
    size_t index = 0;
};

bool locate_stmt(std::vector<Stmt> &list, NodeId id, StmtSlot &out)
{
    for (size_t i = 0; i < list.size(); ++i) {
        if (list[i].id == id) {
            out = {&list, i};
            return true;
        }
        for (auto &b : list[i].body) {
            if (b.id == id)
                return false;   // a block used as an if/loop body is not a list member
            if (locate_stmt(b.body, id, out))
                return true;
        }
    }
    return false;
}

Expr *locate_expr(Expr &e, NodeId id)
{
    if (e.id == id)
        return &e;
    for (auto &k : e.kids)
        if (Expr *r = locate_expr(k, id))
            return r;
    return nullptr;
}

Expr *locate_expr(Stmt &s, NodeId id)
{
    for (auto &e : s.exprs)
        if (Expr *r = locate_expr(e, id))
            return r;
    if (s.decl && s.decl->init)
        if (Expr *r = locate_expr(*s.decl->init, id))
            return r;
    for (auto &b : s.body)
        if (Expr *r = locate_expr(b, id))
            return r;
    return nullptr;
}

Function *function_by_id(Program &p, NodeId id)
{
    for (auto &item : p.items)
        if (auto *f = std::get_if<Function>(&item); f && f->id == id)
            return f;
    return nullptr;
}

std::string edit_name(const Edit &e)
{
    if (const auto *d = std::get_if<InsertDeclaration>(&e))
        return "local:" + std::to_string(d->function) + ":" + d->decl.name;
    if (const auto *p = std::get_if<AddParameter>(&e))
        return "local:" + std::to_string(p->function) + ":" + p->param.name;
    if (const auto *g = std::get_if<InsertGlobal>(&e))
        return "global:" + g->decl.name;
    return "";
}

void check_conflicts(const Program &program, const EditScript &script)
{
    std::map<std::string, size_t> seen;
    for (size_t i = 0; i < script.edits.size(); ++i) {
        std::string key = edit_name(script.edits[i]);
        if (key.empty())
            continue;
        auto [it, fresh] = seen.emplace(key, i);
        if (!fresh)
            throw ConflictingEdits(it->second, i, "duplicate declaration " + key.substr(key.rfind(':') + 1));
    }
    for (size_t i = 0; i < script.edits.size(); ++i) {
        if (const auto *g = std::get_if<InsertGlobal>(&script.edits[i])) {
            if (program.find_global(g->decl.name) || program.find_function(g->decl.name))
                throw EditError("global '" + g->decl.name + "' already declared");
        }
    }
}

void check_declarations_first(const Function &f)
{
    if (!f.body)
        return;
    bool seen_stmt = false;
    for (const auto &s : f.body->body) {
        if (s.kind == StmtKind::Decl && seen_stmt)
            throw EditError("edit places a statement before a declaration in '" + f.name + "'");
        if (s.kind != StmtKind::Decl)
            seen_stmt = true;
    }
    std::set<std::string> names;
    for (const auto &p : f.params)
        if (!p.name.empty() && !names.insert(p.name).second)
            throw EditError("duplicate name '" + p.name + "' in '" + f.name + "'");
    for (const auto &s : f.body->body)
        if (s.kind == StmtKind::Decl && !names.insert(s.decl->name).second)
            throw EditError("duplicate name '" + s.decl->name + "' in '" + f.name + "'");
}

} // namespace

Program apply_edits(const Program &program, const EditScript &script)
{
    check_conflicts(program, script);
    Program out = program;
    NodeId next = out.next_id;
    std::map<NodeId, size_t> after_counts;

    for (const auto &edit : script.edits) {
        if (const auto *ins = std::get_if<InsertStatement>(&edit)) {
            StmtSlot slot;
            bool found = false;
            for (auto &item : out.items) {
                if (auto *f = std::get_if<Function>(&item); f && f->body && locate_stmt(f->body->body, ins->anchor, slot)) {
                    found = true;
                    break;
                }
            }
            if (!found)
                throw AnchorNotFound(ins->anchor);
            Stmt s = ins->stmt;
            renumber(s, next);
            size_t at = slot.index;
            if (ins->pos == InsertPos::After)
                at = slot.index + 1 + after_counts[ins->anchor]++;
            slot.list->insert(slot.list->begin() + static_cast<std::ptrdiff_t>(at), std::move(s));
        } else if (const auto *decl = std::get_if<InsertDeclaration>(&edit)) {
            Function *f = function_by_id(out, decl->function);
            if (!f || !f->body)
                throw AnchorNotFound(decl->function);
            auto &list = f->body->body;
            size_t ndecls = 0;
            while (ndecls < list.size() && list[ndecls].kind == StmtKind::Decl)
                ++ndecls;
            size_t at = decl->position < 0 ? ndecls : std::min(ndecls, static_cast<size_t>(decl->position));
            Stmt s;
            s.kind = StmtKind::Decl;
            s.decl = decl->decl;
            renumber(s, next);
            list.insert(list.begin() + static_cast<std::ptrdiff_t>(at), std::move(s));
        } else if (const auto *param = std::get_if<AddParameter>(&edit)) {
            Function *f = function_by_id(out, param->function);
            if (!f)
                throw AnchorNotFound(param->function);
            VarDecl p = param->param;
            renumber(p, next);
            f->params.push_back(std::move(p));
        } else if (const auto *rw = std::get_if<RewriteCallSite>(&edit)) {
            Expr *call = nullptr;
            for (auto &item : out.items) {
                if (auto *f = std::get_if<Function>(&item); f && f->body)
                    if ((call = locate_expr(*f->body, rw->call)))
                        break;
            }
            if (!call || call->kind != ExprKind::Call)
                throw AnchorNotFound(rw->call);
            Expr arg = rw->extra_arg;
            renumber(arg, next);
            call->kids.push_back(std::move(arg));
        } else if (const auto *g = std::get_if<InsertGlobal>(&edit)) {
            size_t first_def = out.items.size();
            for (size_t i = 0; i < out.items.size(); ++i) {
                if (const auto *f = std::get_if<Function>(&out.items[i]); f && f->body) {
                    first_def = i;
                    break;
                }
            }
            size_t at = std::min(out.items.size(), first_def);
            VarDecl d = g->decl;
            renumber(d, next);
            out.items.insert(out.items.begin() + static_cast<std::ptrdiff_t>(at), TopItem{std::move(d)});
        }
    }
    for (const auto &item : out.items)
        if (const auto *f = std::get_if<Function>(&item))
            check_declarations_first(*f);
    out.next_id = next;
    return out;
}

namespace build {

Expr int_lit(int64_t v, LitStyle style, bool unsigned_suffix)
{
    Expr e;
    e.kind = ExprKind::IntLit;
    e.value = v;
    e.style = style;
    e.unsigned_suffix = unsigned_suffix;
    return e;
}

Expr ident(const std::string &name)
{
    Expr e;
    e.kind = ExprKind::Ident;
    e.text = name;
    return e;
}

Expr unary(UnaryOp op, Expr x)
{
    Expr e;
    e.kind = ExprKind::Unary;
    e.op = static_cast<int>(op);
    e.kids.push_back(std::move(x));
    return e;
}

Expr binary(BinaryOp op, Expr l, Expr r)
{
    Expr e;
    e.kind = ExprKind::Binary;
    e.op = static_cast<int>(op);
    e.kids.push_back(std::move(l));
    e.kids.push_back(std::move(r));
    return e;
}

Expr assign(Expr l, Expr r)
{
    Expr e;
    e.kind = ExprKind::Assign;
    e.op = static_cast<int>(AssignOp::Assign);
    e.kids.push_back(std::move(l));
    e.kids.push_back(std::move(r));
    return e;
}

Expr call(const std::string &fn, std::vector<Expr> args)
{
    Expr e;
    e.kind = ExprKind::Call;
    e.kids.push_back(ident(fn));
    for (auto &a : args)
        e.kids.push_back(std::move(a));
    return e;
}

Expr index(Expr base, Expr idx)
{
    Expr e;
    e.kind = ExprKind::Index;
    e.kids.push_back(std::move(base));
    e.kids.push_back(std::move(idx));
    return e;
}

Expr cast(TypeSpec t, Expr x)
{
    Expr e;
    e.kind = ExprKind::Cast;
    e.type = std::move(t);
    e.kids.push_back(std::move(x));
    return e;
}

Stmt expr_stmt(Expr e)
{
    Stmt s;
    s.kind = StmtKind::Expr;
    s.exprs.push_back(std::move(e));
    return s;
}

Stmt block(std::vector<Stmt> body)
{
    Stmt s;
    s.kind = StmtKind::Block;
    s.body = std::move(body);
    return s;
}

Stmt if_stmt(Expr cond, Stmt then_block)
{
    Stmt s;
    s.kind = StmtKind::If;
    s.exprs.push_back(std::move(cond));
    s.body.push_back(then_block.kind == StmtKind::Block ? std::move(then_block) : block({std::move(then_block)}));
    return s;
}

Stmt while_stmt(Expr cond, Stmt body)
{
    Stmt s;
    s.kind = StmtKind::While;
    s.exprs.push_back(std::move(cond));
    s.body.push_back(body.kind == StmtKind::Block ? std::move(body) : block({std::move(body)}));
    return s;
}

VarDecl var(TypeSpec t, const std::string &name)
{
    VarDecl d;
    d.type = std::move(t);
    d.name = name;
    return d;
}

TypeSpec scalar(BaseType base, int pointers)
{
    TypeSpec t;
    t.base = base;
    t.pointers = pointers;
    return t;
}

TypeSpec array(BaseType base, uint32_t len)
{
    TypeSpec t;
    t.base = base;
    t.array_len = len;
    return t;
}

} // namespace build

namespace {

template <typename Fn>
void walk_expr(const Expr &e, const Fn &fn)
{
    fn(e);
    for (const auto &k : e.kids)
        walk_expr(k, fn);
}

template <typename Fn>
void walk_stmt_exprs(const Stmt &s, const Fn &fn)
{
    for (const auto &e : s.exprs)
        walk_expr(e, fn);
    if (s.decl && s.decl->init)
        walk_expr(*s.decl->init, fn);
    for (const auto &b : s.body)
        walk_stmt_exprs(b, fn);
}

const Stmt *find_in(const Stmt &s, NodeId id)
{
    if (s.id == id)
        return &s;
    for (const auto &b : s.body)
        if (const Stmt *r = find_in(b, id))
            return r;
    return nullptr;
}

} // namespace

const Stmt *find_stmt(const Program &program, NodeId id)
{
    for (const auto &item : program.items)
        if (const auto *f = std::get_if<Function>(&item); f && f->body)
            if (const Stmt *r = find_in(*f->body, id))
                return r;
    return nullptr;
}

const Expr *find_expr(const Program &program, NodeId id)
{
    const Expr *found = nullptr;
    for (const auto &item : program.items) {
        if (const auto *f = std::get_if<Function>(&item); f && f->body)
            walk_stmt_exprs(*f->body, [&](const Expr &e) {
                if (e.id == id)
                    found = &e;
            });
        if (found)
            return found;
    }
    return nullptr;
}

const Function *enclosing_function(const Program &program, NodeId id)
{
    for (const auto &item : program.items) {
        const auto *f = std::get_if<Function>(&item);
        if (!f || !f->body)
            continue;
        if (find_in(*f->body, id))
            return f;
        bool hit = false;
        walk_stmt_exprs(*f->body, [&](const Expr &e) { hit = hit || e.id == id; });
        if (hit)
            return f;
    }
    return nullptr;
}

std::vector<const Expr *> call_sites_of(const Program &program, const std::string &callee)
{
    std::vector<const Expr *> out;
    for (const auto &item : program.items)
        if (const auto *f = std::get_if<Function>(&item); f && f->body)
            walk_stmt_exprs(*f->body, [&](const Expr &e) {
                if (e.kind == ExprKind::Call && !e.indirect && e.kids[0].text == callee)
                    out.push_back(&e);
            });
    return out;
}

std::vector<std::string> address_taken_functions(const Program &program)
{
    std::set<std::string> fns, taken;
    for (const auto &item : program.items)
        if (const auto *f = std::get_if<Function>(&item))
            fns.insert(f->name);
    auto scan = [&](const Expr &root) {
        std::function<void(const Expr &, bool)> rec = [&](const Expr &e, bool callee) {
            if (e.kind == ExprKind::Ident && !callee && fns.count(e.text))
                taken.insert(e.text);
            for (size_t i = 0; i < e.kids.size(); ++i)
                rec(e.kids[i], e.kind == ExprKind::Call && i == 0);
        };
        rec(root, false);
    };
    for (const auto &item : program.items) {
        if (const auto *f = std::get_if<Function>(&item); f && f->body) {
            std::function<void(const Stmt &)> rs = [&](const Stmt &s) {
                for (const auto &e : s.exprs)
                    scan(e);
                if (s.decl && s.decl->init)
                    scan(*s.decl->init);
                for (const auto &b : s.body)
                    rs(b);
            };
            rs(*f->body);
        }
        if (const auto *v = std::get_if<VarDecl>(&item); v && v->init)
            scan(*v->init);
    }
    return {taken.begin(), taken.end()};
}

} // namespace chaff

#include "chaff/ast.hpp"

#include <algorithm>
#include <array>

namespace chaff {

std::string to_string(const SourceSpan &span)
{
    return span.file + ":" + std::to_string(span.line) + ":" + std::to_string(span.column);
}

bool is_intrinsic(const std::string &name)
{
    static const std::array<const char *, 8> names = {
        "malloc", "free", "strlen", "memcpy", "read_input", "print_int", "print_str", "putchar",
    };
    return std::find(names.begin(), names.end(), name) != names.end();
}

NodeId item_id(const TopItem &item)
{
    return std::visit([](const auto &x) { return x.id; }, item);
}

const Function *Program::find_function(const std::string &name) const
{
    const Function *decl = nullptr;
    for (const auto &item : items) {
        if (const auto *fn = std::get_if<Function>(&item); fn && fn->name == name) {
            if (fn->body)
                return fn;
            decl = fn;
        }
    }
    return decl;
}

Function *Program::find_function(const std::string &name)
{
    return const_cast<Function *>(std::as_const(*this).find_function(name));
}

const StructDecl *Program::find_struct(const std::string &tag) const
{
    for (const auto &item : items)
        if (const auto *s = std::get_if<StructDecl>(&item); s && s->tag == tag)
            return s;
    return nullptr;
}

const VarDecl *Program::find_global(const std::string &name) const
{
    for (const auto &item : items)
        if (const auto *v = std::get_if<VarDecl>(&item); v && v->name == name)
            return v;
    return nullptr;
}

namespace {

bool same(const Expr &a, const Expr &b);
bool same(const Stmt &a, const Stmt &b);
bool same(const VarDecl &a, const VarDecl &b);
bool same(const TopItem &a, const TopItem &b);

template <typename T>
bool same_list(const std::vector<T> &a, const std::vector<T> &b)
{
    if (a.size() != b.size())
        return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!same(a[i], b[i]))
            return false;
    return true;
}

bool same(const Expr &a, const Expr &b)
{
    return a.kind == b.kind && a.op == b.op && a.value == b.value && a.text == b.text &&
           a.arrow == b.arrow && a.indirect == b.indirect && a.type == b.type && same_list(a.kids, b.kids);
}

bool same(const VarDecl &a, const VarDecl &b)
{
    if (a.type != b.type || a.name != b.name || a.init.has_value() != b.init.has_value())
        return false;
    return !a.init || same(*a.init, *b.init);
}

bool same(const Stmt &a, const Stmt &b)
{
    if (a.kind != b.kind || a.decl.has_value() != b.decl.has_value())
        return false;
    if (a.decl && !same(*a.decl, *b.decl))
        return false;
    return same_list(a.body, b.body) && same_list(a.exprs, b.exprs);
}

bool same(const TopItem &a, const TopItem &b)
{
    if (a.index() != b.index())
        return false;
    if (const auto *v = std::get_if<VarDecl>(&a))
        return same(*v, std::get<VarDecl>(b));
    if (const auto *s = std::get_if<StructDecl>(&a)) {
        const auto &t = std::get<StructDecl>(b);
        return s->tag == t.tag && same_list(s->fields, t.fields);
    }
    const auto &f = std::get<Function>(a);
    const auto &g = std::get<Function>(b);
    if (f.name != g.name || f.ret != g.ret || !same_list(f.params, g.params))
        return false;
    if (f.body.has_value() != g.body.has_value())
        return false;
    return !f.body || same(*f.body, *g.body);
}

} // namespace

bool same_structure(const Program &a, const Program &b)
{
    return same_list(a.items, b.items);
}

} // namespace chaff

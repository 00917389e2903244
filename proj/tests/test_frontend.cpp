#include "doctest.h"

#include <algorithm>
#include <functional>

#include "chaff/frontend.hpp"

using namespace chaff;

namespace {

const char *kGuardedHeader = R"(
int init(int *p);
int use(int p);

int work(int cond)
{
    int p;
    if (cond == 0) {
        init(&p);
    }
    use(p);
    return 0;
}
)";

const Function &fn(const Program &p, const std::string &name)
{
    const Function *f = p.find_function(name);
    REQUIRE(f != nullptr);
    return *f;
}

std::vector<NodeId> all_ids(const Program &p)
{
    std::vector<NodeId> ids;
    std::function<void(const Expr &)> ex = [&](const Expr &e) {
        ids.push_back(e.id);
        for (const auto &k : e.kids)
            ex(k);
    };
    std::function<void(const Stmt &)> st = [&](const Stmt &s) {
        ids.push_back(s.id);
        for (const auto &b : s.body)
            st(b);
        for (const auto &e : s.exprs)
            ex(e);
        if (s.decl) {
            ids.push_back(s.decl->id);
            if (s.decl->init)
                ex(*s.decl->init);
        }
    };
    for (const auto &item : p.items) {
        ids.push_back(item_id(item));
        if (const auto *f = std::get_if<Function>(&item)) {
            for (const auto &prm : f->params)
                ids.push_back(prm.id);
            if (f->body)
                st(*f->body);
        }
    }
    return ids;
}

} // namespace

TEST_CASE("minimal program parses to one function")
{
    Program p = parse("int main(){return 0;}");
    REQUIRE(p.items.size() == 1);
    const Function &m = fn(p, "main");
    REQUIRE(m.body);
    REQUIRE(m.body->body.size() == 1);
    CHECK(m.body->body[0].kind == StmtKind::Return);
    CHECK(print(p) == "int main(void)\n{\n    return 0;\n}\n");
}

TEST_CASE("branch-guarded initialization then use")
{
    Program p = parse(kGuardedHeader);
    const Function &w = fn(p, "work");
    const auto &body = w.body->body;
    REQUIRE(body.size() == 4);
    CHECK(body[1].kind == StmtKind::If);
    CHECK(body[1].body[0].body[0].exprs[0].kind == ExprKind::Call);
    CHECK(body[2].exprs[0].kind == ExprKind::Call);
    CHECK(body[2].exprs[0].kids[0].text == "use");
}

TEST_CASE("subset boundary is enforced")
{
    CHECK_THROWS_AS(parse("int main(){ goto out; out: return 0; }"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("int main(){ switch (1) { } return 0; }"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("int f(int a, ...);"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("#include <stdio.h>\nint main(){return 0;}"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("int main(){ if (1) { int x; } return 0; }"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("int main(){ return 0; int x; }"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("int main(){ return 1 ? 2 : 3; }"), UnsupportedConstruct);
    CHECK_THROWS_AS(parse("int main(){ return 0 }"), SyntaxError);

    try {
        parse("int main()\n{\n    goto x;\n}\n", "f.c");
        FAIL("expected UnsupportedConstruct");
    } catch (const UnsupportedConstruct &e) {
        CHECK(e.construct() == "goto");
        CHECK(e.span().line == 3);
        CHECK(e.span().column == 5);
    }
}

TEST_CASE("indirect calls are parsed and flagged")
{
    Program p = parse(R"(
int handler(int x) { return x + 1; }
int main(void)
{
    int (*fp)(int);
    fp = handler;
    return fp(2) + handler(3);
}
)");
    auto ret = fn(p, "main").body->body.back().exprs[0];
    CHECK(ret.kids[0].indirect);
    CHECK_FALSE(ret.kids[1].indirect);
    CHECK(address_taken_functions(p) == std::vector<std::string>{"handler"});
}

TEST_CASE("node ids are unique")
{
    Program p = parse(kGuardedHeader);
    auto ids = all_ids(p);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    CHECK(ids.front() >= 1);
    CHECK(ids.back() < p.next_id);
}

TEST_CASE("print is a fixpoint")
{
    const char *src = R"(
struct rec { int tag; char name[12]; struct rec *next; };
int g = 3;
char *msg = "a\tb\n";
int f(struct rec *r, char **out)
{
    int i;
    unsigned u = 0xFFFFFFF0u;
    i = -(-r->tag) + 1 - (2 - 3) * 4 % 5;
    if (i < 0 && !(u >> 2 == 1)) { i = ~i; } else if (i) i++; else { --i; }
    for (i = 0; i < 3; i += 1) r->name[i] = 'x';
    while (r) { r = r->next; }
    *out = (char *)&r->name[0];
    return sizeof(struct rec) + (i = 2);
}
)";
    Program p = parse(src);
    std::string once = print(p);
    Program q = parse(once);
    CHECK(same_structure(p, q));
    CHECK(print(q) == once);
}

TEST_CASE("empty program prints empty")
{
    CHECK(print(parse("")) == "");
}

TEST_CASE("inserted siphon appears at its anchor")
{
    Program p = parse(R"(
int main(void)
{
    int x;
    x = 5;
    return x;
}
)");
    const auto &body = fn(p, "main").body->body;
    EditScript es;
    es.edits.push_back(InsertGlobal{build::var(build::scalar(BaseType::Unsigned), "lava_val")});
    es.edits.push_back(InsertStatement{body[1].id, InsertPos::After,
                                        build::expr_stmt(build::call("lava_set", {build::ident("x")}))});
    Program q = apply_edits(p, es);
    CHECK(print(q) == "unsigned lava_val;\n\nint main(void)\n{\n    int x;\n    x = 5;\n    lava_set(x);\n    return x;\n}\n");
}

TEST_CASE("dummy locals are placed next to the buffer in declaration order")
{
    Program p = parse("int f(void)\n{\n    int a;\n    char buf[8];\n    a = 1;\n    return a;\n}\n");
    NodeId fid = fn(p, "f").id;
    EditScript es;
    es.edits.push_back(InsertDeclaration{fid, build::var(build::array(BaseType::Int, 2), "dummy0"), 1});
    es.edits.push_back(InsertDeclaration{fid, build::var(build::array(BaseType::Int, 2), "dummy1"), 2});
    Program q = apply_edits(p, es);
    CHECK(print(q) ==
          "int f(void)\n{\n    int a;\n    int dummy0[2];\n    int dummy1[2];\n    char buf[8];\n    a = 1;\n    return a;\n}\n");
}

TEST_CASE("add-parameter and call-site rewrites across a caller chain")
{
    Program p = parse(R"(
int g(int v) { return v; }
int f(int v) { return g(v) + g(v + 1); }
int main(void) { return f(1); }
)");
    const Function &g = fn(p, "g");
    const Function &f = fn(p, "f");
    EditScript es;
    es.edits.push_back(AddParameter{g.id, build::var(build::scalar(BaseType::Int, 1), "out")});
    es.edits.push_back(AddParameter{f.id, build::var(build::scalar(BaseType::Int, 1), "out")});
    for (const Expr *c : call_sites_of(p, "g"))
        es.edits.push_back(RewriteCallSite{c->id, build::ident("out")});
    for (const Expr *c : call_sites_of(p, "f"))
        es.edits.push_back(RewriteCallSite{c->id, build::unary(UnaryOp::AddrOf, build::ident("root"))});
    Program q = apply_edits(p, es);
    std::string text = print(q);
    CHECK(text.find("int g(int v, int *out)") != std::string::npos);
    CHECK(text.find("return g(v, out) + g(v + 1, out);") != std::string::npos);
    CHECK(text.find("return f(1, &root);") != std::string::npos);
    CHECK(call_sites_of(q, "g").size() == 2);
}

TEST_CASE("empty edit script is the identity and preserves ids")
{
    Program p = parse(kGuardedHeader);
    Program q = apply_edits(p, EditScript{});
    CHECK(same_structure(p, q));
    CHECK(all_ids(p) == all_ids(q));
}

TEST_CASE("edit locality: untouched functions print identically and keep ids")
{
    Program p = parse(R"(
int a(int x) { return x * 2; }
int b(int x) { x = x + 1; return x; }
)");
    const auto &bbody = fn(p, "b").body->body;
    EditScript es;
    es.edits.push_back(InsertStatement{bbody[0].id, InsertPos::Before,
                                        build::expr_stmt(build::assign(build::ident("x"), build::int_lit(0)))});
    Program q = apply_edits(p, es);
    CHECK(print_expr(fn(q, "a").body->body[0].exprs[0]) == print_expr(fn(p, "a").body->body[0].exprs[0]));
    CHECK(fn(q, "a").body->id == fn(p, "a").body->id);
    CHECK(fn(q, "b").body->body[1].id == bbody[0].id);
}

TEST_CASE("edit errors")
{
    Program p = parse("int f(void)\n{\n    int a;\n    a = 1;\n    return a;\n}\n");
    EditScript bad_anchor;
    bad_anchor.edits.push_back(InsertStatement{9999, InsertPos::Before, build::expr_stmt(build::int_lit(1))});
    CHECK_THROWS_AS(apply_edits(p, bad_anchor), AnchorNotFound);

    EditScript dup;
    dup.edits.push_back(InsertGlobal{build::var(build::scalar(BaseType::Int), "z")});
    dup.edits.push_back(InsertGlobal{build::var(build::scalar(BaseType::Int), "z")});
    try {
        apply_edits(p, dup);
        FAIL("expected ConflictingEdits");
    } catch (const ConflictingEdits &e) {
        CHECK(e.first() == 0);
        CHECK(e.second() == 1);
    }

    EditScript before_decl;
    const auto &body = fn(p, "f").body->body;
    before_decl.edits.push_back(InsertStatement{body[0].id, InsertPos::Before, build::expr_stmt(build::int_lit(1))});
    CHECK_THROWS_AS(apply_edits(p, before_decl), EditError);
}

TEST_CASE("ordered inserts at the same anchor keep script order")
{
    Program p = parse("int f(void)\n{\n    int a;\n    a = 1;\n    return a;\n}\n");
    NodeId anchor = fn(p, "f").body->body[1].id;
    EditScript es;
    for (int i = 0; i < 3; ++i)
        es.edits.push_back(InsertStatement{anchor, InsertPos::After,
                                            build::expr_stmt(build::assign(build::ident("a"), build::int_lit(10 + i)))});
    Program q = apply_edits(p, es);
    CHECK(print(q) == "int f(void)\n{\n    int a;\n    a = 1;\n    a = 10;\n    a = 11;\n    a = 12;\n    return a;\n}\n");
    CHECK(print(parse(print(q))) == print(q));
}

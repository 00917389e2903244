#include <sstream>

#include "chaff/frontend.hpp"

namespace chaff {

namespace {

constexpr int kPrecAssign = 1;
constexpr int kPrecUnary = 12;
constexpr int kPrecPostfix = 13;
constexpr int kPrecPrimary = 14;

int prec_of(BinaryOp op)
{
    switch (op) {
    case BinaryOp::LogOr: return 2;
    case BinaryOp::LogAnd: return 3;
    case BinaryOp::BitOr: return 4;
    case BinaryOp::BitXor: return 5;
    case BinaryOp::BitAnd: return 6;
    case BinaryOp::Eq: case BinaryOp::Ne: return 7;
    case BinaryOp::Lt: case BinaryOp::Le: case BinaryOp::Gt: case BinaryOp::Ge: return 8;
    case BinaryOp::Shl: case BinaryOp::Shr: return 9;
    case BinaryOp::Add: case BinaryOp::Sub: return 10;
    case BinaryOp::Mul: case BinaryOp::Div: case BinaryOp::Mod: return 11;
    }
    return 0;
}

const char *spelling(BinaryOp op)
{
    switch (op) {
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Shl: return "<<";
    case BinaryOp::Shr: return ">>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::BitAnd: return "&";
    case BinaryOp::BitXor: return "^";
    case BinaryOp::BitOr: return "|";
    case BinaryOp::LogAnd: return "&&";
    case BinaryOp::LogOr: return "||";
    }
    return "?";
}

const char *spelling(UnaryOp op)
{
    switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Not: return "!";
    case UnaryOp::BitNot: return "~";
    case UnaryOp::Deref: return "*";
    case UnaryOp::AddrOf: return "&";
    }
    return "?";
}

std::string escape_char(int c, char quote)
{
    unsigned char u = static_cast<unsigned char>(c);
    switch (u) {
    case '\n': return "\\n";
    case '\t': return "\\t";
    case '\r': return "\\r";
    case 0: return "\\0";
    case '\\': return "\\\\";
    default: break;
    }
    if (u == static_cast<unsigned char>(quote))
        return std::string("\\") + quote;
    if (u < 0x20 || u >= 0x7f) {
        static const char hex[] = "0123456789abcdef";
        return std::string("\\x") + hex[u >> 4] + hex[u & 15];
    }
    return std::string(1, static_cast<char>(u));
}

std::string literal(const Expr &e)
{
    std::string s;
    if (e.style == LitStyle::Char) {
        s = "'" + escape_char(static_cast<int>(e.value), '\'') + "'";
    } else if (e.style == LitStyle::Hex) {
        std::ostringstream os;
        os << "0x" << std::hex << std::uppercase << static_cast<uint64_t>(e.value);
        s = os.str();
    } else {
        s = std::to_string(e.value);
    }
    if (e.unsigned_suffix)
        s += "u";
    return s;
}

std::string base_name(const TypeSpec &t)
{
    switch (t.base) {
    case BaseType::Void: return "void";
    case BaseType::Int: return "int";
    case BaseType::Unsigned: return "unsigned";
    case BaseType::Char: return "char";
    case BaseType::Struct: return "struct " + t.tag;
    case BaseType::FuncPtr: return "?";
    }
    return "?";
}

std::string expr(const Expr &e, int ctx);

std::string wrap(const std::string &s, int prec, int ctx)
{
    return prec < ctx ? "(" + s + ")" : s;
}

std::string expr(const Expr &e, int ctx)
{
    switch (e.kind) {
    case ExprKind::None:
        return "";
    case ExprKind::IntLit:
        return literal(e);
    case ExprKind::StrLit: {
        std::string s = "\"";
        for (char c : e.text)
            s += escape_char(c, '"');
        return s + "\"";
    }
    case ExprKind::Ident:
        return e.text;
    case ExprKind::Unary: {
        std::string op = spelling(static_cast<UnaryOp>(e.op));
        std::string inner = expr(e.kids[0], kPrecUnary);
        if (!inner.empty() && inner[0] == op[0] && (op == "-" || op == "&"))
            inner = " " + inner;
        return wrap(op + inner, kPrecUnary, ctx);
    }
    case ExprKind::PreInc:
    case ExprKind::PreDec: {
        std::string op = e.kind == ExprKind::PreInc ? "++" : "--";
        std::string inner = expr(e.kids[0], kPrecUnary);
        if (!inner.empty() && (inner[0] == '+' || inner[0] == '-'))
            inner = " " + inner;
        return wrap(op + inner, kPrecUnary, ctx);
    }
    case ExprKind::PostInc:
        return wrap(expr(e.kids[0], kPrecPostfix) + "++", kPrecPostfix, ctx);
    case ExprKind::PostDec:
        return wrap(expr(e.kids[0], kPrecPostfix) + "--", kPrecPostfix, ctx);
    case ExprKind::Binary: {
        auto op = static_cast<BinaryOp>(e.op);
        int p = prec_of(op);
        return wrap(expr(e.kids[0], p) + " " + spelling(op) + " " + expr(e.kids[1], p + 1), p, ctx);
    }
    case ExprKind::Assign: {
        auto op = static_cast<AssignOp>(e.op);
        const char *s = op == AssignOp::Assign ? " = " : op == AssignOp::AddAssign ? " += " : " -= ";
        return wrap(expr(e.kids[0], kPrecUnary) + s + expr(e.kids[1], kPrecAssign), kPrecAssign, ctx);
    }
    case ExprKind::Call: {
        std::string s = expr(e.kids[0], kPrecPostfix) + "(";
        for (size_t i = 1; i < e.kids.size(); ++i) {
            if (i > 1)
                s += ", ";
            s += expr(e.kids[i], kPrecAssign);
        }
        return wrap(s + ")", kPrecPostfix, ctx);
    }
    case ExprKind::Index:
        return wrap(expr(e.kids[0], kPrecPostfix) + "[" + expr(e.kids[1], 0) + "]", kPrecPostfix, ctx);
    case ExprKind::Member:
        return wrap(expr(e.kids[0], kPrecPostfix) + (e.arrow ? "->" : ".") + e.text, kPrecPostfix, ctx);
    case ExprKind::Cast:
        return wrap("(" + print_type(e.type, "") + ")" + expr(e.kids[0], kPrecUnary), kPrecUnary, ctx);
    case ExprKind::SizeofType:
        return wrap("sizeof(" + print_type(e.type, "") + ")", kPrecPrimary, ctx);
    }
    return "";
}

void indent(std::ostringstream &os, int depth)
{
    for (int i = 0; i < depth; ++i)
        os << "    ";
}

std::string decl_text(const VarDecl &d)
{
    std::string s = print_type(d.type, d.name);
    if (d.init)
        s += " = " + expr(*d.init, kPrecAssign);
    return s;
}

void stmt(std::ostringstream &os, const Stmt &s, int depth);

void block_body(std::ostringstream &os, const Stmt &b, int depth)
{
    os << "{\n";
    for (const auto &c : b.body)
        stmt(os, c, depth + 1);
    indent(os, depth);
    os << "}";
}

void stmt(std::ostringstream &os, const Stmt &s, int depth)
{
    indent(os, depth);
    switch (s.kind) {
    case StmtKind::Block:
        block_body(os, s, depth);
        os << "\n";
        return;
    case StmtKind::Decl:
        os << decl_text(*s.decl) << ";\n";
        return;
    case StmtKind::Expr:
        os << expr(s.exprs[0], 0) << ";\n";
        return;
    case StmtKind::Return:
        os << "return";
        if (!s.exprs.empty())
            os << " " << expr(s.exprs[0], 0);
        os << ";\n";
        return;
    case StmtKind::Break:
        os << "break;\n";
        return;
    case StmtKind::Continue:
        os << "continue;\n";
        return;
    case StmtKind::While:
        os << "while (" << expr(s.exprs[0], 0) << ") ";
        block_body(os, s.body[0], depth);
        os << "\n";
        return;
    case StmtKind::For:
        os << "for (" << expr(s.exprs[0], 0) << "; " << expr(s.exprs[1], 0) << "; " << expr(s.exprs[2], 0) << ") ";
        block_body(os, s.body[0], depth);
        os << "\n";
        return;
    case StmtKind::If: {
        const Stmt *cur = &s;
        os << "if (" << expr(cur->exprs[0], 0) << ") ";
        for (;;) {
            block_body(os, cur->body[0], depth);
            if (cur->body.size() < 2)
                break;
            const Stmt &els = cur->body[1];
            if (els.body.size() == 1 && els.body[0].kind == StmtKind::If) {
                cur = &els.body[0];
                os << " else if (" << expr(cur->exprs[0], 0) << ") ";
                continue;
            }
            os << " else ";
            block_body(os, els, depth);
            break;
        }
        os << "\n";
        return;
    }
    }
}

} // namespace

std::string print_type(const TypeSpec &type, const std::string &declarator)
{
    if (type.base == BaseType::FuncPtr) {
        std::string s = print_type(type.signature.at(0), "") + " (*" + declarator + ")(";
        if (type.signature.size() == 1)
            s += "void";
        for (size_t i = 1; i < type.signature.size(); ++i) {
            if (i > 1)
                s += ", ";
            s += print_type(type.signature[i], "");
        }
        return s + ")";
    }
    std::string s = base_name(type);
    if (type.pointers > 0 || !declarator.empty())
        s += " ";
    s += std::string(static_cast<size_t>(type.pointers), '*');
    s += declarator;
    if (type.array_len)
        s += "[" + std::to_string(*type.array_len) + "]";
    return s;
}

std::string print_expr(const Expr &e)
{
    return expr(e, 0);
}

std::string print(const Program &program)
{
    std::ostringstream os;
    bool first = true;
    for (const auto &item : program.items) {
        if (!first)
            os << "\n";
        first = false;
        if (const auto *v = std::get_if<VarDecl>(&item)) {
            os << decl_text(*v) << ";\n";
        } else if (const auto *s = std::get_if<StructDecl>(&item)) {
            os << "struct " << s->tag << " {\n";
            for (const auto &f : s->fields)
                os << "    " << decl_text(f) << ";\n";
            os << "};\n";
        } else {
            const auto &f = std::get<Function>(item);
            os << print_type(f.ret, f.name) << "(";
            if (f.params.empty())
                os << "void";
            for (size_t i = 0; i < f.params.size(); ++i) {
                if (i > 0)
                    os << ", ";
                os << print_type(f.params[i].type, f.params[i].name);
            }
            os << ")";
            if (f.body) {
                os << "\n";
                block_body(os, *f.body, 0);
                os << "\n";
            } else {
                os << ";\n";
            }
        }
    }
    return os.str();
}

} // namespace chaff

#include <cctype>
#include <set>

#include "chaff/frontend.hpp"

namespace chaff {

namespace {

enum class Tok { End, Ident, Int, Str, Punct };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int64_t value = 0;
    LitStyle style = LitStyle::Decimal;
    bool unsigned_suffix = false;
    uint32_t begin = 0, end = 0, line = 1, column = 1;
};

const std::set<std::string> kUnsupportedKeywords = {
    "goto", "switch", "case", "default", "do", "typedef", "enum", "union", "float", "double",
    "long", "short", "static", "extern", "const", "volatile", "signed", "register", "auto",
};

class Lexer {
public:
    Lexer(std::string_view src, const std::string &file) : src_(src), file_(file) {}

    std::vector<Token> run()
    {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.begin = static_cast<uint32_t>(pos_);
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                t.end = t.begin;
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (c == '#')
                throw UnsupportedConstruct(span_at(t), "preprocessor directive");
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    advance();
                t.kind = Tok::Ident;
                t.text = std::string(src_.substr(t.begin, pos_ - t.begin));
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_number(t);
            } else if (c == '\'') {
                advance();
                t.kind = Tok::Int;
                t.style = LitStyle::Char;
                t.value = static_cast<int8_t>(lex_char_body(t));
                expect_char('\'', t);
            } else if (c == '"') {
                t.kind = Tok::Str;
                advance();
                while (pos_ < src_.size() && src_[pos_] != '"') {
                    if (src_[pos_] == '\n')
                        throw SyntaxError(span_at(t), "unterminated string literal");
                    t.text.push_back(static_cast<char>(lex_char_body(t)));
                }
                expect_char('"', t);
            } else {
                lex_punct(t);
            }
            t.end = static_cast<uint32_t>(pos_);
            out.push_back(std::move(t));
        }
    }

private:
    SourceSpan span_at(const Token &t) const
    {
        return SourceSpan{file_, t.begin, static_cast<uint32_t>(std::max(pos_, size_t{t.begin})), t.line, t.column};
    }

    void advance()
    {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space()
    {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    advance();
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                Token t;
                t.begin = static_cast<uint32_t>(pos_);
                t.line = line_;
                t.column = col_;
                advance();
                advance();
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/'))
                    advance();
                if (pos_ + 1 >= src_.size())
                    throw SyntaxError(span_at(t), "unterminated comment");
                advance();
                advance();
            } else {
                break;
            }
        }
    }

    void expect_char(char c, const Token &t)
    {
        if (pos_ >= src_.size() || src_[pos_] != c)
            throw SyntaxError(span_at(t), std::string("expected '") + c + "'");
        advance();
    }

    int lex_char_body(const Token &t)
    {
        if (pos_ >= src_.size())
            throw SyntaxError(span_at(t), "unexpected end of input in literal");
        char c = src_[pos_];
        advance();
        if (c != '\\')
            return static_cast<unsigned char>(c);
        if (pos_ >= src_.size())
            throw SyntaxError(span_at(t), "bad escape");
        char e = src_[pos_];
        advance();
        switch (e) {
        case 'n': return '\n';
        case 't': return '\t';
        case 'r': return '\r';
        case '0': return 0;
        case '\\': return '\\';
        case '\'': return '\'';
        case '"': return '"';
        case 'x': {
            int v = 0, digits = 0;
            while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_])) && digits < 2) {
                v = v * 16 + (std::isdigit(static_cast<unsigned char>(src_[pos_]))
                                  ? src_[pos_] - '0'
                                  : std::tolower(static_cast<unsigned char>(src_[pos_])) - 'a' + 10);
                advance();
                ++digits;
            }
            if (digits == 0)
                throw SyntaxError(span_at(t), "bad hex escape");
            return v;
        }
        default:
            throw SyntaxError(span_at(t), std::string("unknown escape '\\") + e + "'");
        }
    }

    void lex_number(Token &t)
    {
        t.kind = Tok::Int;
        uint64_t v = 0;
        if (src_[pos_] == '0' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
            t.style = LitStyle::Hex;
            advance();
            advance();
            size_t start = pos_;
            while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_]))) {
                char d = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_])));
                v = v * 16 + static_cast<uint64_t>(std::isdigit(static_cast<unsigned char>(d)) ? d - '0' : d - 'a' + 10);
                advance();
            }
            if (start == pos_)
                throw SyntaxError(span_at(t), "malformed hex literal");
        } else {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                v = v * 10 + static_cast<uint64_t>(src_[pos_] - '0');
                advance();
            }
        }
        if (v > 0xFFFFFFFFull)
            throw SyntaxError(span_at(t), "integer literal exceeds 32 bits");
        if (pos_ < src_.size() && (src_[pos_] == 'u' || src_[pos_] == 'U')) {
            t.unsigned_suffix = true;
            advance();
        }
        if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            throw UnsupportedConstruct(span_at(t), "literal suffix or floating literal");
        t.value = static_cast<int64_t>(v);
    }

    void lex_punct(Token &t)
    {
        static const char *multi[] = {"<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
                                      "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="};
        t.kind = Tok::Punct;
        for (const char *m : multi) {
            std::string_view mv(m);
            if (src_.substr(pos_, mv.size()) == mv) {
                for (size_t i = 0; i < mv.size(); ++i)
                    advance();
                t.text = std::string(mv);
                return;
            }
        }
        static const std::string singles = "(){}[];,.+-*/%&|^~!<>=?:";
        if (singles.find(src_[pos_]) == std::string::npos)
            throw SyntaxError(span_at(t), std::string("unexpected character '") + src_[pos_] + "'");
        t.text = std::string(1, src_[pos_]);
        advance();
    }

    std::string_view src_;
    std::string file_;
    size_t pos_ = 0;
    uint32_t line_ = 1, col_ = 1;
};

int binary_prec(const std::string &op)
{
    static const std::pair<const char *, int> table[] = {
        {"||", 2}, {"&&", 3}, {"|", 4}, {"^", 5}, {"&", 6}, {"==", 7}, {"!=", 7}, {"<", 8}, {"<=", 8},
        {">", 8}, {">=", 8}, {"<<", 9}, {">>", 9}, {"+", 10}, {"-", 10}, {"*", 11}, {"/", 11}, {"%", 11},
    };
    for (const auto &[s, p] : table)
        if (op == s)
            return p;
    return -1;
}

BinaryOp binary_op(const std::string &op)
{
    static const std::pair<const char *, BinaryOp> table[] = {
        {"||", BinaryOp::LogOr}, {"&&", BinaryOp::LogAnd}, {"|", BinaryOp::BitOr}, {"^", BinaryOp::BitXor},
        {"&", BinaryOp::BitAnd}, {"==", BinaryOp::Eq}, {"!=", BinaryOp::Ne}, {"<", BinaryOp::Lt},
        {"<=", BinaryOp::Le}, {">", BinaryOp::Gt}, {">=", BinaryOp::Ge}, {"<<", BinaryOp::Shl},
        {">>", BinaryOp::Shr}, {"+", BinaryOp::Add}, {"-", BinaryOp::Sub}, {"*", BinaryOp::Mul},
        {"/", BinaryOp::Div}, {"%", BinaryOp::Mod},
    };
    for (const auto &[s, b] : table)
        if (op == s)
            return b;
    return BinaryOp::Add;
}

class Parser {
public:
    Parser(std::vector<Token> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

    Program run()
    {
        Program prog;
        prog.file = file_;
        while (peek().kind != Tok::End)
            parse_item(prog);
        prog.next_id = next_id_;
        mark_indirect_calls(prog);
        return prog;
    }

private:
    const Token &peek(size_t ahead = 0) const
    {
        size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }

    bool is_punct(const char *p, size_t ahead = 0) const
    {
        const Token &t = peek(ahead);
        return t.kind == Tok::Punct && t.text == p;
    }

    bool is_word(const char *w, size_t ahead = 0) const
    {
        const Token &t = peek(ahead);
        return t.kind == Tok::Ident && t.text == w;
    }

    SourceSpan span_of(const Token &t) const { return SourceSpan{file_, t.begin, t.end, t.line, t.column}; }

    SourceSpan span_from(const Token &start) const
    {
        const Token &last = toks_[pos_ == 0 ? 0 : pos_ - 1];
        return SourceSpan{file_, start.begin, std::max(start.begin, last.end), start.line, start.column};
    }

    Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    [[noreturn]] void fail(const std::string &msg) const { throw SyntaxError(span_of(peek()), msg); }

    void expect(const char *p)
    {
        if (!is_punct(p))
            fail(std::string("expected '") + p + "' but found '" + peek().text + "'");
        ++pos_;
    }

    std::string expect_ident()
    {
        if (peek().kind != Tok::Ident || is_keyword(peek().text))
            fail("expected identifier");
        check_supported_word(peek());
        return take().text;
    }

    static bool is_keyword(const std::string &w)
    {
        static const std::set<std::string> kw = {"int", "char", "unsigned", "void", "struct", "if", "else",
                                                 "while", "for", "return", "break", "continue", "sizeof"};
        return kw.count(w) > 0 || kUnsupportedKeywords.count(w) > 0;
    }

    void check_supported_word(const Token &t) const
    {
        if (t.kind == Tok::Ident && kUnsupportedKeywords.count(t.text))
            throw UnsupportedConstruct(span_of(t), t.text);
    }

    NodeId fresh() { return next_id_++; }

    bool at_type_start(size_t ahead = 0) const
    {
        check_supported_word(peek(ahead));
        return is_word("int", ahead) || is_word("char", ahead) || is_word("unsigned", ahead) ||
               is_word("void", ahead) || is_word("struct", ahead);
    }

    TypeSpec parse_base_type()
    {
        TypeSpec t;
        check_supported_word(peek());
        if (is_word("int")) {
            ++pos_;
            t.base = BaseType::Int;
        } else if (is_word("char")) {
            ++pos_;
            t.base = BaseType::Char;
        } else if (is_word("void")) {
            ++pos_;
            t.base = BaseType::Void;
        } else if (is_word("unsigned")) {
            ++pos_;
            t.base = BaseType::Unsigned;
            if (is_word("char"))
                throw UnsupportedConstruct(span_of(peek()), "unsigned char");
            if (is_word("int"))
                ++pos_;
        } else if (is_word("struct")) {
            ++pos_;
            t.base = BaseType::Struct;
            t.tag = expect_ident();
        } else {
            fail("expected type");
        }
        check_supported_word(peek());
        return t;
    }

    TypeSpec parse_type_with_stars()
    {
        TypeSpec t = parse_base_type();
        while (is_punct("*")) {
            ++pos_;
            ++t.pointers;
        }
        return t;
    }

    std::vector<TypeSpec> parse_signature_types()
    {
        std::vector<TypeSpec> out;
        expect("(");
        if (is_word("void") && is_punct(")", 1)) {
            ++pos_;
        } else if (!is_punct(")")) {
            for (;;) {
                if (is_punct("..."))
                    throw UnsupportedConstruct(span_of(peek()), "varargs");
                TypeSpec p = parse_type_with_stars();
                if (peek().kind == Tok::Ident && !is_keyword(peek().text))
                    ++pos_;
                out.push_back(p);
                if (!is_punct(","))
                    break;
                ++pos_;
            }
        }
        expect(")");
        return out;
    }

    // Parses the declarator after a base type; handles '*', arrays and function pointers.
    VarDecl parse_declarator(const TypeSpec &base, const Token &start)
    {
        VarDecl d;
        d.type = base;
        while (is_punct("*")) {
            ++pos_;
            ++d.type.pointers;
        }
        if (is_punct("(") && is_punct("*", 1)) {
            pos_ += 2;
            d.name = expect_ident();
            expect(")");
            TypeSpec fp;
            fp.base = BaseType::FuncPtr;
            fp.signature.push_back(d.type);
            for (auto &p : parse_signature_types())
                fp.signature.push_back(p);
            d.type = fp;
        } else {
            d.name = expect_ident();
        }
        if (is_punct("[")) {
            ++pos_;
            if (peek().kind != Tok::Int)
                fail("array length must be an integer literal");
            d.type.array_len = static_cast<uint32_t>(take().value);
            expect("]");
            if (is_punct("["))
                throw UnsupportedConstruct(span_of(peek()), "multi-dimensional array");
        }
        d.id = fresh();
        d.span = span_from(start);
        return d;
    }

    void parse_item(Program &prog)
    {
        const Token start = peek();
        if (is_word("struct") && peek(1).kind == Tok::Ident && is_punct("{", 2)) {
            StructDecl s;
            s.id = fresh();
            pos_ += 1;
            s.tag = expect_ident();
            expect("{");
            while (!is_punct("}")) {
                const Token fstart = peek();
                TypeSpec base = parse_base_type();
                for (;;) {
                    s.fields.push_back(parse_declarator(base, fstart));
                    if (!is_punct(","))
                        break;
                    ++pos_;
                }
                expect(";");
            }
            expect("}");
            expect(";");
            s.span = span_from(start);
            prog.items.emplace_back(std::move(s));
            return;
        }
        TypeSpec base = parse_base_type();
        size_t save = pos_;
        TypeSpec ret = base;
        while (is_punct("*")) {
            ++pos_;
            ++ret.pointers;
        }
        if (peek().kind == Tok::Ident && is_punct("(", 1)) {
            Function fn;
            fn.id = fresh();
            fn.ret = ret;
            fn.name = expect_ident();
            parse_params(fn);
            if (is_punct(";")) {
                ++pos_;
            } else {
                fn.body = parse_function_body();
            }
            fn.span = span_from(start);
            prog.items.emplace_back(std::move(fn));
            return;
        }
        pos_ = save;
        for (;;) {
            VarDecl d = parse_declarator(base, start);
            if (is_punct("=")) {
                ++pos_;
                d.init = parse_assign();
            }
            d.span = span_from(start);
            prog.items.emplace_back(std::move(d));
            if (!is_punct(","))
                break;
            ++pos_;
        }
        expect(";");
    }

    void parse_params(Function &fn)
    {
        expect("(");
        if (is_word("void") && is_punct(")", 1)) {
            ++pos_;
        } else if (!is_punct(")")) {
            for (;;) {
                if (is_punct("..."))
                    throw UnsupportedConstruct(span_of(peek()), "varargs");
                const Token pstart = peek();
                TypeSpec base = parse_base_type();
                VarDecl p;
                if (is_punct(",") || is_punct(")")) {
                    p.type = base;
                    p.id = fresh();
                    p.span = span_from(pstart);
                } else {
                    p = parse_declarator(base, pstart);
                    if (p.type.array_len) {
                        p.type.array_len.reset();
                        ++p.type.pointers;
                    }
                }
                fn.params.push_back(std::move(p));
                if (!is_punct(","))
                    break;
                ++pos_;
            }
        }
        expect(")");
    }

    Stmt parse_function_body()
    {
        const Token start = peek();
        expect("{");
        Stmt block;
        block.kind = StmtKind::Block;
        block.id = fresh();
        bool seen_statement = false;
        while (!is_punct("}")) {
            if (peek().kind == Tok::End)
                fail("unexpected end of input in function body");
            if (at_type_start()) {
                if (seen_statement)
                    throw UnsupportedConstruct(span_of(peek()), "declaration after statement");
                parse_local_decls(block.body);
            } else {
                seen_statement = true;
                block.body.push_back(parse_stmt());
            }
        }
        expect("}");
        block.span = span_from(start);
        return block;
    }

    void parse_local_decls(std::vector<Stmt> &out)
    {
        const Token start = peek();
        TypeSpec base = parse_base_type();
        for (;;) {
            Stmt s;
            s.kind = StmtKind::Decl;
            s.id = fresh();
            VarDecl d = parse_declarator(base, start);
            if (is_punct("=")) {
                ++pos_;
                d.init = parse_assign();
            }
            d.span = span_from(start);
            s.span = d.span;
            s.decl = std::move(d);
            out.push_back(std::move(s));
            if (!is_punct(","))
                break;
            ++pos_;
        }
        expect(";");
    }

    Stmt as_block(Stmt s)
    {
        if (s.kind == StmtKind::Block)
            return s;
        Stmt b;
        b.kind = StmtKind::Block;
        b.id = fresh();
        b.span = s.span;
        b.body.push_back(std::move(s));
        return b;
    }

    Stmt parse_stmt()
    {
        const Token start = peek();
        check_supported_word(start);
        Stmt s;
        if (is_punct("{")) {
            ++pos_;
            s.kind = StmtKind::Block;
            s.id = fresh();
            while (!is_punct("}")) {
                if (peek().kind == Tok::End)
                    fail("unexpected end of input in block");
                if (at_type_start())
                    throw UnsupportedConstruct(span_of(peek()), "block-scope declaration");
                s.body.push_back(parse_stmt());
            }
            expect("}");
        } else if (is_punct(";")) {
            ++pos_;
            s.kind = StmtKind::Block;
            s.id = fresh();
        } else if (is_word("if")) {
            ++pos_;
            s.kind = StmtKind::If;
            s.id = fresh();
            expect("(");
            s.exprs.push_back(parse_expr());
            expect(")");
            s.body.push_back(as_block(parse_stmt()));
            if (is_word("else")) {
                ++pos_;
                s.body.push_back(as_block(parse_stmt()));
            }
        } else if (is_word("while")) {
            ++pos_;
            s.kind = StmtKind::While;
            s.id = fresh();
            expect("(");
            s.exprs.push_back(parse_expr());
            expect(")");
            s.body.push_back(as_block(parse_stmt()));
        } else if (is_word("for")) {
            ++pos_;
            s.kind = StmtKind::For;
            s.id = fresh();
            expect("(");
            if (at_type_start())
                throw UnsupportedConstruct(span_of(peek()), "block-scope declaration");
            s.exprs.push_back(is_punct(";") ? none_expr() : parse_expr());
            expect(";");
            s.exprs.push_back(is_punct(";") ? none_expr() : parse_expr());
            expect(";");
            s.exprs.push_back(is_punct(")") ? none_expr() : parse_expr());
            expect(")");
            s.body.push_back(as_block(parse_stmt()));
        } else if (is_word("return")) {
            ++pos_;
            s.kind = StmtKind::Return;
            s.id = fresh();
            if (!is_punct(";"))
                s.exprs.push_back(parse_expr());
            expect(";");
        } else if (is_word("break") || is_word("continue")) {
            s.kind = is_word("break") ? StmtKind::Break : StmtKind::Continue;
            ++pos_;
            s.id = fresh();
            expect(";");
        } else if (is_word("else")) {
            fail("'else' without 'if'");
        } else {
            s.kind = StmtKind::Expr;
            s.id = fresh();
            s.exprs.push_back(parse_expr());
            expect(";");
        }
        s.span = span_from(start);
        return s;
    }

    Expr none_expr()
    {
        Expr e;
        e.kind = ExprKind::None;
        e.id = fresh();
        e.span = span_of(peek());
        return e;
    }

    Expr parse_expr()
    {
        if (is_punct(","))
            fail("unexpected ','");
        Expr e = parse_assign();
        if (is_punct(","))
            throw UnsupportedConstruct(span_of(peek()), "comma operator");
        return e;
    }

    Expr parse_assign()
    {
        const Token start = peek();
        Expr lhs = parse_binary(2);
        if (is_punct("?"))
            throw UnsupportedConstruct(span_of(peek()), "conditional operator");
        if (is_punct("=") || is_punct("+=") || is_punct("-=")) {
            std::string op = take().text;
            Expr e;
            e.kind = ExprKind::Assign;
            e.id = fresh();
            e.op = static_cast<int>(op == "=" ? AssignOp::Assign : op == "+=" ? AssignOp::AddAssign : AssignOp::SubAssign);
            e.kids.push_back(std::move(lhs));
            e.kids.push_back(parse_assign());
            e.span = span_from(start);
            return e;
        }
        static const char *unsupported[] = {"*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="};
        for (const char *u : unsupported)
            if (is_punct(u))
                throw UnsupportedConstruct(span_of(peek()), std::string("compound assignment ") + u);
        return lhs;
    }

    Expr parse_binary(int min_prec)
    {
        const Token start = peek();
        Expr lhs = parse_unary();
        for (;;) {
            const Token &t = peek();
            if (t.kind != Tok::Punct)
                break;
            int prec = binary_prec(t.text);
            if (prec < min_prec)
                break;
            std::string op = take().text;
            Expr rhs = parse_binary(prec + 1);
            Expr e;
            e.kind = ExprKind::Binary;
            e.id = fresh();
            e.op = static_cast<int>(binary_op(op));
            e.kids.push_back(std::move(lhs));
            e.kids.push_back(std::move(rhs));
            e.span = span_from(start);
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr parse_unary()
    {
        const Token start = peek();
        auto make_unary = [&](ExprKind kind, int op) {
            Expr e;
            e.kind = kind;
            e.id = fresh();
            e.op = op;
            e.kids.push_back(parse_unary());
            e.span = span_from(start);
            return e;
        };
        if (is_punct("-")) { ++pos_; return make_unary(ExprKind::Unary, static_cast<int>(UnaryOp::Neg)); }
        if (is_punct("!")) { ++pos_; return make_unary(ExprKind::Unary, static_cast<int>(UnaryOp::Not)); }
        if (is_punct("~")) { ++pos_; return make_unary(ExprKind::Unary, static_cast<int>(UnaryOp::BitNot)); }
        if (is_punct("*")) { ++pos_; return make_unary(ExprKind::Unary, static_cast<int>(UnaryOp::Deref)); }
        if (is_punct("&")) { ++pos_; return make_unary(ExprKind::Unary, static_cast<int>(UnaryOp::AddrOf)); }
        if (is_punct("++")) { ++pos_; return make_unary(ExprKind::PreInc, 0); }
        if (is_punct("--")) { ++pos_; return make_unary(ExprKind::PreDec, 0); }
        if (is_word("sizeof")) {
            ++pos_;
            if (!(is_punct("(") && at_type_start(1)))
                throw UnsupportedConstruct(span_of(peek()), "sizeof expression");
            ++pos_;
            Expr e;
            e.kind = ExprKind::SizeofType;
            e.id = fresh();
            e.type = parse_type_with_stars();
            expect(")");
            e.span = span_from(start);
            return e;
        }
        if (is_punct("(") && at_type_start(1)) {
            ++pos_;
            Expr e;
            e.kind = ExprKind::Cast;
            e.id = fresh();
            e.type = parse_type_with_stars();
            expect(")");
            e.kids.push_back(parse_unary());
            e.span = span_from(start);
            return e;
        }
        return parse_postfix();
    }

    Expr parse_postfix()
    {
        const Token start = peek();
        Expr e = parse_primary();
        for (;;) {
            if (is_punct("[")) {
                ++pos_;
                Expr ix;
                ix.kind = ExprKind::Index;
                ix.id = fresh();
                ix.kids.push_back(std::move(e));
                ix.kids.push_back(parse_expr());
                expect("]");
                ix.span = span_from(start);
                e = std::move(ix);
            } else if (is_punct("(")) {
                ++pos_;
                Expr c;
                c.kind = ExprKind::Call;
                c.id = fresh();
                c.kids.push_back(std::move(e));
                if (!is_punct(")")) {
                    for (;;) {
                        c.kids.push_back(parse_assign());
                        if (!is_punct(","))
                            break;
                        ++pos_;
                    }
                }
                expect(")");
                c.span = span_from(start);
                e = std::move(c);
            } else if (is_punct(".") || is_punct("->")) {
                bool arrow = take().text == "->";
                Expr m;
                m.kind = ExprKind::Member;
                m.id = fresh();
                m.arrow = arrow;
                m.text = expect_ident();
                m.kids.push_back(std::move(e));
                m.span = span_from(start);
                e = std::move(m);
            } else if (is_punct("++") || is_punct("--")) {
                bool inc = take().text == "++";
                Expr p;
                p.kind = inc ? ExprKind::PostInc : ExprKind::PostDec;
                p.id = fresh();
                p.kids.push_back(std::move(e));
                p.span = span_from(start);
                e = std::move(p);
            } else {
                break;
            }
        }
        return e;
    }

    Expr parse_primary()
    {
        const Token start = peek();
        check_supported_word(start);
        Expr e;
        if (start.kind == Tok::Int) {
            ++pos_;
            e.kind = ExprKind::IntLit;
            e.value = start.value;
            e.style = start.style;
            e.unsigned_suffix = start.unsigned_suffix;
        } else if (start.kind == Tok::Str) {
            e.kind = ExprKind::StrLit;
            while (peek().kind == Tok::Str)
                e.text += take().text;
        } else if (start.kind == Tok::Ident && !is_keyword(start.text)) {
            ++pos_;
            e.kind = ExprKind::Ident;
            e.text = start.text;
        } else if (is_punct("(")) {
            ++pos_;
            Expr inner = parse_expr();
            expect(")");
            return inner;
        } else {
            fail("expected expression but found '" + start.text + "'");
        }
        e.id = fresh();
        e.span = span_from(start);
        return e;
    }

    static void mark_calls(Expr &e, const std::set<std::string> &fns)
    {
        for (auto &k : e.kids)
            mark_calls(k, fns);
        if (e.kind == ExprKind::Call)
            e.indirect = !(e.kids[0].kind == ExprKind::Ident && (fns.count(e.kids[0].text) || is_intrinsic(e.kids[0].text)));
    }

    static void mark_calls(Stmt &s, const std::set<std::string> &fns)
    {
        for (auto &b : s.body)
            mark_calls(b, fns);
        for (auto &e : s.exprs)
            mark_calls(e, fns);
        if (s.decl && s.decl->init)
            mark_calls(*s.decl->init, fns);
    }

    static void mark_indirect_calls(Program &prog)
    {
        std::set<std::string> fns;
        for (const auto &item : prog.items)
            if (const auto *f = std::get_if<Function>(&item))
                fns.insert(f->name);
        for (auto &item : prog.items) {
            if (auto *f = std::get_if<Function>(&item); f && f->body)
                mark_calls(*f->body, fns);
            if (auto *v = std::get_if<VarDecl>(&item); v && v->init)
                mark_calls(*v->init, fns);
        }
    }

    std::vector<Token> toks_;
    std::string file_;
    size_t pos_ = 0;
    NodeId next_id_ = 1;
};

} // namespace

Program parse(std::string_view source, const std::string &file)
{
    Lexer lexer(source, file);
    Parser parser(lexer.run(), file);
    return parser.run();
}

} // namespace chaff

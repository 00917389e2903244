#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chaff/ast.hpp"

namespace chaff {

/// Parse a mini-C translation unit. Throws SyntaxError or UnsupportedConstruct.
Program parse(std::string_view source, const std::string &file = "<input>");

/// Deterministic pretty-printer: four-space indent, one statement per line,
/// braces on every compound statement.
std::string print(const Program &program);
std::string print_expr(const Expr &expr);
std::string print_type(const TypeSpec &type, const std::string &declarator);

enum class InsertPos { Before, After };

struct InsertStatement {
    NodeId anchor = kNoNode;
    InsertPos pos = InsertPos::Before;
    Stmt stmt;
};

struct InsertDeclaration {
    NodeId function = kNoNode;
    VarDecl decl;
    int position = -1;      // index into the body's declaration list; -1 appends
};

struct AddParameter {
    NodeId function = kNoNode;
    VarDecl param;
};

struct RewriteCallSite {
    NodeId call = kNoNode;
    Expr extra_arg;
};

struct InsertGlobal {
    VarDecl decl;
};

using Edit = std::variant<InsertStatement, InsertDeclaration, AddParameter, RewriteCallSite, InsertGlobal>;

struct EditScript {
    std::vector<Edit> edits;

    bool empty() const { return edits.empty(); }
    void append(const EditScript &other) { edits.insert(edits.end(), other.edits.begin(), other.edits.end()); }
};

class EditError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AnchorNotFound : public EditError {
public:
    explicit AnchorNotFound(NodeId id)
        : EditError("edit anchor " + std::to_string(id) + " not found"), id_(id) {}
    NodeId id() const { return id_; }

private:
    NodeId id_;
};

class ConflictingEdits : public EditError {
public:
    ConflictingEdits(size_t first, size_t second, const std::string &why)
        : EditError("edits " + std::to_string(first) + " and " + std::to_string(second) + " conflict: " + why),
          first_(first), second_(second) {}
    size_t first() const { return first_; }
    size_t second() const { return second_; }

private:
    size_t first_, second_;
};

/// Apply edits in script order. Inserted nodes receive fresh NodeIds; all other
/// nodes keep theirs.
Program apply_edits(const Program &program, const EditScript &edits);

// Builders used by the injector to assemble inserted code.
namespace build {
Expr int_lit(int64_t v, LitStyle style = LitStyle::Decimal, bool unsigned_suffix = false);
Expr ident(const std::string &name);
Expr unary(UnaryOp op, Expr e);
Expr binary(BinaryOp op, Expr l, Expr r);
Expr assign(Expr l, Expr r);
Expr call(const std::string &fn, std::vector<Expr> args);
Expr index(Expr base, Expr idx);
Expr cast(TypeSpec t, Expr e);
Stmt expr_stmt(Expr e);
Stmt block(std::vector<Stmt> body);
Stmt if_stmt(Expr cond, Stmt then_block);
Stmt while_stmt(Expr cond, Stmt body);
VarDecl var(TypeSpec t, const std::string &name);
TypeSpec scalar(BaseType base, int pointers = 0);
TypeSpec array(BaseType base, uint32_t len);
} // namespace build

// Traversal helpers.
const Stmt *find_stmt(const Program &program, NodeId id);
const Expr *find_expr(const Program &program, NodeId id);
/// The function whose body contains the node, or nullptr.
const Function *enclosing_function(const Program &program, NodeId id);
std::vector<const Expr *> call_sites_of(const Program &program, const std::string &callee);
/// Functions whose name is used as a value anywhere (address taken).
std::vector<std::string> address_taken_functions(const Program &program);

} // namespace chaff

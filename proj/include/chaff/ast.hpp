#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace chaff {

using NodeId = uint32_t;
inline constexpr NodeId kNoNode = 0;

struct SourceSpan {
    std::string file;
    uint32_t begin = 0;
    uint32_t end = 0;
    uint32_t line = 1;
    uint32_t column = 1;
};

std::string to_string(const SourceSpan &span);

class FrontendError : public std::runtime_error {
public:
    FrontendError(SourceSpan span, const std::string &msg)
        : std::runtime_error(to_string(span) + ": " + msg), span_(std::move(span)) {}
    const SourceSpan &span() const { return span_; }

private:
    SourceSpan span_;
};

class SyntaxError : public FrontendError {
public:
    using FrontendError::FrontendError;
};

class UnsupportedConstruct : public FrontendError {
public:
    UnsupportedConstruct(SourceSpan span, std::string construct)
        : FrontendError(std::move(span), "unsupported construct '" + construct + "'"),
          construct_(std::move(construct)) {}
    const std::string &construct() const { return construct_; }

private:
    std::string construct_;
};

enum class BaseType { Void, Int, Unsigned, Char, Struct, FuncPtr };

struct TypeSpec {
    BaseType base = BaseType::Int;
    std::string tag;                     // struct tag
    int pointers = 0;
    std::optional<uint32_t> array_len;   // declarations only
    std::vector<TypeSpec> signature;     // FuncPtr: [return, params...]

    bool is_pointer() const { return pointers > 0 || base == BaseType::FuncPtr; }
    bool is_array() const { return array_len.has_value(); }
    bool is_scalar() const { return !is_array() && (pointers > 0 || base != BaseType::Struct); }
    bool is_char_string() const { return base == BaseType::Char && pointers + (is_array() ? 1 : 0) == 1; }
    bool operator==(const TypeSpec &) const = default;
};

enum class ExprKind {
    None,       // absent optional slot (for-loop header)
    IntLit,
    StrLit,
    Ident,
    Unary,
    Binary,
    Assign,
    Call,
    Index,
    Member,
    Cast,
    SizeofType,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
};

enum class UnaryOp { Neg, Not, BitNot, Deref, AddrOf };

enum class BinaryOp {
    Mul, Div, Mod, Add, Sub, Shl, Shr, Lt, Le, Gt, Ge, Eq, Ne, BitAnd, BitXor, BitOr, LogAnd, LogOr,
};

enum class AssignOp { Assign, AddAssign, SubAssign };

enum class LitStyle { Decimal, Hex, Char };

struct Expr {
    NodeId id = kNoNode;
    SourceSpan span;
    ExprKind kind = ExprKind::None;
    int op = 0;                 // UnaryOp / BinaryOp / AssignOp
    int64_t value = 0;          // IntLit
    LitStyle style = LitStyle::Decimal;
    bool unsigned_suffix = false;
    std::string text;           // identifier, field name, string literal contents
    bool arrow = false;         // Member: '->' vs '.'
    bool indirect = false;      // Call: callee is not a named function
    TypeSpec type;              // Cast / SizeofType
    std::vector<Expr> kids;
};

struct VarDecl {
    NodeId id = kNoNode;
    SourceSpan span;
    TypeSpec type;
    std::string name;
    std::optional<Expr> init;
};

enum class StmtKind { Block, Decl, Expr, If, While, For, Return, Break, Continue };

struct Stmt {
    NodeId id = kNoNode;
    SourceSpan span;
    StmtKind kind = StmtKind::Block;
    std::vector<Stmt> body;     // Block: children; If: then[, else]; While/For: body
    std::vector<Expr> exprs;    // If/While: cond; For: init, cond, step; Expr/Return: value
    std::optional<VarDecl> decl;
};

struct Function {
    NodeId id = kNoNode;
    SourceSpan span;
    TypeSpec ret;
    std::string name;
    std::vector<VarDecl> params;
    std::optional<Stmt> body;   // absent for prototypes
};

struct StructDecl {
    NodeId id = kNoNode;
    SourceSpan span;
    std::string tag;
    std::vector<VarDecl> fields;
};

using TopItem = std::variant<VarDecl, Function, StructDecl>;

struct Program {
    std::string file;
    std::vector<TopItem> items;
    NodeId next_id = 1;

    const Function *find_function(const std::string &name) const;
    Function *find_function(const std::string &name);
    const StructDecl *find_struct(const std::string &tag) const;
    const VarDecl *find_global(const std::string &name) const;
};

// Functions the runtime provides when a program only declares them.
bool is_intrinsic(const std::string &name);

NodeId item_id(const TopItem &item);

// Structural equality ignoring NodeIds and spans.
bool same_structure(const Program &a, const Program &b);

} // namespace chaff

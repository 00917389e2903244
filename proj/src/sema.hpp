#pragma once

// Name resolution, expression typing and storage layout shared by the
// interpreter and the injector.

#include <unordered_map>

#include "chaff/interp.hpp"

namespace chaff::sema {

enum class RefKind : uint8_t { None, Local, Param, Global, Function };

struct Ref {
    RefKind kind = RefKind::None;
    uint32_t index = 0;
};

enum class CallKind : uint8_t { Direct, Intrinsic, Indirect };

struct StructLayout {
    uint32_t size = 0;
    uint32_t align = 1;
    std::vector<uint32_t> offsets;
};

struct StmtMeta {
    NodeId parent_block = kNoNode;
    std::vector<uint32_t> mentions;   // interned identifier ids referenced by the statement itself
};

struct FuncInfo {
    const Function *fn = nullptr;
    uint32_t index = 0;               // code address = kCodeBase + 16 * index
    FrameLayout layout;
    std::vector<const VarDecl *> locals;
    std::vector<const Stmt *> decl_stmts;
    NodeId first_statement = kNoNode; // first non-declaration statement of the body
    std::unordered_map<NodeId, StmtMeta> stmts;
    std::unordered_map<NodeId, NodeId> block_parent;
};

class SemanticError : public FrontendError {
public:
    using FrontendError::FrontendError;
};

class Info {
public:
    explicit Info(const Program &program);

    const Program &program() const { return *prog_; }
    const TypeSpec &type(const Expr &e) const { return types_.at(e.id); }
    Ref ref(const Expr &e) const { return refs_.at(e.id); }
    CallKind call_kind(const Expr &e) const { return static_cast<CallKind>(calls_.at(e.id)); }

    uint32_t size_of(const TypeSpec &t) const;
    uint32_t align_of(const TypeSpec &t) const;
    const StructLayout &layout(const std::string &tag) const;
    uint32_t field_index(const std::string &tag, const std::string &field, const SourceSpan &span) const;
    const TypeSpec &field_type(const std::string &tag, uint32_t index) const;

    const std::vector<FuncInfo> &functions() const { return funcs_; }
    const FuncInfo *function(const std::string &name) const;
    const std::vector<const VarDecl *> &globals() const { return globals_; }
    uint32_t name_id(const std::string &name) const;

    /// Pointee / element type (arrays and pointers lose one level).
    static TypeSpec element(const TypeSpec &t);
    static TypeSpec pointer_to(TypeSpec t);
    static TypeSpec decay(const TypeSpec &t);

private:
    void check_function(FuncInfo &fi);
    void check_stmt(FuncInfo &fi, const Stmt &s, NodeId block);
    TypeSpec check_expr(const FuncInfo *fi, const Expr &e);
    void collect_mentions(const Expr &e, std::vector<uint32_t> &out);
    uint32_t intern(const std::string &name);

    const Program *prog_;
    std::vector<TypeSpec> types_;
    std::vector<Ref> refs_;
    std::vector<uint8_t> calls_;
    std::unordered_map<std::string, StructLayout> structs_;
    std::vector<FuncInfo> funcs_;
    std::unordered_map<std::string, uint32_t> func_index_;
    std::vector<const VarDecl *> globals_;
    std::unordered_map<std::string, uint32_t> global_index_;
    std::unordered_map<std::string, uint32_t> names_;
};

} // namespace chaff::sema

#pragma once

// The interpreter proper. Split across interp_eval.cpp (expressions, loads,
// stores) and interp.cpp (statements, calls, intrinsics, entry point).

#include <array>
#include <map>

#include "chaff/heap.hpp"
#include "memory.hpp"
#include "sema.hpp"

namespace chaff::detail {

struct Val {
    uint32_t v = 0;
    std::array<TaintId, 4> t{};
    std::array<uint8_t, 4> n{};

    bool tainted() const { return t[0] | t[1] | t[2] | t[3]; }
};

inline Val plain(uint32_t v)
{
    Val r;
    r.v = v;
    return r;
}

struct LV {
    uint32_t addr = 0;
    const TypeSpec *type = nullptr;
    const Expr *expr = nullptr;       // null for declaration initializers
    bool has_path = false;            // path is re-evaluable (constant indices only)
    bool rooted = false;              // path.root names the variable the access started from
    LvaluePath path;
    bool indexed = false;
    uint32_t root_base = 0;
    bool string_offset = false;
    uint32_t offset = 0;
    uint32_t str_base = 0;
};

struct FaultSignal {
    FaultReport report;
};

struct Frame {
    const sema::FuncInfo *fi = nullptr;
    uint32_t base = 0;                // true frame base
    uint32_t fp = 0;                  // frame-pointer register, used for every local access
    uint32_t ra_expected = 0;
    NodeId call_site = kNoNode;
    const Stmt *cur = nullptr;
    uint32_t stmt_seq = 0;
    uint64_t stmt_clock = 0;
    bool fresh = true;
    bool in_decl = false;
    const Expr *top_store = nullptr;
    std::map<std::pair<NodeId, uint32_t>, uint64_t> first_mention;
    std::vector<std::pair<size_t, uint32_t>> pending;   // decl-initializer observations awaiting the first statement
    Val ret;
};

enum class Flow { Normal, Break, Continue, Return };

class Machine {
public:
    Machine(const Program &program, const std::string &input, const RunOptions &options);
    RunResult run();

private:
    // interp_eval.cpp
    Val eval(const Expr &e);
    LV lvalue(const Expr &e);
    Val load(const LV &lv);
    void store(const LV &lv, const Val &v);
    Val load_raw(uint32_t addr, const TypeSpec &t, const SourceSpan &span);
    void store_raw(uint32_t addr, uint32_t size, const Val &v);
    void check_mapped(uint32_t addr, uint32_t n, bool write);
    Val mix(const Val &a, const Val &b);
    Val mix(const Val &a);
    Val arith(const Expr &e, BinaryOp op, const Val &l, const Val &r, const TypeSpec &lt, const TypeSpec &rt);
    void observe(const LV &lv, const Val &v, bool is_write);
    void branch(NodeId node, const Val &cond);
    void tick(const SourceSpan &span);
    uint32_t scan_strlen(uint32_t addr, TaintId *taint);

    // interp.cpp
    Flow exec(const Stmt &s);
    void enter_stmt(const Stmt &s);
    Val call(const Expr &e);
    Val call_function(const sema::FuncInfo &fi, const std::vector<Val> &args, NodeId call_site, bool indirect);
    Val intrinsic(const Expr &e, const std::string &name, const std::vector<Val> &args);
    uint32_t string_literal(const Expr &e);
    void init_globals();
    [[noreturn]] void fault(FaultKind kind, uint32_t address, std::string assertion = {});
    std::string resolve(uint32_t addr) const;
    void audit_store(const LV &lv, uint32_t size);
    void emit(TraceEvent ev);
    bool full() const { return opt_.trace == TraceLevel::Full; }
    uint32_t local_addr(const Frame &f, uint32_t offset) const { return f.fp + offset; }

    const Program &prog_;
    sema::Info info_;
    RunOptions opt_;
    std::string input_;
    uint32_t in_pos_ = 0;
    TaintTable tt_;
    Memory mem_;
    uint32_t seq_ = 0;
    HeapBacking backing_;
    heap::Heap heap_;
    RunResult res_;
    std::vector<uint32_t> global_addr_;
    std::unordered_map<NodeId, uint32_t> rodata_;
    uint32_t rodata_next_ = 0;
    uint32_t rodata_end_ = 0;
    std::vector<Frame> frames_;
    uint32_t sp_ = kStackTop;
    int cond_depth_ = 0;
    bool paths_ = false;
};

} // namespace chaff::detail

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "chaff/ast.hpp"
#include "chaff/taint.hpp"

namespace chaff {

struct FrameSlot {
    std::string name;
    uint32_t offset = 0;   // from the frame base (lowest address of the frame)
    uint32_t size = 0;
};

/// Activation layout. Locals occupy [base, base + saved_fp_offset) in
/// declaration order from high to low addresses; the copied-arguments region
/// sits directly above the last-declared local.
struct FrameLayout {
    std::string function;
    std::vector<FrameSlot> locals;       // declaration order
    std::vector<FrameSlot> params;       // copies, inside the copied-args region
    uint32_t copied_args_offset = 0;
    uint32_t copied_args_size = 0;
    uint32_t saved_fp_offset = 0;
    uint32_t return_address_offset = 4;
    uint32_t frame_base = 0;

    const FrameSlot *local(const std::string &name) const;
};

/// One step of an lvalue access path: `.f`, `->f` or a constant `[k]`.
struct PathStep {
    enum class Kind { Dot, Arrow, Index } kind = Kind::Dot;
    std::string field;
    uint32_t index = 0;
    bool operator==(const PathStep &) const = default;
};

struct LvaluePath {
    std::string root;
    bool root_global = false;
    bool root_param = false;
    std::vector<PathStep> steps;

    std::string text() const;
    bool operator==(const LvaluePath &) const = default;
};

struct BranchEval {
    NodeId node = kNoNode;
    TaintSet taint;
};

struct CallEnter {
    FrameLayout layout;
    std::vector<std::string> chain;      // outermost first, ends with the callee
    NodeId call_site = kNoNode;
    bool indirect = false;
};

struct Return {
    std::string function;
};

struct HeapAlloc {
    uint32_t address = 0;
    uint32_t size = 0;
};

struct HeapFree {
    uint32_t address = 0;
};

struct LvalueObserved {
    NodeId stmt = kNoNode;              // statement executing when observed
    std::string function;
    LvaluePath path;
    uint32_t address = 0;
    uint32_t width = 0;
    std::vector<TaintSet> taint;        // per byte
    std::vector<uint32_t> tcn;          // per byte
    bool is_write = false;
    bool siphonable = false;            // the value can be re-read at the siphon point
    NodeId siphon_anchor = kNoNode;
    bool siphon_after = false;
    bool in_decl_init = false;
    bool initialized = false;           // in-scope reference evidence (or param/global)
    int64_t evidence_index = -1;        // trace index of that reference, -1 for params/globals
    bool string_offset = false;         // char access at a constant offset from a char* base
    uint32_t offset = 0;
    uint32_t base_strlen = 0;           // strlen of the base on this run

    uint32_t max_tcn() const;
};

struct InputRead {
    uint32_t begin = 0;
    uint32_t end = 0;
};

struct StmtEnter {
    NodeId node = kNoNode;
    std::string function;
};

using TraceEvent =
    std::variant<BranchEval, CallEnter, Return, HeapAlloc, HeapFree, LvalueObserved, InputRead, StmtEnter>;

/// Trace index = position in `events`.
struct Trace {
    uint32_t input_length = 0;
    std::vector<TraceEvent> events;

    /// Index of the first InputRead, or events.size() when input is never read.
    size_t first_input_read() const;
};

class TraceFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr uint32_t kTraceMagic = 0x52544843;   // "CHTR"
inline constexpr uint16_t kTraceVersion = 1;

void write_trace(std::ostream &os, const Trace &trace);
Trace read_trace(std::istream &is);
std::string dump_trace(const Trace &trace);

} // namespace chaff

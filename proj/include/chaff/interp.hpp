#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaff/ast.hpp"
#include "chaff/trace.hpp"

namespace chaff {

// Modeled 32-bit address space.
inline constexpr uint32_t kUnmappedLimit = 4096;          // page 0
inline constexpr uint32_t kHighGuard = 0xFFFF0000u;       // [kHighGuard, 2^32) is unmapped too
inline constexpr uint32_t kGlobalBase = 0x00010000u;
inline constexpr uint32_t kHeapBase = 0x00100000u;
inline constexpr uint32_t kStackTop = 0x00800000u;
inline constexpr uint32_t kCodeBase = 0x08048000u;       // function addresses
inline constexpr uint32_t kReturnSiteBase = 0x08050000u; // return-site tokens

struct Limits {
    uint64_t max_steps = 10'000'000;
    uint32_t heap_bytes = 1u << 20;
    uint32_t stack_bytes = 1u << 20;
};

enum class TraceLevel {
    None,         // output and fault only
    Statements,   // StmtEnter, CallEnter, Return, InputRead
    Full,         // everything
};

struct RunOptions {
    Limits limits;
    TraceLevel trace = TraceLevel::Full;
    bool audit = false;   // attribute stores rooted at lava_*_<id> names; stamp overflow bytes
};

enum class FaultKind { WriteUnmapped, ReadUnmapped, PcUnmapped, AllocatorAbort, DivZeroMarker };

std::string to_string(FaultKind k);

struct FaultReport {
    FaultKind kind = FaultKind::WriteUnmapped;
    uint32_t address = 0;
    uint64_t trace_index = 0;
    std::string function;
    NodeId node = kNoNode;
    std::string assertion;            // AllocatorAbort only
    std::optional<uint32_t> bug_id;

    std::string describe() const;
};

class RuntimeError : public std::runtime_error {
public:
    RuntimeError(SourceSpan span, const std::string &msg)
        : std::runtime_error(to_string(span) + ": " + msg), span_(std::move(span)) {}
    const SourceSpan &span() const { return span_; }

private:
    SourceSpan span_;
};

class BudgetExceeded : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class UninitializedRead : public RuntimeError {
public:
    UninitializedRead(SourceSpan span, uint32_t address)
        : RuntimeError(std::move(span), "read of uninitialized memory at " + std::to_string(address)),
          address_(address) {}
    uint32_t address() const { return address_; }

private:
    uint32_t address_;
};

/// One store issued by injected code (audit mode).
struct AuditWrite {
    uint32_t bug_id = 0;
    std::string root;          // lava_* variable the lvalue is rooted at
    uint32_t address = 0;
    uint32_t size = 0;
    uint32_t root_base = 0;    // array address or pointer value the store indexed from
    std::string object;        // what the address belongs to (see resolve in interp.cpp)
    std::string function;
    NodeId node = kNoNode;
};

struct RunResult {
    std::string output;
    int exit_code = 0;
    Trace trace;
    std::optional<FaultReport> fault;
    uint64_t steps = 0;
    std::vector<AuditWrite> audit;
    std::set<Label> synthetic_in_branches;   // audit mode
    std::set<Label> synthetic_in_output;     // audit mode
};

/// Execute `main` on `input`. Faults are results; UninitializedRead,
/// BudgetExceeded and other RuntimeErrors are thrown.
RunResult run(const Program &program, const std::string &input, const RunOptions &options = {});

uint32_t type_size(const Program &program, const TypeSpec &type);

/// The layout formula, with frame_base 0.
FrameLayout compute_frame_layout(const Program &program, const Function &fn);

struct FrameGeometry {
    std::string buffer;                   // bottom (last-declared) local, empty if none
    uint32_t saved_fp_distance = 0;       // bytes from the end of the buffer to the saved FP
    uint32_t return_address_distance = 0;
    uint32_t copied_args_skip = 0;
};

class FunctionNotInTrace : public std::runtime_error {
public:
    explicit FunctionNotInTrace(const std::string &fn) : std::runtime_error("function not in trace: " + fn) {}
};

FrameGeometry frame_geometry(const FrameLayout &layout);
FrameGeometry measure_frame_geometry(const Trace &trace, const std::string &function);

} // namespace chaff

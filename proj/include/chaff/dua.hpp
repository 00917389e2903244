#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaff/interp.hpp"

namespace chaff {

struct Thresholds {
    uint32_t tcn_max = 10;
    uint32_t liveness_max = 0;
};

/// A dead, uncomplicated, available lvalue observation, together with where
/// its value can be siphoned and for how long the siphoned copy stays current.
struct DuaRecord {
    size_t trace_index = 0;
    NodeId stmt = kNoNode;
    std::string function;
    LvaluePath path;
    uint32_t width = 0;
    std::vector<TaintSet> taint;
    uint32_t max_tcn = 0;
    std::vector<uint32_t> liveness;
    int64_t evidence_index = -1;
    bool string_offset = false;        // siphon needs a strlen guard
    uint32_t offset = 0;
    NodeId siphon_anchor = kNoNode;
    bool siphon_after = false;
    size_t siphon_done = 0;            // trace index by which the siphon has run
    size_t superseded_at = SIZE_MAX;   // next re-execution of the siphon
    bool trigger_capable = false;      // 4 bytes from 4 consecutive input offsets, pure copy

    /// First input offset of a trigger-capable DUA.
    uint32_t first_label() const { return taint.at(0).at(0); }
    std::vector<Label> labels() const;
};

struct DuaRejection {
    size_t trace_index = 0;
    LvaluePath path;
    std::string reason;   // uninitialized | complicated | live | not-siphonable
};

struct DuaScan {
    std::vector<DuaRecord> accepted;
    std::vector<DuaRejection> rejected;
};

DuaScan find_duas(const Trace &trace, const Thresholds &thresholds = {});

enum class AtpKind { StackFrameSite, HeapAdjacentSite };
std::string to_string(AtpKind k);

struct AttackPoint {
    size_t trace_index = 0;
    NodeId anchor = kNoNode;
    AtpKind kind = AtpKind::StackFrameSite;
    std::string function;
    std::vector<std::string> chain;        // outermost first, ends with `function`
    std::vector<bool> chain_indirect;      // entry i was called through a pointer
    FrameLayout layout;
    FrameGeometry geometry;
    bool indirect_reachable = false;
    bool caller_touches_locals = false;    // after this activation returns
    uint32_t later_heap_ops = 0;
};

/// Statements executed after the first input read, first instance of each.
std::vector<AttackPoint> find_attack_points(const Trace &trace, const Program &program);

enum class BugType { OCStack, OCHeap, UnusedStack };
enum class StackTarget { SavedFP, ReturnAddress };
std::string to_string(BugType t);
std::string to_string(StackTarget t);

struct BugCandidate {
    BugType type = BugType::OCStack;
    StackTarget target = StackTarget::ReturnAddress;
    size_t trigger = 0;                 // index into the DUA list
    std::optional<size_t> attack;       // index into the DUA list
    size_t atp = 0;                     // index into the attack point list
    uint32_t seed_input = 0;
};

struct Quotas {
    uint32_t oc_stack = 0;
    uint32_t oc_heap = 0;
    uint32_t unused_stack = 0;

    uint32_t of(BugType t) const;
    uint32_t total() const { return oc_stack + oc_heap + unused_stack; }
};

struct PairPolicy {
    Quotas quotas;
    uint64_t seed = 1;
    uint32_t retries = 10;              // candidates kept per attack point
    uint32_t min_anchors = 0;           // statements required between attack siphon and ATP
    uint32_t seed_input = 0;
};

class QuotaInfeasible : public std::runtime_error {
public:
    QuotaInfeasible(BugType type, size_t available)
        : std::runtime_error("cannot place " + to_string(type) + " bugs: only " + std::to_string(available) +
                             " usable attack points"),
          type_(type), available_(available) {}
    BugType type() const { return type_; }
    size_t available() const { return available_; }

private:
    BugType type_;
    size_t available_;
};

/// Does `dua` still hold the siphoned value when `atp` runs?
bool dua_reaches(const DuaRecord &dua, const AttackPoint &atp);

/// Number of statement executions strictly between the siphon of `dua` and `atp`.
size_t anchors_between(const Trace &trace, const DuaRecord &dua, const AttackPoint &atp);

/// Candidates grouped by attack point: for each type, usable attack points
/// in seeded order, each followed by up to `retries` (trigger, attack)
/// choices in seeded order. Throws QuotaInfeasible when a type has fewer
/// usable attack points than requested.
std::vector<BugCandidate> pair_candidates(const Trace &trace, const std::vector<DuaRecord> &duas,
                                          const std::vector<AttackPoint> &atps, const PairPolicy &policy);

} // namespace chaff

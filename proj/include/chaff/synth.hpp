#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaff/dua.hpp"
#include "chaff/heap.hpp"
#include "chaff/obfuscator.hpp"

namespace chaff {

struct SynthConfig {
    uint32_t stages = 2;            // constraint chain length k
    uint32_t dataflow_depth = 2;
    bool crash_marker = false;      // UnusedStack: divide by zero after the overflow
    uint64_t seed = 1;
};

struct DummySlot {
    std::string name;
    uint32_t size = 0;
};

struct BugSpec {
    uint32_t id = 0;
    BugCandidate candidate;
    std::string function;                  // attack point function
    NodeId atp_anchor = kNoNode;
    uint32_t magic = 0;
    std::string trigger_global;
    std::string attack_global;             // empty when the bug has no attack DUA
    std::string buffer;                    // overflowed array (or heap pointer)
    uint32_t buffer_size = 0;
    uint32_t overflow_offset = 0;          // first index written
    uint32_t overflow_length = 0;          // bytes written

    // OCStack
    uint32_t target_distance = 0;          // buffer end to target field
    uint32_t copied_args_skip = 0;
    uint32_t final_value = 0;

    // OCHeap
    uint32_t alloc_size = 0;
    heap::OverflowValues heap_values;

    // UnusedStack
    std::vector<DummySlot> dummies;
    bool crash_marker = false;

    ConstraintChain chain;
    DataflowPlan dataflow;

    /// Region names the write-audit accepts for this bug's stores.
    std::vector<std::string> allowed_objects() const;
    /// Fault the trigger input should produce, nullopt when none is expected.
    /// SavedFP says ReadUnmapped; a near-NULL write from the caller counts too.
    std::optional<FaultKind> expected_fault() const;
};

struct TriggerInput {
    uint32_t bug_id = 0;
    std::string bytes;
    std::vector<uint32_t> modified;   // offsets differing from the seed input
};

/// Everything needed to plan one bug, resolved from the candidate.
struct PlannedBug {
    uint32_t id = 0;
    BugCandidate candidate;
    DuaRecord trigger;
    std::optional<DuaRecord> attack;
    AttackPoint atp;
    std::vector<StageAnchor> stage_path;
    uint32_t magic = 0;
};

struct Synthesis {
    std::vector<BugSpec> specs;
    EditScript script;
    Program transformed;
};

class MagicExhausted : public std::runtime_error {
public:
    MagicExhausted() : std::runtime_error("every 32-bit pattern occurs in the corpus") {}
};

class GeometryUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AnchorConflict : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BytesNotIndependent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A nonzero value whose little-endian bytes occur in no corpus input and
/// which is not in `avoid`.
uint32_t choose_magic(const std::vector<std::string> &corpus, uint64_t seed, const std::set<uint32_t> &avoid = {});

/// All bugs at once: declarations first, then frame geometry from the
/// layout the declarations produce, then the attack-point code.
Synthesis synthesize(const Program &program, const std::vector<PlannedBug> &bugs, const SynthConfig &config);

/// Encode the magic into the trigger DUA's bytes and 0xFF into the attack
/// DUA's; replay the original program and require the statement sequence up
/// to the attack point to be unchanged.
TriggerInput make_trigger_input(const Program &original, const std::string &seed_input, const PlannedBug &bug,
                                const Trace &seed_trace, const Limits &limits = {});

} // namespace chaff

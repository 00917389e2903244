#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaff/dua.hpp"
#include "chaff/frontend.hpp"

namespace chaff {

// ---- overconstrained values ----------------------------------------------

struct StageAnchor {
    NodeId node = kNoNode;
    std::string function;
    size_t trace_index = 0;
};

struct ConstraintStage {
    StageAnchor anchor;
    std::string global;     // initialized to 0 at declaration
    uint32_t mask = 0;
};

/// Each stage stores `attack & mask` into its own global; the value used at
/// the attack point is the AND of every stage global. Any skipped stage
/// leaves a 0 behind, and the AND of all masks is 0, so the result is 0
/// whichever stages run in whatever order.
struct ConstraintChain {
    std::vector<ConstraintStage> stages;

    std::vector<uint32_t> masks() const;
};

class NotEnoughAnchors : public std::runtime_error {
public:
    NotEnoughAnchors(size_t needed, size_t available)
        : std::runtime_error("constraint chain needs " + std::to_string(needed) + " anchors, path has " +
                             std::to_string(available)),
          needed_(needed), available_(available) {}
    size_t needed() const { return needed_; }
    size_t available() const { return available_; }

private:
    size_t needed_, available_;
};

/// k = 2 gives the upper/lower 16-bit split; other k partition the word's
/// bits randomly across stages.
std::vector<uint32_t> plan_masks(uint32_t k, uint64_t seed);

/// Statement executions strictly between the attack DUA's siphon and the
/// attack point, first instance of each node, in trace order.
std::vector<StageAnchor> stage_anchor_candidates(const Trace &trace, const DuaRecord &attack, const AttackPoint &atp);

/// Pick k anchors spread over as many functions as possible; globals are
/// named lava_c<j>_<bug>.
ConstraintChain plan_constraint_chain(const std::vector<StageAnchor> &path, uint32_t k, uint64_t seed,
                                      uint32_t bug_id);

/// Run `order` (stage indices) against `input`, globals starting at 0.
uint32_t fold_stages(const std::vector<uint32_t> &masks, const std::vector<uint8_t> &order, uint32_t input);

struct SubsetWitness {
    std::vector<uint8_t> order;
    uint32_t input = 0;
    uint32_t value = 0;
};

struct SubsetCheck {
    bool algebraic_zero = false;     // AND of all masks == 0
    uint64_t orderings = 0;          // subsets x permutations enumerated
    uint64_t inputs = 0;
    uint64_t evaluations = 0;
    std::optional<SubsetWitness> witness;   // first failing (ordering, input)

    bool sound() const { return algebraic_zero && !witness; }
};

/// Every permutation of every stage subset (k <= 5; larger k uses one order
/// per subset) against 0, 0xFFFFFFFF and `samples` random inputs.
SubsetCheck check_chain_subsets(const std::vector<uint32_t> &masks, uint32_t samples = 10000, uint64_t seed = 1);
SubsetCheck check_chain_subsets_serial(const std::vector<uint32_t> &masks, uint32_t samples = 10000,
                                       uint64_t seed = 1);

// ---- fabricated dataflow -------------------------------------------------

struct DataflowPlan {
    std::string atp_function;
    std::vector<std::string> threaded;   // gain the out-parameter; ATP function first
    std::string root_function;           // declares the local the value ends up in
    std::string param;                   // lava_out_<id>
    std::string root_local;              // lava_root_<id>
    std::string sink_global;             // lava_sink_<id>; also passed by unrelated callers
    bool degenerate = false;             // no eligible caller: write the global directly
    std::string note;

    bool empty() const { return threaded.empty() && !degenerate; }
};

/// Callers eligible to receive the value: not main, not reached or used
/// through a function pointer, not prototyped separately, up to `depth`.
DataflowPlan plan_fake_dataflow(const AttackPoint &atp, uint32_t depth, const Program &program, uint32_t bug_id);

/// Parameters, root local, sink global and call-site rewrites.
EditScript dataflow_edits(const DataflowPlan &plan, const Program &program);

/// The write at the overflow site carrying `value` upward; nullopt for an
/// empty plan.
std::optional<Stmt> dataflow_sink(const DataflowPlan &plan, Expr value);

} // namespace chaff

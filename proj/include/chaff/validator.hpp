#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaff/heap.hpp"
#include "chaff/synth.hpp"

namespace chaff {

// ---- clean equivalence ---------------------------------------------------

struct Divergence {
    size_t input = 0;                 // corpus index
    size_t offset = 0;                // first differing output byte
    std::string note;
};

struct CleanResult {
    size_t inputs = 0;
    std::vector<Divergence> divergences;

    bool equivalent() const { return divergences.empty(); }
};

/// What a clean run produced; errors are kept as text so they compare too.
struct CleanRun {
    std::string output;
    int exit_code = 0;
    std::optional<FaultReport> fault;
    std::string error;                // error class; the message names source lines
    std::string error_message;
};

CleanRun clean_run(const Program &program, const std::string &input, const Limits &limits = {});

/// Outputs, exit codes and faults must agree on every input.
CleanResult validate_clean(const Program &original, const Program &transformed, const std::vector<std::string> &corpus,
                           const Limits &limits = {});
/// Same, against already recorded runs of the original.
CleanResult validate_clean(const std::vector<CleanRun> &expected, const Program &transformed,
                           const std::vector<std::string> &corpus, const Limits &limits = {});

// ---- triggering ----------------------------------------------------------

struct TriggerOutcome {
    bool ok = false;                  // behaved as the spec says
    std::optional<FaultReport> fault;
    std::string reason;               // why not, or no-crash-by-design
    RunResult run;                    // audit-mode run on the trigger input
};

TriggerOutcome validate_trigger(const Program &transformed, const TriggerInput &trigger, const BugSpec &spec,
                                const Limits &limits = {});

// ---- non-exploitability ---------------------------------------------------

class Counterexample : public std::runtime_error {
public:
    Counterexample(std::string kind, std::string witness)
        : std::runtime_error(kind + " counterexample: " + witness), kind_(std::move(kind)),
          witness_(std::move(witness)) {}
    const std::string &kind() const { return kind_; }
    const std::string &witness() const { return witness_; }

private:
    std::string kind_, witness_;
};

struct HeapReference {
    int depth = 0;
    size_t rows = 0;
    size_t aborts = 0;
    size_t escaped = 0;
};

struct ProofBundle {
    std::optional<SubsetCheck> constraint;      // overconstrained bugs
    bool write_audit = false;
    size_t audited_writes = 0;
    std::vector<std::string> audited_objects;
    std::optional<HeapReference> heap;          // OCHeap
    std::optional<bool> taint_non_escape;       // UnusedStack
    size_t taint_runs = 0;

    bool complete(BugType type) const;
};

/// Throws Counterexample on the first failed obligation. `cases` is the
/// corrupted-value case table at the configured depth.
ProofBundle prove_non_exploitable(const Program &transformed, const BugSpec &spec, const TriggerOutcome &trigger,
                                  const std::vector<std::string> &clean_inputs, const heap::CaseTable &cases,
                                  const Limits &limits = {}, uint32_t constraint_samples = 10000);

// ---- classification ------------------------------------------------------

struct Classification {
    std::string label;                // EXPLOITABLE_MIMIC | PROBABLY_EXPLOITABLE_MIMIC | ABORT
    std::string rationale;
};

Classification classify(const FaultReport &fault);

// ---- per-bug validation ----------------------------------------------------

struct BugValidation {
    uint32_t id = 0;
    bool validated = false;
    std::string reason;
    std::optional<FaultReport> fault;
    std::optional<ProofBundle> proofs;
    std::optional<Classification> classification;
    std::optional<Counterexample> counterexample;
};

struct ValidationInputs {
    const Program *transformed = nullptr;
    const std::vector<BugSpec> *specs = nullptr;
    const std::vector<TriggerInput> *triggers = nullptr;   // parallel to specs
    const std::vector<std::string> *clean = nullptr;
    const heap::CaseTable *cases = nullptr;
    Limits limits;
    uint32_t constraint_samples = 10000;
};

/// One bug: trigger, proofs, classification.
BugValidation validate_bug(const ValidationInputs &in, size_t i);
/// Every bug, in parallel; results ordered like the specs.
std::vector<BugValidation> validate_bugs(const ValidationInputs &in);
std::vector<BugValidation> validate_bugs_serial(const ValidationInputs &in);

/// Cumulative fraction of attack points whose first success came within k
/// tries, for k = 1..cap.
std::vector<double> success_curve(const std::vector<std::optional<uint32_t>> &first_success, uint32_t cap);

} // namespace chaff

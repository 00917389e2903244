#include <algorithm>
#include <memory>
#include <tuple>

#include "chaff/heap.hpp"

namespace chaff::heap {

namespace {

constexpr uint32_t kArenaBase = 0x100000;
constexpr uint32_t kArenaSize = 0x10000;

struct Lab {
    VectorMemory mem{kArenaBase, kArenaSize};
    Heap heap{mem, kArenaBase, kArenaSize};
    std::vector<uint32_t> handles;   // user pointers, V first
};

uint32_t chunk_of(uint32_t user) { return user - kHeader; }

// Lay out V followed by a successor N in the requested state, then apply the
// overflow through V.
std::unique_ptr<Lab> stage(ChunkState successor, const std::optional<OverflowValues> &values)
{
    auto lab = std::make_unique<Lab>();
    Heap &h = lab->heap;
    uint32_t v = h.malloc(24);
    uint32_t n = 0;
    lab->handles.push_back(v);

    switch (successor) {
    case ChunkState::InUse:
        n = h.malloc(24);
        lab->handles.push_back(n);
        lab->handles.push_back(h.malloc(8));
        break;
    case ChunkState::Top:
        break;
    case ChunkState::Fast:
        n = h.malloc(24);
        lab->handles.push_back(h.malloc(8));
        h.free(n);
        break;
    case ChunkState::Unsorted:
        n = h.malloc(200);
        lab->handles.push_back(h.malloc(8));
        h.free(n);
        break;
    case ChunkState::Small:
        n = h.malloc(200);
        lab->handles.push_back(h.malloc(8));
        h.free(n);
        lab->handles.push_back(h.malloc(400));
        break;
    case ChunkState::Large:
        n = h.malloc(600);
        lab->handles.push_back(h.malloc(8));
        h.free(n);
        lab->handles.push_back(h.malloc(1000));
        break;
    }

    uint32_t succ = chunk_of(v) + request_to_size(24);
    if (h.state_of(succ) != successor)
        throw std::logic_error("case setup did not produce successor state " + to_string(successor));

    // Without values the run is the uncorrupted differential baseline; the
    // words keep their legitimate contents and carry no provenance.
    uint32_t fake = v + 16;
    if (values) {
        lab->mem.store32(fake, values->fake_size);
        lab->mem.store32(succ, values->prev_size);
        lab->mem.store32(succ + 4, values->size);
        h.mark_corrupted(fake);
        h.mark_corrupted(succ);
        h.mark_corrupted(succ + 4);
    }
    return lab;
}

size_t initial_handles(ChunkState s)
{
    switch (s) {
    case ChunkState::InUse: return 3;
    case ChunkState::Top: return 1;
    case ChunkState::Fast: return 2;
    case ChunkState::Unsorted: return 2;
    case ChunkState::Small: return 3;
    case ChunkState::Large: return 3;
    }
    return 0;
}

struct Run {
    CaseRow row;
    bool terminal = false;   // aborted or escaped before the end of ops
    size_t live = 0;
};

Run run_ops(ChunkState s, const std::optional<OverflowValues> &values, const std::vector<HeapOp> &ops)
{
    Run r;
    r.row.successor = s;
    auto lab = stage(s, values);
    Heap &h = lab->heap;
    for (const auto &op : ops) {
        r.row.ops.push_back(op);
        try {
            if (op.is_alloc) {
                lab->handles.push_back(h.malloc(op.arg));
            } else {
                uint32_t p = lab->handles.at(op.arg);
                lab->handles.erase(lab->handles.begin() + op.arg);
                h.free(p);
            }
        } catch (const AllocatorAbort &a) {
            r.row.outcome = h.escaped() ? Outcome::CorruptionEscaped : Outcome::Abort;
            r.row.assertion = a.assertion();
            r.row.note = h.escape_note();
            r.terminal = true;
            break;
        }
        if (h.escaped()) {
            r.row.outcome = Outcome::CorruptionEscaped;
            r.row.note = h.escape_note();
            r.terminal = true;
            break;
        }
    }
    r.row.consulted = h.consulted();
    r.live = lab->handles.size();
    return r;
}

std::vector<HeapOp> choices(size_t live)
{
    std::vector<HeapOp> out;
    for (uint32_t s : kEnumSizes)
        out.push_back({true, s});
    for (size_t i = 0; i < live; ++i)
        out.push_back({false, static_cast<uint32_t>(i)});
    return out;
}

void dfs(ChunkState s, const std::optional<OverflowValues> &values, int depth, std::vector<HeapOp> &prefix,
         size_t live, std::vector<CaseRow> &rows)
{
    for (const auto &op : choices(live)) {
        prefix.push_back(op);
        Run r = run_ops(s, values, prefix);
        if (r.terminal || static_cast<int>(prefix.size()) == depth)
            rows.push_back(std::move(r.row));
        else
            dfs(s, values, depth, prefix, r.live, rows);
        prefix.pop_back();
    }
}

void check_depth(int depth)
{
    if (depth < 2)
        throw std::invalid_argument("case enumeration depth must be at least 2");
}

} // namespace

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::Abort: return "abort";
    case Outcome::Silent: return "silent";
    case Outcome::CorruptionEscaped: return "corruption-escaped";
    }
    return "?";
}

std::string HeapOp::describe() const
{
    return is_alloc ? "alloc(" + std::to_string(arg) + ")" : "free(#" + std::to_string(arg) + ")";
}

size_t CaseTable::count(Outcome o) const
{
    return static_cast<size_t>(std::count_if(rows.begin(), rows.end(), [o](const CaseRow &r) { return r.outcome == o; }));
}

size_t CaseTable::silent_consulted() const
{
    return static_cast<size_t>(std::count_if(rows.begin(), rows.end(), [](const CaseRow &r) {
        return r.outcome == Outcome::Silent && r.consulted;
    }));
}

CaseTable check_corruption_cases_serial(const std::optional<OverflowValues> &values, int depth)
{
    check_depth(depth);
    CaseTable t;
    t.corrupted = values.has_value();
    t.depth = depth;
    for (ChunkState s : kSuccessorStates) {
        std::vector<HeapOp> prefix;
        dfs(s, values, depth, prefix, initial_handles(s), t.rows);
    }
    return t;
}

CaseTable check_corruption_cases(const std::optional<OverflowValues> &values, int depth)
{
    check_depth(depth);
    // One job per (successor state, first operation); each walks its subtree
    // like the serial search, and the pieces are joined in the serial order.
    struct Job {
        ChunkState s;
        HeapOp first;
        size_t live;
    };
    std::vector<Job> jobs;
    for (ChunkState s : kSuccessorStates) {
        size_t live = initial_handles(s);
        for (const auto &op : choices(live))
            jobs.push_back({s, op, live});
    }

    std::vector<std::vector<CaseRow>> parts(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < static_cast<long>(jobs.size()); ++i) {
        std::vector<HeapOp> prefix = {jobs[i].first};
        Run r = run_ops(jobs[i].s, values, prefix);
        if (r.terminal)
            parts[i].push_back(std::move(r.row));
        else
            dfs(jobs[i].s, values, depth, prefix, r.live, parts[i]);
    }

    CaseTable t;
    t.corrupted = values.has_value();
    t.depth = depth;
    for (auto &p : parts)
        for (auto &row : p)
            t.rows.push_back(std::move(row));
    return t;
}

bool overflow_aborts(const std::vector<RecordedOp> &ops, size_t at, const OverflowValues &values, uint32_t base,
                     uint32_t size)
{
    VectorMemory mem(base, size);
    Heap h(mem, base, size);
    std::map<uint32_t, uint32_t> moved;   // recorded pointer -> replayed pointer
    try {
        for (size_t i = 0; i < ops.size(); ++i) {
            if (i == at) {
                uint32_t v = h.malloc(24);
                mem.store32(v + 16, values.fake_size);
                mem.store32(v + 24, values.prev_size);
                mem.store32(v + 28, values.size);
            }
            const RecordedOp &op = ops[i];
            if (op.is_alloc) {
                moved[op.address] = h.malloc(op.request);
            } else {
                auto it = moved.find(op.address);
                if (it == moved.end())
                    return false;
                h.free(it->second);
                moved.erase(it);
            }
        }
    } catch (const AllocatorAbort &) {
        return true;
    } catch (const OutOfArena &) {
        return false;
    }
    return false;
}

} // namespace chaff::heap

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaff::heap {

// 32-bit ptmalloc geometry.
inline constexpr uint32_t kWord = 4;
inline constexpr uint32_t kHeader = 8;
inline constexpr uint32_t kMinChunk = 16;
inline constexpr uint32_t kPrevInuse = 1;
inline constexpr uint32_t kMaxFast = 64;
inline constexpr uint32_t kMinLarge = 512;
inline constexpr uint32_t kConsolidateThreshold = 65536;

/// Chunk size for a request: header word plus payload, 8-aligned, at least 16.
uint32_t request_to_size(uint32_t req);

class AllocatorAbort : public std::runtime_error {
public:
    explicit AllocatorAbort(std::string assertion)
        : std::runtime_error("allocator abort: " + assertion), assertion_(std::move(assertion)) {}
    const std::string &assertion() const { return assertion_; }

private:
    std::string assertion_;
};

class OutOfArena : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Word-addressed backing store the allocator keeps its headers in.
class ChunkMemory {
public:
    virtual ~ChunkMemory() = default;
    virtual uint32_t load32(uint32_t addr) const = 0;
    virtual void store32(uint32_t addr, uint32_t value) = 0;
};

class VectorMemory : public ChunkMemory {
public:
    VectorMemory(uint32_t base, uint32_t size) : base_(base), bytes_(size, 0) {}
    uint32_t load32(uint32_t addr) const override;
    void store32(uint32_t addr, uint32_t value) override;

private:
    uint32_t base_;
    std::vector<uint8_t> bytes_;
};

enum class ChunkState { InUse, Fast, Unsorted, Small, Large, Top };

std::string to_string(ChunkState s);

/// A simplified ptmalloc: fastbins, one unsorted list, size-keyed small and
/// large bins, a top chunk, and malloc_consolidate. Headers live in the
/// arena; free lists are kept out of band, so list pointers cannot be
/// corrupted, only headers.
class Heap {
public:
    Heap(ChunkMemory &mem, uint32_t base, uint32_t size);

    uint32_t malloc(uint32_t req);
    void free(uint32_t mem);

    uint32_t base() const { return base_; }
    uint32_t end() const { return end_; }
    uint32_t top() const { return top_; }
    ChunkState state_of(uint32_t chunk) const;
    /// Chunk addresses currently handed out, ascending.
    std::vector<uint32_t> live_chunks() const { return {live_.begin(), live_.end()}; }

    // Provenance used by the case checker: words marked corrupted taint every
    // value read from them and every address computed from such a value.
    void mark_corrupted(uint32_t addr) { corrupted_.insert(addr); }
    bool consulted() const { return consulted_; }
    bool escaped() const { return escaped_; }
    const std::string &escape_note() const { return escape_note_; }

private:
    struct Word {
        uint32_t v = 0;
        bool tainted = false;
    };

    Word rd(Word addr);
    void wr(Word addr, uint32_t value);
    Word chunksize(Word p);
    bool prev_inuse(Word p);
    void escape(const std::string &what);

    bool in_bins(uint32_t chunk) const;
    void remove_from_bins(uint32_t chunk);
    void unlink(Word p);
    void set_head(Word p, uint32_t head);
    void set_foot(Word p, uint32_t size);
    void place_free(Word p, uint32_t size);
    void consolidate_fast();
    bool have_fast() const;
    Word carve(Word victim, uint32_t victim_size, uint32_t nb, bool from_top);
    uint32_t to_user(Word p);

    ChunkMemory *mem_;
    uint32_t base_;
    uint32_t end_;
    uint32_t top_;
    std::map<uint32_t, std::deque<uint32_t>> fast_;      // size -> LIFO (front is head)
    std::deque<uint32_t> unsorted_;
    std::map<uint32_t, std::deque<uint32_t>> sized_;     // small + large, keyed by size at insertion
    std::set<uint32_t> live_;
    std::set<uint32_t> corrupted_;
    bool consulted_ = false;
    bool escaped_ = false;
    std::string escape_note_;
};

// ---- case analysis -------------------------------------------------------

/// The three words an OCHeap overflow writes, relative to the victim V.
struct OverflowValues {
    uint32_t fake_size = 16;   // second-to-last word of V's 24-byte user area
    uint32_t prev_size = 12;   // successor prev_size
    uint32_t size = 0;         // successor size
};

enum class Outcome { Abort, Silent, CorruptionEscaped };

std::string to_string(Outcome o);

struct HeapOp {
    bool is_alloc = true;
    uint32_t arg = 0;          // request size, or index into the live-handle list
    std::string describe() const;
};

struct CaseRow {
    ChunkState successor = ChunkState::InUse;
    std::vector<HeapOp> ops;
    Outcome outcome = Outcome::Silent;
    std::string assertion;     // Abort
    bool consulted = false;    // corrupted metadata read by the allocator
    std::string note;          // CorruptionEscaped detail
};

struct CaseTable {
    bool corrupted = true;
    int depth = 0;
    std::vector<CaseRow> rows;

    size_t count(Outcome o) const;
    size_t silent_consulted() const;
};

inline const std::vector<ChunkState> kSuccessorStates = {
    ChunkState::InUse, ChunkState::Top,   ChunkState::Fast,
    ChunkState::Unsorted, ChunkState::Small, ChunkState::Large,
};

inline const std::vector<uint32_t> kEnumSizes = {8, 24, 40, 200};

/// Enumerate successor states x operation sequences up to `depth`. Without
/// values the run is the uncorrupted baseline (no overflow, no provenance).
CaseTable check_corruption_cases(const std::optional<OverflowValues> &values, int depth);
/// One allocator call recorded in a trace.
struct RecordedOp {
    bool is_alloc = true;
    uint32_t address = 0;      // returned pointer, or pointer freed
    uint32_t request = 0;      // malloc argument
};

/// Replay `ops` on a fresh arena at `base`, allocating the 24-byte victim
/// and writing `values` past it just before op `at`. True when a later op
/// aborts. Pointers freed by the replay are matched to allocations by order,
/// so the shifted addresses do not matter.
bool overflow_aborts(const std::vector<RecordedOp> &ops, size_t at, const OverflowValues &values, uint32_t base,
                     uint32_t size);

/// Serial reference for check_corruption_cases.
CaseTable check_corruption_cases_serial(const std::optional<OverflowValues> &values, int depth);

} // namespace chaff::heap

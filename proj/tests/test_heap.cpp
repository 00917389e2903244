#include "doctest.h"

#include <functional>

#include "chaff/heap.hpp"

using namespace chaff::heap;

namespace {

constexpr uint32_t kBase = 0x100000;
constexpr uint32_t kSize = 0x4000;

struct Arena {
    VectorMemory mem{kBase, kSize};
    Heap heap{mem, kBase, kSize};
};

std::string abort_name(const std::function<void()> &f)
{
    try {
        f();
    } catch (const AllocatorAbort &a) {
        return a.assertion();
    }
    return "";
}

// V's user area is 24 bytes; its successor's header starts 24 bytes in.
void corrupt(Arena &a, uint32_t v)
{
    a.mem.store32(v + 16, 16);
    a.mem.store32(v + 24, 12);
    a.mem.store32(v + 28, 0);
}

} // namespace

TEST_CASE("carving from a fresh arena")
{
    Arena a;
    uint32_t p = a.heap.malloc(24);
    CHECK(p == kBase + 8);
    CHECK(a.mem.load32(kBase + 4) == (32u | kPrevInuse));
    CHECK(a.heap.top() == kBase + 32);
    CHECK(a.mem.load32(kBase + 32 + 4) == ((kSize - 32) | kPrevInuse));
    CHECK(p % 8 == 0);
}

TEST_CASE("request rounding")
{
    CHECK(request_to_size(0) == 16);
    CHECK(request_to_size(12) == 16);
    CHECK(request_to_size(13) == 24);
    CHECK(request_to_size(24) == 32);
    CHECK(request_to_size(200) == 208);
    Arena a;
    uint32_t p = a.heap.malloc(0);
    CHECK(a.mem.load32(p - 4) == (16u | kPrevInuse));
}

TEST_CASE("free then alloc of the same size reuses the chunk")
{
    for (uint32_t sz : {8u, 24u, 100u, 700u}) {
        Arena a;
        uint32_t p = a.heap.malloc(sz);
        uint32_t guard = a.heap.malloc(8);
        a.heap.free(p);
        CHECK(a.heap.malloc(sz) == p);
        (void)guard;
    }
}

TEST_CASE("uncorrupted churn never aborts and coalesces back into top")
{
    Arena a;
    std::vector<uint32_t> ps;
    for (uint32_t s : {8u, 24u, 40u, 200u, 600u, 24u, 8u})
        ps.push_back(a.heap.malloc(s));
    for (size_t i : {1u, 3u, 0u, 5u, 2u, 6u, 4u})
        a.heap.free(ps[i]);
    uint32_t big = a.heap.malloc(1000);   // forces consolidation of the fastbins
    a.heap.free(big);
    CHECK(a.heap.top() == kBase);
    CHECK(a.heap.live_chunks().empty());
}

TEST_CASE("double free and wild pointers abort")
{
    Arena a;
    uint32_t p = a.heap.malloc(24);
    a.heap.malloc(8);
    a.heap.free(p);
    CHECK(abort_name([&] { a.heap.free(p); }) == "double-free");
    CHECK(abort_name([&] { a.heap.free(p + 4); }) == "invalid-pointer");
    a.heap.free(0);
}

TEST_CASE("successor in use: freeing it trips the size check")
{
    Arena a;
    uint32_t v = a.heap.malloc(24);
    uint32_t n = a.heap.malloc(24);
    a.heap.malloc(8);
    corrupt(a, v);
    CHECK(abort_name([&] { a.heap.free(n); }) == "invalid-size");
    CHECK(abort_name([&] { a.heap.free(v); }) == "invalid-next-size");
}

TEST_CASE("successor is top: the next carve trips the top check")
{
    Arena a;
    uint32_t v = a.heap.malloc(24);
    corrupt(a, v);
    CHECK(abort_name([&] { a.heap.malloc(40); }) == "top-size");
}

TEST_CASE("fastbin successor: consolidation reaches the fake chunk")
{
    Arena a;
    uint32_t v = a.heap.malloc(24);
    uint32_t n = a.heap.malloc(24);
    a.heap.malloc(8);
    a.heap.free(n);
    corrupt(a, v);
    // A large request runs malloc_consolidate; N's PREV_INUSE bit is now
    // clear, prev_size 12 lands on the fake 16-byte chunk inside V, and that
    // chunk's successor prev_size is N's zeroed size word.
    CHECK(abort_name([&] { a.heap.malloc(600); }) == "unlink-corruption");
}

TEST_CASE("fastbin successor: reuse trips the fastbin size check")
{
    Arena a;
    uint32_t v = a.heap.malloc(24);
    uint32_t n = a.heap.malloc(24);
    a.heap.malloc(8);
    a.heap.free(n);
    corrupt(a, v);
    CHECK(abort_name([&] { a.heap.malloc(24); }) == "malloc-fastbin-size");
}

TEST_CASE("unsorted successor: the bin scan trips the size check")
{
    Arena a;
    uint32_t v = a.heap.malloc(24);
    uint32_t n = a.heap.malloc(200);
    a.heap.malloc(8);
    a.heap.free(n);
    corrupt(a, v);
    CHECK(abort_name([&] { a.heap.malloc(8); }) == "malloc-corrupted-size");
}

TEST_CASE("free successor: backward consolidation from its neighbour fails unlink")
{
    Arena a;
    uint32_t v = a.heap.malloc(24);
    uint32_t n = a.heap.malloc(200);
    uint32_t m = a.heap.malloc(200);
    a.heap.malloc(8);
    a.heap.free(n);
    corrupt(a, v);
    CHECK(abort_name([&] { a.heap.free(m); }) == "unlink-corruption");
}

TEST_CASE("case table at depth 3")
{
    CaseTable t = check_corruption_cases(OverflowValues{}, 3);
    CHECK(t.rows.size() > 100);
    CHECK(t.count(Outcome::CorruptionEscaped) == 0);
    CHECK(t.silent_consulted() == 0);
    CHECK(t.count(Outcome::Abort) > 0);
    for (ChunkState s : kSuccessorStates) {
        bool aborted = false;
        for (const auto &r : t.rows)
            aborted = aborted || (r.successor == s && r.outcome == Outcome::Abort);
        CHECK_MESSAGE(aborted, to_string(s));
    }

    CaseTable clean = check_corruption_cases(std::nullopt, 3);
    CHECK(clean.count(Outcome::Abort) == 0);
    CHECK(clean.count(Outcome::CorruptionEscaped) == 0);
}

TEST_CASE("parallel case enumeration matches the serial reference")
{
    for (int d : {2, 3}) {
        CaseTable par = check_corruption_cases(OverflowValues{}, d);
        CaseTable ser = check_corruption_cases_serial(OverflowValues{}, d);
        REQUIRE(par.rows.size() == ser.rows.size());
        for (size_t i = 0; i < par.rows.size(); ++i) {
            CHECK(par.rows[i].successor == ser.rows[i].successor);
            CHECK(par.rows[i].ops.size() == ser.rows[i].ops.size());
            CHECK(par.rows[i].outcome == ser.rows[i].outcome);
            CHECK(par.rows[i].assertion == ser.rows[i].assertion);
        }
    }
    CHECK_THROWS_AS(check_corruption_cases(OverflowValues{}, 1), std::invalid_argument);
}

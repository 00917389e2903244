#pragma once

// Paged byte memory with per-byte shadow state: initialized flag, taint,
// taint compute number and the step at which the byte was last written.

#include <array>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chaff/heap.hpp"
#include "chaff/taint.hpp"

namespace chaff::detail {

class Memory {
public:
    static constexpr uint32_t kPageBits = 12;
    static constexpr uint32_t kPageSize = 1u << kPageBits;

    void map(uint32_t lo, uint32_t hi) { regions_.emplace_back(lo, hi); }

    bool mapped(uint32_t addr, uint32_t n) const
    {
        uint64_t end = uint64_t(addr) + n;
        for (const auto &[lo, hi] : regions_)
            if (addr >= lo && end <= hi)
                return true;
        return false;
    }

    uint8_t byte(uint32_t a) const
    {
        const Page *p = find(a);
        return p ? p->data[a & (kPageSize - 1)] : 0;
    }
    bool init(uint32_t a) const
    {
        const Page *p = find(a);
        return p && p->init[a & (kPageSize - 1)];
    }
    TaintId taint(uint32_t a) const
    {
        const Page *p = find(a);
        return p ? p->taint[a & (kPageSize - 1)] : 0;
    }
    uint8_t tcn(uint32_t a) const
    {
        const Page *p = find(a);
        return p ? p->tcn[a & (kPageSize - 1)] : 0;
    }
    uint32_t wseq(uint32_t a) const
    {
        const Page *p = find(a);
        return p ? p->wseq[a & (kPageSize - 1)] : 0;
    }

    void set(uint32_t a, uint8_t v, TaintId t, uint8_t tcn, uint32_t seq)
    {
        Page &p = page(a);
        uint32_t o = a & (kPageSize - 1);
        p.data[o] = v;
        p.init[o] = 1;
        p.taint[o] = t;
        p.tcn[o] = tcn;
        p.wseq[o] = seq;
    }

    /// Raw write that leaves shadow state untainted (allocator headers).
    void set_raw(uint32_t a, uint8_t v, uint32_t seq) { set(a, v, 0, 0, seq); }

    void invalidate(uint32_t lo, uint32_t n)
    {
        for (uint32_t a = lo; a < lo + n; ++a) {
            Page *p = find(a);
            if (!p) {
                a |= kPageSize - 1;   // skip the untouched page
                continue;
            }
            uint32_t o = a & (kPageSize - 1);
            p->init[o] = 0;
            p->taint[o] = 0;
            p->tcn[o] = 0;
        }
    }

private:
    struct Page {
        std::array<uint8_t, kPageSize> data{};
        std::array<uint8_t, kPageSize> init{};
        std::array<TaintId, kPageSize> taint{};
        std::array<uint8_t, kPageSize> tcn{};
        std::array<uint32_t, kPageSize> wseq{};
    };

    const Page *find(uint32_t a) const
    {
        auto it = pages_.find(a >> kPageBits);
        return it == pages_.end() ? nullptr : it->second.get();
    }
    Page *find(uint32_t a)
    {
        auto it = pages_.find(a >> kPageBits);
        return it == pages_.end() ? nullptr : it->second.get();
    }
    Page &page(uint32_t a)
    {
        auto &slot = pages_[a >> kPageBits];
        if (!slot)
            slot = std::make_unique<Page>();
        return *slot;
    }

    std::vector<std::pair<uint32_t, uint32_t>> regions_;
    std::unordered_map<uint32_t, std::unique_ptr<Page>> pages_;
};

/// Lets the allocator keep its headers in program memory, where an overflow
/// can reach them.
class HeapBacking : public heap::ChunkMemory {
public:
    HeapBacking(Memory &mem, const uint32_t &seq) : mem_(mem), seq_(seq) {}

    uint32_t load32(uint32_t a) const override
    {
        return uint32_t(mem_.byte(a)) | uint32_t(mem_.byte(a + 1)) << 8 | uint32_t(mem_.byte(a + 2)) << 16 |
               uint32_t(mem_.byte(a + 3)) << 24;
    }
    void store32(uint32_t a, uint32_t v) override
    {
        for (uint32_t i = 0; i < 4; ++i)
            mem_.set_raw(a + i, uint8_t(v >> (8 * i)), seq_);
    }

private:
    Memory &mem_;
    const uint32_t &seq_;
};

} // namespace chaff::detail

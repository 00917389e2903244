#include "chaff/heap.hpp"

#include <cstring>

namespace chaff::heap {

uint32_t request_to_size(uint32_t req)
{
    uint32_t sz = (req + kWord + 7) & ~7u;
    return sz < kMinChunk ? kMinChunk : sz;
}

uint32_t VectorMemory::load32(uint32_t addr) const
{
    uint32_t off = addr - base_;
    if (addr < base_ || off + 4 > bytes_.size())
        throw OutOfArena("load outside arena");
    uint32_t v;
    std::memcpy(&v, bytes_.data() + off, 4);
    return v;
}

void VectorMemory::store32(uint32_t addr, uint32_t value)
{
    uint32_t off = addr - base_;
    if (addr < base_ || off + 4 > bytes_.size())
        throw OutOfArena("store outside arena");
    std::memcpy(bytes_.data() + off, &value, 4);
}

std::string to_string(ChunkState s)
{
    switch (s) {
    case ChunkState::InUse: return "in-use";
    case ChunkState::Fast: return "fastbin";
    case ChunkState::Unsorted: return "unsorted";
    case ChunkState::Small: return "smallbin";
    case ChunkState::Large: return "largebin";
    case ChunkState::Top: return "top";
    }
    return "?";
}

Heap::Heap(ChunkMemory &mem, uint32_t base, uint32_t size)
    : mem_(&mem), base_(base), end_(base + size), top_(base)
{
    if (base % 8 != 0 || size % 8 != 0 || size < 2 * kMinChunk)
        throw std::invalid_argument("bad arena geometry");
    mem_->store32(top_, 0);
    mem_->store32(top_ + 4, size | kPrevInuse);
}

Heap::Word Heap::rd(Word addr)
{
    bool hit = corrupted_.count(addr.v) != 0;
    if (hit)
        consulted_ = true;
    if (addr.v < base_ || addr.v + 4 > end_) {
        // Wild metadata pointer: a real allocator would fault or read
        // garbage. Treat it as an escape when it came from corrupted data.
        if (addr.tainted)
            escape("read through corrupted address");
        throw AllocatorAbort("wild-metadata-read");
    }
    return {mem_->load32(addr.v), addr.tainted || hit};
}

void Heap::wr(Word addr, uint32_t value)
{
    if (addr.tainted)
        escape("write through corrupted address");
    if (addr.v < base_ || addr.v + 4 > end_)
        throw AllocatorAbort("wild-metadata-write");
    mem_->store32(addr.v, value);
}

Heap::Word Heap::chunksize(Word p)
{
    Word s = rd({p.v + 4, p.tainted});
    return {s.v & ~7u, s.tainted};
}

bool Heap::prev_inuse(Word p)
{
    return (rd({p.v + 4, p.tainted}).v & kPrevInuse) != 0;
}

void Heap::escape(const std::string &what)
{
    if (!escaped_) {
        escaped_ = true;
        escape_note_ = what;
    }
}

bool Heap::in_bins(uint32_t chunk) const
{
    for (uint32_t c : unsorted_)
        if (c == chunk)
            return true;
    for (const auto &[sz, list] : sized_)
        for (uint32_t c : list)
            if (c == chunk)
                return true;
    return false;
}

void Heap::remove_from_bins(uint32_t chunk)
{
    for (auto it = unsorted_.begin(); it != unsorted_.end(); ++it)
        if (*it == chunk) {
            unsorted_.erase(it);
            return;
        }
    for (auto &[sz, list] : sized_)
        for (auto it = list.begin(); it != list.end(); ++it)
            if (*it == chunk) {
                list.erase(it);
                return;
            }
}

bool Heap::have_fast() const
{
    for (const auto &[sz, list] : fast_)
        if (!list.empty())
            return true;
    return false;
}

void Heap::unlink(Word p)
{
    Word sz = chunksize(p);
    Word next = {p.v + sz.v, p.tainted || sz.tainted};
    Word foot = rd(next);
    if (sz.v != foot.v)
        throw AllocatorAbort("unlink-corruption");
    // Out-of-band lists stand in for the fd/bk safe-unlinking check: a
    // chunk that is not actually binned fails it.
    if (!in_bins(p.v))
        throw AllocatorAbort("unlink-corruption");
    if (p.tainted)
        escape("unlink of chunk located through corrupted metadata");
    remove_from_bins(p.v);
}

void Heap::set_head(Word p, uint32_t head)
{
    wr({p.v + 4, p.tainted}, head);
}

void Heap::set_foot(Word p, uint32_t size)
{
    wr({p.v + size, p.tainted}, size);
}

uint32_t Heap::to_user(Word p)
{
    if (p.tainted)
        escape("returned chunk located through corrupted metadata");
    live_.insert(p.v);
    return p.v + kHeader;
}

// Coalesce p (size sz, already detached from any list) with its free
// neighbours and file the result in the unsorted list or merge into top.
void Heap::place_free(Word p, uint32_t sz)
{
    Word next = {p.v + sz, p.tainted};
    Word nraw = rd({next.v + 4, next.tainted});
    uint32_t nextsize = nraw.v & ~7u;

    if (!prev_inuse(p)) {
        Word prevsize = rd(p);
        sz += prevsize.v;
        p = {p.v - prevsize.v, p.tainted || prevsize.tainted};
        unlink(p);
    }

    if (next.v != top_) {
        bool nextinuse = (rd({next.v + nextsize + 4, next.tainted || nraw.tainted}).v & kPrevInuse) != 0;
        if (!nextinuse) {
            unlink(next);
            sz += nextsize;
        } else {
            wr({next.v + 4, next.tainted}, nraw.v & ~kPrevInuse);
        }
        set_head(p, sz | kPrevInuse);
        set_foot(p, sz);
        unsorted_.push_front(p.v);
    } else {
        sz += nextsize;
        set_head(p, sz | kPrevInuse);
        if (p.tainted)
            escape("top moved to corrupted address");
        top_ = p.v;
    }
}

void Heap::consolidate_fast()
{
    auto bins = std::move(fast_);
    fast_.clear();
    for (auto &[size, list] : bins) {
        (void)size;
        for (uint32_t c : list) {
            Word p{c, false};
            Word sz = chunksize(p);
            place_free(p, sz.v);
        }
    }
}

uint32_t Heap::malloc(uint32_t req)
{
    uint32_t nb = request_to_size(req);

    if (nb <= kMaxFast) {
        auto it = fast_.find(nb);
        if (it != fast_.end() && !it->second.empty()) {
            Word victim{it->second.front(), false};
            it->second.pop_front();
            if (chunksize(victim).v != nb)
                throw AllocatorAbort("malloc-fastbin-size");
            return to_user(victim);
        }
    }

    auto take_binned = [&](uint32_t key, std::deque<uint32_t> &list) -> uint32_t {
        Word victim{list.back(), false};
        Word sz = chunksize(victim);
        if (sz.v < kMinChunk || sz.v != key)
            throw AllocatorAbort("malloc-corrupted-size");
        unlink(victim);
        uint32_t rem = sz.v - nb;
        if (rem < kMinChunk) {
            Word next{victim.v + sz.v, sz.tainted};
            Word nraw = rd({next.v + 4, next.tainted});
            wr({next.v + 4, next.tainted}, nraw.v | kPrevInuse);
        } else {
            Word r{victim.v + nb, sz.tainted};
            uint32_t flag = rd({victim.v + 4, false}).v & kPrevInuse;
            set_head(victim, nb | flag);
            set_head(r, rem | kPrevInuse);
            set_foot(r, rem);
            unsorted_.push_front(r.v);
        }
        return to_user(victim);
    };

    if (nb < kMinLarge) {
        auto it = sized_.find(nb);
        if (it != sized_.end() && !it->second.empty())
            return take_binned(nb, it->second);
    } else if (have_fast()) {
        consolidate_fast();
    }

    while (!unsorted_.empty()) {
        Word victim{unsorted_.back(), false};
        unsorted_.pop_back();
        Word raw = rd({victim.v + 4, false});
        if (raw.v <= 2 * kWord || raw.v > end_ - base_)
            throw AllocatorAbort("malloc-corrupted-size");
        uint32_t sz = raw.v & ~7u;
        if (sz == nb) {
            Word next{victim.v + sz, raw.tainted};
            Word nraw = rd({next.v + 4, next.tainted});
            wr({next.v + 4, next.tainted}, nraw.v | kPrevInuse);
            return to_user(victim);
        }
        sized_[sz].push_front(victim.v);
    }

    for (auto it = sized_.lower_bound(nb); it != sized_.end(); ++it)
        if (!it->second.empty())
            return take_binned(it->first, it->second);

    Word top{top_, false};
    Word raw = rd({top.v + 4, false});
    uint32_t topsize = raw.v & ~7u;
    if (topsize < kMinChunk || top.v + topsize != end_)
        throw AllocatorAbort("top-size");
    if (topsize >= nb + kMinChunk) {
        set_head(top, nb | (raw.v & kPrevInuse));
        top_ = top.v + nb;
        mem_->store32(top_ + 4, (topsize - nb) | kPrevInuse);
        return to_user(top);
    }
    if (have_fast()) {
        consolidate_fast();
        return malloc(req);
    }
    throw OutOfArena("heap arena exhausted");
}

void Heap::free(uint32_t mem)
{
    if (mem == 0)
        return;
    Word p{mem - kHeader, false};
    if (mem % 8 != 0 || p.v < base_ || p.v >= end_)
        throw AllocatorAbort("invalid-pointer");
    if (!live_.count(p.v)) {
        bool binned = in_bins(p.v) || p.v == top_;
        for (const auto &[sz, list] : fast_)
            for (uint32_t c : list)
                binned = binned || c == p.v;
        throw AllocatorAbort(binned ? "double-free" : "invalid-pointer");
    }

    Word sz = chunksize(p);
    if (sz.v < kMinChunk || p.v + sz.v > end_)
        throw AllocatorAbort("invalid-size");
    live_.erase(p.v);

    Word next{p.v + sz.v, sz.tainted};
    Word nraw = rd({next.v + 4, next.tainted});
    if (nraw.v <= 2 * kWord || (nraw.v & ~7u) >= end_ - base_)
        throw AllocatorAbort("invalid-next-size");

    if (sz.v <= kMaxFast) {
        fast_[sz.v].push_front(p.v);
        return;
    }
    if ((nraw.v & kPrevInuse) == 0)
        throw AllocatorAbort("double-free");

    place_free(p, sz.v);
    if (sz.v >= kConsolidateThreshold && have_fast())
        consolidate_fast();
}

ChunkState Heap::state_of(uint32_t chunk) const
{
    if (chunk == top_)
        return ChunkState::Top;
    if (live_.count(chunk))
        return ChunkState::InUse;
    for (const auto &[sz, list] : fast_)
        for (uint32_t c : list)
            if (c == chunk)
                return ChunkState::Fast;
    for (uint32_t c : unsorted_)
        if (c == chunk)
            return ChunkState::Unsorted;
    for (const auto &[sz, list] : sized_)
        for (uint32_t c : list)
            if (c == chunk)
                return sz < kMinLarge ? ChunkState::Small : ChunkState::Large;
    throw std::invalid_argument("address is not a chunk start");
}

} // namespace chaff::heap

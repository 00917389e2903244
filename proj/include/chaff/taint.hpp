#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

namespace chaff {

using Label = uint32_t;
using TaintSet = std::vector<Label>;   // sorted, unique; empty means untainted
using TaintId = uint32_t;              // interned handle, 0 = empty

// Labels at or above this value are synthetic (per-bug audit labels), not
// input offsets.
inline constexpr Label kSyntheticLabel = 0x80000000u;

/// Interns taint sets so that per-byte shadow state is a single word.
class TaintTable {
public:
    TaintTable();

    TaintId intern(const TaintSet &set);
    TaintId singleton(Label l);
    TaintId unite(TaintId a, TaintId b);
    const TaintSet &get(TaintId id) const { return sets_[id]; }
    bool contains(TaintId id, Label l) const;
    size_t size() const { return sets_.size(); }

private:
    std::vector<TaintSet> sets_;
    std::map<TaintSet, TaintId> index_;
    std::unordered_map<uint64_t, TaintId> unions_;
};

} // namespace chaff

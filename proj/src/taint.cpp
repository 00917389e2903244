#include "chaff/taint.hpp"

#include <algorithm>
#include <iterator>

namespace chaff {

TaintTable::TaintTable()
{
    sets_.emplace_back();
    index_[{}] = 0;
}

TaintId TaintTable::intern(const TaintSet &set)
{
    auto it = index_.find(set);
    if (it != index_.end())
        return it->second;
    TaintId id = static_cast<TaintId>(sets_.size());
    sets_.push_back(set);
    index_.emplace(set, id);
    return id;
}

TaintId TaintTable::singleton(Label l)
{
    return intern({l});
}

TaintId TaintTable::unite(TaintId a, TaintId b)
{
    if (a == b || b == 0)
        return a;
    if (a == 0)
        return b;
    if (a > b)
        std::swap(a, b);
    uint64_t key = (static_cast<uint64_t>(a) << 32) | b;
    auto it = unions_.find(key);
    if (it != unions_.end())
        return it->second;
    TaintSet out;
    const TaintSet &x = sets_[a];
    const TaintSet &y = sets_[b];
    std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
    TaintId id = intern(out);
    unions_.emplace(key, id);
    return id;
}

bool TaintTable::contains(TaintId id, Label l) const
{
    const TaintSet &s = sets_[id];
    return std::binary_search(s.begin(), s.end(), l);
}

} // namespace chaff

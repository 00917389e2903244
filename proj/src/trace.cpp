#include "chaff/trace.hpp"

#include <algorithm>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace chaff {

const FrameSlot *FrameLayout::local(const std::string &name) const
{
    for (const auto &s : locals)
        if (s.name == name)
            return &s;
    return nullptr;
}

std::string LvaluePath::text() const
{
    std::string s = root;
    for (const auto &st : steps) {
        switch (st.kind) {
        case PathStep::Kind::Dot: s += "." + st.field; break;
        case PathStep::Kind::Arrow: s += "->" + st.field; break;
        case PathStep::Kind::Index: s += "[" + std::to_string(st.index) + "]"; break;
        }
    }
    return s;
}

uint32_t LvalueObserved::max_tcn() const
{
    return tcn.empty() ? 0 : *std::max_element(tcn.begin(), tcn.end());
}

size_t Trace::first_input_read() const
{
    for (size_t i = 0; i < events.size(); ++i)
        if (std::holds_alternative<InputRead>(events[i]))
            return i;
    return events.size();
}

namespace {

class Out {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i64(int64_t v)
    {
        auto u = static_cast<uint64_t>(v);
        for (int i = 0; i < 8; ++i)
            u8(static_cast<uint8_t>(u >> (8 * i)));
    }
    void str(const std::string &s)
    {
        u32(static_cast<uint32_t>(s.size()));
        buf_ += s;
    }
    void set(const TaintSet &t)
    {
        u32(static_cast<uint32_t>(t.size()));
        for (Label l : t)
            u32(l);
    }
    const std::string &bytes() const { return buf_; }

private:
    std::string buf_;
};

class In {
public:
    explicit In(std::string data) : data_(std::move(data)) {}

    uint8_t u8()
    {
        need(1);
        return static_cast<uint8_t>(data_[pos_++]);
    }
    uint32_t u32()
    {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(u8()) << (8 * i);
        return v;
    }
    int64_t i64()
    {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(u8()) << (8 * i);
        return static_cast<int64_t>(v);
    }
    std::string str()
    {
        uint32_t n = u32();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    TaintSet set()
    {
        uint32_t n = u32();
        need(static_cast<size_t>(n) * 4);
        TaintSet t(n);
        for (auto &l : t)
            l = u32();
        return t;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(size_t n) const
    {
        if (data_.size() - pos_ < n)
            throw TraceFormatError("truncated trace record");
    }

    std::string data_;
    size_t pos_ = 0;
};

void put_slots(Out &o, const std::vector<FrameSlot> &slots)
{
    o.u32(static_cast<uint32_t>(slots.size()));
    for (const auto &s : slots) {
        o.str(s.name);
        o.u32(s.offset);
        o.u32(s.size);
    }
}

std::vector<FrameSlot> get_slots(In &in)
{
    std::vector<FrameSlot> slots(in.u32());
    for (auto &s : slots) {
        s.name = in.str();
        s.offset = in.u32();
        s.size = in.u32();
    }
    return slots;
}

struct Encoder {
    Out &o;

    void operator()(const BranchEval &e)
    {
        o.u32(e.node);
        o.set(e.taint);
    }
    void operator()(const CallEnter &e)
    {
        const FrameLayout &l = e.layout;
        o.str(l.function);
        put_slots(o, l.locals);
        put_slots(o, l.params);
        o.u32(l.copied_args_offset);
        o.u32(l.copied_args_size);
        o.u32(l.saved_fp_offset);
        o.u32(l.return_address_offset);
        o.u32(l.frame_base);
        o.u32(static_cast<uint32_t>(e.chain.size()));
        for (const auto &c : e.chain)
            o.str(c);
        o.u32(e.call_site);
        o.u8(e.indirect);
    }
    void operator()(const Return &e) { o.str(e.function); }
    void operator()(const HeapAlloc &e)
    {
        o.u32(e.address);
        o.u32(e.size);
    }
    void operator()(const HeapFree &e) { o.u32(e.address); }
    void operator()(const LvalueObserved &e)
    {
        o.u32(e.stmt);
        o.str(e.function);
        o.str(e.path.root);
        o.u8(e.path.root_global);
        o.u8(e.path.root_param);
        o.u32(static_cast<uint32_t>(e.path.steps.size()));
        for (const auto &s : e.path.steps) {
            o.u8(static_cast<uint8_t>(s.kind));
            o.str(s.field);
            o.u32(s.index);
        }
        o.u32(e.address);
        o.u32(e.width);
        for (const auto &t : e.taint)
            o.set(t);
        for (uint32_t t : e.tcn)
            o.u32(t);
        o.u8(e.is_write);
        o.u8(e.siphonable);
        o.u32(e.siphon_anchor);
        o.u8(e.siphon_after);
        o.u8(e.in_decl_init);
        o.u8(e.initialized);
        o.i64(e.evidence_index);
        o.u8(e.string_offset);
        o.u32(e.offset);
        o.u32(e.base_strlen);
    }
    void operator()(const InputRead &e)
    {
        o.u32(e.begin);
        o.u32(e.end);
    }
    void operator()(const StmtEnter &e)
    {
        o.u32(e.node);
        o.str(e.function);
    }
};

TraceEvent decode(uint8_t tag, In &in)
{
    switch (tag) {
    case 0: {
        BranchEval e;
        e.node = in.u32();
        e.taint = in.set();
        return e;
    }
    case 1: {
        CallEnter e;
        FrameLayout &l = e.layout;
        l.function = in.str();
        l.locals = get_slots(in);
        l.params = get_slots(in);
        l.copied_args_offset = in.u32();
        l.copied_args_size = in.u32();
        l.saved_fp_offset = in.u32();
        l.return_address_offset = in.u32();
        l.frame_base = in.u32();
        e.chain.resize(in.u32());
        for (auto &c : e.chain)
            c = in.str();
        e.call_site = in.u32();
        e.indirect = in.u8() != 0;
        return e;
    }
    case 2:
        return Return{in.str()};
    case 3: {
        HeapAlloc e;
        e.address = in.u32();
        e.size = in.u32();
        return e;
    }
    case 4:
        return HeapFree{in.u32()};
    case 5: {
        LvalueObserved e;
        e.stmt = in.u32();
        e.function = in.str();
        e.path.root = in.str();
        e.path.root_global = in.u8() != 0;
        e.path.root_param = in.u8() != 0;
        e.path.steps.resize(in.u32());
        for (auto &s : e.path.steps) {
            uint8_t k = in.u8();
            if (k > 2)
                throw TraceFormatError("bad path step kind");
            s.kind = static_cast<PathStep::Kind>(k);
            s.field = in.str();
            s.index = in.u32();
        }
        e.address = in.u32();
        e.width = in.u32();
        if (e.width > 4096)
            throw TraceFormatError("implausible lvalue width");
        e.taint.resize(e.width);
        for (auto &t : e.taint)
            t = in.set();
        e.tcn.resize(e.width);
        for (auto &t : e.tcn)
            t = in.u32();
        e.is_write = in.u8() != 0;
        e.siphonable = in.u8() != 0;
        e.siphon_anchor = in.u32();
        e.siphon_after = in.u8() != 0;
        e.in_decl_init = in.u8() != 0;
        e.initialized = in.u8() != 0;
        e.evidence_index = in.i64();
        e.string_offset = in.u8() != 0;
        e.offset = in.u32();
        e.base_strlen = in.u32();
        return e;
    }
    case 6: {
        InputRead e;
        e.begin = in.u32();
        e.end = in.u32();
        return e;
    }
    case 7: {
        StmtEnter e;
        e.node = in.u32();
        e.function = in.str();
        return e;
    }
    default:
        throw TraceFormatError("unknown trace record tag " + std::to_string(tag));
    }
}

std::string set_text(const TaintSet &t)
{
    std::string s = "{";
    for (size_t i = 0; i < t.size(); ++i) {
        if (i)
            s += ",";
        if (t[i] >= kSyntheticLabel)
            s += "bug" + std::to_string(t[i] - kSyntheticLabel);
        else
            s += std::to_string(t[i]);
    }
    return s + "}";
}

} // namespace

void write_trace(std::ostream &os, const Trace &trace)
{
    Out head;
    head.u32(kTraceMagic);
    head.u32(kTraceVersion);   // u16 version + u16 reserved
    head.u32(trace.input_length);
    head.u32(static_cast<uint32_t>(trace.events.size()));
    os.write(head.bytes().data(), static_cast<std::streamsize>(head.bytes().size()));
    for (const auto &ev : trace.events) {
        Out body;
        std::visit(Encoder{body}, ev);
        Out rec;
        rec.u8(static_cast<uint8_t>(ev.index()));
        rec.u32(static_cast<uint32_t>(body.bytes().size()));
        os.write(rec.bytes().data(), static_cast<std::streamsize>(rec.bytes().size()));
        os.write(body.bytes().data(), static_cast<std::streamsize>(body.bytes().size()));
    }
}

Trace read_trace(std::istream &is)
{
    std::string all{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    In in(std::move(all));
    if (in.u32() != kTraceMagic)
        throw TraceFormatError("not a trace (bad magic)");
    uint32_t version = in.u32();
    if ((version & 0xFFFF) != kTraceVersion)
        throw TraceFormatError("unsupported trace version " + std::to_string(version & 0xFFFF));
    Trace t;
    t.input_length = in.u32();
    uint32_t n = in.u32();
    for (uint32_t i = 0; i < n; ++i) {
        uint8_t tag = in.u8();
        In body(in.str());   // length-prefixed payload
        t.events.push_back(decode(tag, body));
        if (!body.done())
            throw TraceFormatError("trailing bytes in trace record");
    }
    if (!in.done())
        throw TraceFormatError("trailing bytes after last record");
    return t;
}

std::string dump_trace(const Trace &trace)
{
    std::ostringstream os;
    os << "trace input_length=" << trace.input_length << " events=" << trace.events.size() << "\n";
    for (size_t i = 0; i < trace.events.size(); ++i) {
        os << i << " ";
        std::visit(
            [&](const auto &e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, BranchEval>) {
                    os << "branch node=" << e.node << " taint=" << set_text(e.taint);
                } else if constexpr (std::is_same_v<T, CallEnter>) {
                    os << "call " << e.layout.function << " base=0x" << std::hex << e.layout.frame_base << std::dec
                       << " args=" << e.layout.copied_args_size << " fp@" << e.layout.saved_fp_offset
                       << (e.indirect ? " indirect" : "") << " chain=";
                    for (size_t k = 0; k < e.chain.size(); ++k)
                        os << (k ? ">" : "") << e.chain[k];
                } else if constexpr (std::is_same_v<T, Return>) {
                    os << "return " << e.function;
                } else if constexpr (std::is_same_v<T, HeapAlloc>) {
                    os << "malloc 0x" << std::hex << e.address << std::dec << " size=" << e.size;
                } else if constexpr (std::is_same_v<T, HeapFree>) {
                    os << "free 0x" << std::hex << e.address << std::dec;
                } else if constexpr (std::is_same_v<T, LvalueObserved>) {
                    os << (e.is_write ? "write " : "read ") << e.function << ":" << e.path.text() << " width=" << e.width
                       << " tcn=" << e.max_tcn() << " taint=";
                    for (const auto &t : e.taint)
                        os << set_text(t);
                    os << " stmt=" << e.stmt << (e.initialized ? " init" : " uninit")
                       << (e.siphonable ? "" : " unsiphonable");
                    if (e.string_offset)
                        os << " strlen=" << e.base_strlen;
                } else if constexpr (std::is_same_v<T, InputRead>) {
                    os << "input [" << e.begin << "," << e.end << ")";
                } else {
                    os << "stmt " << e.node << " in " << e.function;
                }
            },
            trace.events[i]);
        os << "\n";
    }
    return os.str();
}

} // namespace chaff

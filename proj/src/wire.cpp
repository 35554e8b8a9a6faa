#include "lbcast/wire.hpp"

namespace lbcast {

namespace {

void put_u16(Bytes& out, unsigned v)
{
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

} // namespace

Bytes encode(const Msg& m)
{
    if (m.origin < 0 || m.origin > 0xffff || m.round < 0 || m.round > 0xffff) {
        throw std::invalid_argument("origin/round out of wire range");
    }
    Bytes out;
    out.push_back(static_cast<char>(m.kind));
    put_u16(out, static_cast<unsigned>(m.origin));
    put_u16(out, static_cast<unsigned>(m.round));
    std::string value = m.value.str();
    if (value.size() > 0xff) {
        throw std::invalid_argument("value string too long");
    }
    out.push_back(static_cast<char>(value.size()));
    out += value;
    if (m.path.size() > 0xff) {
        throw std::invalid_argument("path too long");
    }
    out.push_back(static_cast<char>(m.path.size()));
    for (NodeId id : m.path) {
        if (id < 0 || id > 0xffff) {
            throw std::invalid_argument("path id out of wire range");
        }
        put_u16(out, static_cast<unsigned>(id));
    }
    return out;
}

std::optional<Msg> decode(const Bytes& b)
{
    std::size_t pos = 0;
    auto need = [&](std::size_t n) { return pos + n <= b.size(); };
    auto u8 = [&]() { return static_cast<unsigned char>(b[pos++]); };
    auto u16 = [&]() {
        unsigned hi = static_cast<unsigned char>(b[pos]);
        unsigned lo = static_cast<unsigned char>(b[pos + 1]);
        pos += 2;
        return hi << 8 | lo;
    };

    if (!need(1)) return std::nullopt;
    unsigned tag = u8();
    if (tag < 1 || tag > 3) return std::nullopt;
    Msg m;
    m.kind = static_cast<MsgKind>(tag);
    if (!need(4)) return std::nullopt;
    m.origin = static_cast<NodeId>(u16());
    m.round = static_cast<int>(u16());
    if (!need(1)) return std::nullopt;
    std::size_t vlen = u8();
    if (!need(vlen)) return std::nullopt;
    std::string value = b.substr(pos, vlen);
    pos += vlen;
    try {
        m.value = Fixed::parse(value);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    if (!need(1)) return std::nullopt;
    std::size_t plen = u8();
    if (!need(plen * 2)) return std::nullopt;
    for (std::size_t i = 0; i < plen; ++i) {
        m.path.push_back(static_cast<NodeId>(u16()));
    }
    if (pos != b.size()) return std::nullopt;
    return m;
}

} // namespace lbcast

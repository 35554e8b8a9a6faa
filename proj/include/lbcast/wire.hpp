#pragma once

#include "lbcast/bytes.hpp"
#include "lbcast/fixed.hpp"
#include "lbcast/graph.hpp"

#include <optional>
#include <vector>

namespace lbcast {

// Fixed wire encoding so replay scripts stay portable across runs:
//   tag byte, origin (2 bytes BE), round (2 bytes BE),
//   value (length-prefixed decimal string), path (length-prefixed id list,
//   2 bytes BE each).
// Tag 1 carries a node's own round value, tag 2 a relayed copy with the
// accumulated node path, tag 3 a witness report whose list holds the origins
// the sender has collected for that round.
enum class MsgKind : std::uint8_t { RoundValue = 1, Relay = 2, Witness = 3 };

struct Msg {
    MsgKind kind = MsgKind::RoundValue;
    NodeId origin = 0;
    int round = 0;
    Fixed value;
    std::vector<NodeId> path;

    bool operator==(const Msg&) const = default;
};

Bytes encode(const Msg& m);
std::optional<Msg> decode(const Bytes& b);

inline Bytes round_value_msg(NodeId origin, int round, Fixed value)
{
    return encode({MsgKind::RoundValue, origin, round, value, {}});
}

} // namespace lbcast

#pragma once
/*
 * types.hpp — shared primitive types for the payment-channel network simulator.
 *
 * Conventions used across the library:
 *   - on-chain balances and channel capacities are in satoshi (Sat)
 *   - channel balances, payment amounts in flight and fees are in
 *     millisatoshi (Msat) for exact accounting; 1 sat == 1000 msat
 *   - simulated time is a virtual nanosecond clock starting at 0
 */

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lnsim {

using Sat = std::int64_t;
using Msat = std::int64_t;
using TimeNs = std::int64_t;
using NodeId = std::string;     // human-readable node name, unique per network
using PubKey = std::string;     // opaque node public key (keysend destination)
using ChannelId = std::uint64_t;

constexpr Msat kMsatPerSat = 1000;

inline constexpr Msat msat_from_sat(Sat s) { return s * kMsatPerSat; }
inline constexpr Sat sat_floor(Msat m) { return m / kMsatPerSat; }

constexpr TimeNs kNsPerSec = 1'000'000'000;

// Roles a node can play in a scenario. Relays stand in for the public
// network; the other three are operator-controlled endpoints.
enum class NodeRole { botmaster, cnc_server, collector, relay };

const char* to_string(NodeRole role);
NodeRole node_role_from_string(const std::string& s);

// Thrown for precondition violations and invalid configuration; domain
// outcomes that are normal in a running scenario (payment failures, decode
// errors) are returned as values instead.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// Satoshi amount rendered as a fixed-point BTC string with 8 decimals,
// e.g. 46200 -> "0.00046200".
std::string btc_string(Sat sat);

}  // namespace lnsim

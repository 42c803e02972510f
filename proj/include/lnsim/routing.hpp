#pragma once
/*
 * routing.hpp — deterministic source routing.
 *
 * Route preference: fewest forwarding hops, then lowest total fee, then the
 * lexicographically smallest channel-id sequence.  Fees are computed backward
 * from the destination: each intermediary charges its outgoing channel's fee
 * policy on the amount it forwards, so the source sends amount + sum(fees).
 */

#include <optional>
#include <vector>

#include "lnsim/network.hpp"
#include "lnsim/types.hpp"

namespace lnsim {

Msat hop_fee(Msat amount_msat, const FeePolicy& policy);

struct RouteHop {
    ChannelId channel = 0;
    NodeId from;
    NodeId to;
    Msat amount_msat = 0;  // amount pushed across this channel
};

struct Route {
    std::vector<RouteHop> hops;

    // Forwarding nodes on the route (a direct payment has 0).
    int intermediary_count() const {
        return hops.empty() ? 0 : static_cast<int>(hops.size()) - 1;
    }
};

struct RouteConstraints {
    // Require exactly this many forwarding nodes (replication topologies pin 4).
    std::optional<int> fixed_intermediary_hops;
    // Force the first hop out of a specific channel.
    std::optional<ChannelId> outgoing_channel;
    // Millisatoshi the source's outgoing channel must retain after sending.
    Msat source_reserve_msat = 0;
    // Search ceiling on route edges.
    int max_edges = 8;
};

enum class RouteFailure { none, no_route, insufficient_capacity };

struct RouteSearchResult {
    bool found = false;
    RouteFailure failure = RouteFailure::none;
    Route route;
    Msat send_msat = 0;                 // debit at the source, amount + fees
    Msat total_fee_msat = 0;
    std::vector<Msat> hop_fees_msat;    // per intermediary, route order
};

// Find a route for `amount_sat` from src to dst.  no_route means no open
// path exists within the edge budget at all; insufficient_capacity means
// paths exist but none has the directional liquidity.
RouteSearchResult find_route(const Network& net, const NodeId& src, const NodeId& dst,
                             Sat amount_sat, const RouteConstraints& constraints = {});

}  // namespace lnsim

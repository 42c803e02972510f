#include "lnsim/routing.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>

namespace lnsim {

Msat hop_fee(Msat amount_msat, const FeePolicy& policy) {
    if (amount_msat < 0) throw SimError("hop_fee: negative amount");
    return policy.base_fee_msat + amount_msat * policy.proportional_ppm / 1'000'000;
}

namespace {

// Adjacency as the sender can know it: public channels plus private ones
// the sender or receiver is an endpoint of (private channels are not
// gossiped; anything else is invisible).  Deterministic order (ascending
// channel id within a node).
struct SearchGraph {
    std::map<NodeId, std::vector<const ChannelState*>> adj;

    SearchGraph(const Network& net, const NodeId& src, const NodeId& dst) {
        for (const auto& [cid, ch] : net.channels()) {
            if (!ch.open) continue;
            if (ch.is_private && !ch.has_endpoint(src) && !ch.has_endpoint(dst)) continue;
            adj[ch.endpoint_a].push_back(&ch);
            adj[ch.endpoint_b].push_back(&ch);
        }
    }

    const std::vector<const ChannelState*>& edges_of(const NodeId& n) const {
        static const std::vector<const ChannelState*> none;
        const auto it = adj.find(n);
        return it == adj.end() ? none : it->second;
    }
};

// Hop distance to dst ignoring balances, used both as reachability check and
// DFS pruning bound.  Nodes that refuse to forward can terminate a path but
// never sit in the middle of one.
std::map<NodeId, int> distances_to(const SearchGraph& g, const Network& net, const NodeId& dst) {
    std::map<NodeId, int> dist;
    dist[dst] = 0;
    std::deque<NodeId> queue{dst};
    while (!queue.empty()) {
        const NodeId n = queue.front();
        queue.pop_front();
        if (n != dst && !net.node(n).forwards_payments) continue;
        for (const ChannelState* ch : g.edges_of(n)) {
            const NodeId& peer = ch->other(n);
            if (dist.count(peer) || !net.node(peer).online) continue;
            dist[peer] = dist[n] + 1;
            queue.push_back(peer);
        }
    }
    return dist;
}

struct Candidate {
    Msat total_fee = 0;
    std::vector<ChannelId> channel_seq;
    std::vector<const ChannelState*> path;

    bool better_than(const Candidate& other) const {
        if (total_fee != other.total_fee) return total_fee < other.total_fee;
        return channel_seq < other.channel_seq;
    }
};

// Backward fee walk: returns the per-edge amounts for delivering amount_msat
// over `path`, or nullopt when some directional balance cannot carry it.
std::optional<std::vector<Msat>> edge_amounts(const std::vector<const ChannelState*>& path,
                                              const NodeId& src, Msat amount_msat,
                                              const RouteConstraints& cons) {
    const std::size_t n = path.size();
    std::vector<Msat> amounts(n, 0);
    std::vector<NodeId> senders(n);
    NodeId at = src;
    for (std::size_t i = 0; i < n; ++i) {
        senders[i] = at;
        at = path[i]->other(at);
    }
    amounts[n - 1] = amount_msat;
    for (std::size_t i = n - 1; i-- > 0;) {
        // the forwarder of edge i+1 charges its policy on what it pushes out
        const Msat fee = hop_fee(amounts[i + 1], path[i + 1]->policy_of(senders[i + 1]));
        amounts[i] = amounts[i + 1] + fee;
    }
    for (std::size_t i = 0; i < n; ++i) {
        Msat required = amounts[i];
        if (i == 0) required += cons.source_reserve_msat;
        if (path[i]->balance_of(senders[i]) < required) return std::nullopt;
    }
    return amounts;
}

}  // namespace

RouteSearchResult find_route(const Network& net, const NodeId& src, const NodeId& dst,
                             Sat amount_sat, const RouteConstraints& cons) {
    if (src == dst) throw SimError("find_route: source equals destination");
    if (amount_sat <= 0) throw SimError("find_route: non-positive amount");
    net.node(src);  // existence checks
    net.node(dst);

    RouteSearchResult res;
    const Msat amount_msat = msat_from_sat(amount_sat);

    const SearchGraph graph(net, src, dst);
    const auto dist = distances_to(graph, net, dst);
    const auto dist_of = [&](const NodeId& n) {
        const auto it = dist.find(n);
        return it == dist.end() ? std::numeric_limits<int>::max() : it->second;
    };

    int min_edges = dist_of(src);
    int max_edges = cons.max_edges;
    if (cons.fixed_intermediary_hops) {
        min_edges = std::max(min_edges, *cons.fixed_intermediary_hops + 1);
        max_edges = *cons.fixed_intermediary_hops + 1;
    }
    if (dist_of(src) == std::numeric_limits<int>::max() || min_edges > max_edges) {
        res.failure = RouteFailure::no_route;
        return res;
    }

    bool topo_path_seen = false;
    for (int depth = min_edges; depth <= max_edges; ++depth) {
        std::optional<Candidate> best;
        std::vector<const ChannelState*> path;
        std::vector<ChannelId> seq;
        std::map<NodeId, bool> visited{{src, true}};

        // Depth-first enumeration of simple paths with exactly `depth`
        // edges; the distance bound prunes branches that cannot reach dst.
        auto dfs = [&](auto&& self, const NodeId& at, int used) -> void {
            if (used == depth) {
                if (at != dst) return;
                topo_path_seen = true;
                if (auto amounts = edge_amounts(path, src, amount_msat, cons)) {
                    Candidate cand;
                    cand.total_fee = (*amounts)[0] - amount_msat;
                    cand.channel_seq = seq;
                    cand.path = path;
                    if (!best || cand.better_than(*best)) best = std::move(cand);
                }
                return;
            }
            if (dist_of(at) > depth - used) return;
            for (const ChannelState* ch : graph.edges_of(at)) {
                if (used == 0 && cons.outgoing_channel && ch->id != *cons.outgoing_channel)
                    continue;
                const NodeId& peer = ch->other(at);
                if (visited[peer] || !net.node(peer).online) continue;
                if (peer == dst && used + 1 != depth) continue;  // dst only as terminus
                if (peer != dst && !net.node(peer).forwards_payments) continue;
                visited[peer] = true;
                path.push_back(ch);
                seq.push_back(ch->id);
                self(self, peer, used + 1);
                seq.pop_back();
                path.pop_back();
                visited[peer] = false;
            }
        };
        dfs(dfs, src, 0);

        if (best) {
            res.found = true;
            res.send_msat = amount_msat + best->total_fee;
            res.total_fee_msat = best->total_fee;
            const auto amounts = edge_amounts(best->path, src, amount_msat, cons);
            NodeId at = src;
            for (std::size_t i = 0; i < best->path.size(); ++i) {
                RouteHop hop;
                hop.channel = best->path[i]->id;
                hop.from = at;
                hop.to = best->path[i]->other(at);
                hop.amount_msat = (*amounts)[i];
                at = hop.to;
                res.route.hops.push_back(std::move(hop));
                if (i + 1 < best->path.size())
                    res.hop_fees_msat.push_back((*amounts)[i] - (*amounts)[i + 1]);
            }
            return res;
        }
    }

    res.failure = topo_path_seen ? RouteFailure::insufficient_capacity : RouteFailure::no_route;
    return res;
}

}  // namespace lnsim

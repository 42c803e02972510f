#include <doctest.h>

#include <string>
#include <vector>

#include "lnsim/routing.hpp"

using namespace lnsim;

namespace {

// bm - r1 - r2 - r3 - r4 - srv, all channels funded by the left endpoint
struct ChainNet {
    Network net;
    std::vector<ChannelId> chans;

    ChainNet() {
        const std::vector<NodeId> order = {"bm", "r1", "r2", "r3", "r4", "srv"};
        net.add_node("bm", NodeRole::botmaster, 2'000'000);
        for (int i = 1; i <= 4; ++i)
            net.add_node("r" + std::to_string(i), NodeRole::relay, 2'000'000, true);
        net.add_node("srv", NodeRole::cnc_server, 2'000'000);
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            chans.push_back(net.open_channel(order[i], order[i + 1], 500'000));
    }
};

std::vector<ChannelId> channel_seq(const Route& r) {
    std::vector<ChannelId> out;
    for (const RouteHop& h : r.hops) out.push_back(h.channel);
    return out;
}

}  // namespace

// ==================== fees ====================

TEST_CASE("forwarding fee is base plus proportional ppm, floored") {
    const FeePolicy def;  // 1000 msat + 1 ppm
    CHECK(hop_fee(115'000, def) == 1'000);          // floor(0.115) == 0
    CHECK(hop_fee(1'000'000'000, def) == 2'000);    // 1000 + 1000
    CHECK(hop_fee(999'999, def) == 1'000);
    FeePolicy big{500, 10'000};
    CHECK(hop_fee(2'000'000, big) == 500 + 20'000);
}

TEST_CASE("fees accumulate backward from the destination") {
    ChainNet c;
    const RouteSearchResult r = find_route(c.net, "bm", "srv", 100);
    REQUIRE(r.found);
    REQUIRE(r.route.hops.size() == 5);
    CHECK(r.route.intermediary_count() == 4);

    // each of the 4 intermediaries charges 1 sat on a sub-1000-sat payment
    CHECK(r.total_fee_msat == 4'000);
    CHECK(r.send_msat == 104'000);
    const std::vector<Msat> amounts = {104'000, 103'000, 102'000, 101'000, 100'000};
    for (std::size_t i = 0; i < amounts.size(); ++i)
        CHECK(r.route.hops[i].amount_msat == amounts[i]);
    CHECK(r.hop_fees_msat == std::vector<Msat>{1'000, 1'000, 1'000, 1'000});
    CHECK(r.route.hops.front().from == "bm");
    CHECK(r.route.hops.back().to == "srv");
}

TEST_CASE("a direct payment pays no fee") {
    Network net;
    net.add_node("a", NodeRole::relay, 1'000'000, true);
    net.add_node("b", NodeRole::relay, 1'000'000, true);
    net.open_channel("a", "b", 100'000);
    const RouteSearchResult r = find_route(net, "a", "b", 500);
    REQUIRE(r.found);
    CHECK(r.route.hops.size() == 1);
    CHECK(r.total_fee_msat == 0);
    CHECK(r.send_msat == 500'000);
}

// ==================== preference order ====================

TEST_CASE("shorter routes beat cheaper ones; fee breaks length ties") {
    // a - b - d (2 edges) vs a - c - d with a free c (also 2 edges) vs a - e - f - d
    Network net;
    for (const char* n : {"a", "b", "c", "d", "e", "f"})
        net.add_node(n, NodeRole::relay, 10'000'000, true);
    net.open_channel("a", "b", 100'000);
    const ChannelId bd = net.open_channel("b", "d", 100'000);
    net.open_channel("a", "c", 100'000);
    const ChannelId cd = net.open_channel("c", "d", 100'000);
    net.open_channel("a", "e", 100'000);
    net.open_channel("e", "f", 100'000);
    net.open_channel("f", "d", 100'000);

    // make c forward for free: now both 2-edge routes exist but c's is cheaper
    net.channel(cd).policy_a = FeePolicy{0, 0};

    const RouteSearchResult r = find_route(net, "a", "d", 1'000);
    REQUIRE(r.found);
    CHECK(r.route.hops.size() == 2);
    CHECK(r.route.hops[1].from == "c");
    CHECK(r.total_fee_msat == 0);

    // with equal fees the lexicographically smallest channel sequence wins
    net.channel(cd).policy_a = net.channel(bd).policy_a;
    const RouteSearchResult tie = find_route(net, "a", "d", 1'000);
    REQUIRE(tie.found);
    CHECK(tie.route.hops[1].from == "b");  // a-b channel id < a-c channel id
}

TEST_CASE("a fixed intermediary count skips shorter routes") {
    // direct a-d exists, but the constraint demands 2 forwarding nodes
    Network net;
    for (const char* n : {"a", "b", "c", "d"})
        net.add_node(n, NodeRole::relay, 10'000'000, true);
    net.open_channel("a", "d", 100'000);
    net.open_channel("a", "b", 100'000);
    net.open_channel("b", "c", 100'000);
    net.open_channel("c", "d", 100'000);

    RouteConstraints cons;
    cons.fixed_intermediary_hops = 2;
    const RouteSearchResult r = find_route(net, "a", "d", 100, cons);
    REQUIRE(r.found);
    CHECK(r.route.hops.size() == 3);
    CHECK(r.total_fee_msat == 2'000);

    cons.fixed_intermediary_hops = 3;  // no 4-edge simple path exists
    CHECK_FALSE(find_route(net, "a", "d", 100, cons).found);
}

TEST_CASE("the outgoing channel constraint pins the first hop") {
    ChainNet c;
    const ChannelId direct = c.net.open_channel("bm", "srv", 500'000);

    const RouteSearchResult free_choice = find_route(c.net, "bm", "srv", 100);
    REQUIRE(free_choice.found);
    CHECK(free_choice.route.hops.size() == 1);  // the direct channel

    RouteConstraints cons;
    cons.outgoing_channel = c.chans[0];
    const RouteSearchResult pinned = find_route(c.net, "bm", "srv", 100, cons);
    REQUIRE(pinned.found);
    CHECK(pinned.route.hops.size() == 5);
    CHECK(channel_seq(pinned.route) == c.chans);

    cons.outgoing_channel = direct;
    CHECK(find_route(c.net, "bm", "srv", 100, cons).route.hops.size() == 1);
}

// ==================== failures ====================

TEST_CASE("unreachable destinations report no_route") {
    Network net;
    net.add_node("a", NodeRole::relay, 1'000'000, true);
    net.add_node("b", NodeRole::relay, 1'000'000, true);
    net.add_node("island", NodeRole::relay, 1'000'000, true);
    net.open_channel("a", "b", 100'000);
    const RouteSearchResult r = find_route(net, "a", "island", 100);
    CHECK_FALSE(r.found);
    CHECK(r.failure == RouteFailure::no_route);
}

TEST_CASE("a path without directional liquidity reports insufficient_capacity") {
    Network net;
    net.add_node("a", NodeRole::relay, 1'000'000, true);
    net.add_node("b", NodeRole::relay, 1'000'000, true);
    const ChannelId ab = net.open_channel("a", "b", 100'000);
    net.set_channel_split(ab, 0);  // all liquidity on b's side
    const RouteSearchResult r = find_route(net, "a", "b", 100);
    CHECK_FALSE(r.found);
    CHECK(r.failure == RouteFailure::insufficient_capacity);
}

TEST_CASE("the source reserve blocks otherwise feasible payments") {
    Network net;
    net.add_node("a", NodeRole::relay, 1'000'000, true);
    net.add_node("b", NodeRole::relay, 1'000'000, true);
    net.open_channel("a", "b", 100'000);

    RouteConstraints cons;
    cons.source_reserve_msat = 99'999'000;
    CHECK(find_route(net, "a", "b", 1, cons).found);  // exactly at the reserve
    CHECK_FALSE(find_route(net, "a", "b", 2, cons).found);
    CHECK(find_route(net, "a", "b", 2, cons).failure == RouteFailure::insufficient_capacity);
}

TEST_CASE("offline intermediaries are not routed through") {
    ChainNet c;
    c.net.node("r2").online = false;
    const RouteSearchResult r = find_route(c.net, "bm", "srv", 100);
    CHECK_FALSE(r.found);
    CHECK(r.failure == RouteFailure::no_route);
}

TEST_CASE("closed channels disappear from the graph") {
    ChainNet c;
    c.net.close_channel(c.chans[2], "r3");
    CHECK_FALSE(find_route(c.net, "bm", "srv", 100).found);
}

TEST_CASE("the edge budget bounds the search") {
    ChainNet c;
    RouteConstraints cons;
    cons.max_edges = 4;
    const RouteSearchResult r = find_route(c.net, "bm", "srv", 100, cons);
    CHECK_FALSE(r.found);
    CHECK(r.failure == RouteFailure::no_route);
    CHECK(find_route(c.net, "bm", "r4", 100, cons).found);
}

// ==================== visibility ====================

TEST_CASE("private channels are routable only when an endpoint is src or dst") {
    // a - m - x public, x = b private, b - y public: the private edge is the
    // sole bridge between the two halves
    Network net;
    for (const char* n : {"a", "m", "x", "b", "y"})
        net.add_node(n, NodeRole::relay, 10'000'000, true);
    net.open_channel("a", "m", 100'000);
    net.open_channel("m", "x", 100'000);
    const ChannelId priv = net.open_channel("x", "b", 100'000, /*is_private=*/true);
    net.open_channel("b", "y", 100'000);

    // unrelated transit cannot see the private edge at all
    const RouteSearchResult transit = find_route(net, "a", "y", 100);
    CHECK_FALSE(transit.found);
    CHECK(transit.failure == RouteFailure::no_route);

    // the owner may send out of it, and payments to an endpoint may use it
    // (the recipient hands the sender a hint for the last edge)
    const RouteSearchResult out = find_route(net, "x", "y", 100);
    REQUIRE(out.found);
    CHECK(channel_seq(out.route).front() == priv);
    const RouteSearchResult in = find_route(net, "a", "b", 100);
    REQUIRE(in.found);
    CHECK(channel_seq(in.route).back() == priv);
}

TEST_CASE("nodes that do not forward payments never appear mid-route") {
    // a - srv - b: srv is a covert endpoint, so transit through it must fail
    Network net;
    net.add_node("a", NodeRole::relay, 10'000'000, true);
    net.add_node("b", NodeRole::relay, 10'000'000, true);
    net.add_node("srv", NodeRole::cnc_server, 10'000'000);
    net.open_channel("a", "srv", 100'000);
    net.open_channel("srv", "b", 100'000);

    const RouteSearchResult transit = find_route(net, "a", "b", 100);
    CHECK_FALSE(transit.found);
    CHECK(transit.failure == RouteFailure::no_route);
    // ...while payments terminating at the covert node still work
    CHECK(find_route(net, "a", "srv", 100).found);
}

// ==================== argument validation ====================

TEST_CASE("degenerate requests are rejected") {
    ChainNet c;
    CHECK_THROWS_AS(find_route(c.net, "bm", "bm", 100), SimError);
    CHECK_THROWS_AS(find_route(c.net, "bm", "srv", 0), SimError);
    CHECK_THROWS_AS(find_route(c.net, "bm", "srv", -5), SimError);
    CHECK_THROWS_AS(find_route(c.net, "ghost", "srv", 100), SimError);
}

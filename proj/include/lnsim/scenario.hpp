#pragma once
/*
 * scenario.hpp — declarative experiment description.
 *
 * Scenarios are plain text: `key = value` lines grouped under `[section]`
 * headers (the scenarios/ directory holds worked examples).  Parsing is strict —
 * unknown sections or keys, malformed values and inconsistent combinations
 * are rejected with the offending line number before any simulation starts.
 */

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lnsim/analysis.hpp"
#include "lnsim/codec.hpp"
#include "lnsim/network.hpp"
#include "lnsim/payment.hpp"
#include "lnsim/protocol.hpp"

namespace lnsim {

struct Scenario {
    enum class Topology { replication_chain, random_mesh, explicit_decl };

    std::string name = "scenario";
    std::uint64_t seed = 1;

    // [network]
    Topology topology = Topology::random_mesh;
    int relays = 8;
    int relay_degree = 3;
    Sat relay_channel_capacity_sat = 1'000'000;
    Sat sweep_fee_sat = 0;
    NetworkConfig net;  // fees/minimums; default_fee_policy set via [fees]
    int max_route_edges = 8;

    // [botnet]
    int cnc_servers = 1;
    Sat channel_capacity_sat = 20'000;
    Sat botmaster_onchain_sat = 2'000'000;
    Sat delivery_channel_capacity_sat = 1'000'000;
    Sat collector_inbound_capacity_sat = 1'000'000;
    int botmaster_channels = 3;
    std::optional<int> fixed_intermediary_hops;

    // [latency]
    LatencyModel latency = LatencyModel::deterministic(7.0);

    // [command]
    std::string command;
    EncodingScheme::Kind scheme_kind = EncodingScheme::Kind::ascii;
    std::string codebook_path;  // empty -> stock quaternary codebook
    int retry_limit_k = 3;
    double reschedule_delay_s = 600.0;
    int max_session_rounds = 10;

    // [failures]
    FailureSchedule failures;

    // [monitors]
    std::vector<NodeId> monitors;

    // [poison]
    std::vector<PoisonInjection> poison;

    // [reimbursement]
    bool reimburse_enabled = true;
    Sat reimburse_threshold_sat = 2000;
    Sat reserve_per_channel_sat = 1000;
    double reimburse_tick_s = 60.0;
    int reimburse_max_ticks = 100;

    // [detection]
    CorrelationParams detection;

    // [cover]
    int cover_per_payment = 0;
    Sat cover_amount_sat = 100;

    // [node <id>] / [channel <a> <b>] / [payments] — explicit topologies
    struct NodeDecl {
        NodeId id;
        NodeRole role = NodeRole::relay;
        Sat onchain_sat = 0;
        bool advertised = true;
        bool online = true;
    };
    struct ChannelDecl {
        NodeId a, b;  // a funds the channel
        Sat capacity_sat = 0;
        std::optional<Sat> balance_a_sat;  // default: full capacity on a
        bool is_private = false;
    };
    struct PaymentDecl {
        NodeId src, dst;
        Sat amount_sat = 0;
        std::optional<NodeId> first_hop;
    };
    std::vector<NodeDecl> node_decls;
    std::vector<ChannelDecl> channel_decls;
    std::vector<PaymentDecl> payment_decls;

    static Scenario parse(std::istream& in);
    static Scenario parse_file(const std::string& path);

    // Cross-field consistency checks; throws SimError on violation.
    void validate() const;

    EncodingScheme make_scheme() const;
};

}  // namespace lnsim

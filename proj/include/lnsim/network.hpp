#pragma once
/*
 * network.hpp — nodes, bidirectional payment channels and the on-chain
 * ledger.
 *
 * Money is conserved at all times: the sum of on-chain balances, open channel
 * capacities and the miner fee sink is constant in satoshi.  Channel-internal
 * balances are tracked in millisatoshi; the sub-satoshi remainder left when a
 * close settles both sides is credited to the miner sink so conservation
 * stays exact.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnsim/rng.hpp"
#include "lnsim/types.hpp"

namespace lnsim {

// Forwarding fee policy of one channel endpoint: fee for pushing amt through
// is base_fee_msat + floor(amt_msat * proportional_ppm / 1e6).
struct FeePolicy {
    Msat base_fee_msat = 1000;
    std::int64_t proportional_ppm = 1;
};

struct NodeRecord {
    NodeId id;
    PubKey public_key;
    NodeRole role = NodeRole::relay;
    bool publicly_advertised = false;  // private roles are never advertised
    bool forwards_payments = true;     // covert roles refuse third-party forwards
    bool online = true;
    Sat onchain_balance_sat = 0;
};

struct ChannelState {
    ChannelId id = 0;
    NodeId endpoint_a;
    NodeId endpoint_b;
    Sat capacity_sat = 0;
    Msat balance_a_msat = 0;
    Msat balance_b_msat = 0;
    bool is_private = false;
    bool open = true;
    FeePolicy policy_a;  // fees endpoint_a charges to forward out of this channel
    FeePolicy policy_b;

    bool has_endpoint(const NodeId& n) const { return n == endpoint_a || n == endpoint_b; }
    const NodeId& other(const NodeId& n) const { return n == endpoint_a ? endpoint_b : endpoint_a; }
    Msat balance_of(const NodeId& n) const { return n == endpoint_a ? balance_a_msat : balance_b_msat; }
    const FeePolicy& policy_of(const NodeId& n) const { return n == endpoint_a ? policy_a : policy_b; }
};

struct LedgerEvent {
    enum class TxType { funding, closing, sweep };
    std::uint64_t seq = 0;
    TxType type = TxType::funding;
    NodeId node;          // funder / settled endpoint / sweep recipient
    Sat amount_sat = 0;
    Sat fee_sat = 0;
};

const char* to_string(LedgerEvent::TxType t);

// Result of a cooperative close: both sides settled on-chain, sub-satoshi
// residue and the close fee sunk to miners.
struct SettlementRecord {
    ChannelId channel = 0;
    NodeId node_a, node_b;
    NodeId closer;
    Sat settled_a_sat = 0;
    Sat settled_b_sat = 0;
    Sat residue_sat = 0;        // capacity - settled_a - settled_b (0 or 1)
    Msat residue_a_msat = 0;    // sub-satoshi remainder lost by each side
    Msat residue_b_msat = 0;
    Sat close_fee_sat = 0;
};

struct NetworkConfig {
    Sat open_fee_sat = 154;            // on-chain fee per channel funding tx
    Sat close_fee_sat = 0;             // on-chain fee per cooperative close
    Sat min_channel_capacity_sat = 20000;
    int channels_per_server = 3;       // autopilot channel count k
    FeePolicy default_fee_policy;

    // Channel formation cost for n command servers at k channels each.
    Sat formation_cost(int n_servers) const {
        return static_cast<Sat>(n_servers) * channels_per_server * open_fee_sat;
    }
};

class Network {
public:
    explicit Network(NetworkConfig config = {}) : config_(std::move(config)) {}

    const NetworkConfig& config() const { return config_; }

    // ---- nodes ----
    NodeRecord& add_node(const NodeId& id, NodeRole role, Sat onchain_sat,
                         bool publicly_advertised = false, bool online = true);
    bool has_node(const NodeId& id) const { return nodes_.count(id) != 0; }
    NodeRecord& node(const NodeId& id);
    const NodeRecord& node(const NodeId& id) const;
    const std::map<NodeId, NodeRecord>& nodes() const { return nodes_; }
    const NodeId& node_by_pubkey(const PubKey& pk) const;
    static PubKey pubkey_for(const NodeId& id) { return "pk:" + id; }

    // ---- channels ----
    // Funder pays capacity + open fee on-chain; the full capacity starts on
    // the funder's side.
    ChannelId open_channel(const NodeId& funder, const NodeId& peer, Sat capacity_sat,
                           bool is_private = false);

    // Pre-existing network state declared by a scenario: same funding
    // mechanics as open_channel, but the initial balance split is explicit
    // (stands in for liquidity the live network would already have).
    ChannelId add_scenario_channel(const NodeId& funder, const NodeId& peer, Sat capacity_sat,
                                   Sat funder_side_sat, bool is_private = false);

    // Cooperative close; closer pays the close fee from the settled funds.
    SettlementRecord close_channel(ChannelId id, const NodeId& closer);

    // Opens k channels of `capacity` from `node` to k distinct randomly
    // chosen publicly advertised relays.  Peer selection draws only from the
    // provided rng, so a rerun with the same seed picks the same peers.
    std::vector<ChannelId> autopilot_open(const NodeId& node, int k, Sat capacity_sat, Rng& rng);

    bool has_channel(ChannelId id) const { return channels_.count(id) != 0; }
    ChannelState& channel(ChannelId id);
    const ChannelState& channel(ChannelId id) const;
    const std::map<ChannelId, ChannelState>& channels() const { return channels_; }

    // Open channels at a node, ascending channel id.
    std::vector<ChannelId> channels_of(const NodeId& id) const;

    // Topology setup only: move the internal balance split of an open
    // channel (capacity unchanged, so conservation is unaffected).
    void set_channel_split(ChannelId id, Msat balance_a_msat);

    // Move `from`'s entire on-chain balance to `to` in one transaction; the
    // fee goes to miners.  Returns the amount credited to `to` (0 when there
    // was nothing to move, in which case no transaction is recorded).
    Sat sweep_onchain(const NodeId& from, const NodeId& to, Sat fee_sat);

    // ---- ledger ----
    const std::vector<LedgerEvent>& ledger() const { return ledger_; }
    const std::vector<SettlementRecord>& settlements() const { return settlements_; }
    Sat miner_fee_sink_sat() const { return miner_fee_sink_sat_; }

    // Invariant check: on-chain total + open capacities + miner sink.
    Sat conservation_total_sat() const;

private:
    ChannelId create_channel(const NodeId& funder, const NodeId& peer, Sat capacity_sat,
                             Sat funder_side_sat, bool is_private);

    NetworkConfig config_;
    std::map<NodeId, NodeRecord> nodes_;
    std::map<ChannelId, ChannelState> channels_;
    std::map<PubKey, NodeId> by_pubkey_;
    std::vector<LedgerEvent> ledger_;
    std::vector<SettlementRecord> settlements_;
    Sat miner_fee_sink_sat_ = 0;
    ChannelId next_channel_id_ = 1;
};

}  // namespace lnsim

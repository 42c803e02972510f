#include "lnsim/network.hpp"

#include <algorithm>
#include <cstdio>

namespace lnsim {

const char* to_string(NodeRole role) {
    switch (role) {
        case NodeRole::botmaster: return "botmaster";
        case NodeRole::cnc_server: return "cnc_server";
        case NodeRole::collector: return "collector";
        case NodeRole::relay: return "relay";
    }
    return "?";
}

NodeRole node_role_from_string(const std::string& s) {
    if (s == "botmaster") return NodeRole::botmaster;
    if (s == "cnc_server") return NodeRole::cnc_server;
    if (s == "collector") return NodeRole::collector;
    if (s == "relay") return NodeRole::relay;
    throw SimError("unknown node role: " + s);
}

const char* to_string(LedgerEvent::TxType t) {
    switch (t) {
        case LedgerEvent::TxType::funding: return "funding";
        case LedgerEvent::TxType::closing: return "closing";
        case LedgerEvent::TxType::sweep: return "sweep";
    }
    return "?";
}

std::string btc_string(Sat sat) {
    const bool neg = sat < 0;
    const Sat abs = neg ? -sat : sat;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%s%lld.%08lld", neg ? "-" : "",
                  static_cast<long long>(abs / 100'000'000),
                  static_cast<long long>(abs % 100'000'000));
    return buf;
}

// ==================== nodes ====================

NodeRecord& Network::add_node(const NodeId& id, NodeRole role, Sat onchain_sat,
                              bool publicly_advertised, bool online) {
    if (id.empty()) throw SimError("add_node: empty node id");
    if (nodes_.count(id)) throw SimError("add_node: duplicate node " + id);
    if (onchain_sat < 0) throw SimError("add_node: negative on-chain balance");
    NodeRecord rec;
    rec.id = id;
    rec.public_key = pubkey_for(id);
    rec.role = role;
    // the operator-controlled roles never gossip their existence, and they
    // never forward anyone else's payments
    rec.publicly_advertised = (role == NodeRole::relay) && publicly_advertised;
    rec.forwards_payments = (role == NodeRole::relay);
    rec.online = online;
    rec.onchain_balance_sat = onchain_sat;
    by_pubkey_[rec.public_key] = id;
    return nodes_.emplace(id, std::move(rec)).first->second;
}

NodeRecord& Network::node(const NodeId& id) {
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) throw SimError("unknown node: " + id);
    return it->second;
}

const NodeRecord& Network::node(const NodeId& id) const {
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) throw SimError("unknown node: " + id);
    return it->second;
}

const NodeId& Network::node_by_pubkey(const PubKey& pk) const {
    const auto it = by_pubkey_.find(pk);
    if (it == by_pubkey_.end()) throw SimError("unknown public key: " + pk);
    return it->second;
}

// ==================== channels ====================

ChannelId Network::create_channel(const NodeId& funder, const NodeId& peer, Sat capacity_sat,
                                  Sat funder_side_sat, bool is_private) {
    NodeRecord& f = node(funder);
    NodeRecord& p = node(peer);
    if (funder == peer) throw SimError("open_channel: funder == peer");
    if (capacity_sat < config_.min_channel_capacity_sat)
        throw SimError("open_channel: capacity below minimum of " +
                       std::to_string(config_.min_channel_capacity_sat) + " sat");
    if (funder_side_sat < 0 || funder_side_sat > capacity_sat)
        throw SimError("open_channel: funder-side balance outside capacity");
    const Sat cost = capacity_sat + config_.open_fee_sat;
    if (f.onchain_balance_sat < cost)
        throw SimError("open_channel: " + funder + " cannot fund " + std::to_string(cost) +
                       " sat on-chain");
    (void)p;

    f.onchain_balance_sat -= cost;
    miner_fee_sink_sat_ += config_.open_fee_sat;

    ChannelState ch;
    ch.id = next_channel_id_++;
    ch.endpoint_a = funder;
    ch.endpoint_b = peer;
    ch.capacity_sat = capacity_sat;
    ch.balance_a_msat = msat_from_sat(funder_side_sat);
    ch.balance_b_msat = msat_from_sat(capacity_sat - funder_side_sat);
    ch.is_private = is_private;
    ch.policy_a = config_.default_fee_policy;
    ch.policy_b = config_.default_fee_policy;
    channels_.emplace(ch.id, ch);

    LedgerEvent ev;
    ev.seq = ledger_.size() + 1;
    ev.type = LedgerEvent::TxType::funding;
    ev.node = funder;
    ev.amount_sat = capacity_sat;
    ev.fee_sat = config_.open_fee_sat;
    ledger_.push_back(ev);
    return ch.id;
}

ChannelId Network::open_channel(const NodeId& funder, const NodeId& peer, Sat capacity_sat,
                                bool is_private) {
    return create_channel(funder, peer, capacity_sat, capacity_sat, is_private);
}

ChannelId Network::add_scenario_channel(const NodeId& funder, const NodeId& peer, Sat capacity_sat,
                                        Sat funder_side_sat, bool is_private) {
    return create_channel(funder, peer, capacity_sat, funder_side_sat, is_private);
}

SettlementRecord Network::close_channel(ChannelId id, const NodeId& closer) {
    ChannelState& ch = channel(id);
    if (!ch.open) throw SimError("close_channel: channel already closed");
    if (!ch.has_endpoint(closer)) throw SimError("close_channel: " + closer + " not an endpoint");

    SettlementRecord rec;
    rec.channel = id;
    rec.node_a = ch.endpoint_a;
    rec.node_b = ch.endpoint_b;
    rec.closer = closer;
    rec.settled_a_sat = sat_floor(ch.balance_a_msat);
    rec.settled_b_sat = sat_floor(ch.balance_b_msat);
    rec.residue_sat = ch.capacity_sat - rec.settled_a_sat - rec.settled_b_sat;
    rec.residue_a_msat = ch.balance_a_msat - msat_from_sat(rec.settled_a_sat);
    rec.residue_b_msat = ch.balance_b_msat - msat_from_sat(rec.settled_b_sat);
    rec.close_fee_sat = config_.close_fee_sat;

    // Close fee comes out of the closer's settled funds.
    Sat& closer_settled = (closer == ch.endpoint_a) ? rec.settled_a_sat : rec.settled_b_sat;
    if (closer_settled < rec.close_fee_sat)
        throw SimError("close_channel: closer cannot cover the close fee");
    closer_settled -= rec.close_fee_sat;

    node(ch.endpoint_a).onchain_balance_sat += rec.settled_a_sat;
    node(ch.endpoint_b).onchain_balance_sat += rec.settled_b_sat;
    miner_fee_sink_sat_ += rec.close_fee_sat + rec.residue_sat;
    ch.open = false;
    ch.balance_a_msat = 0;
    ch.balance_b_msat = 0;

    for (const NodeId* n : {&rec.node_a, &rec.node_b}) {
        LedgerEvent ev;
        ev.seq = ledger_.size() + 1;
        ev.type = LedgerEvent::TxType::closing;
        ev.node = *n;
        ev.amount_sat = (*n == rec.node_a) ? rec.settled_a_sat : rec.settled_b_sat;
        ev.fee_sat = (*n == closer) ? rec.close_fee_sat + rec.residue_sat : 0;
        ledger_.push_back(ev);
    }
    settlements_.push_back(rec);
    return rec;
}

std::vector<ChannelId> Network::autopilot_open(const NodeId& id, int k, Sat capacity_sat,
                                               Rng& rng) {
    if (k <= 0) throw SimError("autopilot_open: k must be positive");
    std::vector<NodeId> publics;
    for (const auto& [nid, rec] : nodes_) {
        if (rec.publicly_advertised && rec.role == NodeRole::relay && nid != id)
            publics.push_back(nid);
    }
    if (publics.size() < static_cast<std::size_t>(k))
        throw SimError("autopilot_open: need " + std::to_string(k) +
                       " advertised relays, have " + std::to_string(publics.size()));
    // publics is sorted (map order), so index sampling is reproducible
    std::vector<ChannelId> out;
    for (std::size_t pick : rng.sample_indices(publics.size(), static_cast<std::size_t>(k)))
        out.push_back(open_channel(id, publics[pick], capacity_sat, /*is_private=*/true));
    return out;
}

ChannelState& Network::channel(ChannelId id) {
    const auto it = channels_.find(id);
    if (it == channels_.end()) throw SimError("unknown channel: " + std::to_string(id));
    return it->second;
}

const ChannelState& Network::channel(ChannelId id) const {
    const auto it = channels_.find(id);
    if (it == channels_.end()) throw SimError("unknown channel: " + std::to_string(id));
    return it->second;
}

std::vector<ChannelId> Network::channels_of(const NodeId& id) const {
    std::vector<ChannelId> out;
    for (const auto& [cid, ch] : channels_) {
        if (ch.open && ch.has_endpoint(id)) out.push_back(cid);
    }
    return out;  // map order == ascending id
}

Sat Network::sweep_onchain(const NodeId& from, const NodeId& to, Sat fee_sat) {
    NodeRecord& src = node(from);
    NodeRecord& dst = node(to);
    if (fee_sat < 0) throw SimError("sweep: negative fee");
    if (src.onchain_balance_sat == 0) return 0;
    if (src.onchain_balance_sat < fee_sat)
        throw SimError("sweep: balance cannot cover the transaction fee");
    const Sat moved = src.onchain_balance_sat - fee_sat;
    src.onchain_balance_sat = 0;
    dst.onchain_balance_sat += moved;
    miner_fee_sink_sat_ += fee_sat;

    LedgerEvent ev;
    ev.seq = ledger_.size() + 1;
    ev.type = LedgerEvent::TxType::sweep;
    ev.node = to;
    ev.amount_sat = moved;
    ev.fee_sat = fee_sat;
    ledger_.push_back(ev);
    return moved;
}

void Network::set_channel_split(ChannelId id, Msat balance_a_msat) {
    ChannelState& ch = channel(id);
    if (!ch.open) throw SimError("set_channel_split: channel closed");
    const Msat cap = msat_from_sat(ch.capacity_sat);
    if (balance_a_msat < 0 || balance_a_msat > cap)
        throw SimError("set_channel_split: balance outside capacity");
    ch.balance_a_msat = balance_a_msat;
    ch.balance_b_msat = cap - balance_a_msat;
}

Sat Network::conservation_total_sat() const {
    Sat total = miner_fee_sink_sat_;
    for (const auto& [id, rec] : nodes_) total += rec.onchain_balance_sat;
    for (const auto& [id, ch] : channels_) {
        if (ch.open) total += ch.capacity_sat;
    }
    return total;
}

}  // namespace lnsim

#include "lnsim/payment.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lnsim {

// ==================== HtlcLock ====================

HtlcLock HtlcLock::generate(Rng& rng) {
    HtlcLock lock;
    for (std::size_t i = 0; i < lock.preimage.size(); i += 8) {
        const std::uint64_t word = rng.next_u64();
        for (std::size_t b = 0; b < 8; ++b)
            lock.preimage[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    }
    SHA256(lock.preimage.data(), lock.preimage.size(), lock.payment_hash.data());
    return lock;
}

bool HtlcLock::verify() const {
    std::array<std::uint8_t, 32> digest{};
    SHA256(preimage.data(), preimage.size(), digest.data());
    return digest == payment_hash;
}

// ==================== LatencyModel ====================

LatencyModel LatencyModel::deterministic(double seconds) {
    if (seconds < 0) throw SimError("latency: negative constant");
    LatencyModel m;
    m.kind = Kind::deterministic;
    m.value_s = seconds;
    return m;
}

LatencyModel LatencyModel::uniform(double low_s, double high_s) {
    if (low_s < 0 || high_s < low_s) throw SimError("latency: invalid uniform range");
    LatencyModel m;
    m.kind = Kind::uniform;
    m.low_s = low_s;
    m.high_s = high_s;
    return m;
}

LatencyModel LatencyModel::empirical(std::vector<double> samples) {
    if (samples.empty()) throw SimError("latency: empty sample set");
    for (double s : samples)
        if (s < 0) throw SimError("latency: negative sample");
    LatencyModel m;
    m.kind = Kind::empirical;
    m.samples_s = std::move(samples);
    return m;
}

LatencyModel LatencyModel::empirical_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("latency: cannot open " + path);
    std::vector<double> samples;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double v = 0;
        while (ls >> v) samples.push_back(v);
    }
    return empirical(std::move(samples));
}

double LatencyModel::sample(Rng& rng) const {
    switch (kind) {
        case Kind::deterministic:
            return value_s;
        case Kind::uniform:
            return low_s + (high_s - low_s) * rng.next_unit();
        case Kind::empirical:
            return samples_s[rng.next_below(samples_s.size())];
    }
    throw SimError("latency: bad model kind");
}

// ==================== PaymentEngine ====================

const char* to_string(PaymentFailure f) {
    switch (f) {
        case PaymentFailure::none: return "none";
        case PaymentFailure::no_route: return "no_route";
        case PaymentFailure::insufficient_capacity: return "insufficient_capacity";
        case PaymentFailure::destination_offline: return "destination_offline";
        case PaymentFailure::injected_failure: return "injected_failure";
    }
    return "?";
}

void PaymentEngine::advance_clock(TimeNs delta_ns) {
    if (delta_ns < 0) throw SimError("clock cannot run backwards");
    clock_ns_ += delta_ns;
}

const std::vector<ForwardingEvent>& PaymentEngine::forwarding_history(const NodeId& node) const {
    static const std::vector<ForwardingEvent> none;
    const auto it = history_.find(node);
    return it == history_.end() ? none : it->second;
}

namespace {

struct AppliedHop {
    ChannelState* channel;
    bool from_is_a;
    Msat amount;
};

void roll_back(std::vector<AppliedHop>& applied) {
    for (auto it = applied.rbegin(); it != applied.rend(); ++it) {
        if (it->from_is_a) {
            it->channel->balance_a_msat += it->amount;
            it->channel->balance_b_msat -= it->amount;
        } else {
            it->channel->balance_b_msat += it->amount;
            it->channel->balance_a_msat -= it->amount;
        }
    }
    applied.clear();
}

}  // namespace

PaymentResult PaymentEngine::send_keysend(const NodeId& src, const PubKey& dest_pubkey,
                                          Sat amount_sat, const RouteConstraints& constraints) {
    const NodeId& dst = net_.node_by_pubkey(dest_pubkey);
    if (!net_.node(src).online) throw SimError("send_keysend: source " + src + " is offline");
    if (amount_sat <= 0) throw SimError("send_keysend: non-positive amount");

    PaymentResult res;
    res.amount_sat = amount_sat;

    PaymentLogEntry log;
    log.src = src;
    log.dst = dst;
    log.amount_sat = amount_sat;

    // Local-knowledge failures resolve instantly; the clock still ticks so
    // event ordering stays strict.
    if (!net_.node(dst).online) {
        advance_clock(1);
        res.failure_reason = PaymentFailure::destination_offline;
        res.settled_at_ns = clock_ns_;
        log.failure = res.failure_reason;
        log.settled_at_ns = res.settled_at_ns;
        payment_log_.push_back(std::move(log));
        return res;
    }

    const RouteSearchResult search = find_route(net_, src, dst, amount_sat, constraints);
    if (!search.found) {
        advance_clock(1);
        res.failure_reason = search.failure == RouteFailure::no_route
                                 ? PaymentFailure::no_route
                                 : PaymentFailure::insufficient_capacity;
        res.settled_at_ns = clock_ns_;
        log.failure = res.failure_reason;
        log.settled_at_ns = res.settled_at_ns;
        payment_log_.push_back(std::move(log));
        return res;
    }

    const std::uint64_t seq = ++payment_seq_;
    const std::size_t n_edges = search.route.hops.size();

    // The HTLC attempt goes out on the wire, so it consumes latency whether
    // it settles or dies mid-route.  At least 1 ns per edge keeps per-node
    // event timestamps strictly increasing even for degenerate models.
    const double latency_s = latency_.sample(rng_);
    const TimeNs start_ns = clock_ns_;
    const TimeNs flight_ns =
        std::max<TimeNs>(static_cast<TimeNs>(std::llround(latency_s * kNsPerSec)),
                         static_cast<TimeNs>(n_edges));

    const bool doomed = failures_.fail_payments.count(seq) != 0;
    const std::size_t doomed_edge = doomed ? static_cast<std::size_t>(seq % n_edges) : 0;

    HtlcLock lock = HtlcLock::generate(rng_);

    std::vector<AppliedHop> applied;
    applied.reserve(n_edges);
    bool failed = false;
    for (std::size_t i = 0; i < n_edges && !failed; ++i) {
        const RouteHop& hop = search.route.hops[i];
        if (doomed && i == doomed_edge) {
            failed = true;
            break;
        }
        if (failures_.hop_failure_prob > 0 && rng_.next_unit() < failures_.hop_failure_prob) {
            failed = true;
            break;
        }
        ChannelState& ch = net_.channel(hop.channel);
        const bool from_is_a = (hop.from == ch.endpoint_a);
        Msat& from_balance = from_is_a ? ch.balance_a_msat : ch.balance_b_msat;
        Msat& to_balance = from_is_a ? ch.balance_b_msat : ch.balance_a_msat;
        if (from_balance < hop.amount_msat) {
            // Should not happen on a single-threaded engine (the route was
            // verified feasible), but keep the rollback path honest.
            failed = true;
            res.failure_reason = PaymentFailure::insufficient_capacity;
            break;
        }
        from_balance -= hop.amount_msat;
        to_balance += hop.amount_msat;
        applied.push_back({&ch, from_is_a, hop.amount_msat});
    }

    if (failed) {
        roll_back(applied);
        advance_clock(flight_ns);
        if (res.failure_reason == PaymentFailure::none)
            res.failure_reason = PaymentFailure::injected_failure;
        res.latency_s = latency_s;
        res.settled_at_ns = clock_ns_;
        log.seq = seq;
        log.failure = res.failure_reason;
        log.latency_s = latency_s;
        log.settled_at_ns = res.settled_at_ns;
        payment_log_.push_back(std::move(log));
        return res;
    }

    if (!lock.verify()) {
        roll_back(applied);
        throw SimError("send_keysend: hash lock verification failed");
    }

    // Success: record what each forwarding node saw.  Edge i completes at
    // start + flight * (i+1)/n_edges; the destination receives at full flight.
    for (std::size_t i = 0; i + 1 < n_edges; ++i) {
        const RouteHop& in_hop = search.route.hops[i];
        const RouteHop& out_hop = search.route.hops[i + 1];
        ForwardingEvent ev;
        ev.timestamp_ns = start_ns + flight_ns * static_cast<TimeNs>(i + 1) /
                                         static_cast<TimeNs>(n_edges);
        ev.chan_id_in = in_hop.channel;
        ev.chan_id_out = out_hop.channel;
        ev.amt_in_sat = sat_floor(in_hop.amount_msat);
        ev.amt_out_sat = sat_floor(out_hop.amount_msat);
        ev.fee_sat = ev.amt_in_sat - ev.amt_out_sat;
        history_[in_hop.to].push_back(ev);
    }

    advance_clock(flight_ns);
    res.success = true;
    res.route_length_hops = search.route.intermediary_count();
    res.total_fee_msat = search.total_fee_msat;
    res.latency_s = latency_s;
    res.settled_at_ns = clock_ns_;
    res.route = search.route;
    res.hop_fees_msat = search.hop_fees_msat;

    log.seq = seq;
    log.success = true;
    log.total_fee_msat = search.total_fee_msat;
    log.latency_s = latency_s;
    log.settled_at_ns = clock_ns_;
    for (std::size_t i = 0; i + 1 < n_edges; ++i)
        log.intermediary_fees.emplace_back(search.route.hops[i].to, search.hop_fees_msat[i]);
    payment_log_.push_back(std::move(log));

    if (receive_hook_) receive_hook_(dst, amount_sat, clock_ns_);
    return res;
}

}  // namespace lnsim

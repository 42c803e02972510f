#pragma once
/*
 * payment.hpp — multi-hop keysend payments over the channel network.
 *
 * Settlement is atomic: either every hop's balances move, or none do.  Each
 * successful forward leaves exactly one record in the forwarding node's local
 * history, carrying only what that node can see (channels in/out, amounts,
 * fee, timestamp) — never the payment's source, destination or hop index.
 *
 * One engine instance is one simulation: a single virtual clock, a single
 * seeded random source, strictly sequential payments.
 */

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "lnsim/network.hpp"
#include "lnsim/rng.hpp"
#include "lnsim/routing.hpp"
#include "lnsim/types.hpp"

namespace lnsim {

// Hash lock carried by an in-flight payment; settlement requires the
// preimage to match (keysend ships the preimage with the payment).
struct HtlcLock {
    std::array<std::uint8_t, 32> preimage{};
    std::array<std::uint8_t, 32> payment_hash{};

    static HtlcLock generate(Rng& rng);
    bool verify() const;  // payment_hash == sha256(preimage)
};

// What a forwarding node's local database records per forwarded payment.
struct ForwardingEvent {
    TimeNs timestamp_ns = 0;
    ChannelId chan_id_in = 0;
    ChannelId chan_id_out = 0;
    Sat amt_in_sat = 0;
    Sat amt_out_sat = 0;
    Sat fee_sat = 0;
};

enum class PaymentFailure {
    none,
    no_route,
    insufficient_capacity,
    destination_offline,
    injected_failure,
};

const char* to_string(PaymentFailure f);

struct PaymentResult {
    bool success = false;
    PaymentFailure failure_reason = PaymentFailure::none;
    Sat amount_sat = 0;
    int route_length_hops = 0;          // forwarding nodes on the route
    Msat total_fee_msat = 0;
    double latency_s = 0.0;
    TimeNs settled_at_ns = 0;           // clock when the attempt resolved
    Route route;
    std::vector<Msat> hop_fees_msat;
};

// Per-payment latency: deterministic constant, uniform range, or draws from
// an empirical sample set.
struct LatencyModel {
    enum class Kind { deterministic, uniform, empirical };

    Kind kind = Kind::deterministic;
    double value_s = 7.0;           // deterministic
    double low_s = 4.0;             // uniform
    double high_s = 10.0;           // uniform, exclusive
    std::vector<double> samples_s;  // empirical

    static LatencyModel deterministic(double seconds);
    static LatencyModel uniform(double low_s, double high_s);   // draws in [low, high)
    static LatencyModel empirical(std::vector<double> samples);
    static LatencyModel empirical_from_file(const std::string& path);

    double sample(Rng& rng) const;
};

// Scenario-scripted failures for retry-path testing: an independent per-hop
// failure chance plus an explicit list of doomed payment sequence numbers.
struct FailureSchedule {
    double hop_failure_prob = 0.0;
    std::set<std::uint64_t> fail_payments;  // 1-based global payment sequence
};

// Engine-side record of one payment attempt, kept for reporting and
// conservation audits (who paid which forwarder how much).
struct PaymentLogEntry {
    std::uint64_t seq = 0;
    NodeId src;
    NodeId dst;
    Sat amount_sat = 0;
    bool success = false;
    PaymentFailure failure = PaymentFailure::none;
    Msat total_fee_msat = 0;
    double latency_s = 0.0;
    TimeNs settled_at_ns = 0;
    std::vector<std::pair<NodeId, Msat>> intermediary_fees;  // route order
};

class PaymentEngine {
public:
    PaymentEngine(Network& net, Rng& rng) : net_(net), rng_(rng) {}

    // Sends `amount_sat` from src to the node owning dest_pubkey.  On failure
    // no balance anywhere changes.  The virtual clock always advances.
    PaymentResult send_keysend(const NodeId& src, const PubKey& dest_pubkey, Sat amount_sat,
                               const RouteConstraints& constraints = {});

    // Local forwarding database of one node (empty for nodes that only ever
    // originated or terminally received).
    const std::vector<ForwardingEvent>& forwarding_history(const NodeId& node) const;
    const std::map<NodeId, std::vector<ForwardingEvent>>& all_forwarding_histories() const {
        return history_;
    }

    // Every attempt ever made through this engine, in order.
    const std::vector<PaymentLogEntry>& payment_log() const { return payment_log_; }

    // Invoked after every *successful* settlement at the destination.
    using ReceiveHook = std::function<void(const NodeId& dest, Sat amount_sat, TimeNs at)>;
    void set_receive_hook(ReceiveHook hook) { receive_hook_ = std::move(hook); }

    void set_latency_model(LatencyModel m) { latency_ = std::move(m); }
    const LatencyModel& latency_model() const { return latency_; }
    void set_failure_schedule(FailureSchedule f) { failures_ = std::move(f); }

    TimeNs now_ns() const { return clock_ns_; }
    void advance_clock(TimeNs delta_ns);
    std::uint64_t payments_attempted() const { return payment_seq_; }

    Network& network() { return net_; }
    Rng& rng() { return rng_; }

private:
    Network& net_;
    Rng& rng_;
    LatencyModel latency_;
    FailureSchedule failures_;
    TimeNs clock_ns_ = 0;
    std::uint64_t payment_seq_ = 0;
    std::map<NodeId, std::vector<ForwardingEvent>> history_;
    std::vector<PaymentLogEntry> payment_log_;
    ReceiveHook receive_hook_;
};

}  // namespace lnsim

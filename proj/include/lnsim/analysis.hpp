#pragma once
/*
 * analysis.hpp — what a set of compromised nodes can infer, and how a third
 * party can poison the channel.
 *
 * Timing correlation: given the receipts observed at a compromised command
 * server and the local forwarding databases of compromised relays, match
 * each receipt (amount a at time t) against forwarding events with
 * amt_out in [a, a + fee_tolerance] and timestamp in [t - window, t]; the
 * upstream peer on the event's inbound channel becomes a candidate
 * predecessor.  Candidates are scored by the fraction of receipts they
 * match.  Monitors one hop from the origin expose it; anything further away
 * blames an intermediate relay.
 *
 * correlate() is the parallel kernel (OpenMP over receipts, events
 * pre-sorted per monitor); correlate_reference() is the plain quadratic
 * scan kept as the testing oracle.  Both produce identical findings.
 */

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "lnsim/payment.hpp"
#include "lnsim/protocol.hpp"
#include "lnsim/types.hpp"

namespace lnsim {

// Channel id -> endpoints, the "getchaninfo" lookup a monitor performs.
struct ChannelDirectory {
    std::map<ChannelId, std::pair<NodeId, NodeId>> endpoints;

    static ChannelDirectory from_network(const Network& net);

    // The monitor itself is the endpoint common to the in and out channels;
    // the upstream peer is the inbound channel's other endpoint.
    std::optional<NodeId> upstream_peer(ChannelId chan_in, ChannelId chan_out) const;
};

struct CorrelationParams {
    double window_s = 10.0;
    Sat fee_tolerance_sat = 8;  // default route-length bound x 1 sat
};

struct MatchedPair {
    std::size_t receipt_index = 0;
    NodeId monitor;
    std::size_t event_index = 0;  // index into that monitor's log
};

struct CorrelationFinding {
    NodeId candidate;                  // suspected predecessor of the stream
    std::size_t receipts_matched = 0;  // distinct receipts this candidate explains
    double score = 0.0;                // receipts_matched / total receipts
    std::vector<MatchedPair> matches;  // every contributing (receipt, event) pair
};

using MonitorLogs = std::map<NodeId, std::vector<ForwardingEvent>>;

// Findings sorted by score descending, candidate id ascending.  Empty input
// (no receipts or no events) yields no findings.
std::vector<CorrelationFinding> correlate(const std::vector<Receipt>& receipts,
                                          const MonitorLogs& monitors,
                                          const ChannelDirectory& dir,
                                          const CorrelationParams& params = {});

// Brute-force serial implementation with the same contract; the oracle the
// parallel kernel is tested against.
std::vector<CorrelationFinding> correlate_reference(const std::vector<Receipt>& receipts,
                                                    const MonitorLogs& monitors,
                                                    const ChannelDirectory& dir,
                                                    const CorrelationParams& params = {});

// ==================== detection metrics ====================

struct DetectionMetrics {
    std::optional<int> rank_of_truth;  // 1-based position in the findings
    double score_margin = 0.0;         // truth score minus best other score
};

DetectionMetrics detection_metrics(const NodeId& truth,
                                   const std::vector<CorrelationFinding>& findings);

// ==================== channel poisoning ====================

// A third party that knows a command server's pubkey can inject payments
// into its amount stream.
struct PoisonInjection {
    enum class Trigger { immediately, when_receiving };

    NodeId attacker;
    PubKey target_pubkey;
    Sat amount_sat = 0;
    Trigger trigger = Trigger::immediately;

    bool fired = false;
    PaymentResult result;
};

// Fire the injection if its trigger condition holds (when_receiving waits
// until the target's decoder is mid-frame).  Returns true when the payment
// was sent.
bool maybe_fire_poison(PoisonInjection& injection, PaymentEngine& engine,
                       bool target_is_receiving);

}  // namespace lnsim

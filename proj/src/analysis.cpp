#include "lnsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lnsim {

// ==================== ChannelDirectory ====================

ChannelDirectory ChannelDirectory::from_network(const Network& net) {
    ChannelDirectory dir;
    for (const auto& [cid, ch] : net.channels())
        dir.endpoints.emplace(cid, std::make_pair(ch.endpoint_a, ch.endpoint_b));
    return dir;
}

std::optional<NodeId> ChannelDirectory::upstream_peer(ChannelId chan_in, ChannelId chan_out) const {
    const auto in = endpoints.find(chan_in);
    const auto out = endpoints.find(chan_out);
    if (in == endpoints.end() || out == endpoints.end()) return std::nullopt;
    const auto& [ia, ib] = in->second;
    const auto& [oa, ob] = out->second;
    // monitor = endpoint shared by both channels; upstream = the other side
    // of the inbound channel
    if (ia == oa || ia == ob) return ib;
    if (ib == oa || ib == ob) return ia;
    return std::nullopt;
}

// ==================== correlation ====================

namespace {

struct MatchPredicate {
    TimeNs window_ns;
    Sat tolerance;

    bool matches(const Receipt& r, const ForwardingEvent& ev) const {
        if (ev.amt_out_sat < r.amount_sat || ev.amt_out_sat > r.amount_sat + tolerance)
            return false;
        return ev.timestamp_ns >= r.timestamp_ns - window_ns && ev.timestamp_ns <= r.timestamp_ns;
    }
};

std::vector<CorrelationFinding> assemble_findings(
    std::map<NodeId, std::set<std::size_t>>&& receipt_sets,
    std::map<NodeId, std::vector<MatchedPair>>&& pair_lists, std::size_t total_receipts) {
    std::vector<CorrelationFinding> findings;
    for (auto& [candidate, receipt_set] : receipt_sets) {
        CorrelationFinding f;
        f.candidate = candidate;
        f.receipts_matched = receipt_set.size();
        f.score = total_receipts == 0
                      ? 0.0
                      : static_cast<double>(receipt_set.size()) / static_cast<double>(total_receipts);
        f.matches = std::move(pair_lists[candidate]);
        std::sort(f.matches.begin(), f.matches.end(), [](const MatchedPair& a, const MatchedPair& b) {
            return std::tie(a.receipt_index, a.monitor, a.event_index) <
                   std::tie(b.receipt_index, b.monitor, b.event_index);
        });
        findings.push_back(std::move(f));
    }
    std::sort(findings.begin(), findings.end(),
              [](const CorrelationFinding& a, const CorrelationFinding& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.candidate < b.candidate;
              });
    return findings;
}

}  // namespace

std::vector<CorrelationFinding> correlate_reference(const std::vector<Receipt>& receipts,
                                                    const MonitorLogs& monitors,
                                                    const ChannelDirectory& dir,
                                                    const CorrelationParams& params) {
    const MatchPredicate pred{static_cast<TimeNs>(std::llround(params.window_s * kNsPerSec)),
                              params.fee_tolerance_sat};
    std::map<NodeId, std::set<std::size_t>> receipt_sets;
    std::map<NodeId, std::vector<MatchedPair>> pair_lists;
    for (std::size_t ri = 0; ri < receipts.size(); ++ri) {
        for (const auto& [monitor, events] : monitors) {
            for (std::size_t ei = 0; ei < events.size(); ++ei) {
                if (!pred.matches(receipts[ri], events[ei])) continue;
                const auto upstream = dir.upstream_peer(events[ei].chan_id_in, events[ei].chan_id_out);
                if (!upstream) continue;
                receipt_sets[*upstream].insert(ri);
                pair_lists[*upstream].push_back({ri, monitor, ei});
            }
        }
    }
    return assemble_findings(std::move(receipt_sets), std::move(pair_lists), receipts.size());
}

std::vector<CorrelationFinding> correlate(const std::vector<Receipt>& receipts,
                                          const MonitorLogs& monitors, const ChannelDirectory& dir,
                                          const CorrelationParams& params) {
    const MatchPredicate pred{static_cast<TimeNs>(std::llround(params.window_s * kNsPerSec)),
                              params.fee_tolerance_sat};

    // Flatten and time-sort each monitor's log once; every receipt then only
    // scans its [t - window, t] slice instead of the whole history.
    struct IndexedEvent {
        const ForwardingEvent* ev;
        std::size_t original_index;
    };
    struct MonitorView {
        const NodeId* monitor;
        std::vector<IndexedEvent> by_time;
    };
    std::vector<MonitorView> views;
    views.reserve(monitors.size());
    for (const auto& [monitor, events] : monitors) {
        MonitorView v;
        v.monitor = &monitor;
        v.by_time.reserve(events.size());
        for (std::size_t ei = 0; ei < events.size(); ++ei) v.by_time.push_back({&events[ei], ei});
        std::stable_sort(v.by_time.begin(), v.by_time.end(),
                         [](const IndexedEvent& a, const IndexedEvent& b) {
                             return a.ev->timestamp_ns < b.ev->timestamp_ns;
                         });
        views.push_back(std::move(v));
    }

    const std::int64_t n = static_cast<std::int64_t>(receipts.size());
    std::vector<std::vector<MatchedPair>> per_receipt_pairs(receipts.size());
    std::vector<std::vector<NodeId>> per_receipt_candidates(receipts.size());

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (std::int64_t ri = 0; ri < n; ++ri) {
        const Receipt& r = receipts[static_cast<std::size_t>(ri)];
        for (const MonitorView& view : views) {
            // first event with timestamp >= t - window
            const TimeNs lo = r.timestamp_ns - pred.window_ns;
            auto it = std::lower_bound(view.by_time.begin(), view.by_time.end(), lo,
                                       [](const IndexedEvent& e, TimeNs t) {
                                           return e.ev->timestamp_ns < t;
                                       });
            for (; it != view.by_time.end() && it->ev->timestamp_ns <= r.timestamp_ns; ++it) {
                if (!pred.matches(r, *it->ev)) continue;
                const auto upstream = dir.upstream_peer(it->ev->chan_id_in, it->ev->chan_id_out);
                if (!upstream) continue;
                per_receipt_pairs[static_cast<std::size_t>(ri)].push_back(
                    {static_cast<std::size_t>(ri), *view.monitor, it->original_index});
                per_receipt_candidates[static_cast<std::size_t>(ri)].push_back(*upstream);
            }
        }
    }

    // Deterministic merge: receipt order is fixed, so the aggregate is
    // independent of the thread count.
    std::map<NodeId, std::set<std::size_t>> receipt_sets;
    std::map<NodeId, std::vector<MatchedPair>> pair_lists;
    for (std::size_t ri = 0; ri < receipts.size(); ++ri) {
        for (std::size_t k = 0; k < per_receipt_pairs[ri].size(); ++k) {
            const NodeId& candidate = per_receipt_candidates[ri][k];
            receipt_sets[candidate].insert(ri);
            pair_lists[candidate].push_back(per_receipt_pairs[ri][k]);
        }
    }
    return assemble_findings(std::move(receipt_sets), std::move(pair_lists), receipts.size());
}

// ==================== detection metrics ====================

DetectionMetrics detection_metrics(const NodeId& truth,
                                   const std::vector<CorrelationFinding>& findings) {
    DetectionMetrics m;
    double truth_score = 0.0;
    double best_other = 0.0;
    for (std::size_t i = 0; i < findings.size(); ++i) {
        if (findings[i].candidate == truth) {
            m.rank_of_truth = static_cast<int>(i) + 1;
            truth_score = findings[i].score;
        } else {
            best_other = std::max(best_other, findings[i].score);
        }
    }
    if (m.rank_of_truth) m.score_margin = truth_score - best_other;
    return m;
}

// ==================== poisoning ====================

bool maybe_fire_poison(PoisonInjection& injection, PaymentEngine& engine,
                       bool target_is_receiving) {
    if (injection.fired) return false;
    if (injection.trigger == PoisonInjection::Trigger::when_receiving && !target_is_receiving)
        return false;
    injection.result =
        engine.send_keysend(injection.attacker, injection.target_pubkey, injection.amount_sat);
    injection.fired = true;
    return true;
}

}  // namespace lnsim

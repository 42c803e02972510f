#include "lnsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace lnsim {

const char* to_string(SessionState s) {
    switch (s) {
        case SessionState::pending: return "pending";
        case SessionState::in_progress: return "in_progress";
        case SessionState::completed: return "completed";
        case SessionState::rescheduled: return "rescheduled";
    }
    return "?";
}

// ==================== receiver state machine ====================

std::optional<DecodedEntry> cnc_on_payment(CommandTranscript& t, Sat amount_sat, TimeNs at,
                                           const EncodingScheme& scheme) {
    t.receipts.push_back({at, amount_sat});
    t.received_total_sat += amount_sat;
    t.pending_remit_sat += amount_sat;

    using S = CommandTranscript::DecoderState;
    if (t.state == S::idle) {
        if (amount_sat == kFrameStart) {
            t.state = S::receiving;
            t.buffer.clear();
        } else {
            ++t.stray_payments;  // logged, otherwise ignored
        }
        return std::nullopt;
    }

    // receiving
    if (amount_sat == kFrameStart) {
        // A fresh start sentinel mid-frame means the sender restarted the
        // command (reschedule path); drop the stale partial frame.
        t.buffer.clear();
        return std::nullopt;
    }
    if (amount_sat == kFrameEnd) {
        DecodeResult r = decode(t.buffer, scheme);
        DecodedEntry entry;
        entry.ok = r.ok;
        entry.text = std::move(r.text);
        entry.error = r.error;
        entry.completed_at_ns = at;
        t.decoded.push_back(entry);
        t.buffer.clear();
        t.state = S::idle;
        return entry;
    }
    t.buffer.push_back(amount_sat);
    return std::nullopt;
}

// ==================== CommandDriver ====================

CommandDriver::CommandDriver(PaymentEngine& engine, EncodingScheme scheme, ProtocolConfig config)
    : engine_(engine), scheme_(std::move(scheme)), config_(std::move(config)) {
    engine_.set_receive_hook([this](const NodeId& dest, Sat amount, TimeNs at) {
        const auto it = transcripts_.find(dest);
        if (it != transcripts_.end()) cnc_on_payment(it->second, amount, at, scheme_);
    });
}

void CommandDriver::register_cnc(const NodeId& node) {
    engine_.network().node(node);  // must exist
    CommandTranscript t;
    t.receiver = node;
    transcripts_.emplace(node, std::move(t));
}

CommandTranscript& CommandDriver::transcript(const NodeId& node) {
    const auto it = transcripts_.find(node);
    if (it == transcripts_.end()) throw SimError("no transcript for " + node);
    return it->second;
}

CommandDriver::SessionOutcome CommandDriver::run_session_once(SendSession& s,
                                                              const NodeId& botmaster) {
    Network& net = engine_.network();
    if (!net.node(s.target).online) {
        s.state = SessionState::rescheduled;
        return {};
    }

    s.state = SessionState::in_progress;
    s.consecutive_failures = 0;
    const std::vector<Sat> amounts = frame(encode(s.command, scheme_));
    const PubKey dest = Network::pubkey_for(s.target);

    for (std::size_t i = 0; i < amounts.size(); ++i) {
        const bool is_payload = i > 0 && i + 1 < amounts.size();
        for (;;) {
            const PaymentResult r = engine_.send_keysend(botmaster, dest, amounts[i], config_.route);
            ++s.attempts;
            if (after_payment_) after_payment_(s.target);
            if (r.success) {
                s.consecutive_failures = 0;
                ++s.payments_sent;
                s.satoshi_spent += r.amount_sat;
                s.fees_paid_msat += r.total_fee_msat;
                s.total_time_s += r.latency_s;
                if (is_payload) {
                    s.payload_sat += r.amount_sat;
                    s.payload_fees_msat += r.total_fee_msat;
                    s.payload_time_s += r.latency_s;
                }
                break;
            }
            if (s.consecutive_failures < s.retry_limit_k) {
                ++s.consecutive_failures;
                continue;  // retry the same amount
            }
            s.state = SessionState::rescheduled;  // budget exhausted
            return {};
        }
    }
    s.state = SessionState::completed;
    return {.completed = true};
}

std::vector<SendSession> CommandDriver::send_command(const NodeId& botmaster,
                                                     const std::vector<NodeId>& targets,
                                                     const std::string& command) {
    engine_.network().node(botmaster);
    (void)frame(encode(command, scheme_));  // reject unencodable commands up front

    std::vector<SendSession> sessions(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        sessions[i].target = targets[i];
        sessions[i].command = command;
        sessions[i].retry_limit_k = config_.retry_limit_k;
    }

    const TimeNs delay_ns =
        static_cast<TimeNs>(std::llround(config_.reschedule_delay_s * kNsPerSec));

    // Wake queue ordered by (resume time, session index): initial attempts
    // run in target order, rescheduled ones resume in wake order.
    using QueueItem = std::pair<TimeNs, std::size_t>;
    std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue;
    for (std::size_t i = 0; i < sessions.size(); ++i) queue.emplace(engine_.now_ns(), i);

    while (!queue.empty()) {
        const auto [wake_at, idx] = queue.top();
        queue.pop();
        if (engine_.now_ns() < wake_at) engine_.advance_clock(wake_at - engine_.now_ns());

        SendSession& s = sessions[idx];
        const SessionOutcome outcome = run_session_once(s, botmaster);
        if (outcome.completed) continue;
        ++s.reschedules;
        if (s.reschedules >= config_.max_session_rounds) continue;  // give up, stays rescheduled
        s.resume_at_ns = engine_.now_ns() + delay_ns;
        queue.emplace(s.resume_at_ns, idx);
    }
    return sessions;
}

std::optional<PaymentResult> CommandDriver::reimburse_tick(const NodeId& cnc,
                                                           const ReimbursementPolicy& policy) {
    if (!policy.enabled) return std::nullopt;
    CommandTranscript& t = transcript(cnc);
    if (t.pending_remit_sat < policy.threshold_sat || t.pending_remit_sat <= 0)
        return std::nullopt;

    RouteConstraints cons;
    cons.max_edges = config_.route.max_edges;
    cons.source_reserve_msat = msat_from_sat(policy.reserve_per_channel_sat);
    PaymentResult r = engine_.send_keysend(cnc, policy.collector_pubkey, t.pending_remit_sat, cons);
    if (r.success) t.pending_remit_sat = 0;
    // on failure the pending balance is untouched; the next tick retries
    return r;
}

Sat CommandDriver::sweep_collector(const NodeId& collector, const NodeId& botmaster,
                                   Sat sweep_fee_sat) {
    Network& net = engine_.network();
    for (ChannelId cid : net.channels_of(collector)) net.close_channel(cid, collector);
    return net.sweep_onchain(collector, botmaster, sweep_fee_sat);
}

}  // namespace lnsim

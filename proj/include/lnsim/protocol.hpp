#pragma once
/*
 * protocol.hpp — the command channel built on top of keysend payments.
 *
 * Sender side: a command is framed (5 ... payload ... 6) and sent one amount
 * per payment, strictly sequentially.  Each failed payment is retried; after
 * retry_limit_k consecutive failures the whole command is rescheduled and
 * later restarted from the 5 sentinel.
 *
 * Receiver side: a state machine per command server.  5 opens a frame (and
 * resets any stale partial frame), 6 closes it and decodes the buffered
 * amounts; amounts outside a frame are logged as strays.
 *
 * Money flow back: received funds accumulate per server and are forwarded to
 * the collector once they cross a threshold; the collector is later swept
 * on-chain to the botmaster.
 */

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnsim/codec.hpp"
#include "lnsim/payment.hpp"
#include "lnsim/types.hpp"

namespace lnsim {

enum class SessionState { pending, in_progress, completed, rescheduled };

const char* to_string(SessionState s);

struct SendSession {
    NodeId target;
    std::string command;
    int retry_limit_k = 3;

    SessionState state = SessionState::pending;
    int consecutive_failures = 0;
    TimeNs resume_at_ns = 0;           // valid while rescheduled
    int reschedules = 0;

    std::uint64_t payments_sent = 0;   // successful settlements, sentinels included
    std::uint64_t attempts = 0;        // every send_keysend call
    Sat satoshi_spent = 0;             // sum of successfully delivered amounts
    Sat payload_sat = 0;               // delivered amounts excluding sentinels
    Msat fees_paid_msat = 0;
    Msat payload_fees_msat = 0;        // fees on payload payments only
    double payload_time_s = 0.0;       // latency over successful payload payments
    double total_time_s = 0.0;         // latency over all successful payments
};

struct Receipt {
    TimeNs timestamp_ns = 0;
    Sat amount_sat = 0;
};

struct DecodedEntry {
    bool ok = false;
    std::string text;
    DecodeErrorKind error = DecodeErrorKind::invalid_symbol;
    TimeNs completed_at_ns = 0;
};

// Receiver-side view of one command server.
struct CommandTranscript {
    enum class DecoderState { idle, receiving };

    NodeId receiver;
    DecoderState state = DecoderState::idle;
    std::vector<Sat> buffer;            // payload amounts of the open frame
    std::vector<Receipt> receipts;      // every incoming amount, in order
    std::vector<DecodedEntry> decoded;  // one entry per closed frame
    std::uint64_t stray_payments = 0;   // amounts received outside any frame

    Sat received_total_sat = 0;
    Sat pending_remit_sat = 0;          // received, not yet forwarded to collector
};

// Feed one settled incoming payment into the receiver state machine.
// Returns the decoded entry when this payment closed a frame.
std::optional<DecodedEntry> cnc_on_payment(CommandTranscript& t, Sat amount_sat, TimeNs at,
                                           const EncodingScheme& scheme);

struct ReimbursementPolicy {
    bool enabled = true;
    Sat threshold_sat = 2000;           // remit once pending funds reach this
    Sat reserve_per_channel_sat = 1000; // floor the outgoing channel must keep
    PubKey collector_pubkey;
};

struct ProtocolConfig {
    int retry_limit_k = 3;
    double reschedule_delay_s = 600.0;
    int max_session_rounds = 10;        // give-up bound on reschedule wakeups
    RouteConstraints route;             // applied to every command payment
};

class CommandDriver {
public:
    CommandDriver(PaymentEngine& engine, EncodingScheme scheme, ProtocolConfig config = {});

    // Attach a command server; its transcript starts collecting on the next
    // payment.  The engine's receive hook is owned by this driver.
    void register_cnc(const NodeId& node);

    CommandTranscript& transcript(const NodeId& node);
    const std::map<NodeId, CommandTranscript>& transcripts() const { return transcripts_; }
    const EncodingScheme& scheme() const { return scheme_; }

    // Invoked after every payment attempt of a session (settled or failed);
    // lets a scenario interleave adversary or cover traffic mid-command.
    using AfterPaymentHook = std::function<void(const NodeId& target)>;
    void set_after_payment_hook(AfterPaymentHook hook) { after_payment_ = std::move(hook); }

    // Algorithm: check target online, send framed amounts sequentially with
    // per-payment retries, reschedule the whole command on overflow or when
    // the target is offline.  Sessions are independent; rescheduled ones are
    // resumed in wake-time order until done or the round bound hits.
    std::vector<SendSession> send_command(const NodeId& botmaster,
                                          const std::vector<NodeId>& targets,
                                          const std::string& command);

    // One reimbursement tick for one server: if pending funds reached the
    // threshold, keysend the full pending amount to the collector (fees ride
    // on the server's own channel funds; the outgoing channel must retain the
    // per-channel reserve).  Returns the payment when one was attempted.
    std::optional<PaymentResult> reimburse_tick(const NodeId& cnc, const ReimbursementPolicy& policy);

    // Close every channel the collector participates in, then move its whole
    // on-chain balance to the botmaster (minus the sweep fee).  Returns the
    // swept amount.
    Sat sweep_collector(const NodeId& collector, const NodeId& botmaster, Sat sweep_fee_sat = 0);

private:
    struct SessionOutcome {
        bool completed = false;
    };
    SessionOutcome run_session_once(SendSession& s, const NodeId& botmaster);

    PaymentEngine& engine_;
    EncodingScheme scheme_;
    ProtocolConfig config_;
    std::map<NodeId, CommandTranscript> transcripts_;
    AfterPaymentHook after_payment_;
};

}  // namespace lnsim

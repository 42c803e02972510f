#pragma once
/*
 * harness.hpp — scenario execution pipeline and reporting.
 *
 * run_scenario() drives one full operator lifecycle on a fresh network:
 * node funding, topology construction, channel formation, command
 * propagation, interleaved cover/poison traffic, reimbursement to the
 * collector, the on-chain sweep, channel teardown and finally the
 * detection analysis over whatever monitors the scenario declared.  The
 * report carries the raw numbers plus a satoshi-exact audit of what the
 * whole cycle cost the operator.
 *
 * replicate_reference_tables() re-derives the headline cost and latency
 * figures from scratch at several deployment scales and checks them against
 * the expected reference values; the runs are independent and execute in
 * parallel when OpenMP is available.
 */

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnsim/analysis.hpp"
#include "lnsim/scenario.hpp"

namespace lnsim {

// Per-command-server outcome of the command phase.
struct TargetOutcome {
    NodeId target;
    SessionState state = SessionState::pending;
    std::uint64_t payments_sent = 0;
    std::uint64_t attempts = 0;
    int reschedules = 0;
    Sat satoshi_spent = 0;             // delivered amounts, sentinels included
    Msat fees_paid_msat = 0;
    Sat payload_sat = 0;               // delivered amounts, sentinels excluded
    Msat payload_fees_msat = 0;
    double payload_time_s = 0.0;
    double total_time_s = 0.0;
    bool decoded_ok = false;           // last closed frame decoded to the command
};

// Satoshi-exact accounting of the operator's full cycle.  With every
// operator channel closed at the end, the books must balance exactly:
//
//   initial - final == on-chain fees + routing fees paid to relays
//                      + sub-satoshi close residue + payments to outsiders
//                      - payments received from outsiders
//                      - forwarding fees earned from outsiders
//
// (everything in msat; the on-chain legs are whole satoshi).
struct CycleAudit {
    Sat initial_operator_sat = 0;       // before any channel existed
    Sat final_operator_sat = 0;         // after sweep and teardown
    Sat onchain_fees_sat = 0;           // open/close/sweep fees paid by operator nodes
    Msat relay_routing_fees_msat = 0;   // fees operator payments paid to relays
    Msat close_residue_msat = 0;        // sub-satoshi remainders lost at closes
    Sat external_outflow_sat = 0;       // operator payments delivered to outsiders
    Sat external_inflow_sat = 0;        // outsider payments delivered to operators
    Msat operator_earned_fees_msat = 0; // fees operator nodes earned forwarding
    bool identity_holds = false;
};

struct Report {
    std::string scenario_name;
    std::uint64_t seed = 0;

    // channel formation
    int cnc_servers = 0;
    int channels_per_server = 0;
    Sat open_fee_sat = 0;
    Sat formation_fees_sat = 0;        // measured from the ledger
    Sat formation_formula_sat = 0;     // servers x channels x open fee
    Sat formation_capacity_sat = 0;    // capacity locked by command servers

    // command encoding
    std::string command;
    std::string scheme_name;
    std::size_t payload_payments = 0;  // per delivered command
    std::size_t framed_payments = 0;
    Sat payload_cost_sat = 0;
    Sat framed_cost_sat = 0;

    // command propagation
    std::vector<TargetOutcome> targets;
    int sessions_completed = 0;
    Sat total_delivered_sat = 0;       // across targets, sentinels included
    Msat total_command_fees_msat = 0;
    Sat total_payload_sat = 0;
    Msat total_payload_fees_msat = 0;

    // scripted ad-hoc payments ([payments] section)
    int scripted_ok = 0;
    int scripted_failed = 0;

    // reimbursement and sweep
    int reimburse_payments = 0;
    Sat reimbursed_sat = 0;            // amounts delivered to the collector
    Msat reimburse_fees_msat = 0;
    Sat swept_sat = 0;                 // collector funds moved to the botmaster

    // every payment in the run
    std::size_t payments_succeeded = 0;
    std::size_t payments_failed = 0;
    double mean_latency_s = 0.0;
    double max_latency_s = 0.0;

    CycleAudit audit;

    // receiver side
    std::map<NodeId, std::vector<Receipt>> receipts;       // per command server
    std::map<NodeId, std::vector<DecodedEntry>> decoded;
    std::map<NodeId, std::uint64_t> stray_payments;

    // detection
    ChannelDirectory directory;
    MonitorLogs monitor_logs;
    std::vector<CorrelationFinding> findings;
    std::optional<DetectionMetrics> truth_metrics;  // truth = the botmaster
    std::vector<PoisonInjection> poison;            // post-run state

    std::string to_text() const;
    std::string to_json() const;
};

// Runs the scenario; when out_dir is non-empty, also writes the report and
// every artifact log (ledger, channel directory, per-node forwarding logs,
// receipts, decoded frames, sessions, findings) under it.
Report run_scenario(const Scenario& sc, const std::string& out_dir = "");

// ==================== reference table replication ====================

// The drill command every cost table is derived from.
const std::string& reference_command();

// Chain-topology scenario used for the reference tables: one botmaster, a
// four-relay forwarding chain, n command servers and a collector, 7 s
// deterministic latency, every command payment pinned to 4 intermediaries.
Scenario replication_scenario(EncodingScheme::Kind kind, int n_servers,
                              std::uint64_t seed = 7);

struct ReferenceRow {
    std::string group;   // formation-cost / command-encoding / routing-fees / propagation-time
    std::string label;
    long long simulated = 0;
    long long expected = 0;
    bool match = false;
};

struct ReferenceCheck {
    std::vector<ReferenceRow> rows;
    bool all_match = false;

    std::string to_text() const;
};

ReferenceCheck replicate_reference_tables();

}  // namespace lnsim

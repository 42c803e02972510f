#pragma once
/*
 * logio.hpp — line-delimited JSON import/export for simulation artifacts.
 *
 * Forwarding records carry exactly the six fields a real node's forwarding
 * database exposes: timestamp, chan_id_in, chan_id_out, amt_in, amt_out,
 * fee.  Nothing else — in particular no payment source, destination or hop
 * position — so downstream analysis can only use what a monitor would have.
 */

#include <iosfwd>
#include <string>
#include <vector>

#include "lnsim/analysis.hpp"
#include "lnsim/network.hpp"
#include "lnsim/payment.hpp"
#include "lnsim/protocol.hpp"

namespace lnsim {

// forwarding events: {"timestamp", "chan_id_in", "chan_id_out", "amt_in", "amt_out", "fee"}
void write_forwarding_log(std::ostream& out, const std::vector<ForwardingEvent>& events);
std::vector<ForwardingEvent> read_forwarding_log(std::istream& in);

// receipts: {"timestamp", "amount_sat"}
void write_receipts(std::ostream& out, const std::vector<Receipt>& receipts);
std::vector<Receipt> read_receipts(std::istream& in);

// ledger: {"seq", "tx_type", "node", "amount_sat", "fee_sat"}
void write_ledger(std::ostream& out, const std::vector<LedgerEvent>& events);

// channel directory: {"channel_id", "node_a", "node_b"}
void write_channel_directory(std::ostream& out, const ChannelDirectory& dir);
ChannelDirectory read_channel_directory(std::istream& in);

// findings: {"candidate", "score", "matched_pairs"}
void write_findings(std::ostream& out, const std::vector<CorrelationFinding>& findings);

// sessions: one summary object per target
void write_sessions(std::ostream& out, const std::vector<SendSession>& sessions);

// decoded frames of one transcript: {"index", "ok", "command"|"error", "completed_at"}
void write_decoded(std::ostream& out, const std::vector<DecodedEntry>& decoded);

// ---- file helpers (throw SimError on I/O failure) ----
void write_text_file(const std::string& path, const std::string& content);
std::string slurp_file(const std::string& path);

}  // namespace lnsim

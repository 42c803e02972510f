#include "lnsim/logio.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace lnsim {

using nlohmann::json;

namespace {

json parse_line(const std::string& line, const char* what, int lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw SimError(std::string(what) + " line " + std::to_string(lineno) + ": bad JSON");
    return j;
}

}  // namespace

void write_forwarding_log(std::ostream& out, const std::vector<ForwardingEvent>& events) {
    for (const ForwardingEvent& ev : events) {
        json j;
        j["timestamp"] = ev.timestamp_ns;
        j["chan_id_in"] = ev.chan_id_in;
        j["chan_id_out"] = ev.chan_id_out;
        j["amt_in"] = ev.amt_in_sat;
        j["amt_out"] = ev.amt_out_sat;
        j["fee"] = ev.fee_sat;
        out << j.dump() << '\n';
    }
}

std::vector<ForwardingEvent> read_forwarding_log(std::istream& in) {
    std::vector<ForwardingEvent> events;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_line(line, "forwarding log", lineno);
        ForwardingEvent ev;
        ev.timestamp_ns = j.at("timestamp").get<TimeNs>();
        ev.chan_id_in = j.at("chan_id_in").get<ChannelId>();
        ev.chan_id_out = j.at("chan_id_out").get<ChannelId>();
        ev.amt_in_sat = j.at("amt_in").get<Sat>();
        ev.amt_out_sat = j.at("amt_out").get<Sat>();
        ev.fee_sat = j.at("fee").get<Sat>();
        events.push_back(ev);
    }
    return events;
}

void write_receipts(std::ostream& out, const std::vector<Receipt>& receipts) {
    for (const Receipt& r : receipts) {
        json j;
        j["timestamp"] = r.timestamp_ns;
        j["amount_sat"] = r.amount_sat;
        out << j.dump() << '\n';
    }
}

std::vector<Receipt> read_receipts(std::istream& in) {
    std::vector<Receipt> receipts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_line(line, "receipt log", lineno);
        Receipt r;
        r.timestamp_ns = j.at("timestamp").get<TimeNs>();
        r.amount_sat = j.at("amount_sat").get<Sat>();
        receipts.push_back(r);
    }
    return receipts;
}

void write_ledger(std::ostream& out, const std::vector<LedgerEvent>& events) {
    for (const LedgerEvent& ev : events) {
        json j;
        j["seq"] = ev.seq;
        j["tx_type"] = to_string(ev.type);
        j["node"] = ev.node;
        j["amount_sat"] = ev.amount_sat;
        j["fee_sat"] = ev.fee_sat;
        out << j.dump() << '\n';
    }
}

void write_channel_directory(std::ostream& out, const ChannelDirectory& dir) {
    for (const auto& [cid, ends] : dir.endpoints) {
        json j;
        j["channel_id"] = cid;
        j["node_a"] = ends.first;
        j["node_b"] = ends.second;
        out << j.dump() << '\n';
    }
}

ChannelDirectory read_channel_directory(std::istream& in) {
    ChannelDirectory dir;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = parse_line(line, "channel directory", lineno);
        dir.endpoints[j.at("channel_id").get<ChannelId>()] = {j.at("node_a").get<std::string>(),
                                                              j.at("node_b").get<std::string>()};
    }
    return dir;
}

void write_findings(std::ostream& out, const std::vector<CorrelationFinding>& findings) {
    for (const CorrelationFinding& f : findings) {
        json j;
        j["candidate"] = f.candidate;
        j["score"] = f.score;
        j["matched_pairs"] = f.matches.size();
        out << j.dump() << '\n';
    }
}

void write_sessions(std::ostream& out, const std::vector<SendSession>& sessions) {
    for (const SendSession& s : sessions) {
        json j;
        j["target"] = s.target;
        j["state"] = to_string(s.state);
        j["payments_sent"] = s.payments_sent;
        j["attempts"] = s.attempts;
        j["satoshi_spent"] = s.satoshi_spent;
        j["fees_paid_msat"] = s.fees_paid_msat;
        j["payload_time_s"] = s.payload_time_s;
        j["total_time_s"] = s.total_time_s;
        j["reschedules"] = s.reschedules;
        out << j.dump() << '\n';
    }
}

void write_decoded(std::ostream& out, const std::vector<DecodedEntry>& decoded) {
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        json j;
        j["index"] = i;
        j["ok"] = decoded[i].ok;
        if (decoded[i].ok)
            j["command"] = decoded[i].text;
        else
            j["error"] = to_string(decoded[i].error);
        j["completed_at"] = decoded[i].completed_at_ns;
        out << j.dump() << '\n';
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError("cannot open for writing: " + path);
    out << content;
    if (!out) throw SimError("write failed: " + path);
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SimError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace lnsim

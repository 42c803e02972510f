#include "lnsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace lnsim {

namespace {

// ==================== line-level parsing helpers ====================

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[noreturn]] void fail(int lineno, const std::string& msg) {
    throw SimError("scenario line " + std::to_string(lineno) + ": " + msg);
}

std::int64_t to_int(const std::string& v, int lineno) {
    try {
        std::size_t used = 0;
        const std::int64_t r = std::stoll(v, &used);
        if (used != v.size()) fail(lineno, "trailing characters in integer '" + v + "'");
        return r;
    } catch (const SimError&) {
        throw;
    } catch (...) {
        fail(lineno, "expected integer, got '" + v + "'");
    }
}

std::uint64_t to_uint(const std::string& v, int lineno) {
    const std::int64_t r = to_int(v, lineno);
    if (r < 0) fail(lineno, "expected non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(r);
}

double to_double(const std::string& v, int lineno) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) fail(lineno, "trailing characters in number '" + v + "'");
        return r;
    } catch (const SimError&) {
        throw;
    } catch (...) {
        fail(lineno, "expected number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, int lineno) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(lineno, "expected boolean, got '" + v + "'");
}

// latency model under construction; realized in finish()
struct LatencySpec {
    std::string model = "deterministic";
    double seconds = 7.0;
    double low = 4.0, high = 10.0;
    std::string samples_file;
    int decl_line = 0;
};

}  // namespace

Scenario Scenario::parse(std::istream& in) {
    Scenario sc;
    LatencySpec latency;
    bool saw_latency = false;

    std::string section = "";          // current [section] name
    std::vector<std::string> args;     // section header arguments
    Scenario::NodeDecl* cur_node = nullptr;
    Scenario::ChannelDecl* cur_channel = nullptr;
    PoisonInjection* cur_poison = nullptr;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(lineno, "unterminated section header");
            const auto tokens = split_ws(line.substr(1, line.size() - 2));
            if (tokens.empty()) fail(lineno, "empty section header");
            section = tokens[0];
            args.assign(tokens.begin() + 1, tokens.end());
            cur_node = nullptr;
            cur_channel = nullptr;
            cur_poison = nullptr;

            static const std::set<std::string> known = {
                "network", "botnet",  "fees",   "latency", "command", "failures",
                "monitors", "poison", "reimbursement", "detection", "cover",
                "node", "channel", "payments"};
            if (!known.count(section)) fail(lineno, "unknown section [" + section + "]");

            if (section == "node") {
                if (args.size() != 1) fail(lineno, "[node] needs exactly one id");
                sc.node_decls.push_back({});
                cur_node = &sc.node_decls.back();
                cur_node->id = args[0];
            } else if (section == "channel") {
                if (args.size() != 2) fail(lineno, "[channel] needs two endpoint ids");
                if (args[0] == args[1]) fail(lineno, "[channel] endpoints must differ");
                sc.channel_decls.push_back({});
                cur_channel = &sc.channel_decls.back();
                cur_channel->a = args[0];
                cur_channel->b = args[1];
            } else if (section == "poison") {
                if (!args.empty()) fail(lineno, "[poison] takes no arguments");
                sc.poison.push_back({});
                cur_poison = &sc.poison.back();
            } else if (!args.empty()) {
                fail(lineno, "[" + section + "] takes no arguments");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(lineno, "empty key");
        if (value.empty()) fail(lineno, "empty value for '" + key + "'");

        if (section.empty()) {
            if (key == "name") sc.name = value;
            else if (key == "seed") sc.seed = to_uint(value, lineno);
            else fail(lineno, "unknown top-level key '" + key + "'");
        } else if (section == "network") {
            if (key == "topology") {
                if (value == "replication-chain") sc.topology = Topology::replication_chain;
                else if (value == "random-mesh") sc.topology = Topology::random_mesh;
                else if (value == "explicit") sc.topology = Topology::explicit_decl;
                else fail(lineno, "unknown topology '" + value + "'");
            } else if (key == "relays") sc.relays = static_cast<int>(to_uint(value, lineno));
            else if (key == "relay_degree") sc.relay_degree = static_cast<int>(to_uint(value, lineno));
            else if (key == "relay_channel_capacity_sat") sc.relay_channel_capacity_sat = to_int(value, lineno);
            else if (key == "open_fee_sat") sc.net.open_fee_sat = to_int(value, lineno);
            else if (key == "close_fee_sat") sc.net.close_fee_sat = to_int(value, lineno);
            else if (key == "sweep_fee_sat") sc.sweep_fee_sat = to_int(value, lineno);
            else if (key == "min_channel_capacity_sat") sc.net.min_channel_capacity_sat = to_int(value, lineno);
            else if (key == "max_route_edges") sc.max_route_edges = static_cast<int>(to_uint(value, lineno));
            else fail(lineno, "unknown [network] key '" + key + "'");
        } else if (section == "botnet") {
            if (key == "cnc_servers") sc.cnc_servers = static_cast<int>(to_uint(value, lineno));
            else if (key == "channels_per_server") sc.net.channels_per_server = static_cast<int>(to_uint(value, lineno));
            else if (key == "channel_capacity_sat") sc.channel_capacity_sat = to_int(value, lineno);
            else if (key == "botmaster_onchain_sat") sc.botmaster_onchain_sat = to_int(value, lineno);
            else if (key == "botmaster_channels") sc.botmaster_channels = static_cast<int>(to_uint(value, lineno));
            else if (key == "delivery_channel_capacity_sat") sc.delivery_channel_capacity_sat = to_int(value, lineno);
            else if (key == "collector_inbound_capacity_sat") sc.collector_inbound_capacity_sat = to_int(value, lineno);
            else if (key == "fixed_intermediary_hops") {
                const int h = static_cast<int>(to_uint(value, lineno));
                if (h > 0) sc.fixed_intermediary_hops = h;
            } else fail(lineno, "unknown [botnet] key '" + key + "'");
        } else if (section == "fees") {
            if (key == "base_fee_msat") sc.net.default_fee_policy.base_fee_msat = to_int(value, lineno);
            else if (key == "proportional_ppm") sc.net.default_fee_policy.proportional_ppm = to_int(value, lineno);
            else fail(lineno, "unknown [fees] key '" + key + "'");
        } else if (section == "latency") {
            saw_latency = true;
            latency.decl_line = lineno;
            if (key == "model") latency.model = value;
            else if (key == "seconds") latency.seconds = to_double(value, lineno);
            else if (key == "low") latency.low = to_double(value, lineno);
            else if (key == "high") latency.high = to_double(value, lineno);
            else if (key == "samples_file") latency.samples_file = value;
            else fail(lineno, "unknown [latency] key '" + key + "'");
        } else if (section == "command") {
            if (key == "text") sc.command = value;
            else if (key == "scheme") {
                if (value == "ascii") sc.scheme_kind = EncodingScheme::Kind::ascii;
                else if (value == "huffman") sc.scheme_kind = EncodingScheme::Kind::huffman;
                else fail(lineno, "unknown scheme '" + value + "'");
            } else if (key == "codebook") sc.codebook_path = value;
            else if (key == "retry_limit") sc.retry_limit_k = static_cast<int>(to_uint(value, lineno));
            else if (key == "reschedule_delay_s") sc.reschedule_delay_s = to_double(value, lineno);
            else if (key == "max_session_rounds") sc.max_session_rounds = static_cast<int>(to_uint(value, lineno));
            else fail(lineno, "unknown [command] key '" + key + "'");
        } else if (section == "failures") {
            if (key == "hop_failure_prob") {
                sc.failures.hop_failure_prob = to_double(value, lineno);
                if (sc.failures.hop_failure_prob < 0 || sc.failures.hop_failure_prob > 1)
                    fail(lineno, "hop_failure_prob must be in [0, 1]");
            } else if (key == "fail_payments") {
                for (const std::string& item : split_list(value))
                    sc.failures.fail_payments.insert(to_uint(item, lineno));
            } else fail(lineno, "unknown [failures] key '" + key + "'");
        } else if (section == "monitors") {
            if (key == "nodes") {
                for (const std::string& item : split_list(value)) sc.monitors.push_back(item);
            } else fail(lineno, "unknown [monitors] key '" + key + "'");
        } else if (section == "poison") {
            if (key == "attacker") cur_poison->attacker = value;
            else if (key == "target") cur_poison->target_pubkey = Network::pubkey_for(value);
            else if (key == "amount_sat") cur_poison->amount_sat = to_int(value, lineno);
            else if (key == "trigger") {
                if (value == "immediately") cur_poison->trigger = PoisonInjection::Trigger::immediately;
                else if (value == "when-receiving") cur_poison->trigger = PoisonInjection::Trigger::when_receiving;
                else fail(lineno, "unknown trigger '" + value + "'");
            } else fail(lineno, "unknown [poison] key '" + key + "'");
        } else if (section == "reimbursement") {
            if (key == "enabled") sc.reimburse_enabled = to_bool(value, lineno);
            else if (key == "threshold_sat") sc.reimburse_threshold_sat = to_int(value, lineno);
            else if (key == "reserve_per_channel_sat") sc.reserve_per_channel_sat = to_int(value, lineno);
            else if (key == "tick_period_s") sc.reimburse_tick_s = to_double(value, lineno);
            else if (key == "max_ticks") sc.reimburse_max_ticks = static_cast<int>(to_uint(value, lineno));
            else fail(lineno, "unknown [reimbursement] key '" + key + "'");
        } else if (section == "detection") {
            if (key == "window_s") sc.detection.window_s = to_double(value, lineno);
            else if (key == "fee_tolerance_sat") sc.detection.fee_tolerance_sat = to_int(value, lineno);
            else fail(lineno, "unknown [detection] key '" + key + "'");
        } else if (section == "cover") {
            if (key == "payments_per_command_payment") sc.cover_per_payment = static_cast<int>(to_uint(value, lineno));
            else if (key == "amount_sat") sc.cover_amount_sat = to_int(value, lineno);
            else fail(lineno, "unknown [cover] key '" + key + "'");
        } else if (section == "node") {
            if (key == "role") cur_node->role = node_role_from_string(value);
            else if (key == "onchain_sat") cur_node->onchain_sat = to_int(value, lineno);
            else if (key == "public") cur_node->advertised = to_bool(value, lineno);
            else if (key == "online") cur_node->online = to_bool(value, lineno);
            else fail(lineno, "unknown [node] key '" + key + "'");
        } else if (section == "channel") {
            if (key == "capacity_sat") cur_channel->capacity_sat = to_int(value, lineno);
            else if (key == "balance_a_sat") cur_channel->balance_a_sat = to_int(value, lineno);
            else if (key == "private") cur_channel->is_private = to_bool(value, lineno);
            else fail(lineno, "unknown [channel] key '" + key + "'");
        } else if (section == "payments") {
            if (key == "send") {
                // send = <src> <dst> <amount_sat> [first_hop]
                const auto tokens = split_ws(value);
                if (tokens.size() != 3 && tokens.size() != 4)
                    fail(lineno, "send needs '<src> <dst> <amount_sat> [first_hop]'");
                PaymentDecl p;
                p.src = tokens[0];
                p.dst = tokens[1];
                p.amount_sat = to_int(tokens[2], lineno);
                if (tokens.size() == 4) p.first_hop = tokens[3];
                sc.payment_decls.push_back(std::move(p));
            } else fail(lineno, "unknown [payments] key '" + key + "'");
        }
    }

    if (saw_latency) {
        if (latency.model == "deterministic") sc.latency = LatencyModel::deterministic(latency.seconds);
        else if (latency.model == "uniform") sc.latency = LatencyModel::uniform(latency.low, latency.high);
        else if (latency.model == "empirical") {
            if (latency.samples_file.empty()) fail(latency.decl_line, "empirical latency needs samples_file");
            sc.latency = LatencyModel::empirical_from_file(latency.samples_file);
        } else fail(latency.decl_line, "unknown latency model '" + latency.model + "'");
    }

    sc.validate();
    return sc;
}

Scenario Scenario::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("cannot open scenario: " + path);
    return parse(in);
}

void Scenario::validate() const {
    if (topology == Topology::explicit_decl) {
        if (node_decls.empty()) throw SimError("scenario: explicit topology declares no nodes");
        std::set<NodeId> ids;
        for (const NodeDecl& n : node_decls) {
            if (!ids.insert(n.id).second) throw SimError("scenario: duplicate node " + n.id);
            if (n.onchain_sat < 0) throw SimError("scenario: negative on-chain funds for " + n.id);
        }
        for (const ChannelDecl& c : channel_decls) {
            if (!ids.count(c.a) || !ids.count(c.b))
                throw SimError("scenario: channel references unknown node " + c.a + "/" + c.b);
            if (c.capacity_sat < net.min_channel_capacity_sat)
                throw SimError("scenario: channel " + c.a + "-" + c.b + " below minimum capacity");
            if (c.balance_a_sat && (*c.balance_a_sat < 0 || *c.balance_a_sat > c.capacity_sat))
                throw SimError("scenario: channel " + c.a + "-" + c.b + " balance outside capacity");
        }
        for (const PaymentDecl& p : payment_decls) {
            if (!ids.count(p.src) || !ids.count(p.dst))
                throw SimError("scenario: payment references unknown node");
            if (p.amount_sat <= 0) throw SimError("scenario: payment amount must be positive");
        }
    } else {
        if (!node_decls.empty() || !channel_decls.empty())
            throw SimError("scenario: [node]/[channel] sections require topology = explicit");
        if (cnc_servers < 1) throw SimError("scenario: need at least one command server");
        if (relays < 1) throw SimError("scenario: need at least one relay");
        if (net.channels_per_server < 1) throw SimError("scenario: channels_per_server must be >= 1");
        if (relays < net.channels_per_server)
            throw SimError("scenario: autopilot needs at least channels_per_server relays");
        if (channel_capacity_sat < net.min_channel_capacity_sat)
            throw SimError("scenario: botnet channel capacity below network minimum");
    }
    if (retry_limit_k < 0) throw SimError("scenario: retry_limit must be >= 0");
    if (reschedule_delay_s < 0) throw SimError("scenario: reschedule delay must be >= 0");
    if (max_session_rounds < 1) throw SimError("scenario: max_session_rounds must be >= 1");
    if (cover_per_payment < 0) throw SimError("scenario: negative cover rate");
    if (cover_per_payment > 0 && cover_amount_sat <= 0)
        throw SimError("scenario: cover amount must be positive");
    if (detection.window_s <= 0) throw SimError("scenario: detection window must be positive");
    if (detection.fee_tolerance_sat < 0) throw SimError("scenario: negative fee tolerance");
    for (const PoisonInjection& p : poison) {
        if (p.attacker.empty() || p.target_pubkey.empty())
            throw SimError("scenario: poison needs attacker and target");
        if (p.amount_sat <= 0) throw SimError("scenario: poison amount must be positive");
    }
    if (!command.empty()) {
        (void)encode(command, make_scheme());  // must be encodable
    }
}

EncodingScheme Scenario::make_scheme() const {
    if (scheme_kind == EncodingScheme::Kind::ascii) return EncodingScheme::ascii();
    if (codebook_path.empty()) return EncodingScheme::huffman(Codebook::default_quaternary());
    return EncodingScheme::huffman(Codebook::load_file(codebook_path));
}

}  // namespace lnsim

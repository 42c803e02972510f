#include "lnsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "lnsim/logio.hpp"

namespace lnsim {

namespace {

bool operator_role(NodeRole role) { return role != NodeRole::relay; }

std::string indexed_name(const char* stem, int width, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", stem, width, index);
    return buf;
}

// ==================== topology construction ====================

// A channel to be funded once every node exists.
struct ChannelPlan {
    NodeId funder, peer;
    Sat capacity_sat = 0;
    Sat funder_side_sat = 0;
    bool is_private = false;
};

struct BuildPlan {
    NodeId botmaster;            // empty when the scenario has none
    std::vector<NodeId> cncs;    // creation order
    NodeId collector;
    std::vector<NodeId> relays;
    std::vector<ChannelPlan> channels;
    bool autopilot_botmaster = false;
    bool autopilot_cncs = false;
};

// Relays are funded with exactly what the planned channels cost them;
// operator nodes get the scenario's configured stakes.
void create_planned_nodes(Network& net, const Scenario& sc, const BuildPlan& plan) {
    std::map<NodeId, Sat> relay_needs;
    for (const NodeId& r : plan.relays) relay_needs[r] = 0;
    for (const ChannelPlan& c : plan.channels) {
        const auto it = relay_needs.find(c.funder);
        if (it != relay_needs.end()) it->second += c.capacity_sat + sc.net.open_fee_sat;
    }

    if (!plan.botmaster.empty())
        net.add_node(plan.botmaster, NodeRole::botmaster, sc.botmaster_onchain_sat);
    for (const NodeId& r : plan.relays)
        net.add_node(r, NodeRole::relay, relay_needs[r], /*publicly_advertised=*/true);
    const Sat cnc_stake =
        static_cast<Sat>(sc.net.channels_per_server) * (sc.channel_capacity_sat + sc.net.open_fee_sat);
    for (const NodeId& c : plan.cncs) net.add_node(c, NodeRole::cnc_server, cnc_stake);
    if (!plan.collector.empty()) net.add_node(plan.collector, NodeRole::collector, 0);
}

// Botmaster -- relay chain -- command servers, with the collector hanging
// off the chain head.  Every command payment crosses the whole chain.
BuildPlan plan_chain(const Scenario& sc) {
    if (sc.fixed_intermediary_hops && *sc.fixed_intermediary_hops != sc.relays)
        throw SimError("chain topology: pinned intermediary count must equal the relay count");

    BuildPlan plan;
    plan.botmaster = "botmaster";
    plan.collector = "collector";
    for (int i = 1; i <= sc.relays; ++i) plan.relays.push_back(indexed_name("relay", 2, i));
    for (int i = 1; i <= sc.cnc_servers; ++i) plan.cncs.push_back(indexed_name("cnc", 3, i));

    if (sc.botmaster_onchain_sat < sc.relay_channel_capacity_sat + sc.net.open_fee_sat)
        throw SimError("chain topology: botmaster stake cannot fund its outbound channel");

    // botmaster's outbound channel: full balance on the botmaster side
    plan.channels.push_back({plan.botmaster, plan.relays.front(), sc.relay_channel_capacity_sat,
                             sc.relay_channel_capacity_sat, /*is_private=*/true});
    // the public chain, balanced so payments flow both ways
    for (int i = 0; i + 1 < sc.relays; ++i)
        plan.channels.push_back({plan.relays[i], plan.relays[i + 1], sc.relay_channel_capacity_sat,
                                 sc.relay_channel_capacity_sat / 2, /*is_private=*/false});
    // delivery channels: inbound liquidity for each command server
    for (const NodeId& cnc : plan.cncs)
        plan.channels.push_back({plan.relays.back(), cnc, sc.delivery_channel_capacity_sat,
                                 sc.delivery_channel_capacity_sat, /*is_private=*/true});
    // inbound liquidity for the collector, next to the botmaster's end
    plan.channels.push_back({plan.relays.front(), plan.collector, sc.collector_inbound_capacity_sat,
                             sc.collector_inbound_capacity_sat, /*is_private=*/true});

    plan.autopilot_cncs = true;
    return plan;
}

// Random relay mesh; operator nodes attach to random relays.
BuildPlan plan_mesh(const Scenario& sc, Rng& rng) {
    BuildPlan plan;
    plan.botmaster = "botmaster";
    plan.collector = "collector";
    for (int i = 1; i <= sc.relays; ++i) plan.relays.push_back(indexed_name("relay", 2, i));
    for (int i = 1; i <= sc.cnc_servers; ++i) plan.cncs.push_back(indexed_name("cnc", 3, i));

    const std::size_t r = plan.relays.size();
    if (r >= 2) {
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t i = 0; i < r; ++i) {
            for (int d = 0; d < sc.relay_degree; ++d) {
                // bounded redraws: duplicate edges are skipped, not retried forever
                for (std::size_t attempt = 0; attempt < 4 * r; ++attempt) {
                    const std::size_t j = rng.next_below(r);
                    if (j == i) continue;
                    const auto key = std::minmax(i, j);
                    if (!seen.insert(key).second) continue;
                    plan.channels.push_back({plan.relays[key.first], plan.relays[key.second],
                                             sc.relay_channel_capacity_sat,
                                             sc.relay_channel_capacity_sat / 2,
                                             /*is_private=*/false});
                    break;
                }
            }
        }
    }
    for (const NodeId& cnc : plan.cncs) {
        const NodeId& host = plan.relays[rng.next_below(r)];
        plan.channels.push_back({host, cnc, sc.delivery_channel_capacity_sat,
                                 sc.delivery_channel_capacity_sat, /*is_private=*/true});
    }
    {
        const NodeId& host = plan.relays[rng.next_below(r)];
        plan.channels.push_back({host, plan.collector, sc.collector_inbound_capacity_sat,
                                 sc.collector_inbound_capacity_sat, /*is_private=*/true});
    }

    if (sc.botmaster_onchain_sat <
        static_cast<Sat>(sc.botmaster_channels) * (sc.delivery_channel_capacity_sat + sc.net.open_fee_sat))
        throw SimError("mesh topology: botmaster stake cannot fund its outbound channels");

    plan.autopilot_botmaster = true;
    plan.autopilot_cncs = true;
    return plan;
}

// Everything spelled out in the scenario file.
BuildPlan plan_explicit(const Scenario& sc) {
    BuildPlan plan;
    std::map<NodeId, NodeRole> roles;
    for (const Scenario::NodeDecl& n : sc.node_decls) {
        roles[n.id] = n.role;
        switch (n.role) {
            case NodeRole::botmaster:
                if (!plan.botmaster.empty()) throw SimError("scenario: more than one botmaster");
                plan.botmaster = n.id;
                break;
            case NodeRole::collector:
                if (!plan.collector.empty()) throw SimError("scenario: more than one collector");
                plan.collector = n.id;
                break;
            case NodeRole::cnc_server:
                plan.cncs.push_back(n.id);
                break;
            case NodeRole::relay:
                plan.relays.push_back(n.id);
                break;
        }
    }
    for (const Scenario::ChannelDecl& c : sc.channel_decls) {
        const Sat funder_side = c.balance_a_sat.value_or(c.capacity_sat);
        // Channels crossing the operator boundary must start with the whole
        // balance on the funder's side, otherwise the opening itself would
        // hand one party the other's money and the cycle audit could never
        // balance.
        if (operator_role(roles.at(c.a)) != operator_role(roles.at(c.b)) &&
            funder_side != c.capacity_sat)
            throw SimError("scenario: channel " + c.a + "-" + c.b +
                           " crosses the operator boundary and must start funder-side-full");
        plan.channels.push_back({c.a, c.b, c.capacity_sat, funder_side, c.is_private});
    }
    return plan;
}

void create_explicit_nodes(Network& net, const Scenario& sc) {
    for (const Scenario::NodeDecl& n : sc.node_decls)
        net.add_node(n.id, n.role, n.onchain_sat, n.advertised, n.online);
}

// ==================== audit ====================

Sat operator_onchain_total(const Network& net) {
    Sat total = 0;
    for (const auto& [id, rec] : net.nodes())
        if (operator_role(rec.role)) total += rec.onchain_balance_sat;
    return total;
}

void finish_audit(CycleAudit& audit, const Network& net, const PaymentEngine& engine,
                  Sat sweep_fee_paid_sat) {
    const auto is_op = [&](const NodeId& n) { return operator_role(net.node(n).role); };

    audit.onchain_fees_sat = sweep_fee_paid_sat;
    for (const LedgerEvent& ev : net.ledger())
        if (ev.type == LedgerEvent::TxType::funding && is_op(ev.node))
            audit.onchain_fees_sat += ev.fee_sat;
    for (const SettlementRecord& rec : net.settlements()) {
        if (is_op(rec.closer)) audit.onchain_fees_sat += rec.close_fee_sat;
        if (is_op(rec.node_a)) audit.close_residue_msat += rec.residue_a_msat;
        if (is_op(rec.node_b)) audit.close_residue_msat += rec.residue_b_msat;
    }
    for (const PaymentLogEntry& p : engine.payment_log()) {
        if (!p.success) continue;
        const bool src_op = is_op(p.src);
        const bool dst_op = is_op(p.dst);
        for (const auto& [node, fee] : p.intermediary_fees) {
            if (src_op && !is_op(node)) audit.relay_routing_fees_msat += fee;
            if (!src_op && is_op(node)) audit.operator_earned_fees_msat += fee;
        }
        if (src_op && !dst_op) audit.external_outflow_sat += p.amount_sat;
        if (!src_op && dst_op) audit.external_inflow_sat += p.amount_sat;
    }

    const Msat lhs = msat_from_sat(audit.initial_operator_sat - audit.final_operator_sat);
    const Msat rhs = msat_from_sat(audit.onchain_fees_sat) + audit.relay_routing_fees_msat +
                     audit.close_residue_msat + msat_from_sat(audit.external_outflow_sat) -
                     msat_from_sat(audit.external_inflow_sat) - audit.operator_earned_fees_msat;
    audit.identity_holds = (lhs == rhs);
}

// ==================== artifacts ====================

template <typename WriteFn>
void write_jsonl(const std::string& path, WriteFn&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError("cannot write " + path);
    fn(out);
    if (!out) throw SimError("write failed: " + path);
}

void write_artifacts(const Report& rep, const Network& net, const PaymentEngine& engine,
                     const std::vector<SendSession>& sessions, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto path = [&](const std::string& name) { return out_dir + "/" + name; };

    write_text_file(path("report.txt"), rep.to_text());
    write_text_file(path("report.json"), rep.to_json());
    write_jsonl(path("ledger.jsonl"), [&](std::ostream& o) { write_ledger(o, net.ledger()); });
    write_jsonl(path("channels.jsonl"),
                [&](std::ostream& o) { write_channel_directory(o, rep.directory); });
    if (!sessions.empty())
        write_jsonl(path("sessions.jsonl"), [&](std::ostream& o) { write_sessions(o, sessions); });
    for (const auto& [node, events] : engine.all_forwarding_histories()) {
        if (events.empty()) continue;
        write_jsonl(path("forwarding_" + node + ".jsonl"),
                    [&](std::ostream& o) { write_forwarding_log(o, events); });
    }
    for (const auto& [cnc, receipts] : rep.receipts)
        write_jsonl(path("receipts_" + cnc + ".jsonl"),
                    [&](std::ostream& o) { write_receipts(o, receipts); });
    for (const auto& [cnc, decoded] : rep.decoded) {
        if (decoded.empty()) continue;
        write_jsonl(path("decoded_" + cnc + ".jsonl"),
                    [&](std::ostream& o) { write_decoded(o, decoded); });
    }
    if (!rep.monitor_logs.empty())
        write_jsonl(path("findings.jsonl"),
                    [&](std::ostream& o) { write_findings(o, rep.findings); });
}

}  // namespace

// ==================== pipeline ====================

Report run_scenario(const Scenario& sc, const std::string& out_dir) {
    sc.validate();

    Rng rng(sc.seed);
    Network net(sc.net);

    BuildPlan plan;
    switch (sc.topology) {
        case Scenario::Topology::replication_chain: plan = plan_chain(sc); break;
        case Scenario::Topology::random_mesh: plan = plan_mesh(sc, rng); break;
        case Scenario::Topology::explicit_decl: plan = plan_explicit(sc); break;
    }
    if (sc.topology == Scenario::Topology::explicit_decl)
        create_explicit_nodes(net, sc);
    else
        create_planned_nodes(net, sc, plan);
    for (const NodeId& m : sc.monitors) net.node(m);  // monitors must exist

    Report rep;
    rep.scenario_name = sc.name;
    rep.seed = sc.seed;

    // Initial holdings: every operator satoshi is still on-chain.
    rep.audit.initial_operator_sat = operator_onchain_total(net);

    // ---- channel construction ----
    for (const ChannelPlan& c : plan.channels)
        net.add_scenario_channel(c.funder, c.peer, c.capacity_sat, c.funder_side_sat, c.is_private);
    if (plan.autopilot_botmaster)
        net.autopilot_open(plan.botmaster, sc.botmaster_channels, sc.delivery_channel_capacity_sat,
                           rng);
    if (plan.autopilot_cncs)
        for (const NodeId& cnc : plan.cncs)
            net.autopilot_open(cnc, sc.net.channels_per_server, sc.channel_capacity_sat, rng);

    rep.cnc_servers = static_cast<int>(plan.cncs.size());
    rep.channels_per_server = sc.net.channels_per_server;
    rep.open_fee_sat = sc.net.open_fee_sat;
    rep.formation_formula_sat = sc.net.formation_cost(rep.cnc_servers);
    for (const LedgerEvent& ev : net.ledger()) {
        if (ev.type != LedgerEvent::TxType::funding) continue;
        if (net.node(ev.node).role != NodeRole::cnc_server) continue;
        rep.formation_fees_sat += ev.fee_sat;
        rep.formation_capacity_sat += ev.amount_sat;
    }

    // ---- engine and command driver ----
    PaymentEngine engine(net, rng);
    engine.set_latency_model(sc.latency);
    engine.set_failure_schedule(sc.failures);

    const EncodingScheme scheme = sc.make_scheme();
    ProtocolConfig pcfg;
    pcfg.retry_limit_k = sc.retry_limit_k;
    pcfg.reschedule_delay_s = sc.reschedule_delay_s;
    pcfg.max_session_rounds = sc.max_session_rounds;
    pcfg.route.fixed_intermediary_hops = sc.fixed_intermediary_hops;
    pcfg.route.max_edges = sc.max_route_edges;
    CommandDriver driver(engine, scheme, pcfg);
    for (const NodeId& cnc : plan.cncs) driver.register_cnc(cnc);

    // ---- interleaved poison and cover traffic ----
    std::vector<PoisonInjection> poison = sc.poison;
    RouteConstraints background;
    background.max_edges = sc.max_route_edges;

    const auto fire_poison = [&]() {
        for (PoisonInjection& p : poison) {
            if (p.fired) continue;
            bool receiving = false;
            if (p.trigger == PoisonInjection::Trigger::when_receiving) {
                const NodeId& target = net.node_by_pubkey(p.target_pubkey);
                const auto it = driver.transcripts().find(target);
                receiving = it != driver.transcripts().end() &&
                            it->second.state == CommandTranscript::DecoderState::receiving;
            }
            maybe_fire_poison(p, engine, receiving);
        }
    };
    const auto cover_burst = [&]() {
        if (sc.cover_per_payment <= 0 || plan.relays.size() < 2) return;
        for (int i = 0; i < sc.cover_per_payment; ++i) {
            const std::size_t a = rng.next_below(plan.relays.size());
            std::size_t b = a;
            while (b == a) b = rng.next_below(plan.relays.size());
            engine.send_keysend(plan.relays[a], Network::pubkey_for(plan.relays[b]),
                                sc.cover_amount_sat, background);
        }
    };
    driver.set_after_payment_hook([&](const NodeId&) {
        fire_poison();
        cover_burst();
    });

    fire_poison();  // fire-at-start injections

    // ---- scripted payments ----
    for (const Scenario::PaymentDecl& p : sc.payment_decls) {
        RouteConstraints cons = background;
        if (p.first_hop) {
            std::optional<ChannelId> out;
            for (ChannelId cid : net.channels_of(p.src)) {
                if (net.channel(cid).other(p.src) == *p.first_hop) {
                    out = cid;
                    break;  // channels_of is ascending, keep the lowest id
                }
            }
            if (!out)
                throw SimError("scenario: " + p.src + " has no channel to first hop " + *p.first_hop);
            cons.outgoing_channel = *out;
        }
        const PaymentResult r =
            engine.send_keysend(p.src, Network::pubkey_for(p.dst), p.amount_sat, cons);
        r.success ? ++rep.scripted_ok : ++rep.scripted_failed;
        fire_poison();
        cover_burst();
    }

    // ---- command propagation ----
    std::vector<SendSession> sessions;
    if (!sc.command.empty() && !plan.botmaster.empty() && !plan.cncs.empty()) {
        rep.command = sc.command;
        rep.scheme_name = scheme.kind == EncodingScheme::Kind::ascii ? "ascii" : "huffman";
        const std::vector<Sat> payload = encode(sc.command, scheme);
        const std::vector<Sat> framed = frame(payload);
        rep.payload_payments = payload.size();
        rep.framed_payments = framed.size();
        rep.payload_cost_sat = sequence_cost(payload);
        rep.framed_cost_sat = sequence_cost(framed);

        sessions = driver.send_command(plan.botmaster, plan.cncs, sc.command);
        for (const SendSession& s : sessions) {
            TargetOutcome t;
            t.target = s.target;
            t.state = s.state;
            t.payments_sent = s.payments_sent;
            t.attempts = s.attempts;
            t.reschedules = s.reschedules;
            t.satoshi_spent = s.satoshi_spent;
            t.fees_paid_msat = s.fees_paid_msat;
            t.payload_sat = s.payload_sat;
            t.payload_fees_msat = s.payload_fees_msat;
            t.payload_time_s = s.payload_time_s;
            t.total_time_s = s.total_time_s;
            const auto& decoded = driver.transcript(s.target).decoded;
            t.decoded_ok = !decoded.empty() && decoded.back().ok && decoded.back().text == sc.command;
            if (s.state == SessionState::completed) ++rep.sessions_completed;
            rep.total_delivered_sat += t.satoshi_spent;
            rep.total_command_fees_msat += t.fees_paid_msat;
            rep.total_payload_sat += t.payload_sat;
            rep.total_payload_fees_msat += t.payload_fees_msat;
            rep.targets.push_back(std::move(t));
        }
    }

    // ---- reimbursement ----
    if (sc.reimburse_enabled && !plan.collector.empty() && !plan.cncs.empty()) {
        ReimbursementPolicy policy;
        policy.enabled = true;
        policy.threshold_sat = sc.reimburse_threshold_sat;
        policy.reserve_per_channel_sat = sc.reserve_per_channel_sat;
        policy.collector_pubkey = Network::pubkey_for(plan.collector);
        const TimeNs tick_ns = static_cast<TimeNs>(std::llround(sc.reimburse_tick_s * kNsPerSec));
        for (int tick = 0; tick < sc.reimburse_max_ticks; ++tick) {
            bool due = false;
            for (const NodeId& cnc : plan.cncs)
                due = due || driver.transcript(cnc).pending_remit_sat >= sc.reimburse_threshold_sat;
            if (!due) break;
            engine.advance_clock(tick_ns);
            for (const NodeId& cnc : plan.cncs) {
                const auto r = driver.reimburse_tick(cnc, policy);
                if (!r) continue;
                ++rep.reimburse_payments;
                if (r->success) {
                    rep.reimbursed_sat += r->amount_sat;
                    rep.reimburse_fees_msat += r->total_fee_msat;
                }
            }
        }
    }

    // ---- sweep and teardown ----
    Sat sweep_fee_paid = 0;
    if (!plan.collector.empty() && !plan.botmaster.empty()) {
        for (ChannelId cid : net.channels_of(plan.collector)) net.close_channel(cid, plan.collector);
        if (net.node(plan.collector).onchain_balance_sat > 0) sweep_fee_paid = sc.sweep_fee_sat;
        rep.swept_sat = net.sweep_onchain(plan.collector, plan.botmaster, sc.sweep_fee_sat);
    }
    {
        std::vector<std::pair<ChannelId, NodeId>> to_close;
        for (const auto& [cid, ch] : net.channels()) {
            if (!ch.open) continue;
            const bool a_op = operator_role(net.node(ch.endpoint_a).role);
            const bool b_op = operator_role(net.node(ch.endpoint_b).role);
            if (!a_op && !b_op) continue;
            to_close.emplace_back(cid, a_op ? ch.endpoint_a : ch.endpoint_b);
        }
        for (const auto& [cid, closer] : to_close) net.close_channel(cid, closer);
    }

    rep.audit.final_operator_sat = operator_onchain_total(net);
    finish_audit(rep.audit, net, engine, sweep_fee_paid);

    // ---- whole-run payment statistics ----
    double latency_sum = 0;
    for (const PaymentLogEntry& p : engine.payment_log()) {
        if (!p.success) {
            ++rep.payments_failed;
            continue;
        }
        ++rep.payments_succeeded;
        latency_sum += p.latency_s;
        rep.max_latency_s = std::max(rep.max_latency_s, p.latency_s);
    }
    if (rep.payments_succeeded > 0)
        rep.mean_latency_s = latency_sum / static_cast<double>(rep.payments_succeeded);

    // ---- receiver side ----
    for (const auto& [cnc, t] : driver.transcripts()) {
        rep.receipts[cnc] = t.receipts;
        rep.decoded[cnc] = t.decoded;
        rep.stray_payments[cnc] = t.stray_payments;
    }

    // ---- detection ----
    rep.directory = ChannelDirectory::from_network(net);
    if (!sc.monitors.empty()) {
        for (const NodeId& m : sc.monitors) rep.monitor_logs[m] = engine.forwarding_history(m);
        std::vector<Receipt> merged;
        for (const auto& [cnc, receipts] : rep.receipts)
            merged.insert(merged.end(), receipts.begin(), receipts.end());
        std::stable_sort(merged.begin(), merged.end(),
                         [](const Receipt& x, const Receipt& y) {
                             return x.timestamp_ns < y.timestamp_ns;
                         });
        rep.findings = correlate(merged, rep.monitor_logs, rep.directory, sc.detection);
        if (!plan.botmaster.empty())
            rep.truth_metrics = detection_metrics(plan.botmaster, rep.findings);
    }
    rep.poison = std::move(poison);

    if (!out_dir.empty()) write_artifacts(rep, net, engine, sessions, out_dir);
    return rep;
}

// ==================== report rendering ====================

namespace {

std::string fixed(double v, int prec = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

}  // namespace

std::string Report::to_text() const {
    std::ostringstream os;
    os << "scenario " << scenario_name << " (seed " << seed << ")\n";
    os << std::string(60, '=') << "\n";

    os << "\n-- channel formation --\n";
    os << "command servers:        " << cnc_servers << "\n";
    os << "channels per server:    " << channels_per_server << "\n";
    os << "open fee per channel:   " << open_fee_sat << " sat\n";
    os << "formation fees:         " << formation_fees_sat << " sat (" << btc_string(formation_fees_sat)
       << " BTC), formula " << formation_formula_sat << " sat\n";
    os << "capacity locked:        " << formation_capacity_sat << " sat\n";

    if (!command.empty()) {
        os << "\n-- command --\n";
        os << "text:                   " << command << "\n";
        os << "scheme:                 " << scheme_name << "\n";
        os << "payments per command:   " << payload_payments << " payload + 2 sentinel\n";
        os << "amount per command:     " << payload_cost_sat << " sat payload, " << framed_cost_sat
           << " sat framed\n";

        os << "\n-- propagation --\n";
        for (const TargetOutcome& t : targets) {
            os << t.target << ": " << to_string(t.state) << ", " << t.payments_sent << "/"
               << t.attempts << " payments/attempts, " << t.satoshi_spent << " sat + "
               << t.fees_paid_msat << " msat fees, payload " << fixed(t.payload_time_s) << " s, total "
               << fixed(t.total_time_s) << " s, decoded " << (t.decoded_ok ? "ok" : "FAILED") << "\n";
        }
        os << "sessions completed:     " << sessions_completed << "/" << targets.size() << "\n";
        os << "delivered total:        " << total_delivered_sat << " sat (payload " << total_payload_sat
           << " sat)\n";
        os << "routing fees total:     " << total_command_fees_msat << " msat (payload "
           << total_payload_fees_msat << " msat)\n";
    }

    if (scripted_ok + scripted_failed > 0) {
        os << "\n-- scripted payments --\n";
        os << "succeeded/failed:       " << scripted_ok << "/" << scripted_failed << "\n";
    }

    os << "\n-- reimbursement and sweep --\n";
    os << "reimbursement payments: " << reimburse_payments << "\n";
    os << "reimbursed to collector:" << " " << reimbursed_sat << " sat + " << reimburse_fees_msat
       << " msat fees\n";
    os << "swept to botmaster:     " << swept_sat << " sat\n";

    os << "\n-- payments --\n";
    os << "succeeded/failed:       " << payments_succeeded << "/" << payments_failed << "\n";
    os << "latency mean/max:       " << fixed(mean_latency_s) << " / " << fixed(max_latency_s)
       << " s\n";

    os << "\n-- full-cycle audit --\n";
    os << "operator before/after:  " << audit.initial_operator_sat << " / "
       << audit.final_operator_sat << " sat\n";
    os << "net cost:               " << audit.initial_operator_sat - audit.final_operator_sat
       << " sat (" << btc_string(audit.initial_operator_sat - audit.final_operator_sat) << " BTC)\n";
    os << "on-chain fees:          " << audit.onchain_fees_sat << " sat\n";
    os << "relay routing fees:     " << audit.relay_routing_fees_msat << " msat\n";
    os << "close residue:          " << audit.close_residue_msat << " msat\n";
    if (audit.external_outflow_sat != 0)
        os << "paid to outsiders:      " << audit.external_outflow_sat << " sat\n";
    if (audit.external_inflow_sat != 0)
        os << "received from outsiders:" << " " << audit.external_inflow_sat << " sat\n";
    if (audit.operator_earned_fees_msat != 0)
        os << "fees earned forwarding: " << audit.operator_earned_fees_msat << " msat\n";
    os << "books balance:          " << (audit.identity_holds ? "yes" : "NO") << "\n";

    bool any_receipts = false;
    for (const auto& [cnc, rs] : receipts) any_receipts = any_receipts || !rs.empty();
    if (any_receipts) {
        os << "\n-- receiver side --\n";
        for (const auto& [cnc, rs] : receipts) {
            os << cnc << ": " << rs.size() << " receipts, " << stray_payments.at(cnc) << " strays";
            const auto& dec = decoded.at(cnc);
            if (!dec.empty()) {
                os << ", " << dec.size() << " frames (last ";
                if (dec.back().ok)
                    os << "ok: " << dec.back().text;
                else
                    os << "error: " << to_string(dec.back().error);
                os << ")";
            }
            os << "\n";
        }
    }

    if (!monitor_logs.empty()) {
        os << "\n-- detection --\n";
        os << "monitors:               ";
        bool first = true;
        for (const auto& [m, events] : monitor_logs) {
            os << (first ? "" : ", ") << m << " (" << events.size() << " events)";
            first = false;
        }
        os << "\n";
        std::size_t shown = 0;
        for (const CorrelationFinding& f : findings) {
            if (++shown > 10) break;
            os << "  candidate " << f.candidate << ": score " << fixed(f.score, 3) << " ("
               << f.receipts_matched << " receipts)\n";
        }
        if (findings.empty()) os << "  no candidates\n";
        if (truth_metrics) {
            os << "origin rank:            ";
            if (truth_metrics->rank_of_truth)
                os << *truth_metrics->rank_of_truth;
            else
                os << "unranked";
            os << ", score margin " << fixed(truth_metrics->score_margin, 3) << "\n";
        }
    }

    if (!poison.empty()) {
        os << "\n-- poison injections --\n";
        for (const PoisonInjection& p : poison) {
            os << p.attacker << " -> " << p.target_pubkey << ", " << p.amount_sat << " sat: ";
            if (!p.fired)
                os << "never fired";
            else if (p.result.success)
                os << "delivered at " << fixed(static_cast<double>(p.result.settled_at_ns) / 1e9)
                   << " s";
            else
                os << "failed (" << to_string(p.result.failure_reason) << ")";
            os << "\n";
        }
    }
    return os.str();
}

std::string Report::to_json() const {
    nlohmann::json j;
    j["scenario"] = scenario_name;
    j["seed"] = seed;

    j["formation"] = {{"cnc_servers", cnc_servers},
                      {"channels_per_server", channels_per_server},
                      {"open_fee_sat", open_fee_sat},
                      {"fees_sat", formation_fees_sat},
                      {"formula_sat", formation_formula_sat},
                      {"capacity_sat", formation_capacity_sat}};

    if (!command.empty()) {
        j["command"] = {{"text", command},
                        {"scheme", scheme_name},
                        {"payload_payments", payload_payments},
                        {"framed_payments", framed_payments},
                        {"payload_cost_sat", payload_cost_sat},
                        {"framed_cost_sat", framed_cost_sat}};
        auto& arr = j["targets"] = nlohmann::json::array();
        for (const TargetOutcome& t : targets) {
            arr.push_back({{"target", t.target},
                           {"state", to_string(t.state)},
                           {"payments_sent", t.payments_sent},
                           {"attempts", t.attempts},
                           {"reschedules", t.reschedules},
                           {"satoshi_spent", t.satoshi_spent},
                           {"fees_paid_msat", t.fees_paid_msat},
                           {"payload_sat", t.payload_sat},
                           {"payload_fees_msat", t.payload_fees_msat},
                           {"payload_time_s", t.payload_time_s},
                           {"total_time_s", t.total_time_s},
                           {"decoded_ok", t.decoded_ok}});
        }
        j["propagation"] = {{"sessions_completed", sessions_completed},
                            {"delivered_sat", total_delivered_sat},
                            {"command_fees_msat", total_command_fees_msat},
                            {"payload_sat", total_payload_sat},
                            {"payload_fees_msat", total_payload_fees_msat}};
    }

    j["scripted"] = {{"ok", scripted_ok}, {"failed", scripted_failed}};
    j["reimbursement"] = {{"payments", reimburse_payments},
                          {"reimbursed_sat", reimbursed_sat},
                          {"fees_msat", reimburse_fees_msat},
                          {"swept_sat", swept_sat}};
    j["payments"] = {{"succeeded", payments_succeeded},
                     {"failed", payments_failed},
                     {"mean_latency_s", mean_latency_s},
                     {"max_latency_s", max_latency_s}};
    j["audit"] = {{"initial_operator_sat", audit.initial_operator_sat},
                  {"final_operator_sat", audit.final_operator_sat},
                  {"onchain_fees_sat", audit.onchain_fees_sat},
                  {"relay_routing_fees_msat", audit.relay_routing_fees_msat},
                  {"close_residue_msat", audit.close_residue_msat},
                  {"external_outflow_sat", audit.external_outflow_sat},
                  {"external_inflow_sat", audit.external_inflow_sat},
                  {"operator_earned_fees_msat", audit.operator_earned_fees_msat},
                  {"identity_holds", audit.identity_holds}};

    auto& strays = j["receivers"] = nlohmann::json::array();
    for (const auto& [cnc, rs] : receipts) {
        nlohmann::json r = {{"node", cnc},
                            {"receipts", rs.size()},
                            {"strays", stray_payments.at(cnc)},
                            {"frames", decoded.at(cnc).size()}};
        const auto& dec = decoded.at(cnc);
        if (!dec.empty()) {
            r["last_frame_ok"] = dec.back().ok;
            if (dec.back().ok)
                r["last_frame_text"] = dec.back().text;
            else
                r["last_frame_error"] = to_string(dec.back().error);
        }
        strays.push_back(std::move(r));
    }

    if (!monitor_logs.empty()) {
        auto& arr = j["findings"] = nlohmann::json::array();
        for (const CorrelationFinding& f : findings)
            arr.push_back({{"candidate", f.candidate},
                           {"score", f.score},
                           {"receipts_matched", f.receipts_matched},
                           {"matched_pairs", f.matches.size()}});
        if (truth_metrics) {
            j["origin"] = {{"score_margin", truth_metrics->score_margin}};
            if (truth_metrics->rank_of_truth)
                j["origin"]["rank"] = *truth_metrics->rank_of_truth;
        }
    }

    if (!poison.empty()) {
        auto& arr = j["poison"] = nlohmann::json::array();
        for (const PoisonInjection& p : poison)
            arr.push_back({{"attacker", p.attacker},
                           {"target", p.target_pubkey},
                           {"amount_sat", p.amount_sat},
                           {"fired", p.fired},
                           {"delivered", p.fired && p.result.success}});
    }
    return j.dump(2) + "\n";
}

// ==================== reference table replication ====================

const std::string& reference_command() {
    static const std::string cmd = "sudo hping3 -i u1 -S -p 80 -c 10 192.168.1.1";
    return cmd;
}

Scenario replication_scenario(EncodingScheme::Kind kind, int n_servers, std::uint64_t seed) {
    Scenario sc;
    sc.name = std::string("replication-") +
              (kind == EncodingScheme::Kind::ascii ? "ascii" : "huffman") + "-" +
              std::to_string(n_servers);
    sc.seed = seed;
    sc.topology = Scenario::Topology::replication_chain;
    sc.relays = 4;
    sc.fixed_intermediary_hops = 4;
    sc.cnc_servers = n_servers;
    sc.latency = LatencyModel::deterministic(7.0);
    sc.command = reference_command();
    sc.scheme_kind = kind;
    return sc;
}

namespace {

struct RunSpec {
    EncodingScheme::Kind kind;
    int servers;
};

// true when v is integral to within noise and equals want
bool seconds_match(double v, long long want) {
    return std::llround(v) == want && std::fabs(v - static_cast<double>(std::llround(v))) < 1e-9;
}

}  // namespace

ReferenceCheck replicate_reference_tables() {
    const int scales[4] = {10, 25, 50, 100};
    std::vector<RunSpec> specs;
    for (int s : scales) specs.push_back({EncodingScheme::Kind::ascii, s});
    for (int s : scales) specs.push_back({EncodingScheme::Kind::huffman, s});

    std::vector<Report> reports(specs.size());
    std::vector<std::string> errors(specs.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(specs.size()); ++i) {
        try {
            reports[i] = run_scenario(replication_scenario(specs[i].kind, specs[i].servers));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const std::string& e : errors)
        if (!e.empty()) throw SimError("reference run failed: " + e);

    ReferenceCheck check;
    const auto add = [&](const std::string& group, const std::string& label, long long simulated,
                         long long expected, bool extra_ok = true) {
        check.rows.push_back({group, label, simulated, expected, extra_ok && simulated == expected});
    };

    // Complete sessions must behave identically on every target; any straggler
    // poisons the row's uniformity flag instead of silently averaging.
    const auto uniform = [&](const Report& rep, const auto& field, long long& value) {
        if (rep.targets.empty()) return false;
        value = field(rep.targets.front());
        for (const TargetOutcome& t : rep.targets)
            if (field(t) != value || t.state != SessionState::completed) return false;
        return true;
    };

    const long long expected_formation[4] = {4620, 11550, 23100, 46200};
    const long long expected_fees_ascii[4] = {1760, 4400, 8800, 17600};
    const long long expected_fees_huffman[4] = {4320, 10800, 21600, 43200};

    for (int i = 0; i < 4; ++i) {
        const Report& rep = reports[i];
        add("formation-cost",
            "channel formation fees, " + std::to_string(scales[i]) + " servers (sat)",
            rep.formation_fees_sat, expected_formation[i]);
    }

    for (int pass = 0; pass < 2; ++pass) {
        const bool ascii = pass == 0;
        const Report& rep = reports[pass * 4];  // smallest scale carries the per-command rows
        const std::string scheme = ascii ? "ascii" : "huffman";

        long long v = 0;
        bool ok = uniform(rep, [](const TargetOutcome& t) {
            return static_cast<long long>(t.payments_sent) - 2; }, v);
        add("command-encoding", scheme + " payments per command (payload)", v,
            ascii ? 44 : 108, ok);
        ok = uniform(rep, [](const TargetOutcome& t) { return t.payload_sat; }, v);
        add("command-encoding", scheme + " amount per command (payload sat)", v,
            ascii ? 2813 : 215, ok);

        for (int i = 0; i < 4; ++i) {
            const Report& r = reports[pass * 4 + i];
            const bool whole = r.total_payload_fees_msat % 1000 == 0;
            add("routing-fees",
                scheme + " payload routing fees, " + std::to_string(scales[i]) + " servers (sat)",
                r.total_payload_fees_msat / 1000,
                (ascii ? expected_fees_ascii : expected_fees_huffman)[i], whole);
        }

        double ts = 0;
        ok = true;
        if (rep.targets.empty()) {
            ok = false;
        } else {
            ts = rep.targets.front().payload_time_s;
            for (const TargetOutcome& t : rep.targets) ok = ok && t.payload_time_s == ts;
        }
        const long long want = ascii ? 308 : 756;
        add("propagation-time", scheme + " payload time per server (s)", std::llround(ts), want,
            ok && seconds_match(ts, want));
    }

    check.all_match = !check.rows.empty();
    for (const ReferenceRow& r : check.rows) check.all_match = check.all_match && r.match;
    return check;
}

std::string ReferenceCheck::to_text() const {
    std::ostringstream os;
    os << "reference table replication\n";
    os << std::string(75, '=') << "\n";
    std::string group;
    for (const ReferenceRow& r : rows) {
        if (r.group != group) {
            group = r.group;
            os << "[" << group << "]\n";
        }
        os << "  " << std::left << std::setw(52) << r.label << std::right << std::setw(8)
           << r.simulated << std::setw(8) << r.expected << "  " << (r.match ? "ok" : "MISMATCH")
           << "\n";
    }
    os << std::string(75, '=') << "\n";
    os << "result: " << (all_match ? "all values reproduced" : "MISMATCHES PRESENT") << "\n";
    return os.str();
}

}  // namespace lnsim

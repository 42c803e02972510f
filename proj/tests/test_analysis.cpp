#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "lnsim/analysis.hpp"
#include "lnsim/logio.hpp"

using namespace lnsim;

namespace {

ForwardingEvent make_event(TimeNs ts, ChannelId in, ChannelId out, Sat amt_out, Sat fee = 1) {
    ForwardingEvent ev;
    ev.timestamp_ns = ts;
    ev.chan_id_in = in;
    ev.chan_id_out = out;
    ev.amt_in_sat = amt_out + fee;
    ev.amt_out_sat = amt_out;
    ev.fee_sat = fee;
    return ev;
}

ChannelDirectory star_directory() {
    // 1 = (up, mon), 2 = (mon, down): events in 1 -> out 2 implicate "up"
    ChannelDirectory dir;
    dir.endpoints[1] = {"up", "mon"};
    dir.endpoints[2] = {"mon", "down"};
    return dir;
}

bool same_findings(const std::vector<CorrelationFinding>& a,
                   const std::vector<CorrelationFinding>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].candidate != b[i].candidate) return false;
        if (a[i].receipts_matched != b[i].receipts_matched) return false;
        if (a[i].score != b[i].score) return false;
        if (a[i].matches.size() != b[i].matches.size()) return false;
        for (std::size_t k = 0; k < a[i].matches.size(); ++k) {
            if (a[i].matches[k].receipt_index != b[i].matches[k].receipt_index) return false;
            if (a[i].matches[k].monitor != b[i].matches[k].monitor) return false;
            if (a[i].matches[k].event_index != b[i].matches[k].event_index) return false;
        }
    }
    return true;
}

}  // namespace

// ==================== channel directory ====================

TEST_CASE("the upstream peer is the far endpoint of the inbound channel") {
    const ChannelDirectory dir = star_directory();
    CHECK(dir.upstream_peer(1, 2) == NodeId("up"));
    CHECK(dir.upstream_peer(2, 1) == NodeId("down"));  // reversed flow
    ChannelDirectory disjoint;
    disjoint.endpoints[1] = {"a", "b"};
    disjoint.endpoints[2] = {"c", "d"};
    CHECK_FALSE(disjoint.upstream_peer(1, 2).has_value());
    CHECK_FALSE(dir.upstream_peer(1, 99).has_value());
}

// ==================== matching semantics ====================

TEST_CASE("correlation with nothing to match yields no findings") {
    const ChannelDirectory dir = star_directory();
    CHECK(correlate({}, {{"mon", {make_event(1, 1, 2, 100)}}}, dir).empty());
    CHECK(correlate({{1, 100}}, {}, dir).empty());
    CHECK(correlate({{1, 100}}, {{"mon", {}}}, dir).empty());
}

TEST_CASE("amount and time windows are inclusive on both ends") {
    const ChannelDirectory dir = star_directory();
    const std::vector<Receipt> receipts = {{100'000'000'000, 100}};
    const CorrelationParams params{10.0, 8};

    const auto hits = [&](const ForwardingEvent& ev) {
        const auto f = correlate(receipts, {{"mon", {ev}}}, dir, params);
        return !f.empty() && f.front().receipts_matched == 1;
    };

    CHECK(hits(make_event(100'000'000'000, 1, 2, 100)));  // exact time, exact amount
    CHECK(hits(make_event(90'000'000'000, 1, 2, 108)));   // window floor, amount ceiling
    CHECK_FALSE(hits(make_event(89'999'999'999, 1, 2, 100)));  // 1 ns too early
    CHECK_FALSE(hits(make_event(100'000'000'001, 1, 2, 100))); // after the receipt
    CHECK_FALSE(hits(make_event(95'000'000'000, 1, 2, 99)));   // below the amount
    CHECK_FALSE(hits(make_event(95'000'000'000, 1, 2, 109)));  // over the tolerance
}

TEST_CASE("scores are matched-receipt fractions and ties sort by name") {
    ChannelDirectory dir;
    dir.endpoints[1] = {"xavier", "m1"};
    dir.endpoints[2] = {"m1", "sink"};
    dir.endpoints[3] = {"yann", "m2"};
    dir.endpoints[4] = {"m2", "sink"};
    dir.endpoints[5] = {"zoe", "m3"};
    dir.endpoints[6] = {"m3", "sink"};

    const std::vector<Receipt> receipts = {{10'000'000'000, 50}, {20'000'000'000, 60}};
    MonitorLogs monitors;
    monitors["m1"] = {make_event(9'000'000'000, 1, 2, 50), make_event(19'000'000'000, 1, 2, 60)};
    monitors["m2"] = {make_event(19'500'000'000, 3, 4, 61)};
    monitors["m3"] = {make_event(9'500'000'000, 5, 6, 51)};

    const auto findings = correlate(receipts, monitors, dir);
    REQUIRE(findings.size() == 3);
    CHECK(findings[0].candidate == "xavier");
    CHECK(findings[0].receipts_matched == 2);
    CHECK(findings[0].score == 1.0);
    CHECK(findings[1].candidate == "yann");   // 0.5, before zoe by name
    CHECK(findings[2].candidate == "zoe");
    CHECK(findings[1].score == 0.5);
    CHECK(findings[2].score == 0.5);
}

TEST_CASE("several events for one receipt count the receipt once") {
    const ChannelDirectory dir = star_directory();
    const std::vector<Receipt> receipts = {{10'000'000'000, 100}};
    MonitorLogs monitors;
    monitors["mon"] = {make_event(8'000'000'000, 1, 2, 100),
                       make_event(9'000'000'000, 1, 2, 101)};
    const auto findings = correlate(receipts, monitors, dir);
    REQUIRE(findings.size() == 1);
    CHECK(findings.front().receipts_matched == 1);
    CHECK(findings.front().score == 1.0);
    CHECK(findings.front().matches.size() == 2);
}

TEST_CASE("the parallel kernel agrees with the serial reference on random input") {
    Rng rng(77);
    ChannelDirectory dir;
    MonitorLogs monitors;
    std::vector<NodeId> monitor_names;
    ChannelId next = 1;
    for (int m = 0; m < 4; ++m) {
        const NodeId mon = "mon" + std::to_string(m);
        monitor_names.push_back(mon);
        for (int u = 0; u < 3; ++u) {
            dir.endpoints[next] = {"up" + std::to_string(m) + "_" + std::to_string(u), mon};
            ++next;
        }
        dir.endpoints[next] = {mon, "down" + std::to_string(m)};
        ++next;
    }

    std::vector<Receipt> receipts;
    for (int i = 0; i < 300; ++i)
        receipts.push_back({static_cast<TimeNs>(rng.next_below(200) * 1'000'000'000ULL),
                            static_cast<Sat>(50 + rng.next_below(100))});
    for (int m = 0; m < 4; ++m) {
        auto& log = monitors[monitor_names[static_cast<std::size_t>(m)]];
        const ChannelId base = static_cast<ChannelId>(m) * 4 + 1;
        for (int e = 0; e < 700; ++e) {
            const ChannelId in = base + static_cast<ChannelId>(rng.next_below(3));
            log.push_back(make_event(static_cast<TimeNs>(rng.next_below(200) * 1'000'000'000ULL),
                                     in, base + 3, static_cast<Sat>(50 + rng.next_below(100))));
        }
    }

    const auto parallel = correlate(receipts, monitors, dir);
    const auto serial = correlate_reference(receipts, monitors, dir);
    CHECK_FALSE(parallel.empty());
    CHECK(same_findings(parallel, serial));
}

// ==================== end-to-end observation ====================

TEST_CASE("a monitor one hop out exposes the origin; further out blames a relay") {
    Network net;
    net.add_node("bm", NodeRole::botmaster, 2'000'000);
    net.add_node("r1", NodeRole::relay, 2'000'000, true);
    net.add_node("r2", NodeRole::relay, 2'000'000, true);
    net.add_node("srv", NodeRole::cnc_server, 2'000'000);
    net.open_channel("bm", "r1", 500'000);
    net.open_channel("r1", "r2", 500'000);
    net.open_channel("r2", "srv", 500'000);

    Rng rng(5);
    PaymentEngine engine(net, rng);
    std::vector<Receipt> receipts;
    engine.set_receive_hook(
        [&](const NodeId&, Sat amount, TimeNs at) { receipts.push_back({at, amount}); });
    for (Sat amt : {100, 101, 102})
        REQUIRE(engine.send_keysend("bm", Network::pubkey_for("srv"), amt).success);

    const ChannelDirectory dir = ChannelDirectory::from_network(net);

    MonitorLogs adjacent{{"r1", engine.forwarding_history("r1")}};
    const auto exposed = correlate(receipts, adjacent, dir);
    REQUIRE_FALSE(exposed.empty());
    CHECK(exposed.front().candidate == "bm");
    CHECK(exposed.front().score == 1.0);
    const DetectionMetrics dm = detection_metrics("bm", exposed);
    CHECK(dm.rank_of_truth == 1);

    MonitorLogs removed{{"r2", engine.forwarding_history("r2")}};
    const auto blamed = correlate(receipts, removed, dir);
    REQUIRE_FALSE(blamed.empty());
    CHECK(blamed.front().candidate == "r1");
    CHECK_FALSE(detection_metrics("bm", blamed).rank_of_truth.has_value());
}

// ==================== detection metrics ====================

TEST_CASE("detection metrics report rank and score margin of the true origin") {
    std::vector<CorrelationFinding> findings(3);
    findings[0].candidate = "bm";
    findings[0].score = 0.9;
    findings[1].candidate = "r7";
    findings[1].score = 0.4;
    findings[2].candidate = "r2";
    findings[2].score = 0.1;

    const DetectionMetrics top = detection_metrics("bm", findings);
    CHECK(top.rank_of_truth == 1);
    CHECK(top.score_margin == doctest::Approx(0.5));

    const DetectionMetrics mid = detection_metrics("r7", findings);
    CHECK(mid.rank_of_truth == 2);
    CHECK(mid.score_margin == doctest::Approx(-0.5));

    const DetectionMetrics absent = detection_metrics("ghost", findings);
    CHECK_FALSE(absent.rank_of_truth.has_value());
    CHECK(absent.score_margin == 0.0);
}

// ==================== poisoning ====================

TEST_CASE("poison injections respect their trigger and fire exactly once") {
    Network net;
    net.add_node("attacker", NodeRole::relay, 2'000'000, true);
    net.add_node("srv", NodeRole::cnc_server, 2'000'000);
    net.open_channel("attacker", "srv", 100'000);
    Rng rng(3);
    PaymentEngine engine(net, rng);

    PoisonInjection now;
    now.attacker = "attacker";
    now.target_pubkey = Network::pubkey_for("srv");
    now.amount_sat = 3;
    CHECK(maybe_fire_poison(now, engine, false));
    CHECK(now.fired);
    CHECK(now.result.success);
    CHECK_FALSE(maybe_fire_poison(now, engine, true));  // never twice

    PoisonInjection waiting;
    waiting.attacker = "attacker";
    waiting.target_pubkey = Network::pubkey_for("srv");
    waiting.amount_sat = 2;
    waiting.trigger = PoisonInjection::Trigger::when_receiving;
    CHECK_FALSE(maybe_fire_poison(waiting, engine, false));
    CHECK_FALSE(waiting.fired);
    CHECK(maybe_fire_poison(waiting, engine, true));
    CHECK(waiting.fired);
}

// ==================== log serialization ====================

TEST_CASE("forwarding logs expose exactly the six local-database fields") {
    const std::vector<ForwardingEvent> events = {make_event(1'400'000'000, 3, 9, 103),
                                                 make_event(2'800'000'000, 9, 3, 55, 2)};
    std::ostringstream out;
    write_forwarding_log(out, events);

    std::istringstream lines(out.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        REQUIRE(j.size() == 6);
        for (const char* key : {"timestamp", "chan_id_in", "chan_id_out", "amt_in", "amt_out", "fee"})
            CHECK(j.contains(key));
        ++n;
    }
    CHECK(n == 2);

    std::istringstream in(out.str());
    const auto back = read_forwarding_log(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].timestamp_ns == 1'400'000'000);
    CHECK(back[0].chan_id_in == 3);
    CHECK(back[0].chan_id_out == 9);
    CHECK(back[0].amt_in_sat == 104);
    CHECK(back[0].amt_out_sat == 103);
    CHECK(back[0].fee_sat == 1);
    CHECK(back[1].fee_sat == 2);
}

TEST_CASE("receipts and channel directories survive a round trip") {
    const std::vector<Receipt> receipts = {{7'000'000'000, 115}, {14'000'000'000, 5}};
    std::ostringstream rout;
    write_receipts(rout, receipts);
    std::istringstream rin(rout.str());
    const auto rback = read_receipts(rin);
    REQUIRE(rback.size() == 2);
    CHECK(rback[0].timestamp_ns == 7'000'000'000);
    CHECK(rback[0].amount_sat == 115);
    CHECK(rback[1].amount_sat == 5);

    ChannelDirectory dir;
    dir.endpoints[4] = {"alpha", "beta"};
    dir.endpoints[9] = {"gamma", "delta"};
    std::ostringstream dout;
    write_channel_directory(dout, dir);
    std::istringstream din(dout.str());
    const ChannelDirectory dback = read_channel_directory(din);
    REQUIRE(dback.endpoints.size() == 2);
    CHECK(dback.endpoints.at(4) == std::make_pair(NodeId("alpha"), NodeId("beta")));
    CHECK(dback.endpoints.at(9) == std::make_pair(NodeId("gamma"), NodeId("delta")));
}

TEST_CASE("findings, sessions and decoded frames serialize as one object per line") {
    std::vector<CorrelationFinding> findings(1);
    findings[0].candidate = "up";
    findings[0].receipts_matched = 3;
    findings[0].score = 0.75;
    findings[0].matches.push_back({0, "mon", 2});
    std::ostringstream fout;
    write_findings(fout, findings);
    const auto fj = nlohmann::json::parse(fout.str());
    CHECK(fj["candidate"] == "up");
    CHECK(fj["score"] == 0.75);
    CHECK(fj["matched_pairs"] == 1);

    std::vector<SendSession> sessions(1);
    sessions[0].target = "srv";
    sessions[0].command = "hi";
    sessions[0].state = SessionState::completed;
    sessions[0].payments_sent = 4;
    std::ostringstream sout;
    write_sessions(sout, sessions);
    const auto sj = nlohmann::json::parse(sout.str());
    CHECK(sj["target"] == "srv");
    CHECK(sj["state"] == "completed");

    std::vector<DecodedEntry> decoded(2);
    decoded[0].ok = true;
    decoded[0].text = "hi";
    decoded[1].ok = false;
    decoded[1].error = DecodeErrorKind::incomplete_code;
    std::ostringstream dout;
    write_decoded(dout, decoded);
    std::istringstream dlines(dout.str());
    std::string line;
    REQUIRE(std::getline(dlines, line));
    CHECK(nlohmann::json::parse(line)["command"] == "hi");
    REQUIRE(std::getline(dlines, line));
    CHECK(nlohmann::json::parse(line)["error"] == "incomplete_code");
}

TEST_CASE("text file helpers write and read back verbatim") {
    const auto path = std::filesystem::temp_directory_path() / "lnsim_logio_test.txt";
    write_text_file(path.string(), "line1\nline2\n");
    CHECK(slurp_file(path.string()) == "line1\nline2\n");
    CHECK_THROWS_AS(slurp_file("/no/such/lnsim/file"), SimError);
    std::filesystem::remove(path);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "lnsim/payment.hpp"

using namespace lnsim;

namespace {

// bm - r1 - r2 - r3 - r4 - srv, each channel funded by its left endpoint
struct ChainSim {
    Network net;
    Rng rng{42};
    std::vector<ChannelId> chans;
    PaymentEngine engine{net, rng};

    ChainSim() {
        const std::vector<NodeId> order = {"bm", "r1", "r2", "r3", "r4", "srv"};
        net.add_node("bm", NodeRole::botmaster, 2'000'000);
        for (int i = 1; i <= 4; ++i)
            net.add_node("r" + std::to_string(i), NodeRole::relay, 2'000'000, true);
        net.add_node("srv", NodeRole::cnc_server, 2'000'000);
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            chans.push_back(net.open_channel(order[i], order[i + 1], 500'000));
    }

    std::map<ChannelId, std::pair<Msat, Msat>> balances() const {
        std::map<ChannelId, std::pair<Msat, Msat>> out;
        for (const auto& [cid, ch] : net.channels())
            out[cid] = {ch.balance_a_msat, ch.balance_b_msat};
        return out;
    }
};

}  // namespace

// ==================== hash locks ====================

TEST_CASE("hash locks verify their own preimage and nothing else") {
    Rng rng(1);
    HtlcLock lock = HtlcLock::generate(rng);
    CHECK(lock.verify());
    lock.preimage[7] ^= 0x01;
    CHECK_FALSE(lock.verify());

    Rng again(1);
    const HtlcLock replay = HtlcLock::generate(again);
    lock.preimage[7] ^= 0x01;  // undo the tamper
    CHECK(replay.preimage == lock.preimage);
}

// ==================== settlement ====================

TEST_CASE("a five-edge payment settles every balance and logs four forwards") {
    ChainSim sim;
    const Sat conserved = sim.net.conservation_total_sat();
    const PaymentResult res =
        sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);

    REQUIRE(res.success);
    CHECK(res.route_length_hops == 4);
    CHECK(res.total_fee_msat == 4'000);
    CHECK(res.latency_s == 7.0);  // default deterministic model
    CHECK(res.settled_at_ns == 7'000'000'000);
    CHECK(sim.net.conservation_total_sat() == conserved);

    // sender debited amount + fees, receiver credited the amount, each relay
    // retains its 1 sat fee
    CHECK(sim.net.channel(sim.chans[0]).balance_a_msat == 500'000'000 - 104'000);
    CHECK(sim.net.channel(sim.chans[0]).balance_b_msat == 104'000);
    CHECK(sim.net.channel(sim.chans[4]).balance_b_msat == 100'000);

    for (const char* quiet : {"bm", "srv"})
        CHECK(sim.engine.forwarding_history(quiet).empty());

    const Sat amt_in[] = {104, 103, 102, 101};
    TimeNs prev_ts = 0;
    for (int i = 1; i <= 4; ++i) {
        const auto& hist = sim.engine.forwarding_history("r" + std::to_string(i));
        REQUIRE(hist.size() == 1);
        const ForwardingEvent& ev = hist.front();
        CHECK(ev.chan_id_in == sim.chans[i - 1]);
        CHECK(ev.chan_id_out == sim.chans[i]);
        CHECK(ev.amt_in_sat == amt_in[i - 1]);
        CHECK(ev.amt_out_sat == amt_in[i - 1] - 1);
        CHECK(ev.fee_sat == 1);
        CHECK(ev.timestamp_ns > prev_ts);
        CHECK(ev.timestamp_ns < res.settled_at_ns);
        prev_ts = ev.timestamp_ns;
    }
}

TEST_CASE("payment log records fee attribution per intermediary") {
    ChainSim sim;
    sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    REQUIRE(sim.engine.payment_log().size() == 1);
    const PaymentLogEntry& entry = sim.engine.payment_log().front();
    CHECK(entry.seq == 1);
    CHECK(entry.src == "bm");
    CHECK(entry.dst == "srv");
    CHECK(entry.success);
    REQUIRE(entry.intermediary_fees.size() == 4);
    Msat sum = 0;
    for (int i = 0; i < 4; ++i) {
        CHECK(entry.intermediary_fees[i].first == "r" + std::to_string(i + 1));
        sum += entry.intermediary_fees[i].second;
    }
    CHECK(sum == entry.total_fee_msat);
}

// ==================== failure paths ====================

TEST_CASE("a doomed payment rolls back without a trace, then the retry lands") {
    ChainSim sim;
    FailureSchedule sched;
    sched.fail_payments = {1};
    sim.engine.set_failure_schedule(sched);

    const auto before = sim.balances();
    const PaymentResult fail = sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK_FALSE(fail.success);
    CHECK(fail.failure_reason == PaymentFailure::injected_failure);
    CHECK(sim.balances() == before);  // atomic: nothing moved
    CHECK(sim.engine.now_ns() == 7'000'000'000);  // the attempt still took time
    for (int i = 1; i <= 4; ++i)
        CHECK(sim.engine.forwarding_history("r" + std::to_string(i)).empty());

    const PaymentResult retry = sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK(retry.success);
    CHECK(sim.engine.now_ns() == 14'000'000'000);

    REQUIRE(sim.engine.payment_log().size() == 2);
    CHECK_FALSE(sim.engine.payment_log()[0].success);
    CHECK(sim.engine.payment_log()[0].failure == PaymentFailure::injected_failure);
    CHECK(sim.engine.payment_log()[1].success);
}

TEST_CASE("an offline destination fails instantly") {
    ChainSim sim;
    sim.net.node("srv").online = false;
    const PaymentResult res = sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK_FALSE(res.success);
    CHECK(res.failure_reason == PaymentFailure::destination_offline);
    CHECK(sim.engine.now_ns() == 1);  // local knowledge, no network flight
    CHECK(sim.engine.payments_attempted() == 0);
    CHECK(sim.engine.payment_log().size() == 1);
}

TEST_CASE("routing failures surface through the payment result") {
    ChainSim sim;
    sim.net.close_channel(sim.chans[2], "r3");
    const PaymentResult res = sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK_FALSE(res.success);
    CHECK(res.failure_reason == PaymentFailure::no_route);

    ChainSim drained;
    drained.net.set_channel_split(drained.chans[1], 0);  // r1 cannot push forward
    const PaymentResult dry = drained.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK_FALSE(dry.success);
    CHECK(dry.failure_reason == PaymentFailure::insufficient_capacity);
}

TEST_CASE("a certain per-hop failure chance kills every attempt atomically") {
    ChainSim sim;
    FailureSchedule sched;
    sched.hop_failure_prob = 1.0;
    sim.engine.set_failure_schedule(sched);
    const auto before = sim.balances();
    for (int i = 0; i < 3; ++i) {
        const PaymentResult res = sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
        CHECK_FALSE(res.success);
        CHECK(res.failure_reason == PaymentFailure::injected_failure);
    }
    CHECK(sim.balances() == before);
}

TEST_CASE("bad requests are rejected before anything happens") {
    ChainSim sim;
    CHECK_THROWS_AS(sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 0), SimError);
    CHECK_THROWS_AS(sim.engine.send_keysend("bm", "pk:who", 100), SimError);
    sim.net.node("bm").online = false;
    CHECK_THROWS_AS(sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100), SimError);
}

// ==================== latency models ====================

TEST_CASE("latency model constructors validate their arguments") {
    CHECK_THROWS_AS(LatencyModel::deterministic(-1.0), SimError);
    CHECK_THROWS_AS(LatencyModel::uniform(-1.0, 5.0), SimError);
    CHECK_THROWS_AS(LatencyModel::uniform(5.0, 4.0), SimError);
    CHECK_THROWS_AS(LatencyModel::empirical({}), SimError);
    CHECK_THROWS_AS(LatencyModel::empirical({3.0, -0.5}), SimError);
    CHECK_THROWS_AS(LatencyModel::empirical_from_file("/no/such/file"), SimError);
}

TEST_CASE("uniform latency stays inside its half-open range") {
    Rng rng(9);
    const LatencyModel m = LatencyModel::uniform(4.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double v = m.sample(rng);
        CHECK(v >= 4.0);
        CHECK(v < 10.0);
    }
}

TEST_CASE("empirical latency draws only listed samples, file comments ignored") {
    const auto path = std::filesystem::temp_directory_path() / "lnsim_latency_test.txt";
    {
        std::ofstream out(path);
        out << "# measured settle times, seconds\n";
        out << "5.5 6.25\n";
        out << "8.0   # tail\n";
    }
    const LatencyModel m = LatencyModel::empirical_from_file(path.string());
    REQUIRE(m.samples_s == std::vector<double>{5.5, 6.25, 8.0});
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double v = m.sample(rng);
        CHECK((v == 5.5 || v == 6.25 || v == 8.0));
    }
    std::filesystem::remove(path);
}

TEST_CASE("the engine clock follows the sampled latency") {
    ChainSim sim;
    sim.engine.set_latency_model(LatencyModel::deterministic(2.5));
    sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK(sim.engine.now_ns() == 2'500'000'000);
    CHECK_THROWS_AS(sim.engine.advance_clock(-1), SimError);
}

// ==================== receive hook ====================

TEST_CASE("the receive hook fires on settlement only") {
    ChainSim sim;
    int calls = 0;
    sim.engine.set_receive_hook([&](const NodeId& dest, Sat amount, TimeNs at) {
        ++calls;
        CHECK(dest == "srv");
        CHECK(amount == 100);
        CHECK(at == sim.engine.now_ns());
    });

    FailureSchedule sched;
    sched.fail_payments = {1};
    sim.engine.set_failure_schedule(sched);
    sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);  // doomed
    CHECK(calls == 0);
    sim.engine.send_keysend("bm", Network::pubkey_for("srv"), 100);
    CHECK(calls == 1);
}

// ==================== determinism ====================

TEST_CASE("identical seeds replay an identical payment history") {
    const auto run = [](std::uint64_t seed) {
        Network net;
        net.add_node("a", NodeRole::relay, 10'000'000, true);
        net.add_node("m", NodeRole::relay, 10'000'000, true);
        net.add_node("b", NodeRole::relay, 10'000'000, true);
        net.open_channel("a", "m", 1'000'000);
        net.open_channel("m", "b", 1'000'000);
        Rng rng(seed);
        PaymentEngine engine(net, rng);
        engine.set_latency_model(LatencyModel::uniform(4.0, 10.0));
        FailureSchedule sched;
        sched.hop_failure_prob = 0.25;
        engine.set_failure_schedule(sched);
        std::vector<std::tuple<bool, Msat, double, TimeNs>> trace;
        for (int i = 0; i < 40; ++i) {
            const PaymentResult r = engine.send_keysend("a", Network::pubkey_for("b"), 50);
            trace.emplace_back(r.success, r.total_fee_msat, r.latency_s, r.settled_at_ns);
        }
        return trace;
    };
    CHECK(run(1234) == run(1234));
    CHECK(run(1234) != run(4321));
}

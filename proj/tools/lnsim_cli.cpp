// lnsim — run covert-channel scenarios, encode commands, replay the
// detection analysis over exported logs, and replicate the reference cost
// tables.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lnsim/harness.hpp"
#include "lnsim/logio.hpp"

namespace {

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
    lnsim::Scenario sc = lnsim::Scenario::parse_file(scenario_path);
    if (seed) sc.seed = *seed;
    const lnsim::Report rep = lnsim::run_scenario(sc, out_dir);
    std::cout << rep.to_text();
    if (!out_dir.empty()) std::cout << "\nartifacts written to " << out_dir << "\n";
    return rep.audit.identity_holds ? 0 : 2;
}

int cmd_replicate(const std::string& out_file) {
    const lnsim::ReferenceCheck check = lnsim::replicate_reference_tables();
    std::cout << check.to_text();
    if (!out_file.empty()) lnsim::write_text_file(out_file, check.to_text());
    return check.all_match ? 0 : 1;
}

int cmd_encode(const std::string& text, const std::string& scheme_name,
               const std::string& codebook_path) {
    lnsim::EncodingScheme scheme = lnsim::EncodingScheme::ascii();
    if (scheme_name == "huffman") {
        scheme = codebook_path.empty()
                     ? lnsim::EncodingScheme::huffman(lnsim::Codebook::default_quaternary())
                     : lnsim::EncodingScheme::huffman(lnsim::Codebook::load_file(codebook_path));
    } else if (scheme_name != "ascii") {
        std::cerr << "unknown scheme: " << scheme_name << "\n";
        return 1;
    }
    const std::vector<lnsim::Sat> payload = lnsim::encode(text, scheme);
    const std::vector<lnsim::Sat> framed = lnsim::frame(payload);
    std::cout << "amounts:";
    for (lnsim::Sat a : framed) std::cout << " " << a;
    std::cout << "\npayments: " << payload.size() << " payload, " << framed.size() << " framed\n";
    std::cout << "cost: " << lnsim::sequence_cost(payload) << " sat payload, "
              << lnsim::sequence_cost(framed) << " sat framed\n";
    return 0;
}

int cmd_correlate(const std::string& receipts_path, const std::vector<std::string>& monitor_args,
                  const std::string& channels_path, double window_s, lnsim::Sat fee_tolerance) {
    std::ifstream rin(receipts_path);
    if (!rin) throw lnsim::SimError("cannot open " + receipts_path);
    const std::vector<lnsim::Receipt> receipts = lnsim::read_receipts(rin);

    std::ifstream cin_(channels_path);
    if (!cin_) throw lnsim::SimError("cannot open " + channels_path);
    const lnsim::ChannelDirectory dir = lnsim::read_channel_directory(cin_);

    lnsim::MonitorLogs logs;
    for (const std::string& arg : monitor_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw lnsim::SimError("monitor log must be <node>=<path>: " + arg);
        std::ifstream min(arg.substr(eq + 1));
        if (!min) throw lnsim::SimError("cannot open " + arg.substr(eq + 1));
        logs[arg.substr(0, eq)] = lnsim::read_forwarding_log(min);
    }

    lnsim::CorrelationParams params;
    params.window_s = window_s;
    params.fee_tolerance_sat = fee_tolerance;
    const auto findings = lnsim::correlate(receipts, logs, dir, params);
    if (findings.empty()) {
        std::cout << "no candidates\n";
        return 0;
    }
    for (const lnsim::CorrelationFinding& f : findings)
        std::cout << f.candidate << " score " << f.score << " (" << f.receipts_matched << "/"
                  << receipts.size() << " receipts, " << f.matches.size() << " event pairs)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"payment-channel covert-channel simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir;
    std::optional<std::uint64_t> seed;
    CLI::App* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_dir, "directory for report + artifact logs");

    std::string replicate_out;
    CLI::App* replicate =
        app.add_subcommand("replicate-tables", "re-derive the reference cost/latency tables");
    replicate->add_option("--out", replicate_out, "also write the comparison to this file");

    std::string text, scheme_name = "ascii", codebook_path;
    CLI::App* enc = app.add_subcommand("encode", "show the payment amounts for a command");
    enc->add_option("text", text, "command text")->required();
    enc->add_option("--scheme", scheme_name, "ascii or huffman");
    enc->add_option("--codebook", codebook_path, "codebook file for the huffman scheme");

    std::string receipts_path, channels_path;
    std::vector<std::string> monitor_args;
    double window_s = 10.0;
    lnsim::Sat fee_tolerance = 8;
    CLI::App* cor = app.add_subcommand("correlate", "timing correlation over exported logs");
    cor->add_option("receipts", receipts_path, "receipts log of the compromised server")->required();
    cor->add_option("monitors", monitor_args, "monitor logs as <node>=<path>")->required();
    cor->add_option("--channels", channels_path, "channel directory export")->required();
    cor->add_option("--window", window_s, "correlation window in seconds");
    cor->add_option("--fee-tolerance", fee_tolerance, "amount slack in satoshi");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, seed, out_dir);
        if (replicate->parsed()) return cmd_replicate(replicate_out);
        if (enc->parsed()) return cmd_encode(text, scheme_name, codebook_path);
        if (cor->parsed())
            return cmd_correlate(receipts_path, monitor_args, channels_path, window_s,
                                 fee_tolerance);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

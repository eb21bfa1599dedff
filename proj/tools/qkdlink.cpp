// qkdlink: experiment runner for the simulated fiber QKD link.
//
//   run            simulate one session and print its report
//   sweep          vary one numeric config key, one run per value
//   calibrate-rng  exercise the delay-line entropy source end to end
//   serve          host the sifting exchange (Alice side)
//   connect        join a hosted exchange (Bob side)
//
// Exit codes: 0 success, 1 usage/config error, 2 protocol/session failure.

#include "qkd/config.hpp"
#include "qkd/errors.hpp"
#include "qkd/metrics.hpp"
#include "qkd/runner.hpp"
#include "qkd/transport.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

struct CommonOpts {
    std::string preset = "ideal";
    std::string config_path;
    std::optional<std::uint64_t> gates;
    std::optional<std::uint64_t> seed;
    bool constant_key = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--preset", opts.preset, "Named base configuration (ideal, paper30)");
    cmd->add_option("--config", opts.config_path, "key=value file applied over the preset");
    cmd->add_option("--gates", opts.gates, "Override the number of gates");
    cmd->add_option("--seed", opts.seed, "Override the run seed");
    cmd->add_flag("--constant-key", opts.constant_key,
                  "Fixed zero-phase-difference pattern instead of random symbols");
}

qkd::Config build_config(const CommonOpts& opts) {
    qkd::Config cfg = qkd::preset(opts.preset);
    if (!opts.config_path.empty()) {
        cfg = qkd::load_config_file(opts.config_path, cfg);
    }
    if (opts.gates) cfg.n_gates = *opts.gates;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.constant_key) cfg.constant_key = true;
    cfg.validate();
    return cfg;
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw qkd::ConfigError("cannot open output file '" + out_path + "'");
    }
    out << text;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& spec) {
    std::size_t colon = spec.rfind(':');
    if (colon == std::string::npos || colon + 1 == spec.size()) {
        throw qkd::ConfigError("expected HOST:PORT, got '" + spec + "'");
    }
    std::string host = spec.substr(0, colon);
    std::string port_str = spec.substr(colon + 1);
    std::uint64_t port = 0;
    auto [ptr, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
    if (ec != std::errc() || ptr != port_str.data() + port_str.size() || port > 0xFFFF) {
        throw qkd::ConfigError("bad port in '" + spec + "'");
    }
    return {host, static_cast<std::uint16_t>(port)};
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void print_session(const char* role, const qkd::net::SessionResult& result) {
    std::cout << role << ": detected=" << result.detected << " sifted=" << result.sifted
              << " sampled=" << result.sampled << " key_bits=" << result.key.size()
              << '\n';
    if (result.qber_denominator > 0) {
        std::cout << role << ": qber_sample=" << result.qber_numerator << '/'
                  << result.qber_denominator << " = "
                  << qkd::metrics::format_double(*result.qber_sample) << '\n';
    } else {
        std::cout << role << ": qber_sample=undefined (empty sample)\n";
    }
    std::cout << role << ": key digest " << hex64(qkd::runner::key_digest(result.key))
              << '\n';
}

int cmd_run(const CommonOpts& common, const std::string& out_path,
            const std::string& format) {
    qkd::Config cfg = build_config(common);
    qkd::metrics::RunReport report = qkd::runner::run_once(cfg);
    std::vector<qkd::metrics::RunReport> one{report};
    std::string text =
        format == "jsonl" ? qkd::metrics::to_jsonl(one) : qkd::metrics::to_csv(one);
    write_output(text, out_path);
    return 0;
}

int cmd_sweep(const CommonOpts& common, const std::string& key,
              std::vector<double> values, const std::string& out_path) {
    qkd::Config cfg = build_config(common);
    if (values.empty()) {
        throw qkd::ConfigError("sweep: no values given");
    }
    auto rows = qkd::runner::sweep(cfg, key, values);
    write_output(qkd::runner::sweep_csv(key, rows), out_path);
    return 0;
}

int cmd_calibrate(const CommonOpts& common, const std::string& out_path) {
    qkd::Config cfg = build_config(common);
    qkd::runner::RngCalibration cal = qkd::runner::calibrate_rng(cfg);
    write_output(qkd::runner::tap_csv(cal.stats), out_path);

    std::cout << "chosen tap: " << cal.chosen_tap << '\n';
    if (cal.stuck_line) {
        std::cout << "warning: chosen tap never flips; harvest is deterministic\n";
    }
    std::cout << "harvested seed: " << hex64(cal.seed.value)
              << (cal.seed.substituted ? " (substituted fallback)" : "") << '\n';
    std::cout << "monobit: " << (cal.monobit.pass ? "pass" : "FAIL")
              << " (p=" << qkd::metrics::format_double(cal.monobit.p_value) << ")\n";
    std::cout << "runs: " << (cal.runs.pass ? "pass" : "FAIL")
              << " (p=" << qkd::metrics::format_double(cal.runs.p_value) << ")\n";
    return 0;
}

int cmd_serve(const CommonOpts& common, const std::string& listen_spec) {
    qkd::Config cfg = build_config(common);
    auto [host, port] = listen_spec.empty()
                            ? std::make_pair(cfg.host, cfg.port)
                            : split_host_port(listen_spec);
    qkd::net::TcpListener listener(host, port);
    // Flushed immediately so a scripted peer can read the chosen port
    // while this process blocks in accept.
    std::cout << "listening on " << host << ':' << listener.port() << std::endl;
    auto transport = listener.accept(std::chrono::milliseconds(cfg.timeout_ms));
    auto result = qkd::runner::run_alice_session(*transport, cfg);
    print_session("alice", result);
    return 0;
}

int cmd_connect(const CommonOpts& common, const std::string& connect_spec) {
    qkd::Config cfg = build_config(common);
    auto [host, port] = connect_spec.empty()
                            ? std::make_pair(cfg.host, cfg.port)
                            : split_host_port(connect_spec);
    auto transport =
        qkd::net::tcp_connect(host, port, std::chrono::milliseconds(cfg.timeout_ms));
    auto result = qkd::runner::run_bob_session(*transport, cfg);
    print_session("bob", result);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated BB84/QPSK fiber QKD link"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    std::string run_out;
    std::string run_format = "csv";
    CLI::App* run = app.add_subcommand("run", "Simulate one session and report it");
    add_common(run, run_opts);
    run->add_option("--out", run_out, "Write the report here instead of stdout");
    run->add_option("--format", run_format, "csv or jsonl")
        ->check(CLI::IsMember({"csv", "jsonl"}));

    CommonOpts sweep_opts;
    std::string sweep_key;
    std::vector<double> sweep_values;
    std::string sweep_out;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "One run per value of a numeric key");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--key", sweep_key, "Numeric config key to vary")->required();
    sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "Write the CSV here instead of stdout");

    CommonOpts cal_opts;
    std::string cal_out;
    CLI::App* cal = app.add_subcommand("calibrate-rng",
                                       "Sample the delay line, pick a tap, test the stream");
    add_common(cal, cal_opts);
    cal->add_option("--out", cal_out, "Write the per-tap CSV here instead of stdout");

    CommonOpts serve_opts;
    std::string listen_spec;
    CLI::App* serve = app.add_subcommand("serve", "Host one sifting session");
    add_common(serve, serve_opts);
    serve->add_option("--listen", listen_spec, "HOST:PORT to bind (default from config)");

    CommonOpts connect_opts;
    std::string connect_spec;
    CLI::App* connect = app.add_subcommand("connect", "Join a hosted sifting session");
    add_common(connect, connect_opts);
    connect->add_option("--connect", connect_spec, "HOST:PORT to reach (default from config)");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_opts, run_out, run_format);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep_key, sweep_values, sweep_out);
        if (cal->parsed()) return cmd_calibrate(cal_opts, cal_out);
        if (serve->parsed()) return cmd_serve(serve_opts, listen_spec);
        if (connect->parsed()) return cmd_connect(connect_opts, connect_spec);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const qkd::TimeoutError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const qkd::ProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const qkd::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qkd/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output; ///< stdout and stderr combined
};

std::string binary_path() {
#ifdef QKDLINK_BIN
    return QKDLINK_BIN;
#else
    const char* bin = std::getenv("QKDLINK_BIN");
    REQUIRE(bin != nullptr);
    return bin;
#endif
}

CommandResult run_command(const std::string& args) {
    std::string cmd = binary_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CommandResult result;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) {
        result.output.append(buf, n);
    }
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string scratch_dir() {
    static std::string dir = [] {
        char tmpl[] = "/tmp/qkdlink_cli_XXXXXX";
        const char* made = mkdtemp(tmpl);
        REQUIRE(made != nullptr);
        return std::string(made);
    }();
    return dir;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

std::size_t count_lines(const std::string& text) {
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    return lines;
}

// Extracts the value after `label` on the first line containing it.
std::string field_after(const std::string& output, const std::string& label) {
    std::size_t pos = output.find(label);
    REQUIRE(pos != std::string::npos);
    pos += label.size();
    std::size_t end = output.find_first_of(" \n", pos);
    return output.substr(pos, end - pos);
}

} // namespace

TEST_CASE("run reports one clean session as CSV") {
    CommandResult res = run_command("run --preset ideal --gates 20000 --seed 9");
    REQUIRE(res.exit_code == 0);
    auto reports = qkd::metrics::parse_csv(res.output);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].seed == 9);
    CHECK(reports[0].n_gates == 20000);
    CHECK(reports[0].detected_fraction > 0.0);
    REQUIRE(reports[0].qber.has_value());
    CHECK(*reports[0].qber == 0.0);
    CHECK_FALSE(reports[0].false_count.has_value()); // random pattern
}

TEST_CASE("identical invocations produce identical bytes") {
    std::string args = "run --preset ideal --gates 15000 --seed 31 --constant-key";
    CommandResult a = run_command(args);
    CommandResult b = run_command(args);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.output == b.output);

    auto reports = qkd::metrics::parse_csv(a.output);
    REQUIRE(reports.size() == 1);
    // Constant pattern: false-count rate defined, exactly zero when ideal.
    REQUIRE(reports[0].false_count.has_value());
    CHECK(*reports[0].false_count == 0.0);
}

TEST_CASE("run emits JSON lines on request and agrees with CSV") {
    CommandResult csv = run_command("run --gates 12000 --seed 5");
    CommandResult jsonl = run_command("run --gates 12000 --seed 5 --format jsonl");
    REQUIRE(csv.exit_code == 0);
    REQUIRE(jsonl.exit_code == 0);
    auto from_csv = qkd::metrics::parse_csv(csv.output);
    auto from_jsonl = qkd::metrics::parse_jsonl(jsonl.output);
    REQUIRE(from_csv.size() == 1);
    REQUIRE(from_jsonl.size() == 1);
    CHECK(from_csv[0] == from_jsonl[0]);
}

TEST_CASE("run writes to a file when asked") {
    std::string out_path = scratch_dir() + "/report.csv";
    CommandResult res = run_command("run --gates 5000 --out " + out_path);
    REQUIRE(res.exit_code == 0);
    CHECK(res.output.empty());
    auto reports = qkd::metrics::parse_csv(read_file(out_path));
    CHECK(reports.size() == 1);
}

TEST_CASE("config files layer over the preset") {
    std::string cfg_path = scratch_dir() + "/override.cfg";
    write_file(cfg_path, "mu_key = 0.2\nseed = 77\n");
    CommandResult res = run_command("run --config " + cfg_path + " --gates 4000");
    REQUIRE(res.exit_code == 0);
    auto reports = qkd::metrics::parse_csv(res.output);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].channel.mu_key == 0.2);
    CHECK(reports[0].seed == 77);
    CHECK(reports[0].n_gates == 4000); // flag wins over file default
}

TEST_CASE("usage and configuration mistakes exit 1 with a reason") {
    CommandResult res = run_command("run --preset nope");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("unknown preset") != std::string::npos);

    std::string bad_cfg = scratch_dir() + "/bad.cfg";
    write_file(bad_cfg, "eta = 5\n");
    res = run_command("run --config " + bad_cfg);
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("eta") != std::string::npos);

    res = run_command("");
    CHECK(res.exit_code == 1);

    res = run_command("--help");
    CHECK(res.exit_code == 0);

    res = run_command("sweep --key host --values 1,2 --gates 1000");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("host") != std::string::npos);
}

TEST_CASE("sweeps emit one row per value") {
    CommandResult res = run_command(
        "sweep --key p_dark --values 0,0.002,0.02 --constant-key --gates 100000");
    REQUIRE(res.exit_code == 0);
    REQUIRE(count_lines(res.output) == 4);
    CHECK(res.output.rfind("p_dark,false_count_rate,qber\n", 0) == 0);

    // The dark-count knob drags the wrong-detector rate up from zero.
    std::istringstream lines(res.output);
    std::string line;
    std::getline(lines, line); // header
    double previous = -1.0;
    while (std::getline(lines, line)) {
        std::size_t c1 = line.find(',');
        std::size_t c2 = line.find(',', c1 + 1);
        double fcr = qkd::metrics::parse_double(line.substr(c1 + 1, c2 - c1 - 1));
        CHECK(fcr >= previous);
        previous = fcr;
    }
    CHECK(previous > 0.05);

    CommandResult single = run_command("sweep --key mu_key --values 0.1 --gates 2000");
    REQUIRE(single.exit_code == 0);
    CHECK(count_lines(single.output) == 2);
}

TEST_CASE("entropy calibration picks the peak tap and passes the gates") {
    std::string out_path = scratch_dir() + "/taps.csv";
    CommandResult res = run_command("calibrate-rng --preset ideal --out " + out_path);
    REQUIRE(res.exit_code == 0);
    CHECK(res.output.find("chosen tap: 16") != std::string::npos);
    CHECK(res.output.find("monobit: pass") != std::string::npos);
    CHECK(res.output.find("runs: pass") != std::string::npos);
    CHECK(res.output.find("harvested seed: 0x") != std::string::npos);
    CHECK(res.output.find("substituted") == std::string::npos);

    std::string csv = read_file(out_path);
    CHECK(csv.rfind("tap_index,samples,ones,flip_score\n", 0) == 0);
    CHECK(count_lines(csv) == 33); // header + one row per tap
}

namespace {

struct LoopbackResult {
    int serve_code = -1;
    int connect_code = -1;
    std::string serve_out;
    std::string connect_out;
};

// Hosts one session in the background, waits for the bound port to appear
// on its stdout, then joins it from a second process.
LoopbackResult run_loopback(const std::string& serve_args,
                            const std::string& connect_args, const char* tag) {
    std::string dir = scratch_dir();
    std::string script_path = dir + "/loopback_" + tag + ".sh";
    std::string serve_out = dir + "/serve_" + tag + ".out";
    std::string connect_out = dir + "/connect_" + tag + ".out";
    std::string codes = dir + "/codes_" + tag;

    std::ostringstream script;
    script << "#!/bin/bash\n"
           << "BIN='" << binary_path() << "'\n"
           << "\"$BIN\" serve --listen 127.0.0.1:0 " << serve_args << " > '" << serve_out
           << "' 2>&1 &\n"
           << "SPID=$!\n"
           << "PORT=\n"
           << "for i in $(seq 1 200); do\n"
           << "  PORT=$(sed -n 's/^listening on 127\\.0\\.0\\.1:\\([0-9]*\\)$/\\1/p' '"
           << serve_out << "' 2>/dev/null | head -1)\n"
           << "  [ -n \"$PORT\" ] && break\n"
           << "  if ! kill -0 $SPID 2>/dev/null; then break; fi\n"
           << "  sleep 0.05\n"
           << "done\n"
           << "if [ -z \"$PORT\" ]; then\n"
           << "  kill $SPID 2>/dev/null; wait $SPID 2>/dev/null\n"
           << "  echo \"3 3\" > '" << codes << "'\n"
           << "  exit 0\n"
           << "fi\n"
           << "\"$BIN\" connect --connect 127.0.0.1:$PORT " << connect_args << " > '"
           << connect_out << "' 2>&1\n"
           << "CRC=$?\n"
           << "wait $SPID\n"
           << "SRC=$?\n"
           << "echo \"$SRC $CRC\" > '" << codes << "'\n";
    write_file(script_path, script.str());

    int rc = std::system(("bash '" + script_path + "'").c_str());
    REQUIRE(rc == 0);

    LoopbackResult result;
    std::istringstream code_text(read_file(codes));
    code_text >> result.serve_code >> result.connect_code;
    result.serve_out = read_file(serve_out);
    result.connect_out = read_file(connect_out);
    return result;
}

} // namespace

TEST_CASE("serve and connect complete a loopback session with equal keys") {
    LoopbackResult res = run_loopback("--gates 20000 --seed 11", "--gates 20000 --seed 11",
                                      "ok");
    CAPTURE(res.serve_out);
    CAPTURE(res.connect_out);
    REQUIRE(res.serve_code == 0);
    REQUIRE(res.connect_code == 0);

    std::string alice_digest = field_after(res.serve_out, "key digest ");
    std::string bob_digest = field_after(res.connect_out, "key digest ");
    CHECK(alice_digest == bob_digest);
    CHECK(alice_digest.rfind("0x", 0) == 0);

    // Identical traces on both ends: the sample finds zero errors.
    CHECK(res.serve_out.find("alice: ") != std::string::npos);
    CHECK(res.connect_out.find("bob: ") != std::string::npos);
    std::string sampled = field_after(res.serve_out, "sampled=");
    CHECK(sampled != "0");
    CHECK(res.serve_out.find(" = 0\n") != std::string::npos);
}

TEST_CASE("a gate-count disagreement fails both endpoints") {
    LoopbackResult res = run_loopback("--gates 5000 --seed 12", "--gates 6000 --seed 12",
                                      "mismatch");
    CAPTURE(res.serve_out);
    CAPTURE(res.connect_out);
    CHECK(res.serve_code == 2);
    CHECK(res.connect_code == 2);
    CHECK(res.serve_out.find("error:") != std::string::npos);
    CHECK(res.connect_out.find("error:") != std::string::npos);
}

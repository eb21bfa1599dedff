#include "qkd/runner.hpp"

#include "qkd/errors.hpp"

#include <charconv>

namespace qkd::runner {

sim::GateTrace simulate(const Config& cfg) {
    cfg.validate();
    return sim::simulate_session(cfg.n_gates, cfg.channel, cfg.detector,
                                 cfg.alice_source(), cfg.bob_source(), cfg.seed);
}

metrics::RunReport run_once(const Config& cfg) {
    sim::GateTrace trace = simulate(cfg);
    std::optional<protocol::OutcomeClass> expected;
    if (cfg.constant_key) {
        // The constant pattern holds the phase difference at zero.
        expected = protocol::OutcomeClass::DeterministicD1;
    }
    return metrics::summarize(trace, cfg.channel, cfg.detector, cfg.seed, expected);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

std::vector<SweepRow> sweep(const Config& base, const std::string& key,
                            std::span<const double> values) {
    if (!is_numeric_key(key)) {
        throw ConfigError("sweep: '" + key + "' is not a numeric config key");
    }
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        Config cfg = base;
        apply_override(cfg, key, metrics::format_double(values[i]));
        cfg.seed = base.seed + i;
        metrics::RunReport report = run_once(cfg);
        SweepRow row;
        row.value = values[i];
        row.false_count = report.false_count;
        row.qber = report.qber;
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_csv(const std::string& key, std::span<const SweepRow> rows) {
    std::string out = key + ",false_count_rate,qber\n";
    for (const SweepRow& row : rows) {
        out += metrics::format_double(row.value);
        out += ',';
        if (row.false_count) out += metrics::format_double(*row.false_count);
        out += ',';
        if (row.qber) out += metrics::format_double(*row.qber);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entropy-source calibration
// ---------------------------------------------------------------------------

RngCalibration calibrate_rng(const Config& cfg, std::size_t n_words,
                             std::size_t n_test_bits) {
    cfg.validate();
    if (n_words == 0) {
        throw std::invalid_argument("calibrate_rng: need at least one sample word");
    }
    modem::DelayLine line = cfg.delay_line();
    RandomSource rng(cfg.seed);

    std::vector<std::vector<std::uint8_t>> words;
    words.reserve(n_words);
    for (std::size_t i = 0; i < n_words; ++i) {
        words.push_back(modem::sample_word(line, rng));
    }

    RngCalibration cal;
    cal.stats = modem::analyze_taps(words);
    cal.chosen_tap = modem::select_seed_tap(cal.stats);
    cal.stuck_line = line.tap_meta_prob[cal.chosen_tap] == 0.0;
    cal.seed = modem::harvest_seed(line, cal.chosen_tap, rng);

    modem::Xorshift64 prng(cal.seed.value);
    std::vector<std::uint8_t> bits = modem::prng_bitstream(prng, n_test_bits);
    cal.monobit = modem::monobit_test(bits);
    cal.runs = modem::runs_test(bits);
    return cal;
}

std::string tap_csv(std::span<const modem::TapStats> stats) {
    std::string out = "tap_index,samples,ones,flip_score\n";
    for (std::size_t i = 0; i < stats.size(); ++i) {
        char buf[24];
        auto [p1, e1] = std::to_chars(buf, buf + sizeof(buf), i);
        out.append(buf, p1);
        out += ',';
        auto [p2, e2] = std::to_chars(buf, buf + sizeof(buf), stats[i].samples);
        out.append(buf, p2);
        out += ',';
        auto [p3, e3] = std::to_chars(buf, buf + sizeof(buf), stats[i].ones);
        out.append(buf, p3);
        out += ',';
        out += metrics::format_double(stats[i].flip_score());
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sessions over a transport
// ---------------------------------------------------------------------------

net::SessionConfig session_config(const Config& cfg) {
    net::SessionConfig sc;
    sc.session_id = net::session_id_from_seed(cfg.seed);
    sc.n_gates = cfg.n_gates;
    sc.sample_rate = cfg.sample_rate;
    return sc;
}

net::SessionResult run_alice_session(net::Transport& transport, const Config& cfg) {
    sim::GateTrace trace = simulate(cfg);
    return net::run_alice(transport, session_config(cfg), net::alice_view(trace));
}

net::SessionResult run_bob_session(net::Transport& transport, const Config& cfg) {
    sim::GateTrace trace = simulate(cfg);
    return net::run_bob(transport, session_config(cfg), net::bob_view(trace));
}

std::uint64_t key_digest(const protocol::SiftedKey& key) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (std::size_t i = 0; i < key.size(); ++i) {
        mix(static_cast<std::uint8_t>(key.bits[i]));
        std::uint64_t g = key.source_gates[i];
        for (int shift = 0; shift < 64; shift += 8) {
            mix(static_cast<std::uint8_t>(g >> shift));
        }
    }
    return h;
}

} // namespace qkd::runner

#pragma once

// Flat key=value configuration covering the whole link: channel, detectors,
// delay-line profile, buffer rates, session and network settings. Unknown
// keys are rejected by name; embedded invariants are enforced on load.

#include "qkd/channel.hpp"
#include "qkd/modem.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qkd {

struct Config {
    sim::ChannelParams channel;
    sim::DetectorParams detector;

    // Entropy source profile (triangular, see DelayLine::triangular).
    std::size_t taps = 32;
    double segment_delay_ps = 25.0;
    std::size_t peak_tap = 16;
    double peak_prob = 0.5;
    double tap_half_width = 4.0;

    // Rate-decoupling buffer.
    std::size_t buffer_capacity = 4096;
    double producer_bps = 200.0e6;
    double consumer_bps = 4.0e6;

    // Session.
    std::uint64_t n_gates = 100000;
    std::uint64_t seed = 1;
    /// Constant (bit 0, basis B1) against Bob basis B1 -- the fixed
    /// zero-phase-difference pattern used for false-count measurements.
    bool constant_key = false;
    double sample_rate = 0.10;

    // Network demo.
    std::string host = "127.0.0.1";
    std::uint16_t port = 9000;
    std::uint64_t timeout_ms = 30000;

    void validate() const; ///< throws ConfigError naming the offending key

    sim::SymbolSource alice_source() const;
    sim::BasisSource bob_source() const;
    modem::DelayLine delay_line() const;

    bool operator==(const Config&) const = default;
};

/// All-ideal defaults: V = 1, no dark counts, no drift.
Config default_config();

/// Built-in named configurations; ConfigError on an unknown name.
/// "ideal" is the defaults; "paper30" is the committed operating point that
/// lands the constant-key false-count rate at 0.30.
Config preset(std::string_view name);
std::vector<std::string> preset_names();

/// Applies one key=value pair; ConfigError for unknown keys or bad values.
void apply_override(Config& cfg, std::string_view key, std::string_view value);

/// True for keys holding a single numeric value (sweepable).
bool is_numeric_key(std::string_view key);

/// Parses key=value lines ('#' starts a comment) on top of `base`, then
/// validates the result.
Config parse_config(std::string_view text, const Config& base);
Config load_config_file(const std::string& path, const Config& base);

/// Canonical text form; parse_config(to_text(c), default) == c.
std::string to_text(const Config& cfg);

} // namespace qkd

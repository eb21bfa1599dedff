#pragma once

// Library backing of the command-line workflows: single runs, parameter
// sweeps, entropy-source calibration, and full sessions over a transport.
// Everything here is deterministic given (config, seed).

#include "qkd/config.hpp"
#include "qkd/metrics.hpp"
#include "qkd/modem.hpp"
#include "qkd/sifting.hpp"
#include "qkd/transport.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qkd::runner {

/// Simulates one session and reduces it locally (no network involved).
metrics::RunReport run_once(const Config& cfg);

/// Simulated trace for one config, with the streams the config implies.
sim::GateTrace simulate(const Config& cfg);

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    double value = 0.0;
    std::optional<double> false_count;
    std::optional<double> qber;
};

/// One run per value of a numeric config key; row i runs with seed
/// base.seed + i so rows stay independent but reproducible.
/// ConfigError when the key is unknown or not numeric.
std::vector<SweepRow> sweep(const Config& base, const std::string& key,
                            std::span<const double> values);

std::string sweep_csv(const std::string& key, std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// Entropy-source calibration
// ---------------------------------------------------------------------------

struct RngCalibration {
    std::vector<modem::TapStats> stats;
    std::size_t chosen_tap = 0;
    modem::HarvestedSeed seed;
    modem::BitTestResult monobit;
    modem::BitTestResult runs;
    /// The chosen tap can never flip (profile probability zero), so the
    /// harvest is deterministic and the fallback seed path was taken.
    bool stuck_line = false;
};

RngCalibration calibrate_rng(const Config& cfg, std::size_t n_words = 4096,
                             std::size_t n_test_bits = 100000);

/// Per-tap CSV: tap_index,samples,ones,flip_score.
std::string tap_csv(std::span<const modem::TapStats> stats);

// ---------------------------------------------------------------------------
// Sessions over a transport
// ---------------------------------------------------------------------------

/// Shared session parameters implied by a config (id derived from the seed).
net::SessionConfig session_config(const Config& cfg);

/// Simulates the configured trace, then runs the requested role over the
/// given transport. Both endpoints of a demo run this with equal configs.
net::SessionResult run_alice_session(net::Transport& transport, const Config& cfg);
net::SessionResult run_bob_session(net::Transport& transport, const Config& cfg);

/// FNV-1a over bits and gate indices; equal digests mean equal keys.
std::uint64_t key_digest(const protocol::SiftedKey& key);

} // namespace qkd::runner

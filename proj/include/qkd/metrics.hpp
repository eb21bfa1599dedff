#pragma once

// Observables derived from gate traces: detector histograms, false-count
// rate, detection/sifting fractions, QBER, and CSV / JSON-lines export with
// exact round-trip parsing.

#include "qkd/channel.hpp"
#include "qkd/protocol.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qkd::metrics {

struct DetectorHistogram {
    std::uint64_t none = 0;
    std::uint64_t d1 = 0;
    std::uint64_t d2 = 0;
    std::uint64_t both = 0;

    std::uint64_t total() const { return none + d1 + d2 + both; }
    std::uint64_t singles() const { return d1 + d2; }
    std::uint64_t any_click() const { return d1 + d2 + both; }
    bool operator==(const DetectorHistogram&) const = default;
};

DetectorHistogram histogram(const sim::GateTrace& trace);

/// Wrong-detector fraction among single clicks. `expected` must be one of
/// the deterministic outcome classes (std::invalid_argument otherwise);
/// no single clicks at all → UndefinedStatistic.
double false_count_rate(const DetectorHistogram& hist, protocol::OutcomeClass expected);
double false_count_rate(const sim::GateTrace& trace, protocol::OutcomeClass expected);

/// Everything one simulated session is reduced to. Reproducible bit for bit
/// from (config, seed); absent optionals mean the statistic was undefined
/// or not applicable for the run.
struct RunReport {
    std::uint64_t seed = 0;
    std::uint64_t n_gates = 0;
    sim::ChannelParams channel;
    sim::DetectorParams detector;
    DetectorHistogram hist;
    double detected_fraction = 0.0;            ///< gates with any click / gates
    std::optional<double> sifted_fraction;     ///< sifted bits / single clicks
    std::optional<double> qber;
    std::optional<double> false_count;         ///< only for constant-delta runs
    bool low_eta = false;

    bool operator==(const RunReport&) const = default;
};

/// Builds the report from a finished trace: histogram, fractions, local
/// sifting and QBER. Pass the expected deterministic outcome to also fill
/// false_count (constant-key runs only).
RunReport summarize(const sim::GateTrace& trace, const sim::ChannelParams& ch,
                    const sim::DetectorParams& det, std::uint64_t seed,
                    std::optional<protocol::OutcomeClass> expected = std::nullopt);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------
// Both formats use shortest round-trip number rendering, so parse(export(r))
// reproduces every field exactly. Column order is fixed; empty CSV cells and
// JSON nulls stand for absent optionals.

std::string to_csv(std::span<const RunReport> reports);
std::string to_jsonl(std::span<const RunReport> reports);

/// Inverse of to_csv / to_jsonl; throws std::invalid_argument on malformed
/// input (wrong header, bad cell, unknown key).
std::vector<RunReport> parse_csv(std::string_view text);
std::vector<RunReport> parse_jsonl(std::string_view text);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view text);

} // namespace qkd::metrics

#pragma once

// Monte Carlo model of the optical layer: faint key pulses beating against a
// strong reference in a delayed self-homodyne interferometer, differentially
// detected by a pair of gated Geiger-mode APDs. Produces per-gate click
// traces from Alice/Bob phase choices; fully deterministic given a seed.

#include "qkd/protocol.hpp"
#include "qkd/random.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace qkd::sim {

/// Optical-path configuration. Defaults put the link in the faint-pulse
/// regime (0.1 photon/bit at Bob) with an otherwise ideal channel.
struct ChannelParams {
    double mu_key = 0.1;          ///< mean photons per key pulse at Bob
    double ref_ratio = 1.0;       ///< reference-to-key mean photon ratio, >= 1
    double extinction_ratio = 0.0;///< unwanted/wanted linear power ratio, in [0,1]
    double pol_mismatch = 0.0;    ///< polarization misalignment angle, radians
    double mod_phase_sigma = 0.0; ///< per-gate modulation phase error stddev, radians
    double drift_sigma = 0.0;     ///< phase random-walk increment stddev per gate, radians
    double feedback_gain = 0.0;   ///< proportional drift correction, in [0,1]; 0 = open loop
    bool strong_reference = false;///< fold reference gain into the effective intensity
    double ref_gain_cap = 100.0;  ///< cap on the ratio used in strong-reference mode

    void validate() const; ///< throws ConfigError naming the offending field
    bool operator==(const ChannelParams&) const = default;
};

struct DetectorParams {
    double eta = 0.1;            ///< quantum efficiency, in (0, 1]
    double p_dark = 0.0;         ///< dark-count probability per gate per detector, in [0,1)
    double gate_rate = 1.0e6;    ///< gates per second

    void validate() const;
    bool operator==(const DetectorParams&) const = default;
    /// APDs in this setup run below 10% efficiency; reports flag the regime.
    bool low_eta_regime() const { return eta <= 0.1; }
};

/// Slow interferometer phase error, accumulated across gates.
struct DriftState {
    double phase_offset = 0.0; ///< radians, unbounded; report mod 2pi
    std::uint64_t gate_index = 0;
};

struct GateRecord {
    std::uint64_t gate_index = 0;
    protocol::Bit alice_bit = protocol::Bit::Zero;
    protocol::Basis alice_basis = protocol::Basis::B1;
    protocol::AlicePhase alice_phase = protocol::AlicePhase::PiOver4;
    protocol::Basis bob_basis = protocol::Basis::B1;
    protocol::BobPhase bob_phase = protocol::BobPhase::PiOver4;
    protocol::DeltaPhase delta_ideal = protocol::DeltaPhase::Zero;
    double delta_eff = 0.0; ///< ideal delta + drift + modulation error, radians
    protocol::ClickOutcome click = protocol::ClickOutcome::None;
    bool operator==(const GateRecord&) const = default;
};

struct GateTrace {
    std::vector<GateRecord> gates;
    std::size_t size() const { return gates.size(); }
    bool operator==(const GateTrace&) const = default;
};

/// Interference contrast V = V_ext * V_pol, with V_ext = (1-r)/(1+r) and
/// V_pol = |cos theta|. V = 1 only for r = 0 and theta = 0.
double visibility(const ChannelParams& ch);

/// Effective mean photon number at the coupler output. mu_key by default;
/// strong-reference mode scales it by sqrt(min(ref_ratio, cap)).
double effective_mu(const ChannelParams& ch);

/// Mean photoelectrons per gate on (D1, D2) for a given effective phase
/// difference. m1 + m2 == eta * mu_tot for every delta_eff.
std::pair<double, double> detector_means(double delta_eff, const ChannelParams& ch,
                                         const DetectorParams& det);

/// Click probability of one gated APD: Poisson photoelectrons plus an
/// independent dark count, p = 1 - exp(-m) * (1 - p_dark).
double click_probability(double mean_photoelectrons, double p_dark);

/// One gate: independent click decisions for D1 and D2 (D1 drawn first).
protocol::ClickOutcome gate_event(double delta_eff, const ChannelParams& ch,
                                  const DetectorParams& det, RandomSource& rng);

/// Gaussian random-walk step of the interferometer phase.
DriftState step_drift(const DriftState& state, const ChannelParams& ch, RandomSource& rng);

/// Proportional correction toward zero offset: offset *= (1 - g).
DriftState apply_feedback(const DriftState& state, const ChannelParams& ch);

/// Per-gate (bit, basis) supply for Alice: random draws, a constant symbol,
/// or an explicit finite sequence.
class SymbolSource {
public:
    static SymbolSource random();
    static SymbolSource constant(protocol::Bit bit, protocol::Basis basis);
    static SymbolSource sequence(std::vector<protocol::Symbol> symbols);

    /// nullopt once a finite sequence is exhausted.
    std::optional<protocol::Symbol> next(RandomSource& rng);

private:
    struct Random {};
    struct Sequence {
        std::vector<protocol::Symbol> symbols;
        std::size_t pos = 0;
    };
    std::variant<Random, protocol::Symbol, Sequence> mode_;
};

/// Per-gate basis supply for Bob.
class BasisSource {
public:
    static BasisSource random();
    static BasisSource constant(protocol::Basis basis);
    static BasisSource sequence(std::vector<protocol::Basis> bases);

    std::optional<protocol::Basis> next(RandomSource& rng);

private:
    struct Random {};
    struct Sequence {
        std::vector<protocol::Basis> bases;
        std::size_t pos = 0;
    };
    std::variant<Random, protocol::Basis, Sequence> mode_;
};

/// Runs n_gates gates end to end: draw symbols, apply drift and modulation
/// error, produce clicks, advance (and optionally correct) the drift.
/// Throws std::invalid_argument if a finite symbol stream runs out.
GateTrace simulate_session(std::uint64_t n_gates, const ChannelParams& ch,
                           const DetectorParams& det, SymbolSource alice,
                           BasisSource bob, RandomSource& rng);

/// Convenience overload seeding a fresh generator.
GateTrace simulate_session(std::uint64_t n_gates, const ChannelParams& ch,
                           const DetectorParams& det, SymbolSource alice,
                           BasisSource bob, std::uint64_t seed);

/// Merge a trace into protocol-layer sifting records (one per gate).
std::vector<protocol::SiftRecord> to_sift_records(const GateTrace& trace);

} // namespace qkd::sim

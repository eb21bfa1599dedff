#include "qkd/channel.hpp"

#include "qkd/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qkd::sim {

using protocol::Basis;
using protocol::Bit;
using protocol::ClickOutcome;
using protocol::Symbol;

namespace {

void require(bool ok, const char* field, const std::string& detail) {
    if (!ok) {
        throw ConfigError(std::string(field) + ": " + detail);
    }
}

} // namespace

void ChannelParams::validate() const {
    require(mu_key > 0.0, "mu_key", "must be > 0");
    require(ref_ratio >= 1.0, "ref_ratio", "must be >= 1");
    // r = 0 is the ideal limit; it is what makes V = 1 reachable.
    require(extinction_ratio >= 0.0 && extinction_ratio <= 1.0, "extinction_ratio",
            "must be in [0, 1]");
    require(pol_mismatch >= 0.0 && pol_mismatch <= 1.57079632679489661923, "pol_mismatch",
            "must be in [0, pi/2]");
    require(mod_phase_sigma >= 0.0, "mod_phase_sigma", "must be >= 0");
    require(drift_sigma >= 0.0, "drift_sigma", "must be >= 0");
    require(feedback_gain >= 0.0 && feedback_gain <= 1.0, "feedback_gain", "must be in [0, 1]");
    require(ref_gain_cap >= 1.0, "ref_gain_cap", "must be >= 1");
}

void DetectorParams::validate() const {
    require(eta > 0.0 && eta <= 1.0, "eta", "must be in (0, 1]");
    require(p_dark >= 0.0 && p_dark < 1.0, "p_dark", "must be in [0, 1)");
    require(gate_rate > 0.0, "gate_rate", "must be > 0");
}

double visibility(const ChannelParams& ch) {
    double r = ch.extinction_ratio;
    double v_ext = (1.0 - r) / (1.0 + r);
    double v_pol = std::fabs(std::cos(ch.pol_mismatch));
    return v_ext * v_pol;
}

double effective_mu(const ChannelParams& ch) {
    if (!ch.strong_reference) {
        return ch.mu_key;
    }
    double ratio = std::min(ch.ref_ratio, ch.ref_gain_cap);
    return ch.mu_key * std::sqrt(ratio);
}

std::pair<double, double> detector_means(double delta_eff, const ChannelParams& ch,
                                         const DetectorParams& det) {
    double mu_tot = effective_mu(ch);
    double contrast = visibility(ch) * std::cos(delta_eff);
    double m1 = det.eta * mu_tot * (1.0 + contrast) * 0.5;
    double m2 = det.eta * mu_tot * (1.0 - contrast) * 0.5;
    return {m1, m2};
}

double click_probability(double mean_photoelectrons, double p_dark) {
    return 1.0 - std::exp(-mean_photoelectrons) * (1.0 - p_dark);
}

ClickOutcome gate_event(double delta_eff, const ChannelParams& ch, const DetectorParams& det,
                        RandomSource& rng) {
    auto [m1, m2] = detector_means(delta_eff, ch, det);
    bool d1 = rng.bernoulli(click_probability(m1, det.p_dark));
    bool d2 = rng.bernoulli(click_probability(m2, det.p_dark));
    if (d1 && d2) return ClickOutcome::Both;
    if (d1) return ClickOutcome::D1;
    if (d2) return ClickOutcome::D2;
    return ClickOutcome::None;
}

DriftState step_drift(const DriftState& state, const ChannelParams& ch, RandomSource& rng) {
    DriftState next = state;
    if (ch.drift_sigma > 0.0) {
        next.phase_offset += rng.gaussian(ch.drift_sigma);
    }
    next.gate_index += 1;
    return next;
}

DriftState apply_feedback(const DriftState& state, const ChannelParams& ch) {
    DriftState next = state;
    next.phase_offset *= 1.0 - ch.feedback_gain;
    return next;
}

SymbolSource SymbolSource::random() {
    SymbolSource s;
    s.mode_ = Random{};
    return s;
}

SymbolSource SymbolSource::constant(Bit bit, Basis basis) {
    SymbolSource s;
    s.mode_ = Symbol{bit, basis};
    return s;
}

SymbolSource SymbolSource::sequence(std::vector<Symbol> symbols) {
    SymbolSource s;
    s.mode_ = Sequence{std::move(symbols), 0};
    return s;
}

std::optional<Symbol> SymbolSource::next(RandomSource& rng) {
    if (std::holds_alternative<Random>(mode_)) {
        Bit bit = rng.coin() ? Bit::One : Bit::Zero;
        Basis basis = rng.coin() ? Basis::B2 : Basis::B1;
        return Symbol{bit, basis};
    }
    if (auto* sym = std::get_if<Symbol>(&mode_)) {
        return *sym;
    }
    auto& seq = std::get<Sequence>(mode_);
    if (seq.pos >= seq.symbols.size()) {
        return std::nullopt;
    }
    return seq.symbols[seq.pos++];
}

BasisSource BasisSource::random() {
    BasisSource s;
    s.mode_ = Random{};
    return s;
}

BasisSource BasisSource::constant(Basis basis) {
    BasisSource s;
    s.mode_ = basis;
    return s;
}

BasisSource BasisSource::sequence(std::vector<Basis> bases) {
    BasisSource s;
    s.mode_ = Sequence{std::move(bases), 0};
    return s;
}

std::optional<Basis> BasisSource::next(RandomSource& rng) {
    if (std::holds_alternative<Random>(mode_)) {
        return rng.coin() ? Basis::B2 : Basis::B1;
    }
    if (auto* basis = std::get_if<Basis>(&mode_)) {
        return *basis;
    }
    auto& seq = std::get<Sequence>(mode_);
    if (seq.pos >= seq.bases.size()) {
        return std::nullopt;
    }
    return seq.bases[seq.pos++];
}

GateTrace simulate_session(std::uint64_t n_gates, const ChannelParams& ch,
                           const DetectorParams& det, SymbolSource alice, BasisSource bob,
                           RandomSource& rng) {
    if (n_gates == 0) {
        throw std::invalid_argument("simulate_session: n_gates must be > 0");
    }
    ch.validate();
    det.validate();

    GateTrace trace;
    trace.gates.reserve(n_gates);
    DriftState drift;

    // Fixed draw order per gate: alice symbol, bob basis, modulation error,
    // D1 click, D2 click, drift increment.
    for (std::uint64_t g = 0; g < n_gates; ++g) {
        auto symbol = alice.next(rng);
        if (!symbol) {
            throw std::invalid_argument("simulate_session: alice symbol stream exhausted at gate " +
                                        std::to_string(g));
        }
        auto bob_basis = bob.next(rng);
        if (!bob_basis) {
            throw std::invalid_argument("simulate_session: bob basis stream exhausted at gate " +
                                        std::to_string(g));
        }

        GateRecord rec;
        rec.gate_index = g;
        rec.alice_bit = symbol->bit;
        rec.alice_basis = symbol->basis;
        rec.alice_phase = protocol::encode_alice(symbol->bit, symbol->basis);
        rec.bob_basis = *bob_basis;
        rec.bob_phase = protocol::encode_bob(*bob_basis);
        rec.delta_ideal = protocol::phase_difference(rec.alice_phase, rec.bob_phase);

        double noise = ch.mod_phase_sigma > 0.0 ? rng.gaussian(ch.mod_phase_sigma) : 0.0;
        rec.delta_eff = protocol::radians(rec.delta_ideal) + drift.phase_offset + noise;
        rec.click = gate_event(rec.delta_eff, ch, det, rng);
        trace.gates.push_back(rec);

        drift = step_drift(drift, ch, rng);
        if (ch.feedback_gain > 0.0) {
            drift = apply_feedback(drift, ch);
        }
    }
    return trace;
}

GateTrace simulate_session(std::uint64_t n_gates, const ChannelParams& ch,
                           const DetectorParams& det, SymbolSource alice, BasisSource bob,
                           std::uint64_t seed) {
    RandomSource rng(seed);
    return simulate_session(n_gates, ch, det, std::move(alice), std::move(bob), rng);
}

std::vector<protocol::SiftRecord> to_sift_records(const GateTrace& trace) {
    std::vector<protocol::SiftRecord> records;
    records.reserve(trace.gates.size());
    for (const GateRecord& g : trace.gates) {
        protocol::SiftRecord rec;
        rec.gate_index = g.gate_index;
        rec.alice_basis = g.alice_basis;
        rec.bob_basis = g.bob_basis;
        rec.alice_bit = g.alice_bit;
        rec.bob_bit = protocol::decode_click(g.click);
        records.push_back(rec);
    }
    return records;
}

} // namespace qkd::sim

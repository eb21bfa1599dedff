#include "qkd/protocol.hpp"

#include "qkd/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd::protocol {

namespace {
constexpr double kQuarterPi = 0.78539816339744830961; // pi/4
}

AlicePhase encode_alice(Bit bit, Basis basis) {
    if (bit == Bit::Zero) {
        return basis == Basis::B1 ? AlicePhase::PiOver4 : AlicePhase::MinusPiOver4;
    }
    return basis == Basis::B1 ? AlicePhase::MinusThreePiOver4 : AlicePhase::ThreePiOver4;
}

BobPhase encode_bob(Basis basis) {
    return basis == Basis::B1 ? BobPhase::PiOver4 : BobPhase::MinusPiOver4;
}

DeltaPhase phase_difference(AlicePhase phi_a, BobPhase phi_b) {
    // Work in units of pi/4; mod 8 is mod 2pi. The encodings only ever
    // produce even differences: {0, 2, 4, 6}.
    int diff = static_cast<int>(phi_a) - static_cast<int>(phi_b);
    int norm = ((diff % 8) + 8) % 8;
    return static_cast<DeltaPhase>(norm);
}

OutcomeClass classify_outcome(DeltaPhase delta) {
    switch (delta) {
    case DeltaPhase::Zero:
        return OutcomeClass::DeterministicD1;
    case DeltaPhase::Pi:
        return OutcomeClass::DeterministicD2;
    case DeltaPhase::HalfPi:
    case DeltaPhase::ThreeHalfPi:
        return OutcomeClass::Random;
    }
    throw std::invalid_argument("classify_outcome: invalid delta phase");
}

std::optional<Bit> decode_click(ClickOutcome outcome) {
    switch (outcome) {
    case ClickOutcome::D1:
        return Bit::Zero;
    case ClickOutcome::D2:
        return Bit::One;
    case ClickOutcome::None:
    case ClickOutcome::Both:
        return std::nullopt;
    }
    throw std::invalid_argument("decode_click: invalid outcome");
}

SiftResult sift(std::span<const SiftRecord> records) {
    SiftResult out;
    bool first = true;
    std::uint64_t prev = 0;
    for (const SiftRecord& rec : records) {
        if (!first && rec.gate_index <= prev) {
            throw std::invalid_argument("sift: records must be strictly increasing in gate_index");
        }
        prev = rec.gate_index;
        first = false;

        if (!rec.bob_bit.has_value() || rec.alice_basis != rec.bob_basis) {
            continue;
        }
        out.alice.bits.push_back(rec.alice_bit);
        out.alice.source_gates.push_back(rec.gate_index);
        out.bob.bits.push_back(*rec.bob_bit);
        out.bob.source_gates.push_back(rec.gate_index);
    }
    return out;
}

double qber(const SiftedKey& alice_key, const SiftedKey& bob_key) {
    if (alice_key.bits.size() != alice_key.source_gates.size() ||
        bob_key.bits.size() != bob_key.source_gates.size()) {
        throw std::invalid_argument("qber: malformed key (bits/gates length mismatch)");
    }
    if (alice_key.source_gates != bob_key.source_gates) {
        throw std::invalid_argument("qber: keys do not share identical source gates");
    }
    if (alice_key.empty()) {
        throw UndefinedStatistic("qber: empty keys, error rate undefined");
    }
    std::size_t errors = 0;
    for (std::size_t i = 0; i < alice_key.bits.size(); ++i) {
        if (alice_key.bits[i] != bob_key.bits[i]) {
            ++errors;
        }
    }
    return static_cast<double>(errors) / static_cast<double>(alice_key.size());
}

double radians(AlicePhase p) { return static_cast<int>(p) * kQuarterPi; }
double radians(BobPhase p) { return static_cast<int>(p) * kQuarterPi; }
double radians(DeltaPhase d) { return static_cast<int>(d) * kQuarterPi; }

} // namespace qkd::protocol

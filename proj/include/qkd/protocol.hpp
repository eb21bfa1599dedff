#pragma once

// BB84 over QPSK: encoding tables, detection-outcome classification, basis
// sifting and QBER. Everything in this header is exact and deterministic --
// phases are quadrant labels (integer multiples of pi/4), never floats, so
// table lookups and tests need no tolerance.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qkd::protocol {

enum class Bit : std::uint8_t { Zero = 0, One = 1 };
enum class Basis : std::uint8_t { B1 = 0, B2 = 1 };

/// Alice's four-point constellation, stored in units of pi/4.
/// Bit 0 maps to +-pi/4, bit 1 to -+3pi/4 (basis picks the sign).
enum class AlicePhase : std::int8_t {
    PiOver4 = 1,
    MinusPiOver4 = -1,
    ThreePiOver4 = 3,
    MinusThreePiOver4 = -3,
};

/// Bob's two-point modulation, one phase per measurement basis.
enum class BobPhase : std::int8_t {
    PiOver4 = 1,
    MinusPiOver4 = -1,
};

/// (phi_a - phi_b) mod 2pi, still in units of pi/4. Only four values occur.
enum class DeltaPhase : std::uint8_t {
    Zero = 0,
    HalfPi = 2,
    Pi = 4,
    ThreeHalfPi = 6,
};

enum class OutcomeClass : std::uint8_t { DeterministicD1, DeterministicD2, Random };

/// Per-gate detector result. Both = simultaneous click on D1 and D2.
enum class ClickOutcome : std::uint8_t { None = 0, D1 = 1, D2 = 2, Both = 3 };

struct Symbol {
    Bit bit;
    Basis basis;
    bool operator==(const Symbol&) const = default;
};

struct ClickEvent {
    std::uint64_t gate_index = 0;
    ClickOutcome outcome = ClickOutcome::None;
    bool operator==(const ClickEvent&) const = default;
};

/// One gate's worth of sifting bookkeeping, merged from both endpoints.
/// bob_bit is absent when the gate produced no usable (single) click.
struct SiftRecord {
    std::uint64_t gate_index = 0;
    Basis alice_basis = Basis::B1;
    Basis bob_basis = Basis::B1;
    Bit alice_bit = Bit::Zero;
    std::optional<Bit> bob_bit;
};

struct SiftedKey {
    std::vector<Bit> bits;
    std::vector<std::uint64_t> source_gates;

    std::size_t size() const { return bits.size(); }
    bool empty() const { return bits.empty(); }
    bool operator==(const SiftedKey&) const = default;
};

struct SiftResult {
    SiftedKey alice;
    SiftedKey bob;
};

/// Alice's phase for a (bit, basis) pair:
///   (0,B1) -> pi/4    (0,B2) -> -pi/4
///   (1,B1) -> -3pi/4  (1,B2) -> 3pi/4
AlicePhase encode_alice(Bit bit, Basis basis);

/// Bob's phase for a basis: B1 -> pi/4, B2 -> -pi/4.
BobPhase encode_bob(Basis basis);

/// (phi_a - phi_b) normalized into {0, pi/2, pi, 3pi/2}.
DeltaPhase phase_difference(AlicePhase phi_a, BobPhase phi_b);

/// 0 -> D1 deterministic, pi -> D2 deterministic, pi/2 and 3pi/2 -> random.
OutcomeClass classify_outcome(DeltaPhase delta);

/// D1 -> 0, D2 -> 1 (the only bits giving delta 0 / pi under matched bases).
/// None and Both are discarded: no usable bit.
std::optional<Bit> decode_click(ClickOutcome outcome);

/// Keeps exactly the records with a bob_bit and matching bases. Input must be
/// strictly increasing in gate_index; throws std::invalid_argument otherwise.
SiftResult sift(std::span<const SiftRecord> records);

/// Fraction of disagreeing positions. Throws std::invalid_argument when the
/// keys do not share identical source gates, UndefinedStatistic when empty.
double qber(const SiftedKey& alice_key, const SiftedKey& bob_key);

// Radian values for the physics layer. The protocol itself never needs them.
double radians(AlicePhase p);
double radians(BobPhase p);
double radians(DeltaPhase d);

inline Bit flip(Bit b) { return b == Bit::Zero ? Bit::One : Bit::Zero; }
inline int to_int(Bit b) { return static_cast<int>(b); }
inline int to_int(Basis b) { return static_cast<int>(b); }

} // namespace qkd::protocol

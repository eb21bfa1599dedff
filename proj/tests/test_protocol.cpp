#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qkd/errors.hpp"
#include "qkd/protocol.hpp"
#include "qkd/random.hpp"

#include <cmath>
#include <vector>

using namespace qkd::protocol;

TEST_CASE("alice encoding covers the four-point constellation") {
    CHECK(encode_alice(Bit::Zero, Basis::B1) == AlicePhase::PiOver4);
    CHECK(encode_alice(Bit::Zero, Basis::B2) == AlicePhase::MinusPiOver4);
    CHECK(encode_alice(Bit::One, Basis::B1) == AlicePhase::MinusThreePiOver4);
    CHECK(encode_alice(Bit::One, Basis::B2) == AlicePhase::ThreePiOver4);
}

TEST_CASE("bob encoding is one phase per basis") {
    CHECK(encode_bob(Basis::B1) == BobPhase::PiOver4);
    CHECK(encode_bob(Basis::B2) == BobPhase::MinusPiOver4);
}

TEST_CASE("bob phases coincide with alice bit-0 phases") {
    for (Basis b : {Basis::B1, Basis::B2}) {
        CHECK(radians(encode_bob(b)) == radians(encode_alice(Bit::Zero, b)));
    }
}

TEST_CASE("radian values of the quadrant labels") {
    const double quarter = std::acos(-1.0) / 4.0;
    CHECK(radians(AlicePhase::PiOver4) == doctest::Approx(quarter).epsilon(1e-15));
    CHECK(radians(AlicePhase::MinusPiOver4) == doctest::Approx(-quarter).epsilon(1e-15));
    CHECK(radians(AlicePhase::ThreePiOver4) == doctest::Approx(3 * quarter).epsilon(1e-15));
    CHECK(radians(AlicePhase::MinusThreePiOver4) ==
          doctest::Approx(-3 * quarter).epsilon(1e-15));
    CHECK(radians(DeltaPhase::Zero) == 0.0);
    CHECK(radians(DeltaPhase::Pi) == doctest::Approx(4 * quarter).epsilon(1e-15));
}

TEST_CASE("phase differences normalize into the four-value set") {
    // Hand-evaluated in units of pi/4, reduced mod 8.
    CHECK(phase_difference(AlicePhase::PiOver4, BobPhase::PiOver4) == DeltaPhase::Zero);
    CHECK(phase_difference(AlicePhase::PiOver4, BobPhase::MinusPiOver4) == DeltaPhase::HalfPi);
    CHECK(phase_difference(AlicePhase::MinusPiOver4, BobPhase::PiOver4) ==
          DeltaPhase::ThreeHalfPi);
    CHECK(phase_difference(AlicePhase::MinusPiOver4, BobPhase::MinusPiOver4) ==
          DeltaPhase::Zero);
    CHECK(phase_difference(AlicePhase::ThreePiOver4, BobPhase::PiOver4) == DeltaPhase::HalfPi);
    CHECK(phase_difference(AlicePhase::ThreePiOver4, BobPhase::MinusPiOver4) ==
          DeltaPhase::Pi);
    CHECK(phase_difference(AlicePhase::MinusThreePiOver4, BobPhase::PiOver4) ==
          DeltaPhase::Pi);
    CHECK(phase_difference(AlicePhase::MinusThreePiOver4, BobPhase::MinusPiOver4) ==
          DeltaPhase::ThreeHalfPi);
}

TEST_CASE("matched bases give deterministic outcomes, mismatched give random") {
    for (Basis basis : {Basis::B1, Basis::B2}) {
        CHECK(classify_outcome(phase_difference(encode_alice(Bit::Zero, basis),
                                                encode_bob(basis))) ==
              OutcomeClass::DeterministicD1);
        CHECK(classify_outcome(phase_difference(encode_alice(Bit::One, basis),
                                                encode_bob(basis))) ==
              OutcomeClass::DeterministicD2);
    }
    for (Bit bit : {Bit::Zero, Bit::One}) {
        CHECK(classify_outcome(phase_difference(encode_alice(bit, Basis::B1),
                                                encode_bob(Basis::B2))) ==
              OutcomeClass::Random);
        CHECK(classify_outcome(phase_difference(encode_alice(bit, Basis::B2),
                                                encode_bob(Basis::B1))) ==
              OutcomeClass::Random);
    }
}

TEST_CASE("outcome classes map to the stated deltas") {
    CHECK(classify_outcome(DeltaPhase::Zero) == OutcomeClass::DeterministicD1);
    CHECK(classify_outcome(DeltaPhase::Pi) == OutcomeClass::DeterministicD2);
    CHECK(classify_outcome(DeltaPhase::HalfPi) == OutcomeClass::Random);
    CHECK(classify_outcome(DeltaPhase::ThreeHalfPi) == OutcomeClass::Random);
}

TEST_CASE("click decoding inverts the matched-basis rule") {
    CHECK(decode_click(ClickOutcome::D1) == Bit::Zero);
    CHECK(decode_click(ClickOutcome::D2) == Bit::One);
    CHECK_FALSE(decode_click(ClickOutcome::None).has_value());
    CHECK_FALSE(decode_click(ClickOutcome::Both).has_value());

    // Decoding agrees with encoding: under matched bases, the deterministic
    // detector for a bit decodes back to that bit.
    for (Basis basis : {Basis::B1, Basis::B2}) {
        for (Bit bit : {Bit::Zero, Bit::One}) {
            DeltaPhase d = phase_difference(encode_alice(bit, basis), encode_bob(basis));
            ClickOutcome click = classify_outcome(d) == OutcomeClass::DeterministicD1
                                     ? ClickOutcome::D1
                                     : ClickOutcome::D2;
            CHECK(decode_click(click) == bit);
        }
    }
}

namespace {

SiftRecord make_record(std::uint64_t gate, Basis a, Basis b, Bit alice_bit,
                       std::optional<Bit> bob_bit) {
    SiftRecord rec;
    rec.gate_index = gate;
    rec.alice_basis = a;
    rec.bob_basis = b;
    rec.alice_bit = alice_bit;
    rec.bob_bit = bob_bit;
    return rec;
}

} // namespace

TEST_CASE("sift keeps exactly matching-basis gates with usable bits") {
    std::vector<SiftRecord> records{
        make_record(0, Basis::B1, Basis::B1, Bit::Zero, Bit::Zero),
        make_record(1, Basis::B2, Basis::B1, Bit::One, Bit::One),
        make_record(2, Basis::B1, Basis::B1, Bit::One, Bit::One),
    };
    SiftResult result = sift(records);
    CHECK(result.alice.source_gates == std::vector<std::uint64_t>{0, 2});
    CHECK(result.bob.source_gates == std::vector<std::uint64_t>{0, 2});
    CHECK(result.alice.bits == std::vector<Bit>{Bit::Zero, Bit::One});
    CHECK(result.bob.bits == std::vector<Bit>{Bit::Zero, Bit::One});
}

TEST_CASE("sift with no usable clicks yields two empty keys") {
    std::vector<SiftRecord> records{
        make_record(0, Basis::B1, Basis::B1, Bit::Zero, std::nullopt),
        make_record(5, Basis::B2, Basis::B2, Bit::One, std::nullopt),
    };
    SiftResult result = sift(records);
    CHECK(result.alice.empty());
    CHECK(result.bob.empty());
}

TEST_CASE("sift rejects unsorted and duplicated gate indices") {
    std::vector<SiftRecord> unsorted{
        make_record(3, Basis::B1, Basis::B1, Bit::Zero, Bit::Zero),
        make_record(2, Basis::B1, Basis::B1, Bit::Zero, Bit::Zero),
    };
    CHECK_THROWS_AS(sift(unsorted), std::invalid_argument);

    std::vector<SiftRecord> duplicated{
        make_record(2, Basis::B1, Basis::B1, Bit::Zero, Bit::Zero),
        make_record(2, Basis::B1, Basis::B1, Bit::Zero, Bit::Zero),
    };
    CHECK_THROWS_AS(sift(duplicated), std::invalid_argument);
}

TEST_CASE("sift of an empty record list is empty") {
    SiftResult result = sift({});
    CHECK(result.alice.empty());
    CHECK(result.bob.empty());
}

TEST_CASE("sift keeps half the gates under uniform random bases") {
    // Binomial oracle: kept ~ Binomial(n, 1/2) when every gate has a usable
    // bit and bases are independent fair coins.
    qkd::RandomSource rng(20240517);
    const std::size_t n = 1000000;
    std::vector<SiftRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Basis a = rng.coin() ? Basis::B2 : Basis::B1;
        Basis b = rng.coin() ? Basis::B2 : Basis::B1;
        Bit bit = rng.coin() ? Bit::One : Bit::Zero;
        records.push_back(make_record(i, a, b, bit, bit));
    }
    SiftResult result = sift(records);
    double kept = static_cast<double>(result.alice.size());
    double sigma = std::sqrt(n * 0.25);
    CHECK(std::fabs(kept - n * 0.5) < 5.0 * sigma);
}

TEST_CASE("qber counts disagreeing positions") {
    SiftedKey alice;
    SiftedKey bob;
    alice.bits = {Bit::Zero, Bit::One, Bit::Zero, Bit::One};
    alice.source_gates = {0, 3, 4, 9};
    bob.bits = {Bit::Zero, Bit::Zero, Bit::Zero, Bit::Zero};
    bob.source_gates = {0, 3, 4, 9};
    CHECK(qber(alice, bob) == doctest::Approx(0.5));
    CHECK(qber(alice, alice) == 0.0);
}

TEST_CASE("qber demands identical source gates and a nonempty key") {
    SiftedKey alice;
    alice.bits = {Bit::Zero};
    alice.source_gates = {1};
    SiftedKey bob;
    bob.bits = {Bit::Zero};
    bob.source_gates = {2};
    CHECK_THROWS_AS(qber(alice, bob), std::invalid_argument);

    SiftedKey empty;
    CHECK_THROWS_AS(qber(empty, empty), qkd::UndefinedStatistic);
}

TEST_CASE("sifted keys from sift always agree on gates and never on basis-mismatched ones") {
    qkd::RandomSource rng(77);
    std::vector<SiftRecord> records;
    for (std::size_t i = 0; i < 5000; ++i) {
        Basis a = rng.coin() ? Basis::B2 : Basis::B1;
        Basis b = rng.coin() ? Basis::B2 : Basis::B1;
        Bit bit = rng.coin() ? Bit::One : Bit::Zero;
        std::optional<Bit> bob_bit;
        if (rng.coin()) bob_bit = bit;
        records.push_back(make_record(i * 2, a, b, bit, bob_bit)); // gaps are fine
    }
    SiftResult result = sift(records);
    REQUIRE(result.alice.source_gates == result.bob.source_gates);
    REQUIRE(result.alice.size() == result.bob.size());
    for (std::uint64_t gate : result.alice.source_gates) {
        const SiftRecord& rec = records[gate / 2];
        CHECK(rec.alice_basis == rec.bob_basis);
        CHECK(rec.bob_bit.has_value());
    }
}

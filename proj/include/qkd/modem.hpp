#pragma once

// Emulation of the transmitter electronics: a tapped-delay-line entropy
// source sampled by flip-flops, argmax tap selection, a seeded xorshift64
// generator for phase symbols, and the rate-decoupling symbol buffer that
// sits between the fast electronics and the slow optical gate clock.

#include "qkd/protocol.hpp"
#include "qkd/random.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qkd::modem {

// ---------------------------------------------------------------------------
// Entropy source
// ---------------------------------------------------------------------------

/// A chain of delay segments, each tapped by a flip-flop. Real metastability
/// cannot exist in software, so tap i is modeled as: with probability
/// tap_meta_prob[i] the sampled bit is uniformly random, otherwise it is
/// fixed_bits[i].
struct DelayLine {
    std::size_t n_taps = 32;
    double segment_delay_ps = 25.0;
    std::vector<double> tap_meta_prob; ///< one entry per tap, each in [0,1]
    std::vector<std::uint8_t> fixed_bits; ///< one entry per tap, each 0 or 1

    void validate() const; ///< throws ConfigError naming the offending field

    /// Peaked profile: p_i = peak_prob * max(0, 1 - |i - peak_tap| / half_width),
    /// fixed bits all zero. Taps further than half_width from the peak are
    /// fully deterministic.
    static DelayLine triangular(std::size_t n_taps, std::size_t peak_tap,
                                double peak_prob, double half_width);
};

/// One simultaneous sample of every tap, one 0/1 byte per tap.
std::vector<std::uint8_t> sample_word(const DelayLine& line, RandomSource& rng);

/// Per-tap ones statistics. flip_score = 2 * min(f, 1 - f) with f the ones
/// fraction: 0 for a stuck tap, 1 for a perfectly balanced one.
struct TapStats {
    std::uint64_t samples = 0;
    std::uint64_t ones = 0;

    double ones_fraction() const {
        return static_cast<double>(ones) / static_cast<double>(samples);
    }
    double flip_score() const {
        double f = ones_fraction();
        return 2.0 * (f < 0.5 ? f : 1.0 - f);
    }
};

/// Column-wise tally of a batch of sampled words. All words must have the
/// same width; throws std::invalid_argument on empty or ragged input.
std::vector<TapStats> analyze_taps(std::span<const std::vector<std::uint8_t>> words);

/// Index of the highest flip_score; ties go to the lowest index.
std::size_t select_seed_tap(std::span<const TapStats> stats);
std::size_t select_seed_tap(std::span<const double> scores);

/// Substituted when a harvest comes back all zero; a zero seed would pin the
/// generator to its degenerate fixed point.
inline constexpr std::uint64_t kFallbackSeed = 0x9E3779B97F4A7C15ull;

struct HarvestedSeed {
    std::uint64_t value = 0;
    bool substituted = false; ///< true when the raw bits were all zero
};

/// Concatenates n_bits successive samples of one tap, first sample in the
/// most significant position. Each sample reads the full line, as the
/// hardware does.
HarvestedSeed harvest_seed(const DelayLine& line, std::size_t tap_index,
                           RandomSource& rng, std::size_t n_bits = 64);

// ---------------------------------------------------------------------------
// Pseudo-random generator
// ---------------------------------------------------------------------------

/// xorshift64 step (shifts 13, 7, 17). The new state doubles as the output.
/// Throws std::invalid_argument on the degenerate zero state.
std::uint64_t prng_next(std::uint64_t state);

class Xorshift64 {
public:
    /// Rejects seed 0 (std::invalid_argument); use kFallbackSeed instead.
    explicit Xorshift64(std::uint64_t seed);

    std::uint64_t next();
    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// One phase symbol from one generator output: bit = LSB, basis = next bit.
/// The upper 62 bits are discarded.
protocol::Symbol next_symbol(Xorshift64& prng);

/// n_bits of generator output as 0/1 bytes, each 64-bit word emitted most
/// significant bit first.
std::vector<std::uint8_t> prng_bitstream(Xorshift64& prng, std::size_t n_bits);

// ---------------------------------------------------------------------------
// Randomness quality gates
// ---------------------------------------------------------------------------

struct BitTestResult {
    double statistic = 0.0; ///< standardized test statistic
    double p_value = 0.0;
    bool pass = false; ///< p_value >= 0.01
};

/// Frequency test: are ones and zeros balanced? Input is 0/1 bytes,
/// at least 100 of them (std::invalid_argument otherwise).
BitTestResult monobit_test(std::span<const std::uint8_t> bits);

/// Runs test: is the number of maximal same-bit runs consistent with
/// independence? Fails outright when the ones fraction is itself too far
/// from 1/2 for the run count to be meaningful.
BitTestResult runs_test(std::span<const std::uint8_t> bits);

// ---------------------------------------------------------------------------
// Rate-decoupling symbol buffer
// ---------------------------------------------------------------------------

/// Single-producer single-consumer ring of phase symbols. Exactly one thread
/// may push and exactly one may pop, concurrently. Failed pops (empty) and
/// failed pushes (full) are counted, never silent.
class SymbolBuffer {
public:
    explicit SymbolBuffer(std::size_t capacity = 4096);

    SymbolBuffer(const SymbolBuffer&) = delete;
    SymbolBuffer& operator=(const SymbolBuffer&) = delete;

    /// false and one overflow tick when the ring is full.
    bool try_push(protocol::Symbol s);

    /// nullopt and one underrun tick when the ring is empty.
    std::optional<protocol::Symbol> try_pop();

    std::size_t occupancy() const;
    std::size_t capacity() const { return capacity_; }
    std::uint64_t underruns() const { return underruns_.load(std::memory_order_relaxed); }
    std::uint64_t overflows() const { return overflows_.load(std::memory_order_relaxed); }

private:
    std::size_t capacity_;
    std::vector<protocol::Symbol> slots_;
    // head_ counts pushes, tail_ counts pops; both free-running.
    alignas(64) std::atomic<std::uint64_t> head_{0};
    alignas(64) std::atomic<std::uint64_t> tail_{0};
    alignas(64) std::atomic<std::uint64_t> underruns_{0};
    std::atomic<std::uint64_t> overflows_{0};
};

// ---------------------------------------------------------------------------
// Throughput simulation
// ---------------------------------------------------------------------------

/// Extra consumer demand at one tick, on top of the steady optical drain.
struct Burst {
    std::uint64_t tick = 0;
    std::uint64_t symbols = 0;
};

struct BufferSimConfig {
    double producer_bps = 200.0e6; ///< electronics-side symbol supply, bits/s
    double consumer_bps = 4.0e6;   ///< optics-side steady drain, bits/s
    std::size_t capacity = 4096;   ///< ring capacity in symbols
    std::uint64_t duration_ticks = 100000;
    std::uint64_t ticks_per_second = 1000000;
    std::size_t initial_fill = 0;  ///< symbols preloaded before tick 0

    void validate() const;
};

struct BufferSimReport {
    std::vector<std::uint32_t> occupancy; ///< after each tick
    std::uint64_t underruns = 0;
    std::uint64_t overflows = 0;
    std::uint64_t produced = 0;  ///< symbols actually placed in the ring
    std::uint64_t consumed = 0;  ///< symbols actually drained
    std::size_t max_occupancy = 0;
};

/// Tick-driven producer/consumer run. Each tick the producer pushes up to
/// its accumulated symbol credit (stalling, not dropping, when the ring is
/// full), then the steady consumer pops its credit, then any burst scheduled
/// for that tick pops its symbols. Pops from an empty ring count as
/// underruns, one per missing symbol. Symbols come from the generator, so
/// the run is deterministic given the seed.
BufferSimReport simulate_buffer(const BufferSimConfig& cfg, std::span<const Burst> bursts,
                                Xorshift64& prng);

} // namespace qkd::modem

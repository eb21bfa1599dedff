#include "qkd/modem.hpp"

#include "qkd/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

namespace qkd::modem {

using protocol::Basis;
using protocol::Bit;
using protocol::Symbol;

// ---------------------------------------------------------------------------
// Entropy source
// ---------------------------------------------------------------------------

void DelayLine::validate() const {
    if (n_taps < 2) {
        throw ConfigError("n_taps: must be >= 2");
    }
    if (segment_delay_ps <= 0.0) {
        throw ConfigError("segment_delay_ps: must be > 0");
    }
    if (tap_meta_prob.size() != n_taps) {
        throw ConfigError("tap_meta_prob: need exactly one probability per tap");
    }
    if (fixed_bits.size() != n_taps) {
        throw ConfigError("fixed_bits: need exactly one bit per tap");
    }
    for (std::size_t i = 0; i < n_taps; ++i) {
        if (!(tap_meta_prob[i] >= 0.0 && tap_meta_prob[i] <= 1.0)) {
            throw ConfigError("tap_meta_prob: entry " + std::to_string(i) +
                              " outside [0, 1]");
        }
        if (fixed_bits[i] > 1) {
            throw ConfigError("fixed_bits: entry " + std::to_string(i) + " not 0 or 1");
        }
    }
}

DelayLine DelayLine::triangular(std::size_t n_taps, std::size_t peak_tap,
                                double peak_prob, double half_width) {
    if (peak_tap >= n_taps) {
        throw ConfigError("peak_tap: must be < n_taps");
    }
    if (!(peak_prob >= 0.0 && peak_prob <= 1.0)) {
        throw ConfigError("peak_prob: must be in [0, 1]");
    }
    if (half_width <= 0.0) {
        throw ConfigError("half_width: must be > 0");
    }
    DelayLine line;
    line.n_taps = n_taps;
    line.tap_meta_prob.resize(n_taps, 0.0);
    line.fixed_bits.assign(n_taps, 0);
    for (std::size_t i = 0; i < n_taps; ++i) {
        double dist = std::fabs(static_cast<double>(i) - static_cast<double>(peak_tap));
        double p = peak_prob * (1.0 - dist / half_width);
        line.tap_meta_prob[i] = p > 0.0 ? p : 0.0;
    }
    line.validate();
    return line;
}

std::vector<std::uint8_t> sample_word(const DelayLine& line, RandomSource& rng) {
    std::vector<std::uint8_t> word(line.n_taps);
    for (std::size_t i = 0; i < line.n_taps; ++i) {
        if (rng.bernoulli(line.tap_meta_prob[i])) {
            word[i] = static_cast<std::uint8_t>(rng.coin());
        } else {
            word[i] = line.fixed_bits[i];
        }
    }
    return word;
}

std::vector<TapStats> analyze_taps(std::span<const std::vector<std::uint8_t>> words) {
    if (words.empty()) {
        throw std::invalid_argument("analyze_taps: no words");
    }
    std::size_t width = words.front().size();
    if (width == 0) {
        throw std::invalid_argument("analyze_taps: zero-width words");
    }
    std::vector<TapStats> stats(width);
    for (const auto& word : words) {
        if (word.size() != width) {
            throw std::invalid_argument("analyze_taps: ragged word widths");
        }
        for (std::size_t i = 0; i < width; ++i) {
            if (word[i] > 1) {
                throw std::invalid_argument("analyze_taps: word values must be 0 or 1");
            }
            stats[i].samples += 1;
            stats[i].ones += word[i];
        }
    }
    return stats;
}

std::size_t select_seed_tap(std::span<const TapStats> stats) {
    if (stats.empty()) {
        throw std::invalid_argument("select_seed_tap: no taps");
    }
    std::size_t best = 0;
    double best_score = stats[0].flip_score();
    for (std::size_t i = 1; i < stats.size(); ++i) {
        double score = stats[i].flip_score();
        if (score > best_score) { // strict: equal scores keep the lower index
            best = i;
            best_score = score;
        }
    }
    return best;
}

std::size_t select_seed_tap(std::span<const double> scores) {
    if (scores.empty()) {
        throw std::invalid_argument("select_seed_tap: no scores");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) {
            best = i;
        }
    }
    return best;
}

HarvestedSeed harvest_seed(const DelayLine& line, std::size_t tap_index,
                           RandomSource& rng, std::size_t n_bits) {
    line.validate();
    if (tap_index >= line.n_taps) {
        throw std::invalid_argument("harvest_seed: tap_index out of range");
    }
    if (n_bits == 0 || n_bits > 64) {
        throw std::invalid_argument("harvest_seed: n_bits must be in [1, 64]");
    }
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < n_bits; ++i) {
        value = (value << 1) | sample_word(line, rng)[tap_index];
    }
    HarvestedSeed seed;
    seed.substituted = (value == 0);
    seed.value = seed.substituted ? kFallbackSeed : value;
    return seed;
}

// ---------------------------------------------------------------------------
// Pseudo-random generator
// ---------------------------------------------------------------------------

std::uint64_t prng_next(std::uint64_t state) {
    if (state == 0) {
        throw std::invalid_argument("prng_next: zero state is a fixed point");
    }
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
}

Xorshift64::Xorshift64(std::uint64_t seed) : state_(seed) {
    if (seed == 0) {
        throw std::invalid_argument("Xorshift64: seed must be nonzero");
    }
}

std::uint64_t Xorshift64::next() {
    state_ = prng_next(state_);
    return state_;
}

Symbol next_symbol(Xorshift64& prng) {
    std::uint64_t x = prng.next();
    Bit bit = (x & 1u) ? Bit::One : Bit::Zero;
    Basis basis = (x & 2u) ? Basis::B2 : Basis::B1;
    return Symbol{bit, basis};
}

std::vector<std::uint8_t> prng_bitstream(Xorshift64& prng, std::size_t n_bits) {
    std::vector<std::uint8_t> bits;
    bits.reserve(n_bits);
    while (bits.size() < n_bits) {
        std::uint64_t x = prng.next();
        for (int b = 63; b >= 0 && bits.size() < n_bits; --b) {
            bits.push_back(static_cast<std::uint8_t>((x >> b) & 1u));
        }
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Randomness quality gates
// ---------------------------------------------------------------------------

namespace {

std::uint64_t count_ones_checked(std::span<const std::uint8_t> bits, const char* test) {
    if (bits.size() < 100) {
        throw std::invalid_argument(std::string(test) + ": need at least 100 bits");
    }
    std::uint64_t ones = 0;
    for (std::uint8_t b : bits) {
        if (b > 1) {
            throw std::invalid_argument(std::string(test) + ": bits must be 0 or 1");
        }
        ones += b;
    }
    return ones;
}

constexpr double kAlpha = 0.01;

} // namespace

BitTestResult monobit_test(std::span<const std::uint8_t> bits) {
    std::uint64_t ones = count_ones_checked(bits, "monobit_test");
    double n = static_cast<double>(bits.size());
    double s = std::fabs(2.0 * static_cast<double>(ones) - n) / std::sqrt(n);
    BitTestResult result;
    result.statistic = s;
    result.p_value = std::erfc(s / std::sqrt(2.0));
    result.pass = result.p_value >= kAlpha;
    return result;
}

BitTestResult runs_test(std::span<const std::uint8_t> bits) {
    std::uint64_t ones = count_ones_checked(bits, "runs_test");
    double n = static_cast<double>(bits.size());
    double pi = static_cast<double>(ones) / n;

    BitTestResult result;
    // Run counts carry no information once the bias itself is extreme; the
    // frequency pre-check guards the division below.
    if (std::fabs(pi - 0.5) >= 2.0 / std::sqrt(n)) {
        result.statistic = std::numeric_limits<double>::infinity();
        result.p_value = 0.0;
        result.pass = false;
        return result;
    }

    std::uint64_t runs = 1;
    for (std::size_t i = 0; i + 1 < bits.size(); ++i) {
        runs += bits[i] != bits[i + 1];
    }
    double expected = 2.0 * n * pi * (1.0 - pi);
    double z = std::fabs(static_cast<double>(runs) - expected) /
               (2.0 * std::sqrt(n) * pi * (1.0 - pi));
    result.statistic = z;
    result.p_value = std::erfc(z / std::sqrt(2.0));
    result.pass = result.p_value >= kAlpha;
    return result;
}

// ---------------------------------------------------------------------------
// Rate-decoupling symbol buffer
// ---------------------------------------------------------------------------

SymbolBuffer::SymbolBuffer(std::size_t capacity)
    : capacity_(capacity), slots_(capacity > 0 ? capacity : 1) {
    if (capacity == 0) {
        throw std::invalid_argument("SymbolBuffer: capacity must be > 0");
    }
}

bool SymbolBuffer::try_push(Symbol s) {
    std::uint64_t head = head_.load(std::memory_order_relaxed);
    std::uint64_t tail = tail_.load(std::memory_order_acquire);
    if (head - tail == capacity_) {
        overflows_.fetch_add(1, std::memory_order_relaxed);
        return false;
    }
    slots_[head % capacity_] = s;
    head_.store(head + 1, std::memory_order_release);
    return true;
}

std::optional<Symbol> SymbolBuffer::try_pop() {
    std::uint64_t tail = tail_.load(std::memory_order_relaxed);
    std::uint64_t head = head_.load(std::memory_order_acquire);
    if (head == tail) {
        underruns_.fetch_add(1, std::memory_order_relaxed);
        return std::nullopt;
    }
    Symbol s = slots_[tail % capacity_];
    tail_.store(tail + 1, std::memory_order_release);
    return s;
}

std::size_t SymbolBuffer::occupancy() const {
    std::uint64_t head = head_.load(std::memory_order_acquire);
    std::uint64_t tail = tail_.load(std::memory_order_acquire);
    return static_cast<std::size_t>(head - tail);
}

// ---------------------------------------------------------------------------
// Throughput simulation
// ---------------------------------------------------------------------------

void BufferSimConfig::validate() const {
    if (producer_bps < 0.0) {
        throw ConfigError("producer_bps: must be >= 0");
    }
    if (consumer_bps < 0.0) {
        throw ConfigError("consumer_bps: must be >= 0");
    }
    if (capacity == 0 || capacity > std::numeric_limits<std::uint32_t>::max()) {
        throw ConfigError("capacity: must be in [1, 2^32)");
    }
    if (duration_ticks == 0) {
        throw ConfigError("duration_ticks: must be > 0");
    }
    if (ticks_per_second == 0) {
        throw ConfigError("ticks_per_second: must be > 0");
    }
    if (initial_fill > capacity) {
        throw ConfigError("initial_fill: must be <= capacity");
    }
}

BufferSimReport simulate_buffer(const BufferSimConfig& cfg, std::span<const Burst> bursts,
                                Xorshift64& prng) {
    cfg.validate();

    // Two bits per symbol.
    double producer_per_tick =
        cfg.producer_bps / (2.0 * static_cast<double>(cfg.ticks_per_second));
    double consumer_per_tick =
        cfg.consumer_bps / (2.0 * static_cast<double>(cfg.ticks_per_second));

    SymbolBuffer buf(cfg.capacity);
    BufferSimReport report;
    report.occupancy.reserve(cfg.duration_ticks);

    for (std::size_t i = 0; i < cfg.initial_fill; ++i) {
        buf.try_push(next_symbol(prng));
        report.produced += 1;
    }
    report.max_occupancy = buf.occupancy();

    double producer_credit = 0.0;
    double consumer_credit = 0.0;
    for (std::uint64_t tick = 0; tick < cfg.duration_ticks; ++tick) {
        // Producer first. The generator outruns the optics by design; it
        // stalls when the ring is full and does not bank unproduced credit
        // across ticks (it can always regenerate on demand).
        producer_credit += producer_per_tick;
        auto to_produce = static_cast<std::uint64_t>(producer_credit);
        producer_credit -= static_cast<double>(to_produce);
        for (std::uint64_t i = 0; i < to_produce; ++i) {
            if (buf.occupancy() == buf.capacity()) {
                break;
            }
            buf.try_push(next_symbol(prng));
            report.produced += 1;
        }
        if (buf.occupancy() > report.max_occupancy) {
            report.max_occupancy = buf.occupancy();
        }

        // Steady optical drain.
        consumer_credit += consumer_per_tick;
        auto to_consume = static_cast<std::uint64_t>(consumer_credit);
        consumer_credit -= static_cast<double>(to_consume);
        for (std::uint64_t i = 0; i < to_consume; ++i) {
            if (buf.try_pop()) {
                report.consumed += 1;
            }
        }

        // Scheduled network reads on top of the drain.
        for (const Burst& burst : bursts) {
            if (burst.tick != tick) {
                continue;
            }
            for (std::uint64_t i = 0; i < burst.symbols; ++i) {
                if (buf.try_pop()) {
                    report.consumed += 1;
                }
            }
        }

        report.occupancy.push_back(static_cast<std::uint32_t>(buf.occupancy()));
    }

    report.underruns = buf.underruns();
    report.overflows = buf.overflows();
    return report;
}

} // namespace qkd::modem

#pragma once

// The classical channel: a length-prefixed binary framing protocol over
// which Bob discloses his detections and bases, Alice answers with the
// basis-match mask, and the two optionally sacrifice a key sample to
// estimate the error rate. Runs over any Transport.
//
// Frame layout (all multi-byte integers big-endian):
//   magic 0x51 0x4B | version 0x01 | msg_type u8 | length u32 | payload
//
// Transcript language, strictly enforced on both sides:
//   HELLO DETECTIONS BOB_BASES MATCH_MASK (QBER_SAMPLE_REQ QBER_SAMPLE_BITS
//   QBER_REPORT)? BYE

#include "qkd/channel.hpp"
#include "qkd/protocol.hpp"
#include "qkd/transport.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace qkd::net {

inline constexpr std::uint8_t kMagic0 = 0x51;
inline constexpr std::uint8_t kMagic1 = 0x4B;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint32_t kMaxPayload = 16u * 1024u * 1024u;

enum class MsgType : std::uint8_t {
    Hello = 0x01,
    Detections = 0x02,
    BobBases = 0x03,
    MatchMask = 0x04,
    QberSampleReq = 0x05,
    QberSampleBits = 0x06,
    QberReport = 0x07,
    Bye = 0x08,
};

enum class ByeReason : std::uint8_t {
    Normal = 0,
    ProtocolViolation = 1,
    VersionMismatch = 2,
    ParameterMismatch = 3,
    InternalError = 4,
};

using SessionId = std::array<std::uint8_t, 16>;

// --------------------------------------------------------------------------
// Messages
// --------------------------------------------------------------------------

struct Hello {
    SessionId session_id{};
    std::uint64_t n_gates = 0;
    bool operator==(const Hello&) const = default;
};

/// Gates with a usable single click, ascending. Wire form is a sparse-bitmap
/// run-length code: varint count, then the first gate and the zero-gap
/// before each later gate.
struct Detections {
    std::vector<std::uint64_t> gates;
    bool operator==(const Detections&) const = default;
};

/// One basis per detected gate, same order as Detections.
struct BobBases {
    std::vector<protocol::Basis> bases;
    bool operator==(const BobBases&) const = default;
};

/// One keep flag per detected gate: 1 = bases matched.
struct MatchMask {
    std::vector<std::uint8_t> keep;
    bool operator==(const MatchMask&) const = default;
};

/// Sifted gates sacrificed for error estimation, ascending.
struct QberSampleReq {
    std::vector<std::uint64_t> gates;
    bool operator==(const QberSampleReq&) const = default;
};

/// Bob's bits at the requested gates, same order.
struct QberSampleBits {
    std::vector<protocol::Bit> bits;
    bool operator==(const QberSampleBits&) const = default;
};

struct QberReport {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 0;
    bool operator==(const QberReport&) const = default;
};

struct Bye {
    ByeReason reason = ByeReason::Normal;
    bool operator==(const Bye&) const = default;
};

using Message = std::variant<Hello, Detections, BobBases, MatchMask, QberSampleReq,
                             QberSampleBits, QberReport, Bye>;

MsgType message_type(const Message& msg);
const char* msg_type_name(MsgType t);

// --------------------------------------------------------------------------
// Frame codec
// --------------------------------------------------------------------------

enum class DecodeStatus : std::uint8_t {
    Ok,
    Incomplete,  ///< not enough bytes yet; nothing consumed
    BadMagic,
    BadVersion,
    Oversize,    ///< declared length above kMaxPayload
    UnknownType,
    Malformed,   ///< payload does not parse as its message type
};

struct DecodeResult {
    DecodeStatus status = DecodeStatus::Incomplete;
    std::optional<Message> message;  ///< set only when status == Ok
    std::size_t consumed = 0;        ///< bytes to drop from the stream head
};

std::vector<std::uint8_t> encode_frame(const Message& msg);
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

// --------------------------------------------------------------------------
// Transcript order
// --------------------------------------------------------------------------

enum class Phase : std::uint8_t {
    Init,
    AwaitDetections,
    AwaitBases,
    AwaitMask,
    AwaitQber, ///< covers the optional three-message sample exchange
    Done,
    Failed,
};

/// Acceptor for the merged send+receive transcript. Both endpoints feed
/// every message through one of these; the first out-of-order type drives
/// it to Failed, where it stays.
class TranscriptMachine {
public:
    Phase phase() const { return phase_; }

    /// false = the type is illegal here (machine is now Failed).
    bool feed(MsgType type);

private:
    Phase phase_ = Phase::Init;
    // Progress inside AwaitQber: 0 none, 1 saw REQ, 2 saw BITS, 3 done.
    int qber_step_ = 0;
};

// --------------------------------------------------------------------------
// Sessions
// --------------------------------------------------------------------------

struct SessionConfig {
    SessionId session_id{};
    std::uint64_t n_gates = 0;
    /// Fraction of sifted gates Alice sacrifices for the error estimate;
    /// 0 skips the sample exchange entirely. Only Alice reads this.
    double sample_rate = 0.10;
};

/// Alice's private knowledge: what she modulated onto every gate.
struct AliceInputs {
    std::vector<protocol::Symbol> symbols; ///< one per gate
};

/// Bob's private knowledge: gates where exactly one detector fired.
struct BobInputs {
    struct Detection {
        std::uint64_t gate = 0;
        protocol::Basis basis = protocol::Basis::B1;
        protocol::Bit bit = protocol::Bit::Zero;
    };
    std::vector<Detection> detections; ///< ascending by gate
};

struct SessionResult {
    protocol::SiftedKey key;      ///< after sampled gates are removed
    std::uint64_t detected = 0;   ///< single-click gates disclosed
    std::uint64_t sifted = 0;     ///< basis matches, before sampling
    std::uint64_t sampled = 0;
    std::uint64_t qber_numerator = 0;
    std::uint64_t qber_denominator = 0;
    /// Absent when no sample was exchanged or the denominator was zero.
    std::optional<double> qber_sample;
};

/// Blocking session drivers. Throw ProtocolError (or TimeoutError) on any
/// deviation from the transcript language, after sending a reasoned BYE
/// where possible.
SessionResult run_alice(Transport& transport, const SessionConfig& cfg,
                        const AliceInputs& inputs);
SessionResult run_bob(Transport& transport, const SessionConfig& cfg,
                      const BobInputs& inputs);

/// Role-appropriate projections of a simulated trace.
AliceInputs alice_view(const sim::GateTrace& trace);
BobInputs bob_view(const sim::GateTrace& trace);

/// 16 session bytes derived deterministically from a run seed.
SessionId session_id_from_seed(std::uint64_t seed);

} // namespace qkd::net

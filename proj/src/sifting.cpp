#include "qkd/sifting.hpp"

#include "qkd/errors.hpp"
#include "qkd/random.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

namespace qkd::net {

using protocol::Basis;
using protocol::Bit;

// ---------------------------------------------------------------------------
// Byte-level helpers
// ---------------------------------------------------------------------------

namespace {

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64be(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

/// LEB128, canonical: no overlong encodings, 64-bit range enforced.
void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v) | 0x80);
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

/// Sequential payload reader. Every getter returns false on exhaustion.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    bool done() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

    bool u8(std::uint8_t& v) {
        if (remaining() < 1) return false;
        v = data_[pos_++];
        return true;
    }

    bool u64be(std::uint64_t& v) {
        if (remaining() < 8) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) {
            v = (v << 8) | data_[pos_++];
        }
        return true;
    }

    bool varint(std::uint64_t& v) {
        v = 0;
        int shift = 0;
        std::size_t len = 0;
        while (true) {
            if (remaining() < 1 || len == 10) return false;
            std::uint8_t byte = data_[pos_++];
            ++len;
            if (len == 10 && byte > 0x01) return false; // beyond 64 bits
            v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
            if ((byte & 0x80) == 0) {
                if (byte == 0 && len > 1) return false; // overlong
                return true;
            }
            shift += 7;
        }
    }

    bool bytes(std::span<std::uint8_t> out) {
        if (remaining() < out.size()) return false;
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), out.size(),
                    out.begin());
        pos_ += out.size();
        return true;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

// Packed bit vectors travel as: u64 count, then ceil(count/8) bytes, most
// significant bit first, padding bits zero.

void put_packed_bits(std::vector<std::uint8_t>& out, std::size_t count,
                     const std::function<std::uint8_t(std::size_t)>& bit_at) {
    put_u64be(out, count);
    std::uint8_t acc = 0;
    for (std::size_t i = 0; i < count; ++i) {
        acc = static_cast<std::uint8_t>((acc << 1) | (bit_at(i) & 1));
        if (i % 8 == 7) {
            out.push_back(acc);
            acc = 0;
        }
    }
    if (count % 8 != 0) {
        acc = static_cast<std::uint8_t>(acc << (8 - count % 8));
        out.push_back(acc);
    }
}

bool get_packed_bits(Reader& r, std::vector<std::uint8_t>& bits) {
    std::uint64_t count = 0;
    if (!r.u64be(count)) return false;
    std::uint64_t n_bytes = (count + 7) / 8;
    if (r.remaining() < n_bytes) return false;
    bits.clear();
    bits.reserve(count);
    for (std::uint64_t byte_i = 0; byte_i < n_bytes; ++byte_i) {
        std::uint8_t byte = 0;
        r.u8(byte);
        for (int b = 7; b >= 0; --b) {
            std::uint64_t idx = byte_i * 8 + static_cast<std::uint64_t>(7 - b);
            std::uint8_t bit = (byte >> b) & 1;
            if (idx < count) {
                bits.push_back(bit);
            } else if (bit != 0) {
                return false; // nonzero padding
            }
        }
    }
    return true;
}

// Ascending gate lists travel as: varint count, first gate, then the gap
// (zeros between detections) before each subsequent gate.

void put_gate_list(std::vector<std::uint8_t>& out, std::span<const std::uint64_t> gates) {
    put_varint(out, gates.size());
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < gates.size(); ++i) {
        if (i == 0) {
            put_varint(out, gates[0]);
        } else {
            if (gates[i] <= prev) {
                throw std::invalid_argument("gate list must be strictly ascending");
            }
            put_varint(out, gates[i] - prev - 1);
        }
        prev = gates[i];
    }
}

bool get_gate_list(Reader& r, std::vector<std::uint64_t>& gates) {
    std::uint64_t count = 0;
    if (!r.varint(count)) return false;
    // Each entry needs at least one payload byte; cheap bound before reserve.
    if (count > r.remaining()) return false;
    gates.clear();
    gates.reserve(count);
    std::uint64_t prev = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t v = 0;
        if (!r.varint(v)) return false;
        std::uint64_t gate;
        if (i == 0) {
            gate = v;
        } else {
            if (v > std::numeric_limits<std::uint64_t>::max() - prev - 1) return false;
            gate = prev + v + 1;
        }
        gates.push_back(gate);
        prev = gate;
    }
    return true;
}

} // namespace

// ---------------------------------------------------------------------------
// Message plumbing
// ---------------------------------------------------------------------------

MsgType message_type(const Message& msg) {
    struct Visitor {
        MsgType operator()(const Hello&) const { return MsgType::Hello; }
        MsgType operator()(const Detections&) const { return MsgType::Detections; }
        MsgType operator()(const BobBases&) const { return MsgType::BobBases; }
        MsgType operator()(const MatchMask&) const { return MsgType::MatchMask; }
        MsgType operator()(const QberSampleReq&) const { return MsgType::QberSampleReq; }
        MsgType operator()(const QberSampleBits&) const { return MsgType::QberSampleBits; }
        MsgType operator()(const QberReport&) const { return MsgType::QberReport; }
        MsgType operator()(const Bye&) const { return MsgType::Bye; }
    };
    return std::visit(Visitor{}, msg);
}

const char* msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::Hello: return "HELLO";
        case MsgType::Detections: return "DETECTIONS";
        case MsgType::BobBases: return "BOB_BASES";
        case MsgType::MatchMask: return "MATCH_MASK";
        case MsgType::QberSampleReq: return "QBER_SAMPLE_REQ";
        case MsgType::QberSampleBits: return "QBER_SAMPLE_BITS";
        case MsgType::QberReport: return "QBER_REPORT";
        case MsgType::Bye: return "BYE";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Frame codec
// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> encode_payload(const Message& msg) {
    std::vector<std::uint8_t> p;
    if (const auto* hello = std::get_if<Hello>(&msg)) {
        p.insert(p.end(), hello->session_id.begin(), hello->session_id.end());
        put_u64be(p, hello->n_gates);
    } else if (const auto* det = std::get_if<Detections>(&msg)) {
        put_gate_list(p, det->gates);
    } else if (const auto* bases = std::get_if<BobBases>(&msg)) {
        put_packed_bits(p, bases->bases.size(), [&](std::size_t i) {
            return static_cast<std::uint8_t>(bases->bases[i]);
        });
    } else if (const auto* mask = std::get_if<MatchMask>(&msg)) {
        for (std::uint8_t k : mask->keep) {
            if (k > 1) throw std::invalid_argument("match mask entries must be 0 or 1");
        }
        put_packed_bits(p, mask->keep.size(),
                        [&](std::size_t i) { return mask->keep[i]; });
    } else if (const auto* req = std::get_if<QberSampleReq>(&msg)) {
        put_gate_list(p, req->gates);
    } else if (const auto* bits = std::get_if<QberSampleBits>(&msg)) {
        put_packed_bits(p, bits->bits.size(), [&](std::size_t i) {
            return static_cast<std::uint8_t>(bits->bits[i]);
        });
    } else if (const auto* report = std::get_if<QberReport>(&msg)) {
        put_u64be(p, report->numerator);
        put_u64be(p, report->denominator);
    } else if (const auto* bye = std::get_if<Bye>(&msg)) {
        p.push_back(static_cast<std::uint8_t>(bye->reason));
    }
    return p;
}

std::optional<Message> decode_payload(MsgType type, std::span<const std::uint8_t> payload) {
    Reader r(payload);
    switch (type) {
        case MsgType::Hello: {
            Hello m;
            if (!r.bytes(m.session_id) || !r.u64be(m.n_gates) || !r.done()) return {};
            return m;
        }
        case MsgType::Detections: {
            Detections m;
            if (!get_gate_list(r, m.gates) || !r.done()) return {};
            return m;
        }
        case MsgType::BobBases: {
            std::vector<std::uint8_t> raw;
            if (!get_packed_bits(r, raw) || !r.done()) return {};
            BobBases m;
            m.bases.reserve(raw.size());
            for (std::uint8_t b : raw) {
                m.bases.push_back(b ? Basis::B2 : Basis::B1);
            }
            return m;
        }
        case MsgType::MatchMask: {
            MatchMask m;
            if (!get_packed_bits(r, m.keep) || !r.done()) return {};
            return m;
        }
        case MsgType::QberSampleReq: {
            QberSampleReq m;
            if (!get_gate_list(r, m.gates) || !r.done()) return {};
            return m;
        }
        case MsgType::QberSampleBits: {
            std::vector<std::uint8_t> raw;
            if (!get_packed_bits(r, raw) || !r.done()) return {};
            QberSampleBits m;
            m.bits.reserve(raw.size());
            for (std::uint8_t b : raw) {
                m.bits.push_back(b ? Bit::One : Bit::Zero);
            }
            return m;
        }
        case MsgType::QberReport: {
            QberReport m;
            if (!r.u64be(m.numerator) || !r.u64be(m.denominator) || !r.done()) return {};
            return m;
        }
        case MsgType::Bye: {
            std::uint8_t reason = 0;
            if (!r.u8(reason) || !r.done()) return {};
            if (reason > static_cast<std::uint8_t>(ByeReason::InternalError)) return {};
            return Bye{static_cast<ByeReason>(reason)};
        }
    }
    return {};
}

} // namespace

std::vector<std::uint8_t> encode_frame(const Message& msg) {
    std::vector<std::uint8_t> payload = encode_payload(msg);
    if (payload.size() > kMaxPayload) {
        throw std::length_error("encode_frame: payload exceeds 16 MiB frame limit");
    }
    std::vector<std::uint8_t> frame;
    frame.reserve(8 + payload.size());
    frame.push_back(kMagic0);
    frame.push_back(kMagic1);
    frame.push_back(kVersion);
    frame.push_back(static_cast<std::uint8_t>(message_type(msg)));
    put_u32be(frame, static_cast<std::uint32_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
    DecodeResult res;
    if (!bytes.empty() && bytes[0] != kMagic0) {
        res.status = DecodeStatus::BadMagic;
        return res;
    }
    if (bytes.size() >= 2 && bytes[1] != kMagic1) {
        res.status = DecodeStatus::BadMagic;
        return res;
    }
    if (bytes.size() >= 3 && bytes[2] != kVersion) {
        res.status = DecodeStatus::BadVersion;
        return res;
    }
    if (bytes.size() >= 4) {
        std::uint8_t t = bytes[3];
        if (t < static_cast<std::uint8_t>(MsgType::Hello) ||
            t > static_cast<std::uint8_t>(MsgType::Bye)) {
            res.status = DecodeStatus::UnknownType;
            return res;
        }
    }
    if (bytes.size() < 8) {
        res.status = DecodeStatus::Incomplete;
        return res;
    }
    std::uint32_t length = (static_cast<std::uint32_t>(bytes[4]) << 24) |
                           (static_cast<std::uint32_t>(bytes[5]) << 16) |
                           (static_cast<std::uint32_t>(bytes[6]) << 8) |
                           static_cast<std::uint32_t>(bytes[7]);
    if (length > kMaxPayload) {
        res.status = DecodeStatus::Oversize;
        return res;
    }
    std::size_t total = 8 + static_cast<std::size_t>(length);
    if (bytes.size() < total) {
        res.status = DecodeStatus::Incomplete;
        return res;
    }
    auto msg = decode_payload(static_cast<MsgType>(bytes[3]), bytes.subspan(8, length));
    if (!msg) {
        res.status = DecodeStatus::Malformed;
        return res;
    }
    res.status = DecodeStatus::Ok;
    res.message = std::move(msg);
    res.consumed = total;
    return res;
}

// ---------------------------------------------------------------------------
// Transcript order
// ---------------------------------------------------------------------------

bool TranscriptMachine::feed(MsgType type) {
    switch (phase_) {
        case Phase::Init:
            if (type == MsgType::Hello) {
                phase_ = Phase::AwaitDetections;
                return true;
            }
            break;
        case Phase::AwaitDetections:
            if (type == MsgType::Detections) {
                phase_ = Phase::AwaitBases;
                return true;
            }
            break;
        case Phase::AwaitBases:
            if (type == MsgType::BobBases) {
                phase_ = Phase::AwaitMask;
                return true;
            }
            break;
        case Phase::AwaitMask:
            if (type == MsgType::MatchMask) {
                phase_ = Phase::AwaitQber;
                qber_step_ = 0;
                return true;
            }
            break;
        case Phase::AwaitQber:
            if (qber_step_ == 0 && type == MsgType::QberSampleReq) {
                qber_step_ = 1;
                return true;
            }
            if (qber_step_ == 1 && type == MsgType::QberSampleBits) {
                qber_step_ = 2;
                return true;
            }
            if (qber_step_ == 2 && type == MsgType::QberReport) {
                qber_step_ = 3;
                return true;
            }
            if ((qber_step_ == 0 || qber_step_ == 3) && type == MsgType::Bye) {
                phase_ = Phase::Done;
                return true;
            }
            break;
        case Phase::Done:
        case Phase::Failed:
            break;
    }
    phase_ = Phase::Failed;
    return false;
}

// ---------------------------------------------------------------------------
// Session endpoints
// ---------------------------------------------------------------------------

namespace {

const char* status_name(DecodeStatus s) {
    switch (s) {
        case DecodeStatus::Ok: return "ok";
        case DecodeStatus::Incomplete: return "incomplete";
        case DecodeStatus::BadMagic: return "bad magic";
        case DecodeStatus::BadVersion: return "bad version";
        case DecodeStatus::Oversize: return "oversize frame";
        case DecodeStatus::UnknownType: return "unknown message type";
        case DecodeStatus::Malformed: return "malformed payload";
    }
    return "?";
}

const char* reason_name(ByeReason r) {
    switch (r) {
        case ByeReason::Normal: return "normal";
        case ByeReason::ProtocolViolation: return "protocol violation";
        case ByeReason::VersionMismatch: return "version mismatch";
        case ByeReason::ParameterMismatch: return "parameter mismatch";
        case ByeReason::InternalError: return "internal error";
    }
    return "?";
}

/// One endpoint's framed, order-checked view of the byte stream.
class Endpoint {
public:
    explicit Endpoint(Transport& transport) : transport_(transport) {}

    void send(const Message& msg) {
        if (!machine_.feed(message_type(msg))) {
            throw std::logic_error("endpoint sent out-of-order message");
        }
        auto frame = encode_frame(msg);
        transport_.send(frame);
    }

    /// Receives one message, enforcing transcript order. A non-normal BYE
    /// from the peer surfaces as ProtocolError.
    Message recv() {
        Message msg = next_frame();
        if (const auto* bye = std::get_if<Bye>(&msg)) {
            if (bye->reason != ByeReason::Normal) {
                throw ProtocolError(std::string("peer aborted session: ") +
                                    reason_name(bye->reason));
            }
        }
        if (!machine_.feed(message_type(msg))) {
            abort_session(ByeReason::ProtocolViolation,
                          std::string("unexpected ") + msg_type_name(message_type(msg)));
        }
        return msg;
    }

    template <typename T>
    T expect() {
        Message msg = recv();
        if (auto* typed = std::get_if<T>(&msg)) {
            return std::move(*typed);
        }
        // Unreachable for a linear transcript position, but kept as a guard
        // for the branching QBER step.
        abort_session(ByeReason::ProtocolViolation,
                      std::string("unexpected ") + msg_type_name(message_type(msg)));
    }

    /// Sends a reasoned BYE (best effort) and raises ProtocolError.
    [[noreturn]] void abort_session(ByeReason reason, const std::string& detail) {
        try {
            transport_.send(encode_frame(Bye{reason}));
        } catch (...) {
            // The peer may already be gone; the local error matters more.
        }
        throw ProtocolError("session failed (" + std::string(reason_name(reason)) +
                            "): " + detail);
    }

private:
    Message next_frame() {
        while (true) {
            if (!buf_.empty()) {
                DecodeResult res = decode_frame(buf_);
                if (res.status == DecodeStatus::Ok) {
                    buf_.erase(buf_.begin(),
                               buf_.begin() + static_cast<std::ptrdiff_t>(res.consumed));
                    return std::move(*res.message);
                }
                if (res.status != DecodeStatus::Incomplete) {
                    ByeReason reason = res.status == DecodeStatus::BadVersion
                                           ? ByeReason::VersionMismatch
                                           : ByeReason::ProtocolViolation;
                    abort_session(reason, status_name(res.status));
                }
            }
            std::uint8_t chunk[4096];
            std::size_t n = transport_.recv_some(chunk);
            if (n == 0) {
                throw ProtocolError("connection closed mid-session");
            }
            buf_.insert(buf_.end(), chunk, chunk + n);
        }
    }

    Transport& transport_;
    TranscriptMachine machine_;
    std::vector<std::uint8_t> buf_;
};

std::uint64_t sampler_seed(const SessionId& id) {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    for (int i = 0; i < 8; ++i) {
        a = (a << 8) | id[static_cast<std::size_t>(i)];
        b = (b << 8) | id[static_cast<std::size_t>(i) + 8];
    }
    return a ^ b;
}

/// Both sides must agree on the sample, so it is drawn from the shared
/// session id, never from a session's physics seed.
std::vector<std::uint64_t> choose_sample(const SessionId& id, double rate,
                                         std::span<const std::uint64_t> sifted_gates) {
    RandomSource rng(sampler_seed(id));
    std::vector<std::uint64_t> sample;
    for (std::uint64_t gate : sifted_gates) {
        if (rng.bernoulli(rate)) {
            sample.push_back(gate);
        }
    }
    return sample;
}

/// Drops the (ascending) sampled gates from an ascending key.
void remove_gates(protocol::SiftedKey& key, std::span<const std::uint64_t> gates) {
    if (gates.empty()) return;
    protocol::SiftedKey kept;
    kept.bits.reserve(key.size());
    kept.source_gates.reserve(key.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < key.size(); ++i) {
        if (j < gates.size() && key.source_gates[i] == gates[j]) {
            ++j;
            continue;
        }
        kept.bits.push_back(key.bits[i]);
        kept.source_gates.push_back(key.source_gates[i]);
    }
    key = std::move(kept);
}

} // namespace

SessionResult run_alice(Transport& transport, const SessionConfig& cfg,
                        const AliceInputs& inputs) {
    if (inputs.symbols.size() != cfg.n_gates) {
        throw std::invalid_argument("run_alice: need one symbol per gate");
    }
    Endpoint ep(transport);
    SessionResult result;

    Hello hello = ep.expect<Hello>();
    if (hello.session_id != cfg.session_id) {
        ep.abort_session(ByeReason::ParameterMismatch, "HELLO session id differs");
    }
    if (hello.n_gates != cfg.n_gates) {
        ep.abort_session(ByeReason::ParameterMismatch, "HELLO gate count differs");
    }

    Detections det = ep.expect<Detections>();
    if (!det.gates.empty() && det.gates.back() >= cfg.n_gates) {
        ep.abort_session(ByeReason::ProtocolViolation, "detection gate out of range");
    }

    BobBases bases = ep.expect<BobBases>();
    if (bases.bases.size() != det.gates.size()) {
        ep.abort_session(ByeReason::ProtocolViolation,
                         "basis count does not match detection count");
    }

    MatchMask mask;
    mask.keep.reserve(det.gates.size());
    protocol::SiftedKey key;
    for (std::size_t i = 0; i < det.gates.size(); ++i) {
        const protocol::Symbol& sym = inputs.symbols[det.gates[i]];
        bool match = sym.basis == bases.bases[i];
        mask.keep.push_back(match ? 1 : 0);
        if (match) {
            key.bits.push_back(sym.bit);
            key.source_gates.push_back(det.gates[i]);
        }
    }
    ep.send(mask);

    result.detected = det.gates.size();
    result.sifted = key.size();

    if (cfg.sample_rate > 0.0) {
        auto sample = choose_sample(cfg.session_id, cfg.sample_rate, key.source_gates);
        ep.send(QberSampleReq{sample});
        QberSampleBits bits = ep.expect<QberSampleBits>();
        if (bits.bits.size() != sample.size()) {
            ep.abort_session(ByeReason::ProtocolViolation, "sample bit count differs");
        }
        std::uint64_t mismatches = 0;
        std::size_t key_i = 0;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            while (key.source_gates[key_i] != sample[i]) ++key_i;
            mismatches += key.bits[key_i] != bits.bits[i];
        }
        ep.send(QberReport{mismatches, sample.size()});

        result.sampled = sample.size();
        result.qber_numerator = mismatches;
        result.qber_denominator = sample.size();
        if (!sample.empty()) {
            result.qber_sample = static_cast<double>(mismatches) /
                                 static_cast<double>(sample.size());
        }
        remove_gates(key, sample);
    }

    ep.send(Bye{ByeReason::Normal});
    result.key = std::move(key);
    return result;
}

SessionResult run_bob(Transport& transport, const SessionConfig& cfg,
                      const BobInputs& inputs) {
    std::uint64_t prev_gate = 0;
    for (std::size_t i = 0; i < inputs.detections.size(); ++i) {
        std::uint64_t g = inputs.detections[i].gate;
        if (g >= cfg.n_gates || (i > 0 && g <= prev_gate)) {
            throw std::invalid_argument("run_bob: detections must be ascending, in range");
        }
        prev_gate = g;
    }

    Endpoint ep(transport);
    SessionResult result;

    ep.send(Hello{cfg.session_id, cfg.n_gates});

    Detections det;
    det.gates.reserve(inputs.detections.size());
    BobBases bases;
    bases.bases.reserve(inputs.detections.size());
    for (const auto& d : inputs.detections) {
        det.gates.push_back(d.gate);
        bases.bases.push_back(d.basis);
    }
    ep.send(det);
    ep.send(bases);

    MatchMask mask = ep.expect<MatchMask>();
    if (mask.keep.size() != inputs.detections.size()) {
        ep.abort_session(ByeReason::ProtocolViolation,
                         "match mask length does not match detection count");
    }
    protocol::SiftedKey key;
    for (std::size_t i = 0; i < inputs.detections.size(); ++i) {
        if (mask.keep[i]) {
            key.bits.push_back(inputs.detections[i].bit);
            key.source_gates.push_back(inputs.detections[i].gate);
        }
    }
    result.detected = inputs.detections.size();
    result.sifted = key.size();

    Message msg = ep.recv();
    if (auto* req = std::get_if<QberSampleReq>(&msg)) {
        // Every requested gate must be one of ours; walk both ascending lists.
        QberSampleBits bits;
        bits.bits.reserve(req->gates.size());
        std::size_t key_i = 0;
        for (std::uint64_t gate : req->gates) {
            while (key_i < key.size() && key.source_gates[key_i] < gate) ++key_i;
            if (key_i == key.size() || key.source_gates[key_i] != gate) {
                ep.abort_session(ByeReason::ProtocolViolation,
                                 "sample request outside sifted key");
            }
            bits.bits.push_back(key.bits[key_i]);
        }
        ep.send(bits);

        QberReport report = ep.expect<QberReport>();
        if (report.denominator != req->gates.size()) {
            ep.abort_session(ByeReason::ProtocolViolation,
                             "error report denominator differs from sample size");
        }
        result.sampled = req->gates.size();
        result.qber_numerator = report.numerator;
        result.qber_denominator = report.denominator;
        if (report.denominator > 0) {
            result.qber_sample = static_cast<double>(report.numerator) /
                                 static_cast<double>(report.denominator);
        }
        remove_gates(key, req->gates);

        ep.expect<Bye>();
    } else if (!std::holds_alternative<Bye>(msg)) {
        ep.abort_session(ByeReason::ProtocolViolation,
                         std::string("unexpected ") + msg_type_name(message_type(msg)));
    }

    result.key = std::move(key);
    return result;
}

// ---------------------------------------------------------------------------
// Bridges
// ---------------------------------------------------------------------------

AliceInputs alice_view(const sim::GateTrace& trace) {
    AliceInputs inputs;
    inputs.symbols.reserve(trace.size());
    for (std::size_t i = 0; i < trace.gates.size(); ++i) {
        const sim::GateRecord& g = trace.gates[i];
        if (g.gate_index != i) {
            throw std::invalid_argument("alice_view: trace gates must be consecutive");
        }
        inputs.symbols.push_back({g.alice_bit, g.alice_basis});
    }
    return inputs;
}

BobInputs bob_view(const sim::GateTrace& trace) {
    BobInputs inputs;
    for (const sim::GateRecord& g : trace.gates) {
        auto bit = protocol::decode_click(g.click);
        if (bit) {
            inputs.detections.push_back({g.gate_index, g.bob_basis, *bit});
        }
    }
    return inputs;
}

SessionId session_id_from_seed(std::uint64_t seed) {
    RandomSource rng(seed);
    SessionId id{};
    for (int half = 0; half < 2; ++half) {
        std::uint64_t word = rng.next_u64();
        for (int i = 0; i < 8; ++i) {
            id[static_cast<std::size_t>(half * 8 + i)] =
                static_cast<std::uint8_t>(word >> (56 - 8 * i));
        }
    }
    return id;
}

} // namespace qkd::net

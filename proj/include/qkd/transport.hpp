#pragma once

// Reliable ordered byte streams for the classical channel: an in-memory
// pipe pair for in-process sessions and tests, and TCP sockets for the
// two-process demo. Both enforce a receive deadline.

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

namespace qkd::net {

inline constexpr std::chrono::milliseconds kDefaultTimeout{30000};

class Transport {
public:
    virtual ~Transport() = default;

    /// Writes every byte or throws ProtocolError.
    virtual void send(std::span<const std::uint8_t> bytes) = 0;

    /// Blocks until at least one byte is available, the peer closes (returns
    /// 0), or the deadline passes (throws TimeoutError). Returns the number
    /// of bytes written into `out`.
    virtual std::size_t recv_some(std::span<std::uint8_t> out) = 0;

    /// Signals end of stream to the peer. Safe to call twice.
    virtual void close() = 0;
};

/// Two connected in-memory endpoints; what one sends the other receives.
struct PipePair {
    std::shared_ptr<Transport> a;
    std::shared_ptr<Transport> b;
};

PipePair make_pipe(std::chrono::milliseconds timeout = kDefaultTimeout);

/// Blocking TCP connect; throws ProtocolError when the peer is unreachable.
std::unique_ptr<Transport> tcp_connect(const std::string& host, std::uint16_t port,
                                       std::chrono::milliseconds timeout = kDefaultTimeout);

/// One-shot accept loop for the serving side.
class TcpListener {
public:
    /// Binds and listens immediately; port 0 picks a free port.
    TcpListener(const std::string& host, std::uint16_t port);
    ~TcpListener();

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }

    /// Blocks for one inbound connection.
    std::unique_ptr<Transport> accept(std::chrono::milliseconds timeout = kDefaultTimeout);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

} // namespace qkd::net

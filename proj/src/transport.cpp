#include "qkd/transport.hpp"

#include "qkd/errors.hpp"

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

namespace qkd::net {

namespace {

// ---------------------------------------------------------------------------
// In-memory pipe
// ---------------------------------------------------------------------------

/// One direction of the pipe: a byte queue plus its writer's closed flag.
struct Channel {
    std::mutex mtx;
    std::condition_variable cv;
    std::deque<std::uint8_t> bytes;
    bool closed = false;
};

class PipeTransport final : public Transport {
public:
    PipeTransport(std::shared_ptr<Channel> out, std::shared_ptr<Channel> in,
                  std::chrono::milliseconds timeout)
        : out_(std::move(out)), in_(std::move(in)), timeout_(timeout) {}

    ~PipeTransport() override { close(); }

    void send(std::span<const std::uint8_t> bytes) override {
        std::lock_guard lock(out_->mtx);
        if (out_->closed) {
            throw ProtocolError("pipe send: endpoint already closed");
        }
        out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
        out_->cv.notify_one();
    }

    std::size_t recv_some(std::span<std::uint8_t> out) override {
        if (out.empty()) return 0;
        std::unique_lock lock(in_->mtx);
        bool ready = in_->cv.wait_for(lock, timeout_,
                                      [&] { return !in_->bytes.empty() || in_->closed; });
        if (!ready) {
            throw TimeoutError("pipe recv: no data within deadline");
        }
        if (in_->bytes.empty()) {
            return 0; // peer closed and drained
        }
        std::size_t n = std::min(out.size(), in_->bytes.size());
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = in_->bytes.front();
            in_->bytes.pop_front();
        }
        return n;
    }

    void close() override {
        std::lock_guard lock(out_->mtx);
        out_->closed = true;
        out_->cv.notify_all();
    }

private:
    std::shared_ptr<Channel> out_;
    std::shared_ptr<Channel> in_;
    std::chrono::milliseconds timeout_;
};

// ---------------------------------------------------------------------------
// TCP
// ---------------------------------------------------------------------------

void set_recv_deadline(int fd, std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

class SocketTransport final : public Transport {
public:
    SocketTransport(int fd, std::chrono::milliseconds timeout) : fd_(fd) {
        set_recv_deadline(fd_, timeout);
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    ~SocketTransport() override { close(); }

    void send(std::span<const std::uint8_t> bytes) override {
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("socket send: ") + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    std::size_t recv_some(std::span<std::uint8_t> out) override {
        if (out.empty()) return 0;
        while (true) {
            ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
            if (n > 0) return static_cast<std::size_t>(n);
            if (n == 0) return 0;
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                throw TimeoutError("socket recv: no data within deadline");
            }
            throw ProtocolError(std::string("socket recv: ") + std::strerror(errno));
        }
    }

    void close() override {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_WR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_;
};

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) {
        return addr;
    }
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &result);
    if (rc != 0 || result == nullptr) {
        throw ProtocolError("resolve: cannot resolve host '" + host + "'");
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
    ::freeaddrinfo(result);
    return addr;
}

} // namespace

PipePair make_pipe(std::chrono::milliseconds timeout) {
    auto ab = std::make_shared<Channel>();
    auto ba = std::make_shared<Channel>();
    PipePair pair;
    pair.a = std::make_shared<PipeTransport>(ab, ba, timeout);
    pair.b = std::make_shared<PipeTransport>(ba, ab, timeout);
    return pair;
}

std::unique_ptr<Transport> tcp_connect(const std::string& host, std::uint16_t port,
                                       std::chrono::milliseconds timeout) {
    sockaddr_in addr = resolve(host, port);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
        throw ProtocolError(std::string("socket: ") + std::strerror(errno));
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        int err = errno;
        ::close(fd);
        throw ProtocolError("connect " + host + ": " + std::strerror(err));
    }
    return std::make_unique<SocketTransport>(fd, timeout);
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
    sockaddr_in addr = resolve(host, port);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
        throw ProtocolError(std::string("socket: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
        ::listen(fd_, 1) < 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        throw ProtocolError(std::string("bind/listen: ") + std::strerror(err));
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::unique_ptr<Transport> TcpListener::accept(std::chrono::milliseconds timeout) {
    set_recv_deadline(fd_, timeout); // bounds the accept() wait itself
    int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            throw TimeoutError("accept: no connection within deadline");
        }
        throw ProtocolError(std::string("accept: ") + std::strerror(errno));
    }
    return std::make_unique<SocketTransport>(client, timeout);
}

} // namespace qkd::net

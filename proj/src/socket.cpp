#include "iiot/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace iiot {
namespace {

sockaddr_in make_addr(Ipv4 addr, std::uint16_t port) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    sa.sin_addr.s_addr = htonl(addr.value());
    return sa;
}

bool wait_for(int fd, short events, Millis timeout) {
    pollfd p{fd, events, 0};
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
        if (left < 0) left = 0;
        int r = ::poll(&p, 1, static_cast<int>(left));
        if (r > 0) return true;
        if (r == 0) return false;
        if (errno != EINTR) throw AuditError(std::string("poll: ") + std::strerror(errno));
    }
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        reset();
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

void Socket::reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

void Socket::set_nonblocking(bool on) const {
    int flags = ::fcntl(fd_, F_GETFL, 0);
    if (flags < 0) throw AuditError(errno_text("fcntl"));
    flags = on ? flags | O_NONBLOCK : flags & ~O_NONBLOCK;
    if (::fcntl(fd_, F_SETFL, flags) < 0) throw AuditError(errno_text("fcntl"));
}

bool wait_readable(int fd, Millis timeout) { return wait_for(fd, POLLIN, timeout); }
bool wait_writable(int fd, Millis timeout) { return wait_for(fd, POLLOUT, timeout); }

void send_all(int fd, ByteView data, Millis timeout) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n > 0) {
            off += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            if (!wait_writable(fd, timeout)) throw AuditError("send timed out");
            continue;
        }
        if (n < 0 && errno == EINTR) continue;
        throw AuditError(errno_text("send"));
    }
}

std::optional<Bytes> recv_some(int fd, std::size_t max, Millis timeout) {
    if (max == 0) return Bytes{};
    if (!wait_readable(fd, timeout)) return std::nullopt;
    Bytes buf(std::min<std::size_t>(max, 1 << 16));
    for (;;) {
        ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
        if (n >= 0) {
            buf.resize(static_cast<std::size_t>(n));
            return buf;
        }
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            if (!wait_readable(fd, timeout)) return std::nullopt;
            continue;
        }
        throw AuditError(errno_text("recv"));
    }
}

std::pair<ConnectStatus, Socket> Dialer::connect_tcp(Ipv4 addr, std::uint16_t port) {
    if (blocked(addr)) throw BlockedAddress(addr);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw AuditError(errno_text("socket"));
    s.set_nonblocking(true);
    record(addr, port, Transport::tcp);
    auto sa = make_addr(addr, port);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) == 0)
        return {ConnectStatus::connected, std::move(s)};
    if (errno != EINPROGRESS) {
        auto st = errno == ECONNREFUSED ? ConnectStatus::refused : ConnectStatus::unreachable;
        return {st, Socket{}};
    }
    if (!wait_writable(s.fd(), timeouts_.connect)) return {ConnectStatus::timeout, Socket{}};
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err == 0) return {ConnectStatus::connected, std::move(s)};
    if (err == ECONNREFUSED || err == ECONNRESET) return {ConnectStatus::refused, Socket{}};
    if (err == ETIMEDOUT) return {ConnectStatus::timeout, Socket{}};
    return {ConnectStatus::unreachable, Socket{}};
}

Socket Dialer::open_udp(Ipv4 addr, std::uint16_t port) {
    if (blocked(addr)) throw BlockedAddress(addr);
    Socket s(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw AuditError(errno_text("socket"));
    s.set_nonblocking(true);
    record(addr, port, Transport::udp);
    auto sa = make_addr(addr, port);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
        throw AuditError(errno_text("connect"));
    return s;
}

std::vector<Contact> Dialer::contacts() const {
    std::lock_guard lock(mu_);
    return log_;
}

void Dialer::record(Ipv4 addr, std::uint16_t port, Transport t) {
    std::lock_guard lock(mu_);
    log_.push_back({addr, port, t, Clock::now()});
}

void UdpChannel::send(ByteView data) {
    ssize_t n = ::send(sock_.fd(), data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) throw AuditError(errno_text("send"));
}

std::optional<Bytes> UdpChannel::receive(std::size_t max, Millis timeout) {
    try {
        return recv_some(sock_.fd(), std::max<std::size_t>(max, 1 << 16), timeout);
    } catch (const AuditError&) {
        // ICMP port unreachable surfaces as ECONNREFUSED on a connected
        // UDP socket; for a datagram probe that is just "no answer".
        return std::nullopt;
    }
}

}  // namespace iiot

#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iiot/bytes.hpp"
#include "iiot/catalog.hpp"
#include "iiot/net.hpp"

namespace iiot {

using Clock = std::chrono::steady_clock;
using Millis = std::chrono::milliseconds;

struct Timeouts {
    Millis connect{10'000};
    Millis read{5'000};
    int udp_retransmits = 3;
    Millis udp_initial{2'000};
    /// How long a freshly connected socket is watched for an immediate
    /// FIN/RST before the transport counts as alive.
    Millis linger_check{200};
};

class BlockedAddress : public AuditError {
public:
    explicit BlockedAddress(Ipv4 addr)
        : AuditError("refusing to contact blocklisted address " + addr.to_string()) {}
};

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { reset(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void reset();
    int release() { return std::exchange(fd_, -1); }

    void set_nonblocking(bool on) const;

private:
    int fd_ = -1;
};

enum class ConnectStatus : std::uint8_t { connected, refused, timeout, unreachable };

/// Waits for readability. Returns false on timeout.
bool wait_readable(int fd, Millis timeout);
bool wait_writable(int fd, Millis timeout);
/// Sends everything or throws AuditError.
void send_all(int fd, ByteView data, Millis timeout);
/// Returns received bytes; empty on orderly close; nullopt on timeout.
/// Throws AuditError on reset.
std::optional<Bytes> recv_some(int fd, std::size_t max, Millis timeout);

/// One outbound contact as seen by the dialer. Used as a socket-level
/// capture to verify blocklist and pacing behaviour.
struct Contact {
    Ipv4 address;
    std::uint16_t port = 0;
    Transport transport = Transport::tcp;
    Clock::time_point at;
};

/// The single gateway through which every outbound socket is opened.
/// Refuses blocklisted destinations before any packet is sent and keeps
/// a log of every contact it made.
class Dialer {
public:
    Dialer(CidrSet blocklist, Timeouts timeouts)
        : blocklist_(std::move(blocklist)), timeouts_(timeouts) {}

    const Timeouts& timeouts() const { return timeouts_; }
    bool blocked(Ipv4 addr) const { return blocklist_.contains(addr); }

    /// Non-blocking connect bounded by the connect timeout. The socket is
    /// left in non-blocking mode.
    std::pair<ConnectStatus, Socket> connect_tcp(Ipv4 addr, std::uint16_t port);
    /// Connected UDP socket (so ICMP errors surface as ECONNREFUSED).
    Socket open_udp(Ipv4 addr, std::uint16_t port);

    std::vector<Contact> contacts() const;

private:
    void record(Ipv4 addr, std::uint16_t port, Transport t);

    CidrSet blocklist_;
    Timeouts timeouts_;
    mutable std::mutex mu_;
    std::vector<Contact> log_;
};

/// Bidirectional byte stream used by application-layer probes. Concrete
/// channels wrap plain TCP, connected UDP, TLS and DTLS sessions.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(ByteView data) = 0;
    /// Empty result means the peer closed (or, for datagrams, timed out).
    virtual std::optional<Bytes> receive(std::size_t max, Millis timeout) = 0;
    virtual bool datagram() const { return false; }
};

class TcpChannel final : public Channel {
public:
    TcpChannel(Socket sock, Millis io_timeout) : sock_(std::move(sock)), timeout_(io_timeout) {}
    void send(ByteView data) override { send_all(sock_.fd(), data, timeout_); }
    std::optional<Bytes> receive(std::size_t max, Millis timeout) override {
        return recv_some(sock_.fd(), max, timeout);
    }
    int fd() const { return sock_.fd(); }

private:
    Socket sock_;
    Millis timeout_;
};

class UdpChannel final : public Channel {
public:
    explicit UdpChannel(Socket sock) : sock_(std::move(sock)) {}
    void send(ByteView data) override;
    std::optional<Bytes> receive(std::size_t max, Millis timeout) override;
    bool datagram() const override { return true; }

private:
    Socket sock_;
};

/// Reads from `ch` until `complete(buffer)` is true, the peer closes,
/// `max_bytes` is reached, or `timeout` elapses overall.
template <typename Pred>
Bytes read_until(Channel& ch, Pred complete, Millis timeout, std::size_t max_bytes = 1 << 16) {
    Bytes buf;
    const auto deadline = Clock::now() + timeout;
    while (buf.size() < max_bytes && !complete(ByteView{buf})) {
        auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
        if (left <= Millis{0}) break;
        std::optional<Bytes> chunk;
        try {
            chunk = ch.receive(max_bytes - buf.size(), left);
        } catch (const AuditError&) {
            break;
        }
        if (!chunk || chunk->empty()) break;
        buf.insert(buf.end(), chunk->begin(), chunk->end());
    }
    return buf;
}

}  // namespace iiot

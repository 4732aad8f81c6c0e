#pragma once

// Non-blocking OpenSSL I/O over a socket with deadlines, shared by the
// prober (client side) and the lab servers.

#include <sys/time.h>

#include <chrono>

#include "iiot/socket.hpp"
#include "ossl.hpp"

namespace iiot::detail {

enum class IoStatus { ok, timeout, closed, failed };

/// Repeats `op` until it succeeds, fails hard, or `deadline` passes.
/// DTLS retransmission timers are serviced while waiting.
template <typename Op>
IoStatus drive(SSL* ssl, int fd, bool dtls, Clock::time_point deadline, Op op, int* result = nullptr) {
    for (;;) {
        const int r = op();
        if (r > 0) {
            if (result) *result = r;
            return IoStatus::ok;
        }
        const int err = SSL_get_error(ssl, r);
        if (err == SSL_ERROR_ZERO_RETURN) return IoStatus::closed;
        if (err != SSL_ERROR_WANT_READ && err != SSL_ERROR_WANT_WRITE) {
            if (err == SSL_ERROR_SYSCALL && r == 0) return IoStatus::closed;
            return IoStatus::failed;
        }
        const auto now = Clock::now();
        if (now >= deadline) return IoStatus::timeout;
        auto wait = std::chrono::duration_cast<Millis>(deadline - now);
        timeval tv{};
        bool timer = false;
        if (dtls && DTLSv1_get_timeout(ssl, &tv)) {
            const Millis t{tv.tv_sec * 1000 + tv.tv_usec / 1000};
            if (t < wait) {
                wait = t;
                timer = true;
            }
        }
        const bool ready = err == SSL_ERROR_WANT_READ ? wait_readable(fd, wait) : wait_writable(fd, wait);
        if (!ready && timer) {
            if (DTLSv1_handle_timeout(ssl) < 0) return IoStatus::failed;
        }
    }
}

/// A Channel over an established SSL session. Owns the SSL, its context
/// and the socket.
class SslChannel final : public Channel {
public:
    SslChannel(ossl::SslCtxPtr ctx, ossl::SslPtr ssl, Socket sock, bool dtls, Millis io_timeout)
        : ctx_(std::move(ctx)), ssl_(std::move(ssl)), sock_(std::move(sock)), dtls_(dtls), timeout_(io_timeout) {}

    ~SslChannel() override {
        if (ssl_) SSL_shutdown(ssl_.get());
    }

    void send(ByteView data) override {
        if (data.empty()) return;
        const auto st = drive(ssl_.get(), sock_.fd(), dtls_, Clock::now() + timeout_, [&] {
            return SSL_write(ssl_.get(), data.data(), static_cast<int>(data.size()));
        });
        if (st != IoStatus::ok) throw AuditError("TLS write failed");
    }

    std::optional<Bytes> receive(std::size_t max, Millis timeout) override {
        Bytes buf(std::max<std::size_t>(1, std::min<std::size_t>(max, 1 << 16)));
        int n = 0;
        const auto st = drive(
            ssl_.get(), sock_.fd(), dtls_, Clock::now() + timeout,
            [&] { return SSL_read(ssl_.get(), buf.data(), static_cast<int>(buf.size())); }, &n);
        ERR_clear_error();
        switch (st) {
            case IoStatus::ok: buf.resize(static_cast<std::size_t>(n)); return buf;
            case IoStatus::timeout: return std::nullopt;
            case IoStatus::closed: return Bytes{};
            case IoStatus::failed: throw AuditError("TLS read failed");
        }
        return std::nullopt;
    }

    bool datagram() const override { return dtls_; }
    SSL* ssl() const { return ssl_.get(); }

private:
    ossl::SslCtxPtr ctx_;
    ossl::SslPtr ssl_;
    Socket sock_;
    bool dtls_;
    Millis timeout_;
};

}  // namespace iiot::detail

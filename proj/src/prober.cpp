#include "iiot/prober.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/rand.h>
#include <sys/socket.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "ssl_session.hpp"

namespace iiot {
namespace {

using detail::IoStatus;

struct SuiteTables {
    std::map<std::uint16_t, std::string> names;
    std::set<std::uint16_t> tls_available;
    std::set<std::uint16_t> dtls_available;
};

std::set<std::uint16_t> available_ids(const SSL_METHOD* method) {
    std::set<std::uint16_t> out;
    ossl::SslCtxPtr ctx(SSL_CTX_new(method));
    if (!ctx) return out;
    SSL_CTX_set_security_level(ctx.get(), 0);
    SSL_CTX_set_cipher_list(ctx.get(), "ALL:COMPLEMENTOFALL:@SECLEVEL=0");
    ossl::SslPtr ssl(SSL_new(ctx.get()));
    STACK_OF(SSL_CIPHER)* list = SSL_get_ciphers(ssl.get());
    for (int i = 0; i < sk_SSL_CIPHER_num(list); ++i)
        out.insert(static_cast<std::uint16_t>(SSL_CIPHER_get_protocol_id(sk_SSL_CIPHER_value(list, i))));
    ERR_clear_error();
    return out;
}

const SuiteTables& suite_tables() {
    static const SuiteTables t = [] {
        SuiteTables t;
        ossl::SslCtxPtr ctx(SSL_CTX_new(TLS_method()));
        ossl::SslPtr ssl(SSL_new(ctx.get()));
        for (auto set : kBatteryOrder) {
            for (auto code : suite_set(set).codes()) {
                const unsigned char bytes[2] = {static_cast<unsigned char>(code >> 8),
                                                static_cast<unsigned char>(code)};
                if (const SSL_CIPHER* c = SSL_CIPHER_find(ssl.get(), bytes)) t.names[code] = SSL_CIPHER_get_name(c);
            }
        }
        t.tls_available = available_ids(TLS_method());
        t.dtls_available = available_ids(DTLS_method());
        ERR_clear_error();
        return t;
    }();
    return t;
}

tls::Random fresh_random() {
    tls::Random r{};
    if (RAND_bytes(r.data(), static_cast<int>(r.size())) != 1) ossl::fail("RAND_bytes");
    return r;
}

std::optional<std::string> check_hello(const tls::ServerHello& h, const SuiteSet& offered, bool dtls) {
    if (dtls) {
        if (h.version != tls::kDtls10 && h.version != tls::kDtls12)
            return "unexpected DTLS version " + tls::version_name(h.version);
    } else {
        if (h.version == tls::kSsl30) return std::string("server selected SSL 3.0");
        if (h.version < tls::kTls10 || h.version > tls::kTls12)
            return "unexpected TLS version " + tls::version_name(h.version);
    }
    if (!offered.contains(h.suite)) return "server selected suite not offered: " + suite_name(h.suite);
    if (h.compression != 0) return std::string("server selected compression");
    return std::nullopt;
}

// State shared with the OpenSSL message callback during completion.
struct CompletionState {
    bool cert_requested = false;
    bool sent_cert = false;
    bool alert_after_cert = false;
    unsigned initial_timer_us = 2'000'000;
};

void on_message(int write_p, int, int content_type, const void* buf, std::size_t len, SSL*, void* arg) {
    auto* st = static_cast<CompletionState*>(arg);
    const auto* p = static_cast<const unsigned char*>(buf);
    if (content_type == SSL3_RT_HANDSHAKE && len > 0) {
        if (!write_p && p[0] == SSL3_MT_CERTIFICATE_REQUEST) st->cert_requested = true;
        if (write_p && p[0] == SSL3_MT_CERTIFICATE) st->sent_cert = true;
    } else if (content_type == SSL3_RT_ALERT && !write_p && st->sent_cert) {
        st->alert_after_cert = true;
    }
}

unsigned dtls_timer(SSL* ssl, unsigned timer_us) {
    const auto* st = static_cast<const CompletionState*>(SSL_get_app_data(ssl));
    const unsigned initial = st ? st->initial_timer_us : 1'000'000;
    return timer_us == 0 ? initial : timer_us * 2;
}

Millis dtls_budget(const Timeouts& t) {
    // Initial timer plus doubling retransmissions.
    return t.udp_initial * ((1 << (t.udp_retransmits + 1)) - 1);
}

sockaddr_in peer_of(const Endpoint& ep) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(ep.port);
    sa.sin_addr.s_addr = htonl(ep.address.value());
    return sa;
}

// Builds a client context for `version`; the caller pins ciphers.
ossl::SslCtxPtr client_ctx(bool dtls, int version, const ClientIdentity* id) {
    ossl::SslCtxPtr ctx(SSL_CTX_new(dtls ? DTLS_client_method() : TLS_client_method()));
    if (!ctx) ossl::fail("SSL_CTX_new");
    SSL_CTX_set_security_level(ctx.get(), 0);
    SSL_CTX_set_min_proto_version(ctx.get(), version);
    SSL_CTX_set_max_proto_version(ctx.get(), version);
    SSL_CTX_set_options(ctx.get(), SSL_OP_LEGACY_SERVER_CONNECT | SSL_OP_NO_TICKET);
    SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_NONE, nullptr);
    if (id) {
        auto cert = ossl::x509_from_der(id->cert.der);
        auto key = PrivateKey::from_pem(id->key_pem);
        if (!cert || SSL_CTX_use_certificate(ctx.get(), cert.get()) != 1 ||
            SSL_CTX_use_PrivateKey(ctx.get(), static_cast<EVP_PKEY*>(key.native())) != 1)
            ossl::fail("loading client certificate");
    }
    return ctx;
}

}  // namespace

std::string_view to_string(TransportResult r) {
    switch (r) {
        case TransportResult::alive: return "alive";
        case TransportResult::dead: return "dead";
        case TransportResult::reset: return "reset";
    }
    return "dead";
}

std::string_view to_string(HandshakeOutcome o) {
    switch (o) {
        case HandshakeOutcome::accepted: return "accepted";
        case HandshakeOutcome::denied: return "denied";
        case HandshakeOutcome::generic_error: return "generic_error";
        case HandshakeOutcome::timeout: return "timeout";
    }
    return "timeout";
}

std::string_view to_string(ClientAuth c) {
    switch (c) {
        case ClientAuth::not_requested: return "not_requested";
        case ClientAuth::requested_and_accepted: return "requested_and_accepted";
        case ClientAuth::requested_and_rejected: return "requested_and_rejected";
    }
    return "not_requested";
}

TransportResult parse_transport_result(std::string_view s) {
    for (auto r : {TransportResult::alive, TransportResult::dead, TransportResult::reset})
        if (to_string(r) == s) return r;
    throw AuditError("invalid transport result: " + std::string(s));
}

HandshakeOutcome parse_handshake_outcome(std::string_view s) {
    for (auto o : {HandshakeOutcome::accepted, HandshakeOutcome::denied, HandshakeOutcome::generic_error,
                   HandshakeOutcome::timeout})
        if (to_string(o) == s) return o;
    throw AuditError("invalid handshake outcome: " + std::string(s));
}

bool HandshakeResult::downgrade_sentinel() const {
    return server_random && negotiated_version == tls::kTls12 && tls::detect_downgrade_sentinel(*server_random);
}

bool SuiteBattery::complete() const {
    if (results.size() != kBatteryOrder.size()) return false;
    for (std::size_t i = 0; i < results.size(); ++i)
        if (results[i].suite_set != kBatteryOrder[i]) return false;
    return true;
}

const HandshakeResult& SuiteBattery::at(SuiteSetName s) const {
    for (const auto& r : results)
        if (r.suite_set == s) return r;
    throw AuditError("battery has no result for " + std::string(to_string(s)));
}

bool SuiteBattery::any_accepted() const {
    return std::ranges::any_of(results, [](const auto& r) { return r.outcome == HandshakeOutcome::accepted; });
}

bool SuiteBattery::any_server_hello() const {
    return std::ranges::any_of(results, [](const auto& r) { return r.server_hello_valid; });
}

bool SuiteBattery::any_completed() const {
    return std::ranges::any_of(results, [](const auto& r) { return r.completed; });
}

std::array<HandshakeOutcome, 4> SuiteBattery::outcome_vector() const {
    std::array<HandshakeOutcome, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) v[i] = at(kBatteryOrder[i]).outcome;
    return v;
}

ClientAuth classify_client_auth(const SuiteBattery& battery) {
    bool requested = false;
    bool all_rejected = true;
    for (const auto& r : battery.results) {
        if (!r.client_cert_requested) continue;
        requested = true;
        if (r.completed) return ClientAuth::requested_and_accepted;
        if (!r.rejected_after_client_cert) all_rejected = false;
    }
    if (!requested) return ClientAuth::not_requested;
    // Requested but neither completed nor consistently rejected (e.g. the
    // suite could not be completed locally): nothing proves rejection.
    return all_rejected ? ClientAuth::requested_and_rejected : ClientAuth::requested_and_accepted;
}

std::optional<std::string> openssl_suite_name(std::uint16_t code) {
    const auto& t = suite_tables();
    if (auto it = t.names.find(code); it != t.names.end()) return it->second;
    return std::nullopt;
}

bool suite_available_locally(std::uint16_t code, bool dtls) {
    const auto& t = suite_tables();
    return dtls ? t.dtls_available.contains(code) : t.tls_available.contains(code);
}

TransportResult Prober::probe_transport(const Endpoint& ep, ByteView udp_payload) {
    const auto& t = dialer_.timeouts();
    if (ep.transport == Transport::udp) {
        UdpChannel ch(dialer_.open_udp(ep.address, ep.port));
        Millis timer = t.udp_initial;
        for (int attempt = 0; attempt <= t.udp_retransmits; ++attempt, timer *= 2) {
            if (!udp_payload.empty()) ch.send(udp_payload);
            auto got = ch.receive(1 << 16, timer);
            if (got && !got->empty()) return TransportResult::alive;
        }
        return TransportResult::dead;
    }
    auto [status, sock] = dialer_.connect_tcp(ep.address, ep.port);
    switch (status) {
        case ConnectStatus::refused: return TransportResult::reset;
        case ConnectStatus::timeout:
        case ConnectStatus::unreachable: return TransportResult::dead;
        case ConnectStatus::connected: break;
    }
    if (!wait_readable(sock.fd(), t.linger_check)) return TransportResult::alive;
    std::uint8_t probe;
    const ssize_t n = ::recv(sock.fd(), &probe, 1, MSG_PEEK | MSG_DONTWAIT);
    if (n == 0) return TransportResult::reset;  // FIN right after accept
    if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) return TransportResult::reset;
    return TransportResult::alive;
}

HandshakeResult Prober::hello_exchange(const Endpoint& ep, SuiteSetName set) {
    const auto& t = dialer_.timeouts();
    const bool dtls = ep.transport == Transport::udp;
    const SuiteSet& offered = suite_set(set);

    HandshakeResult r;
    r.suite_set = set;

    tls::ClientHelloSpec spec;
    spec.suites = offered.codes();
    spec.max_version = dtls ? tls::kDtls12 : tls::kTls12;
    spec.random = fresh_random();

    tls::FlightParser parser(dtls);
    bool got_bytes = false;
    bool closed = false;

    if (!dtls) {
        auto [status, sock] = dialer_.connect_tcp(ep.address, ep.port);
        if (status != ConnectStatus::connected) {
            r.outcome = status == ConnectStatus::timeout ? HandshakeOutcome::timeout : HandshakeOutcome::generic_error;
            r.error = status == ConnectStatus::timeout ? "connect timed out" : "connect failed";
            return r;
        }
        try {
            send_all(sock.fd(), tls::encode_client_hello_record(spec), t.read);
        } catch (const AuditError& e) {
            r.outcome = HandshakeOutcome::denied;
            r.error = e.what();
            return r;
        }
        const auto deadline = Clock::now() + t.read;
        while (!parser.done()) {
            const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
            if (left <= Millis{0}) break;
            std::optional<Bytes> chunk;
            try {
                chunk = recv_some(sock.fd(), 1 << 16, left);
            } catch (const AuditError&) {
                closed = true;  // reset
                break;
            }
            if (!chunk) break;
            if (chunk->empty()) {
                closed = true;
                break;
            }
            got_bytes = true;
            parser.feed(*chunk);
        }
    } else {
        UdpChannel ch(dialer_.open_udp(ep.address, ep.port));
        ch.send(tls::encode_client_hello_record(spec));
        Millis timer = t.udp_initial;
        int retransmits = 0;
        int cookie_rounds = 0;
        while (!parser.done()) {
            auto dgram = ch.receive(1 << 16, timer);
            if (!dgram || dgram->empty()) {
                if (retransmits >= t.udp_retransmits) break;
                ++retransmits;
                timer *= 2;
                ch.send(tls::encode_client_hello_record(spec));
                continue;
            }
            got_bytes = true;
            parser.feed(*dgram);
            if (parser.flight().status == tls::FlightStatus::verify) {
                if (++cookie_rounds > 2) break;
                spec.cookie = parser.flight().cookie;
                spec.message_seq = 1;
                spec.record_seq = 1;
                parser.restart();
                retransmits = 0;
                timer = t.udp_initial;
                ch.send(tls::encode_client_hello_record(spec));
            }
        }
    }

    const auto& f = parser.flight();
    std::optional<std::string> hello_error;
    if (f.hello) {
        hello_error = check_hello(*f.hello, offered, dtls);
        if (!hello_error) {
            r.server_hello_valid = true;
            r.negotiated_version = f.hello->version;
            r.negotiated_suite = f.hello->suite;
            r.server_random = f.hello->random;
        }
    }

    switch (f.status) {
        case tls::FlightStatus::complete:
            if (hello_error) {
                r.outcome = HandshakeOutcome::generic_error;
                r.error = *hello_error;
            } else {
                r.outcome = HandshakeOutcome::accepted;
                r.chain = f.chain;
                r.client_cert_requested = f.certificate_request;
            }
            break;
        case tls::FlightStatus::alert:
            r.outcome = f.hello ? HandshakeOutcome::generic_error : HandshakeOutcome::denied;
            r.error = "alert " + std::to_string(f.alert->description);
            break;
        case tls::FlightStatus::malformed:
            r.outcome = HandshakeOutcome::generic_error;
            r.error = f.error;
            break;
        case tls::FlightStatus::verify:
            r.outcome = HandshakeOutcome::timeout;
            r.error = "no flight after cookie exchange";
            break;
        case tls::FlightStatus::incomplete:
            if (!got_bytes) {
                r.outcome = closed ? HandshakeOutcome::denied : HandshakeOutcome::timeout;
                r.error = closed ? "closed after ClientHello" : "no reply";
            } else {
                r.outcome = HandshakeOutcome::generic_error;
                r.error = closed ? "closed mid-flight" : "incomplete flight";
            }
            break;
    }
    return r;
}

void Prober::complete_handshake(const Endpoint& ep, HandshakeResult& r, const AppProbe* app) {
    const bool dtls = ep.transport == Transport::udp;
    const auto suite = *r.negotiated_suite;
    const auto name = openssl_suite_name(suite);
    if (!name || !suite_available_locally(suite, dtls)) {
        r.completion_error = "suite " + suite_name(suite) + " not implemented locally";
        return;
    }
    const auto& t = dialer_.timeouts();
    auto ctx = client_ctx(dtls, *r.negotiated_version, &identity_);
    if (SSL_CTX_set_cipher_list(ctx.get(), (*name + ":@SECLEVEL=0").c_str()) != 1) {
        ERR_clear_error();
        r.completion_error = "suite " + suite_name(suite) + " not usable locally";
        return;
    }

    Socket sock;
    if (dtls) {
        sock = dialer_.open_udp(ep.address, ep.port);
    } else {
        auto [status, s] = dialer_.connect_tcp(ep.address, ep.port);
        if (status != ConnectStatus::connected) {
            r.completion_error = "reconnect failed";
            return;
        }
        sock = std::move(s);
    }

    CompletionState state;
    state.initial_timer_us = static_cast<unsigned>(t.udp_initial.count() * 1000);
    ossl::SslPtr ssl(SSL_new(ctx.get()));
    SSL_set_app_data(ssl.get(), &state);
    SSL_set_msg_callback(ssl.get(), on_message);
    SSL_set_msg_callback_arg(ssl.get(), &state);
    if (dtls) {
        BIO* bio = BIO_new_dgram(sock.fd(), BIO_NOCLOSE);
        auto peer = peer_of(ep);
        BIO_ctrl(bio, BIO_CTRL_DGRAM_SET_CONNECTED, 0, &peer);
        SSL_set_bio(ssl.get(), bio, bio);
        DTLS_set_timer_cb(ssl.get(), dtls_timer);
    } else {
        SSL_set_fd(ssl.get(), sock.fd());
    }

    const auto deadline = Clock::now() + (dtls ? dtls_budget(t) : t.read);
    const auto st = detail::drive(ssl.get(), sock.fd(), dtls, deadline, [&] { return SSL_connect(ssl.get()); });
    r.client_cert_requested = r.client_cert_requested || state.cert_requested;
    if (st != IoStatus::ok) {
        const unsigned long err = ERR_peek_error();
        r.completion_error = st == IoStatus::timeout ? "handshake timed out"
                             : err                    ? ossl::last_error()
                                                      : "connection closed during handshake";
        ERR_clear_error();
        if (state.cert_requested && state.sent_cert) r.rejected_after_client_cert = true;
        return;
    }
    r.completed = true;
    SSL_set_msg_callback(ssl.get(), nullptr);
    SSL_set_app_data(ssl.get(), nullptr);
    if (app) {
        detail::SslChannel ch(std::move(ctx), std::move(ssl), std::move(sock), dtls, t.read);
        (*app)(ch);
    }
}

HandshakeResult Prober::handshake(const Endpoint& ep, SuiteSetName set, const AppProbe* app) {
    auto r = hello_exchange(ep, set);
    if (r.outcome == HandshakeOutcome::accepted) complete_handshake(ep, r, app);
    return r;
}

SuiteBattery Prober::run_battery(const Endpoint& ep, Millis spacing, const AppProbe* app) {
    SuiteBattery b;
    bool app_done = false;
    for (auto set : kBatteryOrder) {
        if (!b.results.empty() && spacing > Millis{0}) std::this_thread::sleep_for(spacing);
        b.results.push_back(handshake(ep, set, app_done ? nullptr : app));
        if (b.results.back().completed) app_done = true;
    }
    return b;
}

bool Prober::plaintext_session(const Endpoint& ep, const AppProbe& app) {
    if (ep.transport == Transport::udp) {
        UdpChannel ch(dialer_.open_udp(ep.address, ep.port));
        app(ch);
        return true;
    }
    auto [status, sock] = dialer_.connect_tcp(ep.address, ep.port);
    if (status != ConnectStatus::connected) return false;
    TcpChannel ch(std::move(sock), dialer_.timeouts().read);
    app(ch);
    return true;
}

std::unique_ptr<Channel> Prober::open_session(const Endpoint& ep, bool tls) {
    const bool dtls = ep.transport == Transport::udp;
    const auto& t = dialer_.timeouts();
    if (!tls) {
        if (dtls) return std::make_unique<UdpChannel>(dialer_.open_udp(ep.address, ep.port));
        auto [status, sock] = dialer_.connect_tcp(ep.address, ep.port);
        if (status != ConnectStatus::connected) return nullptr;
        return std::make_unique<TcpChannel>(std::move(sock), t.read);
    }
    auto ctx = client_ctx(dtls, 0, &identity_);
    SSL_CTX_set_max_proto_version(ctx.get(), dtls ? DTLS1_2_VERSION : TLS1_2_VERSION);
    SSL_CTX_set_cipher_list(ctx.get(), "ALL:COMPLEMENTOFALL:@SECLEVEL=0");
    Socket sock;
    if (dtls) {
        sock = dialer_.open_udp(ep.address, ep.port);
    } else {
        auto [status, s] = dialer_.connect_tcp(ep.address, ep.port);
        if (status != ConnectStatus::connected) return nullptr;
        sock = std::move(s);
    }
    CompletionState state;
    state.initial_timer_us = static_cast<unsigned>(t.udp_initial.count() * 1000);
    ossl::SslPtr ssl(SSL_new(ctx.get()));
    SSL_set_app_data(ssl.get(), &state);
    if (dtls) {
        BIO* bio = BIO_new_dgram(sock.fd(), BIO_NOCLOSE);
        auto peer = peer_of(ep);
        BIO_ctrl(bio, BIO_CTRL_DGRAM_SET_CONNECTED, 0, &peer);
        SSL_set_bio(ssl.get(), bio, bio);
        DTLS_set_timer_cb(ssl.get(), dtls_timer);
    } else {
        SSL_set_fd(ssl.get(), sock.fd());
    }
    const auto deadline = Clock::now() + (dtls ? dtls_budget(t) : t.read);
    const auto st = detail::drive(ssl.get(), sock.fd(), dtls, deadline, [&] { return SSL_connect(ssl.get()); });
    ERR_clear_error();
    if (st != IoStatus::ok) return nullptr;
    SSL_set_app_data(ssl.get(), nullptr);
    return std::make_unique<detail::SslChannel>(std::move(ctx), std::move(ssl), std::move(sock), dtls, t.read);
}

std::optional<bool> Prober::probe_tls13(const Endpoint& ep) {
    if (ep.transport == Transport::udp) return std::nullopt;
    auto ctx = client_ctx(false, TLS1_3_VERSION, nullptr);
    auto [status, sock] = dialer_.connect_tcp(ep.address, ep.port);
    if (status != ConnectStatus::connected) return false;
    ossl::SslPtr ssl(SSL_new(ctx.get()));
    SSL_set_fd(ssl.get(), sock.fd());
    const auto st = detail::drive(ssl.get(), sock.fd(), false, Clock::now() + dialer_.timeouts().read,
                                  [&] { return SSL_connect(ssl.get()); });
    ERR_clear_error();
    return st == IoStatus::ok;
}

}  // namespace iiot

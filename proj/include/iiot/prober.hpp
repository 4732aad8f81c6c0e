#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iiot/endpoint.hpp"
#include "iiot/socket.hpp"
#include "iiot/suites.hpp"
#include "iiot/tls_wire.hpp"
#include "iiot/x509.hpp"

namespace iiot {

enum class TransportResult : std::uint8_t { alive, dead, reset };
enum class HandshakeOutcome : std::uint8_t { accepted, denied, generic_error, timeout };
enum class ClientAuth : std::uint8_t { not_requested, requested_and_accepted, requested_and_rejected };

std::string_view to_string(TransportResult r);
std::string_view to_string(HandshakeOutcome o);
std::string_view to_string(ClientAuth c);
TransportResult parse_transport_result(std::string_view s);
HandshakeOutcome parse_handshake_outcome(std::string_view s);

/// One (D)TLS handshake offering one suite set.
///
/// The hello exchange is done with hand-built records so the exact code
/// points of the set go on the wire. When the server accepts, a second
/// connection completes the handshake with OpenSSL pinned to the
/// negotiated version and suite, presenting the scanner's client
/// certificate; `completed` and `rejected_after_client_cert` come from
/// that step.
struct HandshakeResult {
    SuiteSetName suite_set = SuiteSetName::REC;
    HandshakeOutcome outcome = HandshakeOutcome::timeout;
    std::optional<std::uint16_t> negotiated_version;
    std::optional<std::uint16_t> negotiated_suite;
    std::optional<tls::Random> server_random;
    std::vector<Bytes> chain;
    bool client_cert_requested = false;
    bool rejected_after_client_cert = false;
    /// A well-formed ServerHello choosing an offered suite was received.
    bool server_hello_valid = false;
    /// The full handshake finished without error.
    bool completed = false;
    std::string error;             ///< why the hello exchange was not accepted
    std::string completion_error;  ///< why the full handshake did not finish

    bool downgrade_sentinel() const;
};

/// Results for REC, noPFS, COMP and INS, in that order.
struct SuiteBattery {
    std::vector<HandshakeResult> results;

    bool complete() const;
    const HandshakeResult& at(SuiteSetName s) const;
    bool accepted(SuiteSetName s) const { return at(s).outcome == HandshakeOutcome::accepted; }
    bool any_accepted() const;
    bool any_server_hello() const;
    bool any_completed() const;
    /// Outcome per set, used as part of the deduplication key.
    std::array<HandshakeOutcome, 4> outcome_vector() const;
};

ClientAuth classify_client_auth(const SuiteBattery& battery);

/// Application-layer exchange run over an established channel.
using AppProbe = std::function<void(Channel&)>;

class Prober {
public:
    Prober(Dialer& dialer, const ClientIdentity& identity) : dialer_(dialer), identity_(identity) {}

    /// TCP: alive iff the connect completes and the peer neither closes
    /// nor resets within the linger window. UDP: alive iff `udp_payload`
    /// draws any datagram in reply.
    TransportResult probe_transport(const Endpoint& ep, ByteView udp_payload = {});

    /// One battery entry. `app` runs over the session if it completes.
    HandshakeResult handshake(const Endpoint& ep, SuiteSetName set, const AppProbe* app = nullptr);

    /// All four handshakes in order, sleeping `spacing` between them. The
    /// application probe runs on the first completed handshake.
    SuiteBattery run_battery(const Endpoint& ep, Millis spacing = Millis{0}, const AppProbe* app = nullptr);

    /// Plaintext session for the application probe. False when the
    /// connection could not be opened.
    bool plaintext_session(const Endpoint& ep, const AppProbe& app);

    /// A fresh session for follow-up application exchanges (access checks):
    /// plaintext, or (D)TLS up to 1.2 with any suite and the client
    /// certificate. nullptr when the connection or handshake fails.
    std::unique_ptr<Channel> open_session(const Endpoint& ep, bool tls);

    /// Direct TLS 1.3 handshake; nullopt for DTLS endpoints.
    std::optional<bool> probe_tls13(const Endpoint& ep);

private:
    HandshakeResult hello_exchange(const Endpoint& ep, SuiteSetName set);
    void complete_handshake(const Endpoint& ep, HandshakeResult& r, const AppProbe* app);

    Dialer& dialer_;
    const ClientIdentity& identity_;
};

/// OpenSSL name of an IANA suite, when the local library knows it.
std::optional<std::string> openssl_suite_name(std::uint16_t code);
/// True when the local library can negotiate the suite at security level 0.
bool suite_available_locally(std::uint16_t code, bool dtls);

}  // namespace iiot

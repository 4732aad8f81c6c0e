#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iiot/bytes.hpp"

// Record- and handshake-layer encoding for the hello exchange of TLS 1.0-1.2
// and DTLS 1.0/1.2. Only the cleartext part of a handshake is covered:
// enough to offer an exact list of cipher-suite code points and to read the
// server's first flight (ServerHello .. ServerHelloDone) without depending
// on which suites the local TLS library implements.

namespace iiot::tls {

inline constexpr std::uint16_t kSsl30 = 0x0300;
inline constexpr std::uint16_t kTls10 = 0x0301;
inline constexpr std::uint16_t kTls11 = 0x0302;
inline constexpr std::uint16_t kTls12 = 0x0303;
inline constexpr std::uint16_t kTls13 = 0x0304;
inline constexpr std::uint16_t kDtls10 = 0xFEFF;
inline constexpr std::uint16_t kDtls12 = 0xFEFD;

enum ContentType : std::uint8_t {
    kChangeCipherSpec = 20,
    kAlert = 21,
    kHandshake = 22,
    kApplicationData = 23,
};

enum HandshakeType : std::uint8_t {
    kHelloRequest = 0,
    kClientHello = 1,
    kServerHello = 2,
    kHelloVerifyRequest = 3,
    kCertificate = 11,
    kServerKeyExchange = 12,
    kCertificateRequest = 13,
    kServerHelloDone = 14,
    kCertificateStatus = 22,
};

/// "TLS 1.2", "DTLS 1.0", ... or hex for anything else.
std::string version_name(std::uint16_t version);
std::optional<std::uint16_t> parse_version_name(std::string_view name);
bool is_dtls(std::uint16_t version);
/// Orders versions across TLS and DTLS: DTLS 1.0 ranks as TLS 1.1,
/// DTLS 1.2 as TLS 1.2.
int version_rank(std::uint16_t version);

using Random = std::array<std::uint8_t, 32>;

/// Final eight bytes a TLS 1.3 server writes into ServerHello.random when
/// it negotiates TLS 1.2 (RFC 8446, 4.1.3).
inline constexpr std::array<std::uint8_t, 8> kDowngradeSentinelTls12 = {
    0x44, 0x4F, 0x57, 0x4E, 0x47, 0x52, 0x44, 0x01};
/// Same for TLS 1.1 and below.
inline constexpr std::array<std::uint8_t, 8> kDowngradeSentinelTls11 = {
    0x44, 0x4F, 0x57, 0x4E, 0x47, 0x52, 0x44, 0x00};

/// True iff the last eight bytes of a 32-byte server random carry the
/// TLS 1.2 downgrade sentinel. Throws AuditError for other sizes.
bool detect_downgrade_sentinel(ByteView server_random);

struct ClientHelloSpec {
    std::vector<std::uint16_t> suites;
    std::uint16_t max_version = kTls12;
    Random random{};
    Bytes session_id;
    Bytes cookie;                      ///< DTLS only
    std::uint16_t message_seq = 0;     ///< DTLS only
    std::uint64_t record_seq = 0;      ///< DTLS only
};

/// Handshake message (header + body) for a ClientHello.
Bytes encode_client_hello(const ClientHelloSpec& spec);
/// The ClientHello wrapped in a single TLS or DTLS record.
Bytes encode_client_hello_record(const ClientHelloSpec& spec);

struct ParsedClientHello {
    std::uint16_t version = 0;
    Random random{};
    Bytes session_id;
    Bytes cookie;
    std::vector<std::uint16_t> suites;
    std::vector<std::uint16_t> extension_types;
};

/// Parses a ClientHello body (without the handshake header).
ParsedClientHello parse_client_hello_body(ByteView body, bool dtls);

struct ServerHello {
    std::uint16_t version = 0;
    Random random{};
    Bytes session_id;
    std::uint16_t suite = 0;
    std::uint8_t compression = 0;
    std::vector<std::uint16_t> extension_types;
};

ServerHello parse_server_hello_body(ByteView body);

struct Alert {
    std::uint8_t level = 0;
    std::uint8_t description = 0;
};

enum class FlightStatus : std::uint8_t {
    incomplete,   ///< more bytes needed
    complete,     ///< ServerHelloDone seen
    verify,       ///< DTLS HelloVerifyRequest seen; resend with cookie
    alert,        ///< alert received
    malformed,    ///< grammar violation
};

/// What the parser has learned about the server's first flight so far.
struct ServerFlight {
    FlightStatus status = FlightStatus::incomplete;
    std::optional<ServerHello> hello;
    std::vector<Bytes> chain;
    bool certificate_request = false;
    std::optional<Alert> alert;
    Bytes cookie;  ///< from HelloVerifyRequest
    std::string error;
};

/// Incremental parser for a TLS byte stream or a sequence of DTLS
/// datagrams carrying the server's first flight. All reads are bounds
/// checked; malformed input ends in FlightStatus::malformed.
class FlightParser {
public:
    explicit FlightParser(bool dtls) : dtls_(dtls) {}

    /// TLS: arbitrary stream chunk. DTLS: exactly one datagram.
    const ServerFlight& feed(ByteView data);
    const ServerFlight& flight() const { return flight_; }
    bool done() const { return flight_.status != FlightStatus::incomplete; }
    /// Drops partial state after a HelloVerifyRequest so the flight answering
    /// the cookie-bearing ClientHello can be read.
    void restart();

private:
    void process_record(std::uint8_t type, ByteView fragment);
    void process_handshake_stream();
    void process_dtls_fragment(ByteView fragment);
    void handle_message(std::uint8_t type, ByteView body);
    void fail(std::string why);

    struct Pending {
        std::uint8_t type = 0;
        std::uint32_t length = 0;
        Bytes data;
        std::vector<bool> have;
        std::size_t filled = 0;
    };

    bool dtls_;
    Bytes stream_;       // TLS record bytes not yet consumed
    Bytes handshake_;    // TLS handshake bytes not yet consumed
    std::map<std::uint16_t, Pending> pending_;  // DTLS by message_seq
    std::uint16_t next_seq_ = 0;
    ServerFlight flight_;
};

// Server-side encoders, used by the lab harness stub engine and tests.

struct ServerFlightSpec {
    std::uint16_t version = kTls12;
    Random random{};
    std::uint16_t suite = 0;
    std::vector<Bytes> chain;
    bool certificate_request = false;
    std::uint16_t message_seq = 0;  ///< DTLS only
};

/// ServerHello, Certificate, [CertificateRequest,] ServerHelloDone as
/// one TLS record (or one DTLS record per message).
Bytes encode_server_flight(const ServerFlightSpec& spec, bool dtls);
Bytes encode_alert_record(std::uint16_t version, Alert alert, bool dtls);
Bytes encode_hello_verify_request(std::uint16_t version, ByteView cookie);

/// Frames a handshake message body; DTLS adds message_seq and a single
/// full-length fragment.
Bytes wrap_handshake(std::uint8_t type, ByteView body, bool dtls, std::uint16_t message_seq = 0);
Bytes wrap_record(std::uint8_t type, std::uint16_t version, ByteView fragment, bool dtls,
                  std::uint64_t record_seq = 0);

}  // namespace iiot::tls

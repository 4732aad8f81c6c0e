#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iiot/bytes.hpp"
#include "iiot/catalog.hpp"

// Application-layer probes and response validation for the catalogued
// protocols. Everything here is a pure function over byte buffers.

namespace iiot {

enum class VerdictReason : std::uint8_t { ok, unparsable, bad_length_field, bad_magic, error_response, empty };
std::string_view to_string(VerdictReason r);
VerdictReason parse_verdict_reason(std::string_view s);

struct ValidationVerdict {
    bool valid = false;
    VerdictReason reason = VerdictReason::empty;
    /// Protocol-level status carried by a valid reply (CONNACK return
    /// code, Modbus exception, HTTP status, ...).
    std::optional<int> code;
    std::string detail;
    /// The buffer is a consistent prefix of a longer frame.
    bool truncated = false;

    static ValidationVerdict ok(std::optional<int> code = std::nullopt, std::string detail = {}) {
        return {true, VerdictReason::ok, code, std::move(detail), false};
    }
    static ValidationVerdict bad(VerdictReason r, std::string detail, bool truncated = false) {
        return {false, r, std::nullopt, std::move(detail), truncated};
    }
};

struct ProbeMessage {
    Protocol protocol{};
    Bytes payload;
    bool expects_reply = true;
};

/// The canonical read-only probe for a protocol.
ProbeMessage build_probe(Protocol p);

/// Probes sent in order on one connection (EtherNet/IP sends ListIdentity
/// then RegisterSession). The first reply decides the verdict.
std::vector<ProbeMessage> build_probe_sequence(Protocol p);

/// Alternative dialect tried when the first probe draws no valid reply
/// (AMQP 1.0 after 0-9-1).
std::optional<ProbeMessage> build_fallback_probe(Protocol p);

ValidationVerdict validate_response(Protocol p, ByteView reply);

/// True once `buf` holds enough bytes to decide: a full frame, or a
/// prefix that can no longer become valid.
bool frame_complete(Protocol p, ByteView buf);

/// Validator applied to arbitrary bytes; only used to exercise rejection.
inline ValidationVerdict fuzz_reject(Protocol p, ByteView random_bytes) {
    return validate_response(p, random_bytes);
}

/// Summary of a probe decoded by the protocol's request parser.
struct DecodedRequest {
    std::string kind;                     ///< e.g. "CONNECT", "ListIdentity"
    std::vector<std::uint32_t> operations;  ///< function / command / method codes present
};

/// Parses a request as a server would. nullopt when malformed.
std::optional<DecodedRequest> decode_request(Protocol p, ByteView request);

/// Operation codes a probe may contain for each protocol: reads and
/// session setup only, never writes or function execution.
const std::vector<std::uint32_t>& read_only_operations(Protocol p);
bool is_read_only(Protocol p, ByteView request);

/// Server-side reply that validates for the probe (used by the lab).
Bytes compliant_response(Protocol p, ByteView request);

// Protocol helpers shared with access checks and lab servers.

namespace mqtt {

enum PacketType : std::uint8_t {
    kConnect = 1, kConnack = 2, kPublish = 3, kPuback = 4, kSubscribe = 8, kSuback = 9,
    kPingreq = 12, kPingresp = 13, kDisconnect = 14,
};

struct ConnectOptions {
    std::string client_id = "iiot-audit-probe";
    std::optional<std::string> username;
    std::optional<std::string> password;
    std::uint16_t keepalive = 60;
};

Bytes encode_connect(const ConnectOptions& o);
Bytes encode_connack(std::uint8_t return_code, bool session_present = false);
Bytes encode_subscribe(std::uint16_t packet_id, std::string_view filter, std::uint8_t qos = 0);
Bytes encode_suback(std::uint16_t packet_id, std::uint8_t granted);
Bytes encode_publish(std::string_view topic, ByteView payload);
Bytes encode_disconnect();
Bytes encode_remaining_length(std::size_t n);

struct Packet {
    std::uint8_t type = 0;
    std::uint8_t flags = 0;
    Bytes body;
    std::size_t wire_size = 0;
};

/// Splits one packet off the front of `buf`; nullopt if incomplete.
/// Throws AuditError on a malformed remaining-length field.
std::optional<Packet> next_packet(ByteView buf);

struct Publish {
    std::string topic;
    Bytes payload;
};
std::optional<Publish> parse_publish(const Packet& p);

}  // namespace mqtt

namespace amqp {

inline constexpr std::uint8_t kFrameEnd = 0xCE;
inline constexpr std::string_view kHeader091{"AMQP\x00\x00\x09\x01", 8};
inline constexpr std::string_view kHeader10{"AMQP\x00\x01\x00\x00", 8};

struct Method {
    std::uint16_t channel = 0;
    std::uint16_t class_id = 0;
    std::uint16_t method_id = 0;
    Bytes args;
};

Bytes encode_method(const Method& m);
/// One frame off the front of `buf`; nullopt while incomplete. Throws
/// AuditError when the frame is malformed.
std::optional<std::pair<Method, std::size_t>> next_method(ByteView buf);

Bytes encode_shortstr(std::string_view s);
Bytes encode_longstr(std::string_view s);

Bytes connection_start();
Bytes connection_start_ok(std::string_view user, std::string_view password);
Bytes connection_tune();
Bytes connection_close(std::uint16_t code, std::string_view text, std::uint16_t class_id = 0,
                       std::uint16_t method_id = 0);
Bytes connection_close_ok();
/// reply-code of a Connection.Close.
std::uint16_t close_code(const Method& m);

Bytes open_frame_10(std::string_view container_id);

}  // namespace amqp

namespace http {

struct Response {
    int status = 0;
    std::map<std::string, std::string> headers;  ///< lowercase names
    std::string body;
};

std::string get_request(std::string_view host, std::string_view path = "/");
/// nullopt until the header block is complete.
std::optional<Response> parse_response(ByteView buf);
std::string response(int status, std::string_view reason, std::string_view body,
                     std::string_view content_type = "text/html");

}  // namespace http

namespace dnp3 {
std::uint16_t crc(ByteView data);
}

}  // namespace iiot

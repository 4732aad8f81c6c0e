#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iiot/bytes.hpp"

namespace iiot {

enum class Protocol : std::uint8_t {
    Modbus,
    DNP3,
    IEC104,
    EtherNetIP,
    S7,
    TridiumFox,
    FoxPlatform,
    AMQP,
    OPCUA,
    MQTT,
    CoAP,
};

inline constexpr std::array<Protocol, 11> kAllProtocols = {
    Protocol::Modbus,     Protocol::DNP3,        Protocol::IEC104, Protocol::EtherNetIP,
    Protocol::S7,         Protocol::TridiumFox,  Protocol::FoxPlatform, Protocol::AMQP,
    Protocol::OPCUA,      Protocol::MQTT,        Protocol::CoAP,
};

enum class Variant : std::uint8_t { standard, secure };
enum class Transport : std::uint8_t { tcp, udp };
enum class CommPattern : std::uint8_t { client_server, pubsub, both };
enum class TlsMode : std::uint8_t { retrofitted, by_design };
enum class AdoptionGroup : std::uint8_t { small, medium, large };

class UnknownProtocol : public AuditError {
public:
    explicit UnknownProtocol(std::string_view name)
        : AuditError("unknown protocol: " + std::string(name)) {}
};

std::string_view to_string(Protocol p);
std::string_view to_string(Variant v);
std::string_view to_string(Transport t);
std::string_view to_string(CommPattern p);
std::string_view to_string(TlsMode m);
std::string_view to_string(AdoptionGroup g);

/// Accepts the canonical names plus common spellings ("IEC 104",
/// "EtherNet/IP", "OPC UA", ...), case-insensitively.
Protocol parse_protocol(std::string_view name);
Variant parse_variant(std::string_view name);

struct ProtocolEntry {
    Protocol protocol{};
    /// First port is the primary one; the rest are alternates, all probed.
    std::vector<std::uint16_t> standard_ports;
    std::vector<std::uint16_t> secure_ports;
    Transport transport = Transport::tcp;
    CommPattern pattern = CommPattern::client_server;
    TlsMode tls_mode = TlsMode::retrofitted;
    bool dtls = false;

    std::uint16_t default_port(Variant v) const {
        return v == Variant::secure ? secure_ports.front() : standard_ports.front();
    }

    friend bool operator==(const ProtocolEntry&, const ProtocolEntry&) = default;
};

/// The protocol/port knowledge base. Immutable after construction.
class Catalog {
public:
    /// The built-in table shipped with the tool.
    static const Catalog& builtin();
    static Catalog from_json(std::string_view text);
    static Catalog load(const std::filesystem::path& path);

    std::string to_json() const;

    /// Throws UnknownProtocol for names outside the catalog (e.g. PROFINET).
    const ProtocolEntry& lookup(Protocol p) const;
    const ProtocolEntry& lookup(std::string_view name) const;
    const std::vector<ProtocolEntry>& entries() const { return entries_; }

    /// Reverse lookup used when a port shows up without a protocol hint.
    std::optional<std::pair<Protocol, Variant>> by_port(std::uint16_t port, Transport t) const;

    friend bool operator==(const Catalog&, const Catalog&) = default;

private:
    std::vector<ProtocolEntry> entries_;
};

/// Groups protocols by observed TLS adoption: fewer than ten TLS
/// deployments is small, at least 10 % adoption is large, everything in
/// between is medium.
AdoptionGroup classify_adoption_group(std::size_t tls_deployments, double pct_tls);

}  // namespace iiot

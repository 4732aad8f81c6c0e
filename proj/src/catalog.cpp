#include "iiot/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace iiot {
namespace {

using json = nlohmann::json;

std::string fold(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

template <typename E, std::size_t N>
E parse_enum(std::string_view name, const std::array<E, N>& values, std::string_view what) {
    for (auto v : values)
        if (to_string(v) == name) return v;
    throw AuditError("invalid " + std::string(what) + ": " + std::string(name));
}

constexpr std::array kTransports = {Transport::tcp, Transport::udp};
constexpr std::array kPatterns = {CommPattern::client_server, CommPattern::pubsub, CommPattern::both};
constexpr std::array kModes = {TlsMode::retrofitted, TlsMode::by_design};

Catalog make_builtin() {
    using P = Protocol;
    constexpr auto cs = CommPattern::client_server;
    constexpr auto ps = CommPattern::pubsub;
    constexpr auto rf = TlsMode::retrofitted;
    constexpr auto bd = TlsMode::by_design;
    constexpr auto tcp = Transport::tcp;
    json j = json::array();
    auto add = [&](P p, std::vector<std::uint16_t> std_ports, std::vector<std::uint16_t> sec_ports,
                   Transport t, CommPattern pat, TlsMode mode, bool dtls) {
        j.push_back({{"protocol", to_string(p)},
                     {"standard_ports", std_ports},
                     {"secure_ports", sec_ports},
                     {"transport", to_string(t)},
                     {"pattern", to_string(pat)},
                     {"tls_mode", to_string(mode)},
                     {"dtls", dtls}});
    };
    add(P::Modbus, {502}, {802}, tcp, cs, rf, false);
    add(P::DNP3, {20000}, {19999}, tcp, cs, rf, false);
    add(P::IEC104, {2404}, {19998}, tcp, cs, rf, false);
    add(P::EtherNetIP, {44818}, {2221}, tcp, cs, rf, false);
    add(P::S7, {102}, {3782}, tcp, cs, rf, false);
    add(P::TridiumFox, {1911, 3011}, {4911}, tcp, cs, rf, false);
    add(P::FoxPlatform, {3011}, {5011, 4911}, tcp, cs, rf, false);
    add(P::AMQP, {5672}, {5671}, tcp, ps, bd, false);
    add(P::OPCUA, {4840}, {4843}, tcp, CommPattern::both, bd, false);
    add(P::MQTT, {1883}, {8883}, tcp, ps, bd, false);
    add(P::CoAP, {5683}, {5684}, Transport::udp, cs, bd, true);
    return Catalog::from_json(j.dump());
}

}  // namespace

std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::Modbus: return "Modbus";
        case Protocol::DNP3: return "DNP3";
        case Protocol::IEC104: return "IEC104";
        case Protocol::EtherNetIP: return "EtherNetIP";
        case Protocol::S7: return "S7";
        case Protocol::TridiumFox: return "TridiumFox";
        case Protocol::FoxPlatform: return "FoxPlatform";
        case Protocol::AMQP: return "AMQP";
        case Protocol::OPCUA: return "OPCUA";
        case Protocol::MQTT: return "MQTT";
        case Protocol::CoAP: return "CoAP";
    }
    return "?";
}

std::string_view to_string(Variant v) { return v == Variant::secure ? "secure" : "standard"; }
std::string_view to_string(Transport t) { return t == Transport::udp ? "udp" : "tcp"; }

std::string_view to_string(CommPattern p) {
    switch (p) {
        case CommPattern::client_server: return "client_server";
        case CommPattern::pubsub: return "pubsub";
        case CommPattern::both: return "both";
    }
    return "?";
}

std::string_view to_string(TlsMode m) { return m == TlsMode::by_design ? "by_design" : "retrofitted"; }

std::string_view to_string(AdoptionGroup g) {
    switch (g) {
        case AdoptionGroup::small: return "small";
        case AdoptionGroup::medium: return "medium";
        case AdoptionGroup::large: return "large";
    }
    return "?";
}

Protocol parse_protocol(std::string_view name) {
    const auto key = fold(name);
    for (auto p : kAllProtocols)
        if (fold(to_string(p)) == key) return p;
    static const std::pair<std::string_view, Protocol> aliases[] = {
        {"iec608705104", Protocol::IEC104}, {"enip", Protocol::EtherNetIP},
        {"siemenss7", Protocol::S7},        {"s7comm", Protocol::S7},
        {"fox", Protocol::TridiumFox},      {"tf", Protocol::TridiumFox},
        {"fp", Protocol::FoxPlatform},      {"opcuabinary", Protocol::OPCUA},
        {"modbustcp", Protocol::Modbus},
    };
    for (const auto& [alias, p] : aliases)
        if (alias == key) return p;
    throw UnknownProtocol(name);
}

Variant parse_variant(std::string_view name) {
    const auto key = fold(name);
    if (key == "standard" || key == "plain" || key == "plaintext") return Variant::standard;
    if (key == "secure" || key == "tls" || key == "dtls") return Variant::secure;
    throw AuditError("invalid variant: " + std::string(name));
}

const Catalog& Catalog::builtin() {
    static const Catalog c = make_builtin();
    return c;
}

Catalog Catalog::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw AuditError(std::string("catalog: ") + e.what());
    }
    if (j.is_object()) j = j.at("protocols");
    Catalog c;
    try {
        for (const auto& e : j) {
            ProtocolEntry pe;
            pe.protocol = parse_protocol(e.at("protocol").get<std::string>());
            pe.standard_ports = e.at("standard_ports").get<std::vector<std::uint16_t>>();
            pe.secure_ports = e.at("secure_ports").get<std::vector<std::uint16_t>>();
            pe.transport = parse_enum(e.at("transport").get<std::string>(), kTransports, "transport");
            pe.pattern = parse_enum(e.at("pattern").get<std::string>(), kPatterns, "pattern");
            pe.tls_mode = parse_enum(e.at("tls_mode").get<std::string>(), kModes, "tls_mode");
            pe.dtls = e.at("dtls").get<bool>();
            if (pe.standard_ports.empty() || pe.secure_ports.empty())
                throw AuditError("catalog: " + std::string(to_string(pe.protocol)) +
                                 " needs a standard and a secure port");
            for (auto p : pe.standard_ports)
                if (std::ranges::find(pe.secure_ports, p) != pe.secure_ports.end())
                    throw AuditError("catalog: port " + std::to_string(p) +
                                     " is both standard and secure for " +
                                     std::string(to_string(pe.protocol)));
            if (pe.dtls != (pe.transport == Transport::udp))
                throw AuditError("catalog: DTLS requires UDP transport");
            c.entries_.push_back(std::move(pe));
        }
    } catch (const json::exception& e) {
        throw AuditError(std::string("catalog: ") + e.what());
    }
    return c;
}

Catalog Catalog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw AuditError("cannot open catalog " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string Catalog::to_json() const {
    json arr = json::array();
    for (const auto& e : entries_) {
        arr.push_back({{"protocol", to_string(e.protocol)},
                       {"standard_ports", e.standard_ports},
                       {"secure_ports", e.secure_ports},
                       {"transport", to_string(e.transport)},
                       {"pattern", to_string(e.pattern)},
                       {"tls_mode", to_string(e.tls_mode)},
                       {"dtls", e.dtls}});
    }
    return json{{"protocols", arr}}.dump(2) + "\n";
}

const ProtocolEntry& Catalog::lookup(Protocol p) const {
    for (const auto& e : entries_)
        if (e.protocol == p) return e;
    throw UnknownProtocol(to_string(p));
}

const ProtocolEntry& Catalog::lookup(std::string_view name) const { return lookup(parse_protocol(name)); }

std::optional<std::pair<Protocol, Variant>> Catalog::by_port(std::uint16_t port, Transport t) const {
    for (const auto& e : entries_) {
        if (e.transport != t) continue;
        if (std::ranges::find(e.standard_ports, port) != e.standard_ports.end())
            return std::pair{e.protocol, Variant::standard};
        if (std::ranges::find(e.secure_ports, port) != e.secure_ports.end())
            return std::pair{e.protocol, Variant::secure};
    }
    return std::nullopt;
}

AdoptionGroup classify_adoption_group(std::size_t tls_deployments, double pct_tls) {
    if (tls_deployments < 10) return AdoptionGroup::small;
    if (pct_tls >= 10.0) return AdoptionGroup::large;
    return AdoptionGroup::medium;
}

}  // namespace iiot

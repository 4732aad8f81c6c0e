#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "iiot/catalog.hpp"
#include "iiot/net.hpp"

namespace iiot {

/// One probe target: where to connect and what to expect there.
struct Endpoint {
    Ipv4 address;
    std::uint16_t port = 0;
    Protocol protocol = Protocol::MQTT;
    Variant variant = Variant::standard;
    Transport transport = Transport::tcp;

    /// "192.0.2.1:8883/MQTT/secure"
    std::string to_string() const {
        return address.to_string() + ':' + std::to_string(port) + '/' + std::string(iiot::to_string(protocol)) +
               '/' + std::string(iiot::to_string(variant));
    }

    friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// Endpoint on the catalog's primary port for (protocol, variant).
inline Endpoint make_endpoint(Ipv4 addr, Protocol p, Variant v, const Catalog& catalog = Catalog::builtin()) {
    const auto& e = catalog.lookup(p);
    return Endpoint{addr, e.default_port(v), p, v, e.transport};
}

}  // namespace iiot

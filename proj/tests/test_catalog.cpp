#include <gtest/gtest.h>

#include <random>

#include "iiot/catalog.hpp"
#include "iiot/endpoint.hpp"
#include "iiot/net.hpp"
#include "oracles.hpp"

using namespace iiot;

namespace {

struct PortRow {
    Protocol protocol;
    std::uint16_t standard;
    std::uint16_t secure;
    Transport transport;
};

// Primary (standard, secure) port per protocol as published for each
// variant by IANA and the protocol specifications.
const PortRow kPorts[] = {
    {Protocol::Modbus, 502, 802, Transport::tcp},       {Protocol::DNP3, 20000, 19999, Transport::tcp},
    {Protocol::IEC104, 2404, 19998, Transport::tcp},    {Protocol::EtherNetIP, 44818, 2221, Transport::tcp},
    {Protocol::S7, 102, 3782, Transport::tcp},          {Protocol::TridiumFox, 1911, 4911, Transport::tcp},
    {Protocol::FoxPlatform, 3011, 5011, Transport::tcp}, {Protocol::AMQP, 5672, 5671, Transport::tcp},
    {Protocol::OPCUA, 4840, 4843, Transport::tcp},      {Protocol::MQTT, 1883, 8883, Transport::tcp},
    {Protocol::CoAP, 5683, 5684, Transport::udp},
};

}  // namespace

TEST(Catalog, PrimaryPorts) {
    const auto& cat = Catalog::builtin();
    for (const auto& row : kPorts) {
        SCOPED_TRACE(std::string(to_string(row.protocol)));
        const auto& e = cat.lookup(row.protocol);
        EXPECT_EQ(e.default_port(Variant::standard), row.standard);
        EXPECT_EQ(e.default_port(Variant::secure), row.secure);
        EXPECT_EQ(e.transport, row.transport);
        EXPECT_EQ(e.dtls, row.protocol == Protocol::CoAP);
    }
}

TEST(Catalog, MqttAndCoapEntries) {
    const auto& mqtt = Catalog::builtin().lookup("MQTT");
    EXPECT_EQ(mqtt.pattern, CommPattern::pubsub);
    EXPECT_EQ(mqtt.tls_mode, TlsMode::by_design);
    const auto& coap = Catalog::builtin().lookup("coap");
    EXPECT_EQ(coap.pattern, CommPattern::client_server);
    EXPECT_EQ(coap.tls_mode, TlsMode::by_design);
    EXPECT_TRUE(coap.dtls);
}

TEST(Catalog, FoxAlternatesAreListed) {
    const auto& fox = Catalog::builtin().lookup(Protocol::TridiumFox);
    EXPECT_EQ(fox.standard_ports, (std::vector<std::uint16_t>{1911, 3011}));
    const auto& plat = Catalog::builtin().lookup(Protocol::FoxPlatform);
    EXPECT_EQ(plat.secure_ports, (std::vector<std::uint16_t>{5011, 4911}));
}

TEST(Catalog, UnknownProtocolThrows) {
    EXPECT_THROW(Catalog::builtin().lookup("PROFINET"), UnknownProtocol);
    EXPECT_THROW(parse_protocol("BACnet"), UnknownProtocol);
}

TEST(Catalog, SpellingVariants) {
    EXPECT_EQ(parse_protocol("IEC 104"), Protocol::IEC104);
    EXPECT_EQ(parse_protocol("EtherNet/IP"), Protocol::EtherNetIP);
    EXPECT_EQ(parse_protocol("opc ua"), Protocol::OPCUA);
    for (auto p : kAllProtocols) EXPECT_EQ(parse_protocol(to_string(p)), p);
}

TEST(Catalog, InvariantsHold) {
    for (const auto& e : Catalog::builtin().entries()) {
        for (auto s : e.standard_ports)
            for (auto t : e.secure_ports) EXPECT_NE(s, t) << to_string(e.protocol);
        EXPECT_EQ(e.dtls, e.protocol == Protocol::CoAP);
    }
    EXPECT_EQ(Catalog::builtin().entries().size(), kAllProtocols.size());
}

TEST(Catalog, JsonRoundTripIsExact) {
    const auto text = Catalog::builtin().to_json();
    const auto back = Catalog::from_json(text);
    EXPECT_EQ(back, Catalog::builtin());
    EXPECT_EQ(back.to_json(), text);
}

TEST(Catalog, ShippedFileMatchesBuiltin) {
    const auto shipped = Catalog::load(std::filesystem::path(IIOT_SOURCE_DIR) / "data" / "catalog.json");
    EXPECT_EQ(shipped, Catalog::builtin());
    EXPECT_EQ(oracle::slurp(std::filesystem::path(IIOT_SOURCE_DIR) / "data" / "catalog.json"),
              Catalog::builtin().to_json());
}

TEST(Catalog, ReversePortLookup) {
    const auto& cat = Catalog::builtin();
    EXPECT_EQ(cat.by_port(8883, Transport::tcp), std::make_pair(Protocol::MQTT, Variant::secure));
    EXPECT_EQ(cat.by_port(5684, Transport::udp), std::make_pair(Protocol::CoAP, Variant::secure));
    EXPECT_FALSE(cat.by_port(5684, Transport::tcp));
    EXPECT_FALSE(cat.by_port(1, Transport::tcp));
}

TEST(Catalog, AdoptionGroups) {
    EXPECT_EQ(classify_adoption_group(5000, 12.0), AdoptionGroup::large);    // MQTT
    EXPECT_EQ(classify_adoption_group(111, 6.4), AdoptionGroup::medium);     // EtherNet/IP
    EXPECT_EQ(classify_adoption_group(0, 0.0), AdoptionGroup::small);        // Modbus
    EXPECT_EQ(classify_adoption_group(9, 50.0), AdoptionGroup::small);
    EXPECT_EQ(classify_adoption_group(10, 10.0), AdoptionGroup::large);
    EXPECT_EQ(classify_adoption_group(10, 9.99), AdoptionGroup::medium);
}

TEST(Endpoint, MakeEndpointUsesPrimaryPort) {
    const auto a = Ipv4::parse("192.0.2.1");
    const auto mqtt = make_endpoint(a, Protocol::MQTT, Variant::secure);
    EXPECT_EQ(mqtt.port, 8883);
    EXPECT_EQ(mqtt.transport, Transport::tcp);
    EXPECT_EQ(mqtt.to_string(), "192.0.2.1:8883/MQTT/secure");
    const auto coap = make_endpoint(a, Protocol::CoAP, Variant::secure);
    EXPECT_EQ(coap.port, 5684);
    EXPECT_EQ(coap.transport, Transport::udp);
}

// ------------------------------------------------------------------ net

TEST(Ipv4, ParseAndFormat) {
    EXPECT_EQ(Ipv4::parse("10.0.0.5").value(), 0x0A000005u);
    EXPECT_EQ(Ipv4(0xC0000201).to_string(), "192.0.2.1");
    for (auto bad : {"", "1.2.3", "1.2.3.4.5", "256.1.1.1", "a.b.c.d", "1..2.3", " 1.2.3.4"})
        EXPECT_FALSE(Ipv4::try_parse(bad)) << bad;
    EXPECT_THROW(Ipv4::parse("300.0.0.1"), AuditError);
}

TEST(Cidr, MasksHostBits) {
    const auto c = Cidr::parse("10.1.2.3/8");
    EXPECT_EQ(c.to_string(), "10.0.0.0/8");
    EXPECT_EQ(c.size(), 1u << 24);
    EXPECT_TRUE(c.contains(Ipv4::parse("10.255.0.1")));
    EXPECT_FALSE(c.contains(Ipv4::parse("11.0.0.0")));
    EXPECT_EQ(Cidr::parse("192.0.2.7").prefix_len(), 32);
    EXPECT_EQ(Cidr::parse("0.0.0.0/0").mask(), 0u);
    EXPECT_THROW(Cidr::parse("10.0.0.0/33"), AuditError);
}

TEST(Cidr, ContainmentMatchesBitwiseOracle) {
    std::mt19937 rng(7);
    for (int i = 0; i < 5000; ++i) {
        const int len = static_cast<int>(rng() % 33);
        const Ipv4 net(rng()), probe(rng() % 2 ? rng() : net.value() ^ (rng() & 0xFF));
        const Cidr c(net, len);
        const std::uint64_t block = std::uint64_t{1} << (32 - len);
        const std::uint64_t lo = net.value() / block * block;
        const bool want = probe.value() >= lo && probe.value() < lo + block;
        ASSERT_EQ(c.contains(probe), want) << c.to_string() << " " << probe.to_string();
    }
}

TEST(AsMap, LongestPrefixWins) {
    AsMap m;
    m.add(Cidr::parse("10.0.0.0/8"), 100);
    m.add(Cidr::parse("10.1.0.0/16"), 200);
    m.add(Cidr::parse("10.1.2.0/24"), 300);
    EXPECT_EQ(m.lookup(Ipv4::parse("10.1.2.3")), 300u);
    EXPECT_EQ(m.lookup(Ipv4::parse("10.1.3.3")), 200u);
    EXPECT_EQ(m.lookup(Ipv4::parse("10.2.0.1")), 100u);
    EXPECT_EQ(m.lookup(Ipv4::parse("11.0.0.1")), AsMap::kUnknownAsn);
    EXPECT_EQ(m.prefix_count(), 3u);
}

TEST(AsMap, RandomTableAgreesWithLinearScan) {
    std::mt19937 rng(11);
    AsMap m;
    std::vector<std::pair<Cidr, std::uint32_t>> table;
    for (int i = 0; i < 300; ++i) {
        const Cidr c(Ipv4(rng() & 0x0FFFFFFF), 8 + static_cast<int>(rng() % 17));
        if (std::ranges::any_of(table, [&](auto& t) { return t.first == c; })) continue;
        const auto asn = 1 + rng() % 60000;
        table.emplace_back(c, asn);
        m.add(c, asn);
    }
    for (int i = 0; i < 5000; ++i) {
        const Ipv4 a(rng() & 0x0FFFFFFF);
        int best = -1;
        std::uint32_t want = 0;
        for (const auto& [c, asn] : table)
            if (c.contains(a) && c.prefix_len() > best) best = c.prefix_len(), want = asn;
        ASSERT_EQ(m.lookup(a), want) << a.to_string();
    }
}

TEST(AsMap, LoadsTsvFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "iiot-asmap-test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "prefixes.tsv") << "# comment\n192.0.2.0/24\t64500\n\n198.51.100.0/24\t64501\n";
    std::ofstream(dir / "types.tsv") << "64500\tContent\n64501\tNetwork Services\n";
    const auto m = AsMap::load(dir / "prefixes.tsv", dir / "types.tsv");
    EXPECT_EQ(m.lookup(Ipv4::parse("192.0.2.9")), 64500u);
    EXPECT_EQ(m.type_of(64500), AsType::enterprise);
    EXPECT_EQ(m.type_of(64501), AsType::isp);
    EXPECT_EQ(m.type_of(1), AsType::unknown);
}

TEST(AsMap, CategoryMapping) {
    EXPECT_EQ(as_type_from_category("Content"), AsType::enterprise);
    EXPECT_EQ(as_type_from_category("Network Services"), AsType::isp);
    EXPECT_EQ(as_type_from_category("Educational/Research"), AsType::isp);
    EXPECT_EQ(as_type_from_category("Non-Profit"), AsType::unknown);
}

TEST(CidrSet, MergeAndContains) {
    CidrSet a({Cidr::parse("10.0.0.0/24")});
    CidrSet b({Cidr::parse("192.0.2.0/24")});
    a.merge(b);
    EXPECT_TRUE(a.contains(Ipv4::parse("192.0.2.200")));
    EXPECT_TRUE(a.contains(Ipv4::parse("10.0.0.1")));
    EXPECT_FALSE(a.contains(Ipv4::parse("10.0.1.1")));
    EXPECT_FALSE(CidrSet{}.contains(Ipv4::parse("10.0.0.1")));
}

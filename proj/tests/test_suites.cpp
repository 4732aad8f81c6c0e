#include <gtest/gtest.h>

#include <random>
#include <set>

#include "iiot/suites.hpp"
#include "iiot/tls_wire.hpp"
#include "oracles.hpp"

using namespace iiot;

namespace {

std::vector<std::string> names_of(SuiteSetName s) {
    std::vector<std::string> out;
    for (const auto& c : suite_set(s).suites) out.emplace_back(c.name);
    return out;
}

std::set<std::uint16_t> codes_of(SuiteSetName s) {
    const auto v = suite_set(s).codes();
    return {v.begin(), v.end()};
}

}  // namespace

TEST(Suites, TranscriptionMatchesFixtureExactly) {
    const auto sets = oracle::cipher_sets();
    ASSERT_EQ(sets.size(), 4u);
    for (auto s : kBatteryOrder) {
        SCOPED_TRACE(std::string(to_string(s)));
        EXPECT_EQ(names_of(s), sets.at(std::string(to_string(s))));
    }
}

TEST(Suites, SetSizesMatchManualRecount) {
    // Recounted by hand from the published table: 9+9+8, 6+6+4, 5+5+3, 16+16+15.
    EXPECT_EQ(suite_set(SuiteSetName::REC).suites.size(), 26u);
    EXPECT_EQ(suite_set(SuiteSetName::noPFS).suites.size(), 16u);
    EXPECT_EQ(suite_set(SuiteSetName::COMP).suites.size(), 13u);
    EXPECT_EQ(suite_set(SuiteSetName::INS).suites.size(), 47u);
}

TEST(Suites, Disjointness) {
    const auto rec = codes_of(SuiteSetName::REC);
    for (auto other : {SuiteSetName::INS, SuiteSetName::noPFS})
        for (auto c : codes_of(other)) EXPECT_FALSE(rec.contains(c)) << suite_name(c);
    // The compatibility and insecure sets legitimately share RC4 suites.
    EXPECT_TRUE(codes_of(SuiteSetName::COMP).contains(*suite_code("RSA_WITH_RC4_128_SHA")));
    EXPECT_TRUE(codes_of(SuiteSetName::INS).contains(*suite_code("RSA_WITH_RC4_128_SHA")));
}

TEST(Suites, CodesUniqueWithinSet) {
    for (auto s : kBatteryOrder) {
        const auto v = suite_set(s).codes();
        EXPECT_EQ(std::set<std::uint16_t>(v.begin(), v.end()).size(), v.size()) << to_string(s);
    }
}

TEST(Suites, WellKnownCodePoints) {
    EXPECT_EQ(suite_code("ECDHE_ECDSA_WITH_AES_256_GCM_SHA384"), 0xC02C);
    EXPECT_EQ(suite_code("ECDHE_RSA_WITH_AES_128_GCM_SHA256"), 0xC02F);
    EXPECT_EQ(suite_code("RSA_WITH_RC4_128_SHA"), 0x0005);
    EXPECT_EQ(suite_code("NULL_WITH_NULL_NULL"), 0x0000);
    EXPECT_EQ(suite_code("DHE_RSA_WITH_AES_128_CCM_8"), 0xC0A2);
    EXPECT_EQ(suite_name(0xC02F), "ECDHE_RSA_WITH_AES_128_GCM_SHA256");
    EXPECT_EQ(suite_name(0x1301), "0x1301");
    EXPECT_FALSE(suite_code("NOT_A_SUITE"));
}

TEST(Suites, NamesRoundTrip) {
    for (auto s : kBatteryOrder)
        for (const auto& c : suite_set(s).suites) EXPECT_EQ(suite_code(c.name), c.code) << c.name;
    for (auto s : kBatteryOrder) EXPECT_EQ(parse_suite_set(to_string(s)), s);
}

TEST(Suites, WeaknessClassification) {
    const auto rc4 = classify_suite("RSA_WITH_RC4_128_SHA");
    EXPECT_TRUE(rc4.weak_cipher && rc4.weak_mac);
    const auto des3 = classify_suite("ECDHE_RSA_WITH_3DES_EDE_CBC_SHA");
    EXPECT_TRUE(des3.weak_cipher && des3.weak_mac);
    const auto cbc = classify_suite("ECDHE_RSA_WITH_AES_128_CBC_SHA");
    EXPECT_FALSE(cbc.weak_cipher);
    EXPECT_TRUE(cbc.weak_mac);
    EXPECT_FALSE(classify_suite("ECDHE_RSA_WITH_AES_128_GCM_SHA256").any());
    EXPECT_FALSE(classify_suite("ECDHE_ECDSA_WITH_AES_128_CCM").any());
    EXPECT_FALSE(classify_suite("ECDHE_RSA_WITH_AES_128_CBC_SHA256").any());
    EXPECT_EQ(classify_suite(std::uint16_t{0x0005}).weak_cipher, true);
}

TEST(Suites, CompatibilityBreakdown) {
    // Every compatibility suite is strong, weak-MAC only, or weak on both
    // axes: RC4 and 3DES always come with HMAC-SHA1 in this set.
    int strong = 0, mac_only = 0, both = 0;
    for (const auto& c : suite_set(SuiteSetName::COMP).suites) {
        const auto w = classify_suite(c.name);
        EXPECT_FALSE(w.weak_cipher && !w.weak_mac) << c.name;
        strong += !w.any();
        mac_only += !w.weak_cipher && w.weak_mac;
        both += w.weak_cipher && w.weak_mac;
    }
    EXPECT_EQ(strong, 2);
    EXPECT_EQ(mac_only, 6);
    EXPECT_EQ(both, 5);
}

// ------------------------------------------------------------------ TLS wire

namespace {

tls::Random random_with_suffix(const std::array<std::uint8_t, 8>& suffix, std::uint8_t fill = 0x5A) {
    tls::Random r;
    r.fill(fill);
    std::copy(suffix.begin(), suffix.end(), r.end() - 8);
    return r;
}

// "DOWNGRD" followed by 0x01, straight from the TLS 1.3 standard text.
constexpr std::array<std::uint8_t, 8> kRfcTls12{'D', 'O', 'W', 'N', 'G', 'R', 'D', 0x01};
constexpr std::array<std::uint8_t, 8> kRfcTls11{'D', 'O', 'W', 'N', 'G', 'R', 'D', 0x00};

}  // namespace

TEST(Sentinel, ConstantsMatchStandard) {
    EXPECT_EQ(tls::kDowngradeSentinelTls12, kRfcTls12);
    EXPECT_EQ(tls::kDowngradeSentinelTls11, kRfcTls11);
}

TEST(Sentinel, PositiveAndNegativeFixtures) {
    const auto pos = random_with_suffix(kRfcTls12);
    EXPECT_TRUE(tls::detect_downgrade_sentinel(pos));
    tls::Random zero{};
    EXPECT_FALSE(tls::detect_downgrade_sentinel(zero));
    EXPECT_FALSE(tls::detect_downgrade_sentinel(random_with_suffix(kRfcTls11)));
    // Sentinel bytes anywhere but the suffix.
    for (std::size_t at = 0; at < 24; ++at) {
        tls::Random r{};
        std::copy(kRfcTls12.begin(), kRfcTls12.end(), r.begin() + static_cast<std::ptrdiff_t>(at));
        EXPECT_FALSE(tls::detect_downgrade_sentinel(r)) << at;
    }
    std::array<std::uint8_t, 31> short_random{};
    EXPECT_THROW(tls::detect_downgrade_sentinel(short_random), AuditError);
}

TEST(Sentinel, RandomFixturesAgreeWithSuffixOracle) {
    std::mt19937 rng(3);
    int positives = 0;
    for (int i = 0; i < 2000; ++i) {
        tls::Random r;
        for (auto& b : r) b = static_cast<std::uint8_t>(rng());
        if (i % 2) std::copy(kRfcTls12.begin(), kRfcTls12.end(), r.end() - 8);
        if (i % 7 == 0) r[31] ^= 1;
        const bool want = std::equal(kRfcTls12.begin(), kRfcTls12.end(), r.end() - 8);
        positives += want;
        ASSERT_EQ(tls::detect_downgrade_sentinel(r), want);
    }
    EXPECT_GT(positives, 500);
}

TEST(TlsWire, ClientHelloCarriesExactSuites) {
    for (auto s : kBatteryOrder) {
        tls::ClientHelloSpec spec;
        spec.suites = suite_set(s).codes();
        spec.random.fill(0x11);
        const auto record = tls::encode_client_hello_record(spec);
        ASSERT_GE(record.size(), 9u);
        EXPECT_EQ(record[0], tls::kHandshake);
        EXPECT_EQ(record[5], tls::kClientHello);
        const auto body = ByteView(record).subspan(9);
        const auto parsed = tls::parse_client_hello_body(body, false);
        EXPECT_EQ(parsed.suites, spec.suites) << to_string(s);
        EXPECT_EQ(parsed.version, tls::kTls12);
        EXPECT_EQ(parsed.random, spec.random);
    }
}

TEST(TlsWire, DtlsClientHelloWithCookie) {
    tls::ClientHelloSpec spec;
    spec.suites = suite_set(SuiteSetName::REC).codes();
    spec.max_version = tls::kDtls12;
    spec.cookie = {1, 2, 3, 4};
    spec.message_seq = 1;
    const auto record = tls::encode_client_hello_record(spec);
    EXPECT_EQ(record[0], tls::kHandshake);
    EXPECT_EQ(record[1], 0xFE);
    EXPECT_EQ(record[2], 0xFF);  // lowest DTLS record version, as in the TLS case
    EXPECT_EQ(record[25], 0xFE);  // client_version carries the real maximum
    EXPECT_EQ(record[26], 0xFD);
    // 13-byte DTLS record header, 12-byte handshake header.
    const auto parsed = tls::parse_client_hello_body(ByteView(record).subspan(25), true);
    EXPECT_EQ(parsed.cookie, spec.cookie);
    EXPECT_EQ(parsed.suites, spec.suites);
}

TEST(TlsWire, ServerFlightParsesAtAnyChunking) {
    tls::ServerFlightSpec spec;
    spec.suite = 0xC02F;
    spec.random = random_with_suffix(kRfcTls12);
    spec.chain = {Bytes(300, 0xAB), Bytes(200, 0xCD)};
    spec.certificate_request = true;
    const auto wire = tls::encode_server_flight(spec, false);
    for (std::size_t chunk : {1u, 2u, 7u, 64u, 100000u}) {
        tls::FlightParser p(false);
        for (std::size_t i = 0; i < wire.size() && !p.done(); i += chunk)
            p.feed(ByteView(wire).subspan(i, std::min(chunk, wire.size() - i)));
        const auto& f = p.flight();
        ASSERT_EQ(f.status, tls::FlightStatus::complete) << chunk << " " << f.error;
        EXPECT_EQ(f.hello->suite, 0xC02F);
        EXPECT_EQ(f.hello->version, tls::kTls12);
        EXPECT_TRUE(tls::detect_downgrade_sentinel(f.hello->random));
        EXPECT_EQ(f.chain, spec.chain);
        EXPECT_TRUE(f.certificate_request);
    }
}

TEST(TlsWire, DtlsFlightAndHelloVerify) {
    const Bytes cookie{9, 8, 7};
    tls::FlightParser p(true);
    p.feed(tls::encode_hello_verify_request(tls::kDtls10, cookie));
    ASSERT_EQ(p.flight().status, tls::FlightStatus::verify);
    EXPECT_EQ(p.flight().cookie, cookie);
    p.restart();

    tls::ServerFlightSpec spec;
    spec.version = tls::kDtls12;
    spec.suite = 0xC02B;
    spec.chain = {Bytes(120, 0x42)};
    spec.message_seq = 1;
    const auto wire = tls::encode_server_flight(spec, true);
    // One datagram per record: walk the 13-byte headers.
    std::size_t at = 0;
    while (at < wire.size()) {
        const std::size_t len = static_cast<std::size_t>(wire[at + 11] << 8 | wire[at + 12]);
        p.feed(ByteView(wire).subspan(at, 13 + len));
        at += 13 + len;
    }
    ASSERT_EQ(p.flight().status, tls::FlightStatus::complete) << p.flight().error;
    EXPECT_EQ(p.flight().hello->suite, 0xC02B);
    EXPECT_EQ(p.flight().chain.size(), 1u);
}

TEST(TlsWire, AlertEndsFlight) {
    tls::FlightParser p(false);
    p.feed(tls::encode_alert_record(tls::kTls12, {2, 40}, false));
    ASSERT_EQ(p.flight().status, tls::FlightStatus::alert);
    EXPECT_EQ(p.flight().alert->description, 40);
}

TEST(TlsWire, GarbageIsMalformedNotACrash) {
    std::mt19937 rng(5);
    for (int i = 0; i < 3000; ++i) {
        Bytes junk(rng() % 200);
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
        if (i % 3 == 0 && !junk.empty()) junk[0] = tls::kHandshake;
        tls::FlightParser p(i % 2 == 1);
        EXPECT_NO_THROW(p.feed(junk));
        EXPECT_NE(p.flight().status, tls::FlightStatus::complete);
    }
    tls::FlightParser ssh(false);
    ssh.feed(as_bytes("SSH-2.0-OpenSSH_8.9p1\r\n"));
    EXPECT_EQ(ssh.flight().status, tls::FlightStatus::malformed);
}

TEST(TlsWire, VersionNamesAndRanks) {
    EXPECT_EQ(tls::version_name(tls::kTls10), "TLS 1.0");
    EXPECT_EQ(tls::version_name(tls::kDtls12), "DTLS 1.2");
    EXPECT_EQ(tls::parse_version_name("TLS 1.3"), tls::kTls13);
    EXPECT_EQ(tls::version_rank(tls::kDtls10), tls::version_rank(tls::kTls11));
    EXPECT_EQ(tls::version_rank(tls::kDtls12), tls::version_rank(tls::kTls12));
    EXPECT_LT(tls::version_rank(tls::kTls10), tls::version_rank(tls::kTls12));
}

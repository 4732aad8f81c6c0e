#include <gtest/gtest.h>

#include <random>

#include "iiot/assessor.hpp"
#include "cases.hpp"
#include "oracles.hpp"

using namespace iiot;
using namespace std::chrono;

namespace {

TimePoint at(int y, unsigned m, unsigned d, int secs = 0) {
    return TimePoint{sys_days{year{y} / month{m} / day{d}}} + seconds{secs};
}

std::set<Check> checks_of(const std::vector<Finding>& fs) {
    std::set<Check> out;
    for (const auto& f : fs) out.insert(f.check);
    return out;
}

HandshakeResult hs(SuiteSetName set, std::optional<std::uint16_t> suite, std::uint16_t version = tls::kTls12) {
    HandshakeResult r;
    r.suite_set = set;
    if (suite) {
        r.outcome = HandshakeOutcome::accepted;
        r.negotiated_suite = suite;
        r.negotiated_version = version;
        r.server_hello_valid = true;
        r.completed = true;
    } else {
        r.outcome = HandshakeOutcome::denied;
    }
    return r;
}

SuiteBattery battery(std::optional<std::uint16_t> rec, std::optional<std::uint16_t> nopfs,
                     std::optional<std::uint16_t> comp, std::optional<std::uint16_t> ins,
                     std::uint16_t version = tls::kTls12) {
    SuiteBattery b;
    b.results = {hs(SuiteSetName::REC, rec, version), hs(SuiteSetName::noPFS, nopfs, version),
                 hs(SuiteSetName::COMP, comp, version), hs(SuiteSetName::INS, ins, version)};
    return b;
}

std::uint16_t code(std::string_view name) { return *suite_code(name); }

}  // namespace

// ------------------------------------------------------------ certificate table

TEST(CertificateRules, TwentyFiveCaseTable) {
    ASSERT_EQ(cases::cert_cases().size(), 25u);
    for (const auto& c : cases::cert_cases()) EXPECT_EQ(cases::grade_cert(c), c.want) << c.label;
}

TEST(CertificateRules, EraCaps) {
    EXPECT_FALSE(lifetime_cap(at(2016, 5, 31, 86399)));
    EXPECT_EQ(lifetime_cap(at(2016, 6, 1)), seconds{days{1187}});
    EXPECT_EQ(lifetime_cap(at(2018, 1, 31)), seconds{days{1185}});
    EXPECT_EQ(lifetime_cap(at(2018, 2, 1)), seconds{days{825}});
    EXPECT_EQ(lifetime_cap(at(2020, 8, 31, 86399)), seconds{days{825}});
    EXPECT_EQ(lifetime_cap(at(2020, 9, 1)), seconds{days{398}});
    EXPECT_EQ(lifetime_cap(at(2030, 1, 1)), seconds{days{398}});
}

TEST(CertificateRules, LifetimeIsMonotone) {
    std::mt19937 rng(17);
    for (int i = 0; i < 3000; ++i) {
        CertificateRecord r;
        r.not_before = at(2014, 1, 1) + seconds{rng() % (86400u * 365 * 9)};
        r.not_after = r.not_before + seconds{rng() % (86400u * 2000)};
        const auto now = r.not_before;
        const bool before = checks_of(check_lifetime(r, now, "u")).contains(Check::over_long_lifetime);
        r.not_after += seconds{rng() % (86400u * 500)};
        const bool after = checks_of(check_lifetime(r, now, "u")).contains(Check::over_long_lifetime);
        ASSERT_TRUE(!before || after);
    }
}

TEST(CertificateRules, PassingCertHasNoFindings) {
    for (auto key : {KeyType::RSA, KeyType::ECDSA})
        for (auto hash : {SigHash::SHA256, SigHash::SHA384, SigHash::SHA512}) {
            CertificateRecord r;
            r.key_type = key;
            r.key_bits = key == KeyType::RSA ? 3072 : 384;
            r.sig_hash = hash;
            EXPECT_TRUE(check_primitives(r, "u").empty());
        }
}

TEST(CertificateRules, RealCertificateParses) {
    const auto key = PrivateKey::generate({KeyType::RSA, 1024});
    CertSpec spec;
    spec.common_name = "broker.example";
    spec.organization = "Example";
    spec.not_before = at(2021, 1, 1);
    spec.lifetime = days{365 * 5};
    spec.sig_hash = SigHash::SHA1;
    const auto cert = parse_certificate(issue_certificate(spec, key).der);
    EXPECT_EQ(cert.key_type, KeyType::RSA);
    EXPECT_EQ(cert.key_bits, 1024);
    EXPECT_EQ(cert.sig_hash, SigHash::SHA1);
    EXPECT_EQ(cert.common_name, "broker.example");
    EXPECT_EQ(cert.not_before, at(2021, 1, 1));
    EXPECT_TRUE(cert.self_issued());
    EXPECT_EQ(checks_of(check_lifetime(cert, at(2022, 1, 1), "u")), std::set{Check::over_long_lifetime});
    EXPECT_EQ(checks_of(check_primitives(cert, "u")), (std::set{Check::short_key, Check::weak_sig_hash}));
}

// ------------------------------------------------------------ trust anchors

TEST(TrustAnchor, ThreeClasses) {
    const auto now = time_point_cast<seconds>(system_clock::now());
    const auto root_key = PrivateKey::generate({KeyType::ECDSA, 256});
    CertSpec root_spec{"Test Public Root", "Test Trust", now - days{10}, days{3650}, SigHash::SHA256, true, 1};
    const auto root = issue_certificate(root_spec, root_key);
    const auto priv_key = PrivateKey::generate({KeyType::ECDSA, 256});
    CertSpec priv_spec{"Test Private CA", "Test", now - days{10}, days{3650}, SigHash::SHA256, true, 2};
    const auto priv = issue_certificate(priv_spec, priv_key);

    const auto leaf_key = PrivateKey::generate({KeyType::ECDSA, 256});
    CertSpec leaf{"leaf.example", "Test", now - days{1}, days{90}, SigHash::SHA256, false, 10};
    const auto pub_leaf = issue_certificate(leaf, leaf_key, &root, &root_key);
    const auto priv_leaf = issue_certificate(leaf, leaf_key, &priv, &priv_key);
    const auto self = issue_certificate(leaf, leaf_key);

    TrustStores stores;
    stores.add_der("lab", root.der);
    EXPECT_EQ(classify_trust_anchor({pub_leaf.der}, stores), TrustAnchor::public_ca);
    EXPECT_EQ(classify_trust_anchor({priv_leaf.der, priv.der}, stores), TrustAnchor::private_ca);
    EXPECT_EQ(classify_trust_anchor({self.der}, stores), TrustAnchor::self_signed);
    EXPECT_EQ(classify_trust_anchor({priv_leaf.der}, TrustStores{}), TrustAnchor::private_ca);
    EXPECT_THROW(classify_trust_anchor({}, stores), AuditError);

    // Expired leaves still count as publicly anchored; lifetime is graded apart.
    CertSpec old = leaf;
    old.not_before = now - days{800};
    old.lifetime = days{100};
    EXPECT_EQ(classify_trust_anchor({issue_certificate(old, leaf_key, &root, &root_key).der}, stores),
              TrustAnchor::public_ca);
}

// ------------------------------------------------------------ reuse

TEST(Reuse, ExhaustiveAgainstWrittenRule) {
    std::size_t cases = 0;
    for (std::size_t hosts = 1; hosts <= 4; ++hosts) {
        std::size_t combos = 1;
        for (std::size_t i = 0; i < hosts; ++i) combos *= 3;
        for (std::size_t c = 0; c < combos; ++c) {
            std::vector<Usage> usage;
            std::vector<std::pair<std::uint32_t, std::uint32_t>> raw;
            std::size_t k = c;
            for (std::size_t h = 0; h < hosts; ++h) {
                const auto asn = static_cast<std::uint32_t>(64500 + k % 3);
                k /= 3;
                usage.push_back({Ipv4(0x0A000001u + static_cast<std::uint32_t>(h)), asn});
                raw.emplace_back(0x0A000001u + static_cast<std::uint32_t>(h), asn);
            }
            // Repeated sightings of one usage do not change the class.
            for (int dup = 0; dup < 2; ++dup) {
                const auto want = oracle::reuse_rule(raw);
                const auto got = classify_reuse(usage);
                ASSERT_EQ(static_cast<int>(got), static_cast<int>(want)) << hosts << " hosts, combo " << c;
                usage.push_back(usage.front());
                raw.push_back(raw.front());
                ++cases;
            }
        }
    }
    EXPECT_EQ(cases, 2u * (3 + 9 + 27 + 81));
}

TEST(Reuse, Examples) {
    const Ipv4 a(1), b(2), c(3);
    EXPECT_EQ(classify_reuse({{a, 1}}), Reuse::not_reused);
    EXPECT_EQ(classify_reuse({{a, 1}, {b, 1}}), Reuse::not_reused);
    EXPECT_EQ(classify_reuse({{a, 1}, {b, 1}, {c, 1}}), Reuse::intra_as);
    EXPECT_EQ(classify_reuse({{a, 1}, {b, 2}, {c, 3}}), Reuse::inter_as);
    EXPECT_THROW(classify_reuse({}), AuditError);
}

TEST(Reuse, Allowlist) {
    CertificateRecord r;
    r.common_name = "lb.cloud.example";
    r.organization = "Cloud";
    EXPECT_TRUE(reuse_allowlisted(r, {{"*.cloud.example", "*"}}));
    EXPECT_FALSE(reuse_allowlisted(r, {{"*.cloud.example", "Other"}}));
    EXPECT_FALSE(reuse_allowlisted(r, {}));
}

// ------------------------------------------------------------ versions and ciphers

TEST(Versions, DeprecatedAndSentinel) {
    auto b = battery(code("ECDHE_RSA_WITH_AES_128_GCM_SHA256"), std::nullopt, code("ECDHE_RSA_WITH_AES_128_GCM_SHA256"),
                     std::nullopt);
    auto v = check_version(b, "u");
    EXPECT_EQ(v.max_version, tls::kTls12);
    EXPECT_FALSE(v.finding);
    EXPECT_FALSE(v.tls13_capable);

    b.results[0].server_random = tls::Random{};
    std::copy(tls::kDowngradeSentinelTls12.begin(), tls::kDowngradeSentinelTls12.end(), b.results[0].server_random->end() - 8);
    EXPECT_TRUE(check_version(b, "u").tls13_capable);

    const auto old = battery(std::nullopt, std::nullopt, code("RSA_WITH_AES_128_CBC_SHA"), std::nullopt, tls::kTls10);
    v = check_version(old, "u");
    ASSERT_TRUE(v.finding);
    EXPECT_EQ(v.finding->check, Check::deprecated_version);
    EXPECT_FALSE(check_version(battery(code("ECDHE_ECDSA_WITH_AES_128_CCM"), {}, {}, {}, tls::kDtls12), "u").finding);
    EXPECT_TRUE(check_version(battery(code("ECDHE_ECDSA_WITH_AES_128_CCM"), {}, {}, {}, tls::kDtls10), "u").finding);
    EXPECT_THROW(check_version(battery({}, {}, {}, {}), "u"), AuditError);
}

TEST(Ciphers, OutcomeClasses) {
    const auto gcm = code("ECDHE_RSA_WITH_AES_128_GCM_SHA256");
    // Most hosts: REC and COMP accepted with a strong suite, INS denied.
    auto b = battery(gcm, std::nullopt, gcm, std::nullopt);
    EXPECT_EQ(classify_battery(b), BatteryClass::secure);
    EXPECT_TRUE(check_ciphers(b, "u").empty());

    // RC4 from the compatibility set: weak cipher and weak MAC.
    b = battery(gcm, std::nullopt, code("RSA_WITH_RC4_128_SHA"), std::nullopt);
    EXPECT_EQ(classify_battery(b), BatteryClass::insecure_accepting);
    EXPECT_EQ(checks_of(check_ciphers(b, "u")), (std::set{Check::weak_cipher_accepted, Check::weak_mac_accepted}));

    // Only REC denied.
    b = battery(std::nullopt, code("ECDH_RSA_WITH_AES_128_GCM_SHA256"), std::nullopt, std::nullopt);
    EXPECT_EQ(classify_battery(b), BatteryClass::denies_harmless);
    EXPECT_EQ(checks_of(check_ciphers(b, "u")), std::set{Check::no_rec_suite});

    // INS accepted.
    b = battery(gcm, std::nullopt, gcm, code("RSA_WITH_NULL_SHA"));
    EXPECT_EQ(classify_battery(b), BatteryClass::insecure_accepting);
    EXPECT_EQ(checks_of(check_ciphers(b, "u")), std::set{Check::insecure_suite_accepted});

    // CBC-SHA1 from COMP is a weak MAC only.
    b = battery(gcm, std::nullopt, code("ECDHE_RSA_WITH_AES_128_CBC_SHA"), std::nullopt);
    EXPECT_EQ(checks_of(check_ciphers(b, "u")), std::set{Check::weak_mac_accepted});

    SuiteBattery partial;
    partial.results = {hs(SuiteSetName::REC, gcm)};
    EXPECT_THROW(classify_battery(partial), AuditError);
    EXPECT_THROW(check_ciphers(partial, "u"), AuditError);
}

TEST(ClientAuthClass, FromBattery) {
    auto b = battery(code("ECDHE_RSA_WITH_AES_128_GCM_SHA256"), {}, {}, {});
    EXPECT_EQ(classify_client_auth(b), ClientAuth::not_requested);
    b.results[0].client_cert_requested = true;
    EXPECT_EQ(classify_client_auth(b), ClientAuth::requested_and_accepted);
    b.results[0].rejected_after_client_cert = true;
    b.results[0].completed = false;
    EXPECT_EQ(classify_client_auth(b), ClientAuth::requested_and_rejected);
}

// ------------------------------------------------------------ Mann-Whitney

TEST(MannWhitney, ExactEnumerationUpToSix) {
    std::mt19937 rng(23);
    for (std::size_t n = 1; n <= 6; ++n)
        for (std::size_t m = 1; m <= 6; ++m)
            for (int trial = 0; trial < 12; ++trial) {
                std::vector<double> a(n), b(m);
                // Small value range forces ties in most fixtures.
                const unsigned range = trial % 3 == 0 ? 1000 : 5;
                for (auto& x : a) x = rng() % range;
                for (auto& x : b) x = rng() % range;
                const auto r = mann_whitney_u(a, b);
                ASSERT_TRUE(r.exact);
                ASSERT_NEAR(r.u, oracle::u_by_pairs(a, b), 1e-9) << n << "x" << m;
                ASSERT_NEAR(r.p, oracle::exact_p(a, b), 1e-12) << n << "x" << m;
            }
}

TEST(MannWhitney, UaPlusUbIsNm) {
    std::mt19937 rng(29);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a(1 + rng() % 40), b(1 + rng() % 40);
        const unsigned range = i % 2 ? 10 : 1'000'000;
        for (auto& x : a) x = rng() % range;
        for (auto& x : b) x = rng() % range;
        const double ua = mann_whitney_u(a, b).u, ub = mann_whitney_u(b, a).u;
        ASSERT_NEAR(ua + ub, static_cast<double>(a.size() * b.size()), 1e-9);
        const auto p = mann_whitney_u(a, b).p;
        ASSERT_GE(p, 0.0);
        ASSERT_LE(p, 1.0);
    }
}

TEST(MannWhitney, KnownValues) {
    // Complete separation of 3 vs 3: U = 0, two-sided p = 2/20.
    const auto r = mann_whitney_u({1, 2, 3}, {4, 5, 6});
    EXPECT_EQ(r.u, 0.0);
    EXPECT_NEAR(r.p, 0.1, 1e-12);
    EXPECT_THROW(mann_whitney_u({}, {1}), AuditError);
    // Large samples fall back to the normal approximation.
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) a[i] = i, b[i] = i + 100;
    const auto big = mann_whitney_u(a, b);
    EXPECT_FALSE(big.exact);
    EXPECT_LT(big.p, 1e-9);
}

TEST(Findings, SeverityAndNames) {
    for (auto c : kAllChecks) EXPECT_EQ(parse_check(to_string(c)), c);
    EXPECT_EQ(make_finding("d", Check::default_credentials, "").severity, Severity::critical);
}

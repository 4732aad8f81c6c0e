#include "iiot/lab.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/rand.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "ssl_session.hpp"

namespace iiot::lab {

using namespace std::chrono_literals;

namespace {

std::string_view as_text(ByteView b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& all, const char* what) {
    for (auto e : all)
        if (to_string(e) == s) return e;
    throw AuditError(std::string("invalid ") + what + ": " + std::string(s));
}

constexpr std::array kSuitePolicies = {SuitePolicy::rec_only, SuitePolicy::broad, SuitePolicy::ins_accepting,
                                       SuitePolicy::no_rec_stub, SuitePolicy::rc4_stub};
constexpr std::array kIssuerModes = {IssuerMode::self_signed, IssuerMode::private_ca, IssuerMode::public_ca};
constexpr std::array kClientAuthModes = {ClientAuthMode::off, ClientAuthMode::request_accept_any,
                                         ClientAuthMode::require_known_ca};
constexpr std::array kAppBehaviors = {AppBehavior::compliant, AppBehavior::silent, AppBehavior::malformed_length,
                                      AppBehavior::error_response};
constexpr std::array kAccessModes = {AccessMode::open, AccessMode::credentials, AccessMode::default_credentials};
constexpr std::array kListeners = {Listener::normal, Listener::close_on_accept, Listener::banner};
constexpr std::array kKeyTypes = {KeyType::RSA, KeyType::ECDSA};
constexpr std::array kSigHashes = {SigHash::MD5, SigHash::SHA1, SigHash::SHA256, SigHash::SHA384, SigHash::SHA512};
constexpr std::array kBatteryClasses = {BatteryClass::secure, BatteryClass::denies_harmless,
                                        BatteryClass::insecure_accepting};
constexpr std::array kClientAuths = {ClientAuth::not_requested, ClientAuth::requested_and_accepted,
                                     ClientAuth::requested_and_rejected};
constexpr std::array kAdoptions = {Adoption::plaintext_only, Adoption::tls_only, Adoption::optional_tls};

template <typename T, typename F>
nlohmann::json opt_json(const std::optional<T>& v, F f) {
    return v ? nlohmann::json(f(*v)) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view to_string(SuitePolicy p) {
    switch (p) {
        case SuitePolicy::rec_only: return "rec_only";
        case SuitePolicy::broad: return "broad";
        case SuitePolicy::ins_accepting: return "ins_accepting";
        case SuitePolicy::no_rec_stub: return "no_rec_stub";
        case SuitePolicy::rc4_stub: return "rc4_stub";
    }
    return "broad";
}

std::string_view to_string(IssuerMode m) {
    switch (m) {
        case IssuerMode::self_signed: return "self_signed";
        case IssuerMode::private_ca: return "private_ca";
        case IssuerMode::public_ca: return "public_ca";
    }
    return "private_ca";
}

std::string_view to_string(ClientAuthMode m) {
    switch (m) {
        case ClientAuthMode::off: return "off";
        case ClientAuthMode::request_accept_any: return "request_accept_any";
        case ClientAuthMode::require_known_ca: return "require_known_ca";
    }
    return "off";
}

std::string_view to_string(AppBehavior b) {
    switch (b) {
        case AppBehavior::compliant: return "compliant";
        case AppBehavior::silent: return "silent";
        case AppBehavior::malformed_length: return "malformed_length";
        case AppBehavior::error_response: return "error_response";
    }
    return "compliant";
}

std::string_view to_string(AccessMode m) {
    switch (m) {
        case AccessMode::open: return "open";
        case AccessMode::credentials: return "credentials";
        case AccessMode::default_credentials: return "default_credentials";
    }
    return "credentials";
}

std::string_view to_string(Listener l) {
    switch (l) {
        case Listener::normal: return "normal";
        case Listener::close_on_accept: return "close_on_accept";
        case Listener::banner: return "banner";
    }
    return "normal";
}

Ipv4 Scenario::address() const {
    if (host < 1 || host > 254) throw AuditError("scenario host octet out of range: " + std::to_string(host));
    return Ipv4((127u << 24) | ((blocklisted ? 2u : 1u) << 8) | static_cast<std::uint32_t>(host));
}

// ---------------------------------------------------------------- JSON

nlohmann::json to_json(const Scenario& s) {
    nlohmann::json findings = nlohmann::json::array();
    for (auto c : s.expect.findings) findings.push_back(to_string(c));
    auto name = [](auto v) { return std::string(to_string(v)); };
    return {
        {"name", s.name},
        {"protocol", to_string(s.protocol)},
        {"variant", to_string(s.variant)},
        {"host", s.host},
        {"tls_ceiling", tls::version_name(s.tls_ceiling)},
        {"suites", to_string(s.suites)},
        {"cert",
         {{"key_type", to_string(s.cert.key.type)},
          {"key_bits", s.cert.key.bits},
          {"sig_hash", to_string(s.cert.sig_hash)},
          {"not_before_offset_s", s.cert.not_before_offset.count()},
          {"lifetime_s", s.cert.lifetime.count()},
          {"issuer", to_string(s.cert.issuer)},
          {"common_name", s.cert.common_name},
          {"organization", s.cert.organization},
          {"shared_group", s.cert.shared_group}}},
        {"client_auth", to_string(s.client_auth)},
        {"app", to_string(s.app)},
        {"access", to_string(s.access)},
        {"listener", to_string(s.listener)},
        {"plaintext", s.plaintext},
        {"blocklisted", s.blocklisted},
        {"asn", s.asn},
        {"publish_flood", s.publish_flood},
        {"expect",
         {{"stage", opt_json(s.expect.stage, name)},
          {"findings", findings},
          {"battery_class", opt_json(s.expect.battery_class, name)},
          {"client_auth", opt_json(s.expect.client_auth, name)},
          {"adoption", opt_json(s.expect.adoption, name)},
          {"access", opt_json(s.expect.access, name)},
          {"tls13_capable", opt_json(s.expect.tls13_capable, [](bool b) { return b; })}}},
    };
}

Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.protocol = parse_protocol(j.at("protocol").get<std::string>());
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.host = j.at("host").get<int>();
    auto ceiling = tls::parse_version_name(j.at("tls_ceiling").get<std::string>());
    if (!ceiling) throw AuditError("invalid tls_ceiling");
    s.tls_ceiling = *ceiling;
    s.suites = parse_enum(j.at("suites").get<std::string>(), kSuitePolicies, "suite policy");
    const auto& c = j.at("cert");
    s.cert.key.type = parse_enum(c.at("key_type").get<std::string>(), kKeyTypes, "key type");
    s.cert.key.bits = c.at("key_bits").get<int>();
    s.cert.sig_hash = parse_enum(c.at("sig_hash").get<std::string>(), kSigHashes, "signature hash");
    s.cert.not_before_offset = std::chrono::seconds{c.at("not_before_offset_s").get<std::int64_t>()};
    s.cert.lifetime = std::chrono::seconds{c.at("lifetime_s").get<std::int64_t>()};
    s.cert.issuer = parse_enum(c.at("issuer").get<std::string>(), kIssuerModes, "issuer mode");
    s.cert.common_name = c.value("common_name", "");
    s.cert.organization = c.value("organization", "");
    s.cert.shared_group = c.value("shared_group", "");
    s.client_auth = parse_enum(j.at("client_auth").get<std::string>(), kClientAuthModes, "client auth mode");
    s.app = parse_enum(j.at("app").get<std::string>(), kAppBehaviors, "app behavior");
    s.access = parse_enum(j.at("access").get<std::string>(), kAccessModes, "access mode");
    s.listener = parse_enum(j.at("listener").get<std::string>(), kListeners, "listener");
    s.plaintext = j.at("plaintext").get<bool>();
    s.blocklisted = j.at("blocklisted").get<bool>();
    s.asn = j.at("asn").get<std::uint32_t>();
    s.publish_flood = j.at("publish_flood").get<std::size_t>();
    const auto& e = j.at("expect");
    if (!e.at("stage").is_null()) s.expect.stage = parse_stage(e.at("stage").get<std::string>());
    for (const auto& f : e.at("findings")) s.expect.findings.insert(parse_check(f.get<std::string>()));
    if (!e.at("battery_class").is_null())
        s.expect.battery_class = parse_enum(e.at("battery_class").get<std::string>(), kBatteryClasses, "battery class");
    if (!e.at("client_auth").is_null())
        s.expect.client_auth = parse_enum(e.at("client_auth").get<std::string>(), kClientAuths, "client auth");
    if (!e.at("adoption").is_null())
        s.expect.adoption = parse_enum(e.at("adoption").get<std::string>(), kAdoptions, "adoption");
    if (!e.at("access").is_null()) s.expect.access = parse_access_status(e.at("access").get<std::string>());
    if (!e.at("tls13_capable").is_null()) s.expect.tls13_capable = e.at("tls13_capable").get<bool>();
    return s;
}

// ---------------------------------------------------------------- matrix

std::vector<Scenario> canonical_suite() {
    std::vector<Scenario> out;
    int next_host = 1;
    auto add = [&](std::string name, Protocol p, auto&& configure) -> Scenario& {
        Scenario s;
        s.name = std::move(name);
        s.protocol = p;
        s.host = next_host++;
        s.asn = 64500;
        configure(s);
        out.push_back(std::move(s));
        return out.back();
    };
    using C = Check;

    add("mqtt_public_open", Protocol::MQTT, [](Scenario& s) {
        s.access = AccessMode::open;
        s.cert.issuer = IssuerMode::public_ca;
        s.expect = {Stage::valid, {C::no_access_control}, BatteryClass::secure, ClientAuth::not_requested,
                    Adoption::optional_tls, AccessStatus::open, false};
    });
    const int shared_host = out.back().host;
    add("mqtt_plain_optional", Protocol::MQTT, [&](Scenario& s) {
        s.host = shared_host;
        s.variant = Variant::standard;
        s.plaintext = true;
        s.access = AccessMode::open;
        s.expect = {Stage::valid, {C::no_access_control}, std::nullopt, std::nullopt, Adoption::optional_tls,
                    AccessStatus::open, std::nullopt};
    });
    --next_host;
    add("mqtt_private_auth", Protocol::MQTT, [](Scenario& s) {
        s.suites = SuitePolicy::rec_only;
        s.cert.key = {KeyType::ECDSA, 256};
        s.client_auth = ClientAuthMode::request_accept_any;
        s.expect = {Stage::valid, {}, BatteryClass::secure, ClientAuth::requested_and_accepted, Adoption::tls_only,
                    AccessStatus::protected_, false};
    });
    add("amqp_default_creds", Protocol::AMQP, [](Scenario& s) {
        s.access = AccessMode::default_credentials;
        s.cert.issuer = IssuerMode::self_signed;
        s.expect = {Stage::valid, {C::default_credentials}, BatteryClass::secure, ClientAuth::not_requested,
                    Adoption::tls_only, AccessStatus::default_credentials, false};
    });
    add("amqp_legacy_tls10", Protocol::AMQP, [](Scenario& s) {
        s.tls_ceiling = tls::kTls10;
        s.cert.key = {KeyType::RSA, 1024};
        s.cert.sig_hash = SigHash::MD5;
        s.expect = {Stage::valid,
                    {C::deprecated_version, C::no_rec_suite, C::weak_mac_accepted, C::short_key, C::weak_sig_hash},
                    BatteryClass::insecure_accepting,
                    ClientAuth::not_requested,
                    Adoption::tls_only,
                    AccessStatus::protected_,
                    false};
    });
    add("modbus_ins_expired", Protocol::Modbus, [](Scenario& s) {
        s.suites = SuitePolicy::ins_accepting;
        s.cert.not_before_offset = -std::chrono::days{400};
        s.expect = {Stage::valid, {C::insecure_suite_accepted, C::expired_cert}, BatteryClass::insecure_accepting,
                    ClientAuth::not_requested, Adoption::tls_only, std::nullopt, false};
    });
    add("dnp3_rc4_stub", Protocol::DNP3, [](Scenario& s) {
        s.suites = SuitePolicy::rc4_stub;
        s.expect = {Stage::auth_ok,
                    {C::no_rec_suite, C::weak_cipher_accepted, C::weak_mac_accepted, C::insecure_suite_accepted},
                    BatteryClass::insecure_accepting,
                    ClientAuth::not_requested,
                    std::nullopt,
                    std::nullopt,
                    false};
    });
    add("iec104_no_rec_stub", Protocol::IEC104, [](Scenario& s) {
        s.suites = SuitePolicy::no_rec_stub;
        s.expect = {Stage::auth_ok, {C::no_rec_suite}, BatteryClass::denies_harmless, ClientAuth::not_requested,
                    std::nullopt, std::nullopt, false};
    });
    add("opcua_require_ca", Protocol::OPCUA, [](Scenario& s) {
        s.client_auth = ClientAuthMode::require_known_ca;
        s.expect = {Stage::tls_valid, {}, BatteryClass::secure, ClientAuth::requested_and_rejected, std::nullopt,
                    std::nullopt, false};
    });
    add("s7_malformed", Protocol::S7, [](Scenario& s) {
        s.app = AppBehavior::malformed_length;
        s.expect = {Stage::tls_success, {}, BatteryClass::secure, ClientAuth::not_requested, std::nullopt,
                    std::nullopt, false};
    });
    add("enip_ecdsa_sha512", Protocol::EtherNetIP, [](Scenario& s) {
        s.suites = SuitePolicy::rec_only;
        s.cert.key = {KeyType::ECDSA, 384};
        s.cert.sig_hash = SigHash::SHA512;
        s.cert.issuer = IssuerMode::public_ca;
        s.expect = {Stage::valid, {}, BatteryClass::secure, ClientAuth::not_requested, Adoption::tls_only,
                    std::nullopt, false};
    });
    add("fox_overlong", Protocol::TridiumFox, [](Scenario& s) {
        s.cert.not_before_offset = -std::chrono::days{60};
        s.cert.lifetime = std::chrono::days{5 * 365};
        s.cert.issuer = IssuerMode::self_signed;
        s.expect = {Stage::valid, {C::over_long_lifetime}, BatteryClass::secure, ClientAuth::not_requested,
                    Adoption::tls_only, std::nullopt, false};
    });
    add("foxplatform_open", Protocol::FoxPlatform, [](Scenario& s) {
        s.access = AccessMode::open;
        s.expect = {Stage::valid, {C::no_access_control}, BatteryClass::secure, ClientAuth::not_requested,
                    Adoption::tls_only, AccessStatus::open, false};
    });
    add("foxplatform_login", Protocol::FoxPlatform, [](Scenario& s) {
        s.expect = {Stage::valid, {}, BatteryClass::secure, ClientAuth::not_requested, Adoption::tls_only,
                    AccessStatus::protected_, false};
    });
    add("coap_dtls", Protocol::CoAP, [](Scenario& s) {
        s.expect = {Stage::valid, {}, BatteryClass::secure, ClientAuth::not_requested, Adoption::tls_only,
                    std::nullopt, std::nullopt};
    });
    add("mqtt_silent", Protocol::MQTT, [](Scenario& s) {
        s.app = AppBehavior::silent;
        s.expect = {Stage::tls_success, {}, BatteryClass::secure, ClientAuth::not_requested, std::nullopt,
                    std::nullopt, false};
    });
    add("amqp_error_response", Protocol::AMQP, [](Scenario& s) {
        s.app = AppBehavior::error_response;
        s.expect = {Stage::tls_success, {}, BatteryClass::secure, ClientAuth::not_requested, std::nullopt,
                    std::nullopt, false};
    });
    add("reset_on_accept", Protocol::MQTT, [](Scenario& s) {
        s.listener = Listener::close_on_accept;
        s.expect.stage = Stage::none;
    });
    add("tls_garbage", Protocol::OPCUA, [](Scenario& s) {
        s.listener = Listener::banner;
        s.expect.stage = Stage::transport;
    });
    add("tls_silent", Protocol::Modbus, [](Scenario& s) {
        s.plaintext = true;
        s.app = AppBehavior::silent;
        s.expect.stage = Stage::transport;
    });
    add("tls13_capable", Protocol::MQTT, [](Scenario& s) {
        s.tls_ceiling = tls::kTls13;
        s.expect = {Stage::valid, {}, BatteryClass::secure, ClientAuth::not_requested, Adoption::tls_only,
                    AccessStatus::protected_, true};
    });
    add("modbus_plain", Protocol::Modbus, [](Scenario& s) {
        s.variant = Variant::standard;
        s.plaintext = true;
        s.expect = {Stage::valid, {}, std::nullopt, std::nullopt, Adoption::plaintext_only, std::nullopt,
                    std::nullopt};
    });
    add("mqtt_flood", Protocol::MQTT, [](Scenario& s) {
        s.access = AccessMode::open;
        s.publish_flood = 12'000'000;
        s.expect = {Stage::valid, {C::no_access_control}, BatteryClass::secure, ClientAuth::not_requested,
                    Adoption::tls_only, AccessStatus::open, false};
    });
    for (int i = 0; i < 3; ++i) {
        add("reuse_inter_as_" + std::to_string(i + 1), Protocol::MQTT, [&](Scenario& s) {
            s.cert.shared_group = "fleet-inter";
            s.asn = 64501 + static_cast<std::uint32_t>(i);
            s.expect = {Stage::valid, {C::cert_reuse_inter_as}, BatteryClass::secure, ClientAuth::not_requested,
                        Adoption::tls_only, AccessStatus::protected_, false};
        });
    }
    for (int i = 0; i < 3; ++i) {
        add("reuse_intra_as_" + std::to_string(i + 1), Protocol::AMQP, [&](Scenario& s) {
            s.cert.shared_group = "fleet-intra";
            s.asn = 64510;
            s.expect = {Stage::valid, {C::cert_reuse_intra_as}, BatteryClass::secure, ClientAuth::not_requested,
                        Adoption::tls_only, AccessStatus::protected_, false};
        });
    }
    add("blocklisted_broker", Protocol::MQTT, [](Scenario& s) {
        s.blocklisted = true;
        s.access = AccessMode::open;
    });
    return out;
}

// ---------------------------------------------------------------- PKI

Pki Pki::create(TimePoint now) {
    Pki p;
    p.epoch = now;
    const auto start = now - std::chrono::days{365};
    p.public_key = PrivateKey::generate({KeyType::RSA, 2048});
    p.public_root = issue_certificate({"IIoT Lab Public Root", "IIoT Lab Trust Services", start,
                                       std::chrono::days{3650}, SigHash::SHA256, true, 1},
                                      p.public_key);
    p.private_key = PrivateKey::generate({KeyType::RSA, 2048});
    p.private_root = issue_certificate({"IIoT Lab Private CA", "IIoT Lab", start, std::chrono::days{3650},
                                        SigHash::SHA256, true, 2},
                                       p.private_key);
    return p;
}

void Pki::install_trust(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "lab.pem");
    out << public_root.pem();
    if (!out) throw AuditError("cannot write " + (dir / "lab.pem").string());
}

const CertBank::Material& CertBank::get(const Scenario& s) {
    std::lock_guard lock(mu_);
    const auto key = s.cert.shared_group.empty() ? "scenario:" + s.name : "group:" + s.cert.shared_group;
    if (auto it = cache_.find(key); it != cache_.end()) return *it->second;

    auto m = std::make_unique<Material>();
    auto k = PrivateKey::generate(s.cert.key);
    CertSpec spec;
    spec.common_name = !s.cert.common_name.empty()    ? s.cert.common_name
                       : !s.cert.shared_group.empty() ? s.cert.shared_group + ".lab.example"
                                                      : s.name + ".lab.example";
    spec.organization = s.cert.organization;
    spec.not_before = pki_.epoch + s.cert.not_before_offset;
    spec.lifetime = s.cert.lifetime;
    spec.sig_hash = s.cert.sig_hash;
    spec.serial = ++serial_;
    switch (s.cert.issuer) {
        case IssuerMode::self_signed: m->cert = issue_certificate(spec, k); break;
        case IssuerMode::private_ca:
            m->cert = issue_certificate(spec, k, &pki_.private_root, &pki_.private_key);
            m->chain_extra.push_back(pki_.private_root);
            break;
        case IssuerMode::public_ca:
            m->cert = issue_certificate(spec, k, &pki_.public_root, &pki_.public_key);
            m->chain_extra.push_back(pki_.public_root);
            break;
    }
    m->key_pem = k.to_pem();
    return *cache_.emplace(key, std::move(m)).first->second;
}

std::string rec_cipher_string(bool dtls) {
    std::string out;
    for (auto code : suite_set(SuiteSetName::REC).codes()) {
        if (!suite_available_locally(code, dtls)) continue;
        auto name = openssl_suite_name(code);
        if (!name) continue;
        if (!out.empty()) out += ':';
        out += *name;
    }
    return out + ":@SECLEVEL=0";
}

// ---------------------------------------------------------------- requests

std::size_t request_frame_size(Protocol p, ByteView b) {
    auto need = [&](std::size_t n) { return b.size() >= n ? n : std::size_t{0}; };
    auto text_end = [&](std::string_view terminator) -> std::size_t {
        const auto t = as_text(b);
        const auto pos = t.find(terminator);
        if (pos == std::string_view::npos) {
            if (b.size() > 16384) throw AuditError("request header too long");
            return 0;
        }
        return pos + terminator.size();
    };
    switch (p) {
        case Protocol::MQTT: {
            auto pkt = mqtt::next_packet(b);
            return pkt ? pkt->wire_size : 0;
        }
        case Protocol::AMQP: {
            if (b.size() < 4) return 0;
            if (b[0] == 'A') return need(8);
            if (b.size() < 7) return 0;
            const std::size_t size = static_cast<std::size_t>(b[3]) << 24 | b[4] << 16 | b[5] << 8 | b[6];
            if (size > (1u << 20)) throw AuditError("AMQP frame too large");
            return need(8 + size);
        }
        case Protocol::CoAP: return b.size();
        case Protocol::OPCUA: {
            if (b.size() < 8) return 0;
            const std::size_t size = b[4] | b[5] << 8 | b[6] << 16 | static_cast<std::size_t>(b[7]) << 24;
            if (size < 8 || size > (1u << 20)) throw AuditError("OPC UA message size implausible");
            return need(size);
        }
        case Protocol::IEC104:
            if (b[0] != 0x68) throw AuditError("IEC 104 start byte missing");
            return b.size() < 2 ? 0 : need(2 + std::size_t{b[1]});
        case Protocol::Modbus: return b.size() < 6 ? 0 : need(6 + static_cast<std::size_t>(b[4] << 8 | b[5]));
        case Protocol::EtherNetIP: return b.size() < 4 ? 0 : need(24 + static_cast<std::size_t>(b[2] | b[3] << 8));
        case Protocol::DNP3: {
            if (b.size() < 3) return 0;
            if (b[2] < 5) throw AuditError("DNP3 length below 5");
            const std::size_t user = b[2] - 5u;
            return need(10 + user + 2 * ((user + 15) / 16));
        }
        case Protocol::S7: return b.size() < 4 ? 0 : need(static_cast<std::size_t>(b[2] << 8 | b[3]));
        case Protocol::TridiumFox: return text_end(";;\n");
        case Protocol::FoxPlatform: return text_end("\r\n\r\n");
    }
    return 0;
}

namespace {

constexpr std::string_view kLoginPage =
    "<html><body><form method=\"post\" action=\"/login\">"
    "<input type=\"text\" name=\"user\"><input type=\"password\" name=\"pass\">"
    "</form></body></html>";

Bytes malformed(Protocol p, Bytes frame) {
    if (p == Protocol::CoAP && !frame.empty()) {
        frame[0] = static_cast<std::uint8_t>((frame[0] & 0xF0) | 0x08);  // token length beyond the datagram
        frame.resize(4);
        return frame;
    }
    frame.push_back(0x00);  // one byte past the declared length
    return frame;
}

Bytes error_reply(Protocol p, ByteView request) {
    switch (p) {
        case Protocol::MQTT: return mqtt::encode_suback(1, 0x80);
        case Protocol::AMQP: return amqp::connection_tune();  // Tune before Start-Ok
        case Protocol::CoAP: {
            const std::uint16_t mid = request.size() >= 4 ? static_cast<std::uint16_t>(request[2] << 8 | request[3]) : 1;
            return {0x40, 0x01, static_cast<std::uint8_t>(mid >> 8), static_cast<std::uint8_t>(mid)};
        }
        case Protocol::OPCUA: {
            ByteWriter w;
            w.str("MSGF").u32le(8);
            return std::move(w).take();
        }
        case Protocol::IEC104: return {0x68, 0x04, 0x00, 0x00, 0x00, 0x00};
        case Protocol::Modbus: return {0x00, 0x01, 0x00, 0x00, 0x00, 0x05, 0x00, 0x03, 0x02, 0x00, 0x00};
        case Protocol::EtherNetIP: {
            ByteWriter w;
            w.u16le(0x0004).u16le(0).u32le(0).u32le(0);
            for (int i = 0; i < 12; ++i) w.u8(0);
            return std::move(w).take();
        }
        case Protocol::DNP3: {
            ByteWriter w;
            w.u8(0x05).u8(0x64).u8(5).u8(0x44).u16le(0).u16le(1);
            w.u16le(dnp3::crc(w.data()));
            return std::move(w).take();
        }
        case Protocol::S7: return {0x03, 0x00, 0x00, 0x07, 0x02, 0xF0, 0x80};
        case Protocol::TridiumFox: {
            constexpr std::string_view bye = "fox a 0 -1 fox bye\n{\n};;\n";
            return Bytes(bye.begin(), bye.end());
        }
        case Protocol::FoxPlatform: {
            auto r = http::response(200, "OK", "<?xml version=\"1.0\"?><error/>", "text/xml");
            r.replace(0, 12, "HTTP/1.1 999");
            return Bytes(r.begin(), r.end());
        }
    }
    return {};
}

// Splits a PLAIN SASL response "\0user\0pass" out of Connection.Start-Ok.
std::optional<std::pair<std::string, std::string>> plain_credentials(const Bytes& args) {
    try {
        ByteReader r(args);
        r.skip(r.u32());        // client-properties
        r.skip(r.u8());         // mechanism
        auto resp = r.take(r.u32());
        const std::string s(resp.begin(), resp.end());
        const auto a = s.find('\0');
        const auto b = s.find('\0', a + 1);
        if (a == std::string::npos || b == std::string::npos) return std::nullopt;
        return std::pair{s.substr(a + 1, b - a - 1), s.substr(b + 1)};
    } catch (const TruncatedInput&) {
        return std::nullopt;
    }
}

}  // namespace

Responder::Reply Responder::handle(ByteView request) {
    Reply out;
    if (s_.app == AppBehavior::silent) return out;
    const Protocol p = s_.protocol;

    auto compliant = [&]() -> Reply {
        Reply r;
        switch (p) {
            case Protocol::MQTT: {
                auto pkt = mqtt::next_packet(request);
                if (!pkt) return {{}, true, 0};
                switch (pkt->type) {
                    case mqtt::kConnect: {
                        const bool has_user = pkt->body.size() > 7 && (pkt->body[7] & 0x80);
                        const bool refuse = s_.access == AccessMode::credentials && !has_user;
                        r.frames.push_back(mqtt::encode_connack(refuse ? 5 : 0));
                        r.close = refuse;
                        break;
                    }
                    case mqtt::kSubscribe: {
                        const std::uint16_t id =
                            pkt->body.size() >= 2 ? static_cast<std::uint16_t>(pkt->body[0] << 8 | pkt->body[1]) : 1;
                        r.frames.push_back(mqtt::encode_suback(id, 0));
                        r.flood = s_.publish_flood;
                        break;
                    }
                    case mqtt::kPingreq: r.frames.push_back({mqtt::kPingresp << 4, 0}); break;
                    default: r.close = true; break;
                }
                return r;
            }
            case Protocol::AMQP: {
                if (request.size() == 8 && request[0] == 'A') {
                    r.frames.push_back(amqp::connection_start());
                    if (as_text(request) != amqp::kHeader091) {
                        // Version negotiation: answer with the supported header.
                        r.frames = {Bytes(amqp::kHeader091.begin(), amqp::kHeader091.end())};
                        r.close = true;
                    }
                    return r;
                }
                auto m = amqp::next_method(request);
                if (!m) return {{}, true, 0};
                const auto& method = m->first;
                if (method.class_id != 10) return {{amqp::connection_close(503, "COMMAND_INVALID")}, true, 0};
                switch (method.method_id) {
                    case 11: {
                        const auto creds = plain_credentials(method.args);
                        const bool guest = creds && creds->first == "guest" && creds->second == "guest";
                        const bool allow = s_.access == AccessMode::open ||
                                           (s_.access == AccessMode::default_credentials && guest);
                        r.frames.push_back(allow ? amqp::connection_tune()
                                                 : amqp::connection_close(403, "ACCESS_REFUSED"));
                        break;
                    }
                    case 50:
                        r.frames.push_back(amqp::connection_close_ok());
                        r.close = true;
                        break;
                    case 51: r.close = true; break;
                    default: break;
                }
                return r;
            }
            case Protocol::FoxPlatform: {
                const bool login = s_.access != AccessMode::open;
                auto resp = login ? http::response(200, "OK", kLoginPage)
                                  : http::response(200, "OK", "<html><body><h1>Station dashboard</h1></body></html>");
                r.frames.push_back(Bytes(resp.begin(), resp.end()));
                r.close = true;
                return r;
            }
            default: r.frames.push_back(compliant_response(p, request)); return r;
        }
    };

    try {
        out = compliant();
    } catch (const AuditError&) {
        return {{}, true, 0};
    }
    if (out.frames.empty()) return out;
    if (s_.app == AppBehavior::malformed_length) out.frames.front() = malformed(p, std::move(out.frames.front()));
    if (s_.app == AppBehavior::error_response) {
        out.frames = {error_reply(p, request)};
        out.flood = 0;
    }
    return out;
}

// ---------------------------------------------------------------- servers

namespace {

constexpr auto kIdle = 20s;
constexpr std::string_view kBanner = "SSH-2.0-OpenSSH_8.9p1 lab\r\n";

const std::vector<std::uint16_t>& stub_suites(SuitePolicy p) {
    static const std::vector<std::uint16_t> rc4 = {*suite_code("ECDHE_RSA_WITH_RC4_128_SHA"),
                                                   *suite_code("RSA_WITH_RC4_128_SHA")};
    static const std::vector<std::uint16_t> no_rec = {*suite_code("ECDH_RSA_WITH_AES_128_GCM_SHA256")};
    return p == SuitePolicy::rc4_stub ? rc4 : no_rec;
}

bool is_stub(SuitePolicy p) { return p == SuitePolicy::rc4_stub || p == SuitePolicy::no_rec_stub; }

int bind_socket(Ipv4 addr, int type) {
    Socket s(::socket(AF_INET, type | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw AuditError(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(addr.value());
    sa.sin_port = 0;
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
        throw AuditError("cannot bind " + addr.to_string() + ": " + std::strerror(errno));
    if (type == SOCK_STREAM && ::listen(s.fd(), 64) != 0) throw AuditError(std::string("listen: ") + std::strerror(errno));
    return s.release();
}

std::uint16_t local_port(int fd) {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
    return ntohs(sa.sin_port);
}

Bytes flood_message(std::size_t index, std::size_t size) {
    std::string payload;
    if (index == 0) payload = "{\"site\":\"lab\",\"maintainer\":\"ops@lab.example\",\"backup\":\"noc@nomx.example\"}";
    payload.resize(size, 'x');
    return mqtt::encode_publish("lab/telemetry/" + std::to_string(index % 16), as_bytes(payload));
}

int verify_accept_any(int, X509_STORE_CTX*) { return 1; }

int cookie_generate(SSL*, unsigned char* cookie, unsigned int* len) {
    static constexpr unsigned char kCookie[16] = {'i', 'i', 'o', 't', '-', 'l', 'a', 'b',
                                                  'c', 'o', 'o', 'k', 'i', 'e', '0', '1'};
    std::memcpy(cookie, kCookie, sizeof kCookie);
    *len = sizeof kCookie;
    return 1;
}

int cookie_verify(SSL* ssl, const unsigned char* cookie, unsigned int len) {
    unsigned char expected[DTLS1_COOKIE_LENGTH];
    unsigned int n = 0;
    cookie_generate(ssl, expected, &n);
    return len == n && std::memcmp(cookie, expected, n) == 0;
}

ossl::SslCtxPtr server_ctx(const Scenario& s, const CertBank::Material& m, const Pki& pki, bool dtls) {
    ossl::SslCtxPtr ctx(SSL_CTX_new(dtls ? DTLS_server_method() : TLS_server_method()));
    if (!ctx) ossl::fail("SSL_CTX_new");
    SSL_CTX_set_security_level(ctx.get(), 0);
    if (dtls) {
        SSL_CTX_set_min_proto_version(ctx.get(), DTLS1_VERSION);
        SSL_CTX_set_max_proto_version(ctx.get(), DTLS1_2_VERSION);
        SSL_CTX_set_options(ctx.get(), SSL_OP_COOKIE_EXCHANGE | SSL_OP_NO_QUERY_MTU);
        SSL_CTX_set_cookie_generate_cb(ctx.get(), cookie_generate);
        SSL_CTX_set_cookie_verify_cb(ctx.get(), cookie_verify);
    } else {
        SSL_CTX_set_min_proto_version(ctx.get(), TLS1_VERSION);
        SSL_CTX_set_max_proto_version(ctx.get(), s.tls_ceiling);
    }
    SSL_CTX_set_options(ctx.get(), SSL_OP_NO_TICKET);
    const std::string ciphers = s.suites == SuitePolicy::rec_only     ? rec_cipher_string(dtls)
                                : s.suites == SuitePolicy::broad      ? "DEFAULT:@SECLEVEL=0"
                                                                      : "ALL:COMPLEMENTOFALL:@SECLEVEL=0";
    if (SSL_CTX_set_cipher_list(ctx.get(), ciphers.c_str()) != 1) ossl::fail("cipher list for " + s.name);
    SSL_CTX_set_dh_auto(ctx.get(), 1);

    auto cert = ossl::x509_from_der(m.cert.der);
    auto key = PrivateKey::from_pem(m.key_pem);
    if (!cert || SSL_CTX_use_certificate(ctx.get(), cert.get()) != 1 ||
        SSL_CTX_use_PrivateKey(ctx.get(), static_cast<EVP_PKEY*>(key.native())) != 1)
        ossl::fail("server certificate for " + s.name);
    for (const auto& extra : m.chain_extra) {
        auto x = ossl::x509_from_der(extra.der);
        if (!x || SSL_CTX_add_extra_chain_cert(ctx.get(), x.get()) != 1) ossl::fail("chain certificate");
        x.release();  // owned by the context now
    }

    switch (s.client_auth) {
        case ClientAuthMode::off: break;
        case ClientAuthMode::request_accept_any: SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_PEER, verify_accept_any); break;
        case ClientAuthMode::require_known_ca: {
            X509_STORE* store = SSL_CTX_get_cert_store(ctx.get());
            auto root = ossl::x509_from_der(pki.private_root.der);
            X509_STORE_add_cert(store, root.get());
            SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_PEER | SSL_VERIFY_FAIL_IF_NO_PEER_CERT, nullptr);
            break;
        }
    }
    ERR_clear_error();
    return ctx;
}

class ServerBase : public Server {
public:
    ServerBase(const Scenario& s, Endpoint ep) : scenario_(s), ep_(ep) {}

    Endpoint endpoint() const override { return ep_; }
    ServerLog log() const override {
        std::lock_guard lock(log_mu_);
        return log_;
    }

protected:
    void note_accept() {
        std::lock_guard lock(log_mu_);
        ++log_.accepted;
    }
    void note_handshake() {
        std::lock_guard lock(log_mu_);
        log_.handshakes.push_back(Clock::now());
    }
    void note_flood(std::size_t n) {
        std::lock_guard lock(log_mu_);
        log_.bytes_flooded += n;
    }

    const Scenario scenario_;
    Endpoint ep_;
    std::atomic<bool> stopping_{false};

private:
    mutable std::mutex log_mu_;
    ServerLog log_;
};

// ---------------------------------------------------------------- TCP

class TcpServer final : public ServerBase {
public:
    TcpServer(const Scenario& s, Socket listener, Endpoint ep, ossl::SslCtxPtr ctx, std::vector<Bytes> chain)
        : ServerBase(s, ep), listener_(std::move(listener)), ctx_(std::move(ctx)), chain_(std::move(chain)) {
        accept_thread_ = std::thread([this] { accept_loop(); });
    }
    ~TcpServer() override { stop(); }

    void stop() override {
        if (stopping_.exchange(true)) return;
        if (accept_thread_.joinable()) accept_thread_.join();
        {
            std::lock_guard lock(conn_mu_);
            for (int fd : active_) ::shutdown(fd, SHUT_RDWR);
        }
        for (auto& t : workers_)
            if (t.joinable()) t.join();
    }

private:
    void accept_loop() {
        while (!stopping_) {
            if (!wait_readable(listener_.fd(), 100ms)) continue;
            Socket conn(::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK));
            if (!conn.valid()) continue;
            note_accept();
            if (scenario_.listener == Listener::close_on_accept) continue;  // closes on scope exit
            std::lock_guard lock(conn_mu_);
            active_.insert(conn.fd());
            workers_.emplace_back([this, c = std::move(conn)]() mutable {
                const int fd = c.fd();
                try {
                    handle(std::move(c));
                } catch (const std::exception&) {
                    // a broken client connection only ends that connection
                }
                std::lock_guard lock(conn_mu_);
                active_.erase(fd);
            });
        }
    }

    bool starts_with_client_hello(int fd) {
        if (!wait_readable(fd, kIdle)) return false;
        std::uint8_t b[6];
        const ssize_t n = ::recv(fd, b, sizeof b, MSG_PEEK);
        return n >= 6 && b[0] == tls::kHandshake && b[5] == tls::kClientHello;
    }

    void handle(Socket conn) {
        const int fd = conn.fd();
        if (scenario_.listener == Listener::banner) {
            send_all(fd, as_bytes(kBanner), 1s);
            wait_readable(fd, 2s);
            return;
        }
        if (scenario_.plaintext) {
            TcpChannel ch(std::move(conn), 5s);
            serve(ch);
            return;
        }
        if (!starts_with_client_hello(fd)) return;
        note_handshake();
        if (is_stub(scenario_.suites)) {
            stub_hello(fd);
            return;
        }
        SSL_CTX_up_ref(ctx_.get());
        ossl::SslCtxPtr ctx(ctx_.get());
        ossl::SslPtr ssl(SSL_new(ctx.get()));
        SSL_set_fd(ssl.get(), fd);
        const auto st = detail::drive(ssl.get(), fd, false, Clock::now() + 10s, [&] { return SSL_accept(ssl.get()); });
        ERR_clear_error();
        if (st != detail::IoStatus::ok) return;
        detail::SslChannel ch(std::move(ctx), std::move(ssl), std::move(conn), false, 5s);
        serve(ch);
    }

    void serve(Channel& ch) {
        Responder responder(scenario_);
        Bytes buf;
        for (;;) {
            auto chunk = ch.receive(1 << 16, kIdle);
            if (!chunk || chunk->empty() || stopping_) return;
            buf.insert(buf.end(), chunk->begin(), chunk->end());
            for (;;) {
                const std::size_t n = request_frame_size(scenario_.protocol, buf);
                if (n == 0) break;
                const Bytes frame(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
                buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
                auto reply = responder.handle(frame);
                for (const auto& f : reply.frames) ch.send(f);
                if (reply.flood) stream_flood(ch, reply.flood);
                if (reply.close) return;
            }
        }
    }

    void stream_flood(Channel& ch, std::size_t total) {
        constexpr std::size_t kChunk = 16 * 1024;
        std::size_t sent = 0;
        for (std::size_t i = 0; sent < total && !stopping_; ++i) {
            const auto msg = flood_message(i, std::min(kChunk, total - sent));
            try {
                ch.send(msg);
            } catch (const AuditError&) {
                break;  // subscriber went away
            }
            sent += msg.size();
            note_flood(msg.size());
        }
    }

    // Answers a ClientHello from a fixed suite list without any TLS library.
    void stub_hello(int fd) {
        Bytes buf;
        const auto deadline = Clock::now() + 10s;
        while (Clock::now() < deadline) {
            if (buf.size() >= 5) {
                const std::size_t len = static_cast<std::size_t>(buf[3] << 8 | buf[4]);
                if (buf.size() >= 5 + len) break;
            }
            auto chunk = recv_some(fd, 1 << 16, 1s);
            if (!chunk) continue;
            if (chunk->empty()) return;
            buf.insert(buf.end(), chunk->begin(), chunk->end());
        }
        if (buf.size() < 9) return;
        const auto body = ByteView(buf).subspan(9, std::min<std::size_t>(buf.size() - 9, buf[6] << 16 | buf[7] << 8 | buf[8]));
        const auto hello = tls::parse_client_hello_body(body, false);
        const auto& offer = stub_suites(scenario_.suites);
        std::optional<std::uint16_t> pick;
        for (auto c : hello.suites)
            if (std::ranges::find(offer, c) != offer.end()) {
                pick = c;
                break;
            }
        const std::uint16_t version = std::min(hello.version, scenario_.tls_ceiling);
        if (!pick) {
            send_all(fd, tls::encode_alert_record(version, {2, 40}, false), 1s);
            return;
        }
        tls::ServerFlightSpec spec;
        spec.version = version;
        if (RAND_bytes(spec.random.data(), static_cast<int>(spec.random.size())) != 1) ossl::fail("RAND_bytes");
        spec.suite = *pick;
        spec.chain = chain_;
        spec.certificate_request = scenario_.client_auth != ClientAuthMode::off;
        send_all(fd, tls::encode_server_flight(spec, false), 1s);
        // The client cannot continue with this suite; wait for it to hang up.
        while (Clock::now() < deadline) {
            try {
                auto chunk = recv_some(fd, 1 << 16, 1s);
                if (chunk && chunk->empty()) return;
            } catch (const AuditError&) {
                return;
            }
        }
    }

    Socket listener_;
    ossl::SslCtxPtr ctx_;
    std::vector<Bytes> chain_;
    std::thread accept_thread_;
    std::mutex conn_mu_;
    std::set<int> active_;
    std::vector<std::thread> workers_;
};

// ---------------------------------------------------------------- UDP

class UdpServer final : public ServerBase {
public:
    UdpServer(const Scenario& s, Socket sock, Endpoint ep, ossl::SslCtxPtr ctx)
        : ServerBase(s, ep), sock_(std::move(sock)), ctx_(std::move(ctx)) {
        thread_ = std::thread([this] { loop(); });
    }
    ~UdpServer() override { stop(); }

    void stop() override {
        if (stopping_.exchange(true)) return;
        if (thread_.joinable()) thread_.join();
    }

private:
    struct Session {
        ossl::SslPtr ssl;
        BIO* in = nullptr;   // owned by ssl
        BIO* out = nullptr;  // owned by ssl
        bool established = false;
        Clock::time_point last{};
    };

    static std::uint64_t key_of(const sockaddr_in& sa) {
        return static_cast<std::uint64_t>(sa.sin_addr.s_addr) << 16 | sa.sin_port;
    }

    void send_to(const sockaddr_in& peer, ByteView data) {
        ::sendto(sock_.fd(), data.data(), data.size(), MSG_NOSIGNAL, reinterpret_cast<const sockaddr*>(&peer),
                 sizeof peer);
    }

    // The whole pending output goes out as one datagram.
    void flush(Session& s, const sockaddr_in& peer) {
        Bytes out;
        char buf[4096];
        int n;
        while ((n = BIO_read(s.out, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
        if (!out.empty()) send_to(peer, out);
    }

    void loop() {
        Bytes dgram(1 << 16);
        while (!stopping_) {
            if (!wait_readable(sock_.fd(), 100ms)) {
                expire();
                continue;
            }
            sockaddr_in peer{};
            socklen_t len = sizeof peer;
            const ssize_t n = ::recvfrom(sock_.fd(), dgram.data(), dgram.size(), 0,
                                         reinterpret_cast<sockaddr*>(&peer), &len);
            if (n <= 0) continue;
            note_accept();
            const ByteView data(dgram.data(), static_cast<std::size_t>(n));
            try {
                if (scenario_.plaintext) {
                    Responder r(scenario_);
                    for (const auto& f : r.handle(data).frames) send_to(peer, f);
                } else {
                    on_dtls(peer, data);
                }
            } catch (const std::exception&) {
                sessions_.erase(key_of(peer));
            }
        }
    }

    void on_dtls(const sockaddr_in& peer, ByteView data) {
        auto key = key_of(peer);
        auto it = sessions_.find(key);
        const bool hello = data.size() > 13 && data[0] == tls::kHandshake && data[13] == tls::kClientHello;
        if (it == sessions_.end()) {
            if (!hello) return;
            if (sessions_.size() >= 256) expire(true);
            note_handshake();
            Session s;
            s.ssl.reset(SSL_new(ctx_.get()));
            s.in = BIO_new(BIO_s_mem());
            s.out = BIO_new(BIO_s_mem());
            BIO_set_mem_eof_return(s.in, -1);
            BIO_set_mem_eof_return(s.out, -1);
            SSL_set_bio(s.ssl.get(), s.in, s.out);
            SSL_set_mtu(s.ssl.get(), 16384);
            DTLS_set_link_mtu(s.ssl.get(), 16384);
            SSL_set_accept_state(s.ssl.get());
            it = sessions_.emplace(key, std::move(s)).first;
        }
        Session& s = it->second;
        s.last = Clock::now();
        BIO_write(s.in, data.data(), static_cast<int>(data.size()));
        if (!s.established) {
            const int r = SSL_do_handshake(s.ssl.get());
            flush(s, peer);
            if (r == 1) {
                s.established = true;
            } else {
                const int err = SSL_get_error(s.ssl.get(), r);
                ERR_clear_error();
                if (err != SSL_ERROR_WANT_READ && err != SSL_ERROR_WANT_WRITE) sessions_.erase(it);
                return;
            }
        }
        Responder responder(scenario_);
        Bytes buf(1 << 16);
        for (;;) {
            const int r = SSL_read(s.ssl.get(), buf.data(), static_cast<int>(buf.size()));
            if (r <= 0) {
                const int err = SSL_get_error(s.ssl.get(), r);
                ERR_clear_error();
                flush(s, peer);
                if (err != SSL_ERROR_WANT_READ) sessions_.erase(key);
                return;
            }
            for (const auto& f : responder.handle(ByteView(buf.data(), static_cast<std::size_t>(r))).frames)
                SSL_write(s.ssl.get(), f.data(), static_cast<int>(f.size()));
            flush(s, peer);
        }
    }

    void expire(bool all_idle = false) {
        const auto now = Clock::now();
        std::erase_if(sessions_, [&](const auto& kv) { return all_idle || now - kv.second.last > 30s; });
    }

    Socket sock_;
    ossl::SslCtxPtr ctx_;
    std::thread thread_;
    std::unordered_map<std::uint64_t, Session> sessions_;
};

}  // namespace

std::unique_ptr<Server> spawn(const Scenario& s, CertBank& certs, const Pki& pki) {
    static const bool sigpipe_ignored = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    const auto& entry = Catalog::builtin().lookup(s.protocol);
    const bool udp = entry.transport == Transport::udp;
    if (udp && is_stub(s.suites)) throw AuditError(s.name + ": hello stubs are TCP only");
    if (udp && s.listener != Listener::normal) throw AuditError(s.name + ": listener behaviours are TCP only");
    if (s.publish_flood && s.protocol != Protocol::MQTT) throw AuditError(s.name + ": publish flood is MQTT only");

    const auto addr = s.address();
    Socket sock(bind_socket(addr, udp ? SOCK_DGRAM : SOCK_STREAM));
    Endpoint ep{addr, local_port(sock.fd()), s.protocol, s.variant, entry.transport};

    ossl::SslCtxPtr ctx;
    std::vector<Bytes> chain;
    if (!s.plaintext && s.listener == Listener::normal) {
        const auto& m = certs.get(s);
        chain.push_back(m.cert.der);
        for (const auto& e : m.chain_extra) chain.push_back(e.der);
        if (!is_stub(s.suites)) ctx = server_ctx(s, m, pki, udp);
    }
    if (udp) return std::make_unique<UdpServer>(s, std::move(sock), ep, std::move(ctx));
    return std::make_unique<TcpServer>(s, std::move(sock), ep, std::move(ctx), std::move(chain));
}

}  // namespace iiot::lab

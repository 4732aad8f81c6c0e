#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "iiot/access.hpp"
#include "iiot/assessor.hpp"
#include "iiot/endpoint.hpp"
#include "iiot/pipeline.hpp"
#include "iiot/x509.hpp"

// Loopback mock servers with injectable misconfigurations. Each scenario
// is one server on its own 127.0.1.N address and an ephemeral port.

namespace iiot::lab {

enum class SuitePolicy : std::uint8_t {
    rec_only,       ///< exactly the locally available REC suites
    broad,          ///< the library defaults
    ins_accepting,  ///< everything the library can do, NULL and anonymous suites included
    no_rec_stub,    ///< hand-written hello engine offering static-ECDH only
    rc4_stub,       ///< hand-written hello engine offering RC4 only
};
enum class IssuerMode : std::uint8_t { self_signed, private_ca, public_ca };
enum class ClientAuthMode : std::uint8_t { off, request_accept_any, require_known_ca };
enum class AppBehavior : std::uint8_t { compliant, silent, malformed_length, error_response };
enum class AccessMode : std::uint8_t { open, credentials, default_credentials };
/// What happens right after accept, before any protocol logic.
enum class Listener : std::uint8_t { normal, close_on_accept, banner };

std::string_view to_string(SuitePolicy p);
std::string_view to_string(IssuerMode m);
std::string_view to_string(ClientAuthMode m);
std::string_view to_string(AppBehavior b);
std::string_view to_string(AccessMode m);
std::string_view to_string(Listener l);

struct CertProfile {
    KeySpec key{KeyType::RSA, 2048};
    SigHash sig_hash = SigHash::SHA256;
    /// Start of validity relative to the run start (negative is past).
    std::chrono::seconds not_before_offset{-std::chrono::days{30}};
    std::chrono::seconds lifetime{std::chrono::days{365}};
    IssuerMode issuer = IssuerMode::private_ca;
    std::string common_name;  ///< defaults to "<scenario>.lab.example"
    std::string organization = "IIoT Lab";
    /// Scenarios with the same non-empty group serve one shared certificate.
    std::string shared_group;
};

struct Expectation {
    std::optional<Stage> stage;  ///< nullopt: no record (blocklisted)
    std::set<Check> findings;
    std::optional<BatteryClass> battery_class;
    std::optional<ClientAuth> client_auth;
    std::optional<Adoption> adoption;
    std::optional<AccessStatus> access;
    std::optional<bool> tls13_capable;
};

struct Scenario {
    std::string name;
    Protocol protocol = Protocol::MQTT;
    Variant variant = Variant::secure;
    int host = 1;  ///< last octet of 127.0.1.N (127.0.2.N when blocklisted)
    std::uint16_t tls_ceiling = tls::kTls12;
    SuitePolicy suites = SuitePolicy::broad;
    CertProfile cert;
    ClientAuthMode client_auth = ClientAuthMode::off;
    AppBehavior app = AppBehavior::compliant;
    AccessMode access = AccessMode::credentials;
    Listener listener = Listener::normal;
    /// Serve the application protocol without TLS.
    bool plaintext = false;
    bool blocklisted = false;
    std::uint32_t asn = 64500;
    /// Bytes of PUBLISH traffic an MQTT broker pushes after a SUBSCRIBE.
    std::size_t publish_flood = 0;
    Expectation expect;

    Ipv4 address() const;
};

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// The fixed matrix run by `audit lab --scenarios all`.
std::vector<Scenario> canonical_suite();

/// Roots and client identity shared by all servers of one run.
struct Pki {
    IssuedCert public_root;
    PrivateKey public_key;
    IssuedCert private_root;
    PrivateKey private_key;
    TimePoint epoch{};

    static Pki create(TimePoint now);
    /// Writes the public root as `lab.pem` so trust-anchor grading sees it.
    void install_trust(const std::filesystem::path& dir) const;
};

struct ServerLog {
    std::size_t accepted = 0;   ///< TCP connections or UDP datagrams received
    std::vector<Clock::time_point> handshakes;  ///< ClientHello arrivals
    std::size_t bytes_flooded = 0;
};

class Server {
public:
    virtual ~Server() = default;
    virtual Endpoint endpoint() const = 0;
    virtual ServerLog log() const = 0;
    virtual void stop() = 0;
};

/// Certificate cache for shared groups.
class CertBank {
public:
    explicit CertBank(const Pki& pki) : pki_(pki) {}
    struct Material {
        IssuedCert cert;
        std::string key_pem;
        std::vector<IssuedCert> chain_extra;  ///< issuing CA, when any
    };
    const Material& get(const Scenario& s);

private:
    const Pki& pki_;
    std::mutex mu_;
    std::map<std::string, std::unique_ptr<Material>> cache_;
    std::uint64_t serial_ = 100;
};

/// Starts the server for `s`. Throws AuditError when no port is free.
std::unique_ptr<Server> spawn(const Scenario& s, CertBank& certs, const Pki& pki);

/// OpenSSL cipher string for the REC suites the local library supports.
std::string rec_cipher_string(bool dtls);

/// Byte-exact server replies for one request under `s` (no TLS). Used by
/// the servers and by determinism tests.
class Responder {
public:
    explicit Responder(const Scenario& s) : s_(s) {}
    struct Reply {
        std::vector<Bytes> frames;
        bool close = false;
        std::size_t flood = 0;  ///< PUBLISH bytes to stream after the frames
    };
    Reply handle(ByteView request);

private:
    const Scenario& s_;
};

/// Size of the first complete request frame in `buf`; 0 while incomplete.
/// Throws AuditError when `buf` cannot start a valid request.
std::size_t request_frame_size(Protocol p, ByteView buf);

}  // namespace iiot::lab

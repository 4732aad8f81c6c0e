#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iiot/bytes.hpp"

namespace iiot {

using TimePoint = std::chrono::sys_seconds;

enum class KeyType : std::uint8_t { RSA, ECDSA, other };
enum class SigHash : std::uint8_t { MD5, SHA1, SHA256, SHA384, SHA512, other };

std::string_view to_string(KeyType k);
std::string_view to_string(SigHash h);

/// ISO-8601 UTC ("2021-01-01T00:00:00Z") in both directions.
std::string format_time(TimePoint t);
TimePoint parse_time(std::string_view iso);

/// Parsed view of one DER certificate.
struct CertificateRecord {
    std::string fingerprint;  ///< SHA-256 of the DER, lowercase hex
    std::string subject;      ///< RFC 2253 string, e.g. "CN=broker,O=Example"
    std::string issuer;
    std::string common_name;
    std::string organization;
    TimePoint not_before{};
    TimePoint not_after{};
    KeyType key_type = KeyType::other;
    int key_bits = 0;
    SigHash sig_hash = SigHash::other;
    std::string sig_algorithm;  ///< e.g. "sha256WithRSAEncryption"
    std::string key_usage;      ///< comma-separated key usage names, may be empty
    Bytes der;

    bool self_issued() const { return subject == issuer; }
};

/// Throws AuditError when the DER does not parse.
CertificateRecord parse_certificate(ByteView der);

/// Named root-certificate bundles. A chain counts as publicly trusted when
/// it verifies against any one of them.
class TrustStores {
public:
    /// Store names recognised in a trust-store directory, as `<name>.pem`.
    static const std::vector<std::string>& known_names();

    TrustStores();
    ~TrustStores();
    TrustStores(TrustStores&&) noexcept;
    TrustStores& operator=(TrustStores&&) noexcept;

    /// Loads `<name>.pem` for each known name present in `dir`.
    static TrustStores load_dir(const std::filesystem::path& dir);

    /// Adds PEM-encoded roots to the named store (created on demand).
    void add_pem(const std::string& store, std::string_view pem);
    void add_der(const std::string& store, ByteView der);

    /// Name of the first store that validates `chain` (leaf first), if any.
    /// Validity periods are ignored: lifetime is graded separately.
    std::optional<std::string> validating_store(const std::vector<Bytes>& chain) const;

    std::vector<std::string> names() const;
    std::size_t root_count(const std::string& store) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Certificate generation for the scanner's client identity and the lab.

struct KeySpec {
    KeyType type = KeyType::RSA;
    int bits = 2048;  ///< RSA modulus size or EC curve size (256/384/521)
};

/// Opaque private key.
class PrivateKey {
public:
    PrivateKey();
    ~PrivateKey();
    PrivateKey(PrivateKey&&) noexcept;
    PrivateKey& operator=(PrivateKey&&) noexcept;

    static PrivateKey generate(const KeySpec& spec);
    static PrivateKey from_pem(std::string_view pem);
    std::string to_pem() const;
    void* native() const;  ///< EVP_PKEY*

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct CertSpec {
    std::string common_name;
    std::string organization;
    TimePoint not_before{};
    std::chrono::seconds lifetime{std::chrono::days{365}};
    SigHash sig_hash = SigHash::SHA256;
    bool ca = false;
    std::uint64_t serial = 1;
};

struct IssuedCert {
    Bytes der;
    std::string pem() const;
};

/// Signs `spec` for `subject_key`. With no issuer the certificate is
/// self-signed; otherwise the issuer's subject becomes the issuer name.
IssuedCert issue_certificate(const CertSpec& spec, const PrivateKey& subject_key,
                             const IssuedCert* issuer = nullptr, const PrivateKey* issuer_key = nullptr);

std::string der_to_pem(ByteView der);
std::vector<Bytes> pem_to_ders(std::string_view pem);

/// The scanner's own client identity: self-signed RSA-2048 with the
/// contact URL as common name. Created on first use and reused after.
struct ClientIdentity {
    IssuedCert cert;
    std::string key_pem;

    static ClientIdentity load_or_create(const std::filesystem::path& dir, const std::string& contact_url);
    static ClientIdentity create(const std::string& contact_url);
};

}  // namespace iiot

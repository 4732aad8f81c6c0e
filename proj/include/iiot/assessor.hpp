#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iiot/pipeline.hpp"
#include "iiot/x509.hpp"

namespace iiot {

enum class Check : std::uint8_t {
    deprecated_version,
    no_rec_suite,
    weak_cipher_accepted,
    weak_mac_accepted,
    insecure_suite_accepted,
    expired_cert,
    over_long_lifetime,
    short_key,
    weak_sig_hash,
    cert_reuse_intra_as,
    cert_reuse_inter_as,
    no_access_control,
    default_credentials,
};
inline constexpr std::array<Check, 13> kAllChecks = {
    Check::deprecated_version,   Check::no_rec_suite,        Check::weak_cipher_accepted,
    Check::weak_mac_accepted,    Check::insecure_suite_accepted, Check::expired_cert,
    Check::over_long_lifetime,   Check::short_key,           Check::weak_sig_hash,
    Check::cert_reuse_intra_as,  Check::cert_reuse_inter_as, Check::no_access_control,
    Check::default_credentials,
};

enum class Severity : std::uint8_t { info, warn, critical };

std::string_view to_string(Check c);
Check parse_check(std::string_view s);
std::string_view to_string(Severity s);
Severity severity_of(Check c);

struct Finding {
    std::string deployment_id;
    Check check{};
    Severity severity = Severity::warn;
    std::string evidence;  ///< key=value pairs
};

Finding make_finding(std::string deployment_id, Check check, std::string evidence);

// ---------------------------------------------------------------- versions

struct VersionAssessment {
    std::optional<std::uint16_t> max_version;
    /// A TLS 1.2 handshake carried the TLS 1.3 downgrade sentinel.
    bool tls13_capable = false;
    std::optional<Finding> finding;
};

/// Throws AuditError when no handshake was accepted.
VersionAssessment check_version(const SuiteBattery& battery, const std::string& deployment_id);

// ---------------------------------------------------------------- ciphers

/// How a host behaves across the four suite sets.
enum class BatteryClass : std::uint8_t {
    secure,              ///< accepts REC and COMP with a strong suite, denies INS
    denies_harmless,     ///< refuses some secure offer but never an insecure one
    insecure_accepting,  ///< accepts INS or picks a weak suite from COMP
};
std::string_view to_string(BatteryClass c);

/// Throws AuditError for an incomplete battery.
BatteryClass classify_battery(const SuiteBattery& battery);
/// Throws AuditError for an incomplete battery.
std::vector<Finding> check_ciphers(const SuiteBattery& battery, const std::string& deployment_id);

// ---------------------------------------------------------------- certificates

enum class TrustAnchor : std::uint8_t { public_ca, private_ca, self_signed };
std::string_view to_string(TrustAnchor t);

TrustAnchor classify_trust_anchor(const std::vector<Bytes>& chain, const TrustStores& stores);

/// Maximum lifetime for a certificate issued at `not_before`; nullopt
/// before June 2016.
std::optional<std::chrono::seconds> lifetime_cap(TimePoint not_before);
std::vector<Finding> check_lifetime(const CertificateRecord& cert, TimePoint now, const std::string& deployment_id);
std::vector<Finding> check_primitives(const CertificateRecord& cert, const std::string& deployment_id);

// ---------------------------------------------------------------- reuse

enum class Reuse : std::uint8_t { not_reused, intra_as, inter_as };
std::string_view to_string(Reuse r);

struct Usage {
    Ipv4 address;
    std::uint32_t asn = 0;
    friend auto operator<=>(const Usage&, const Usage&) = default;
};

/// Throws AuditError for an empty usage set.
Reuse classify_reuse(const std::vector<Usage>& usage);

/// (Common Name, Organization) glob patterns of certificates that are
/// served from several hosts on purpose, e.g. behind a load balancer.
struct ReusePattern {
    std::string common_name = "*";
    std::string organization = "*";
};
bool reuse_allowlisted(const CertificateRecord& cert, const std::vector<ReusePattern>& allow);

// ---------------------------------------------------------------- statistics

struct MannWhitney {
    double u = 0;  ///< U of sample a
    double p = 1;  ///< two-sided
    bool exact = false;
};

/// Midranks for ties. Exact permutation p-value when both samples have at
/// most eight values, else normal approximation with tie and continuity
/// correction. Throws AuditError for an empty sample.
MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------- whole run

struct AssessmentInput {
    const TrustStores* trust_stores = nullptr;
    TimePoint now{};
    std::vector<ReusePattern> reuse_allowlist;
};

/// Per graded unit details kept next to the findings.
struct Grade {
    std::string id;
    std::optional<VersionAssessment> version;
    std::optional<BatteryClass> battery_class;
    std::optional<ClientAuth> client_auth;
    std::optional<TrustAnchor> trust_anchor;
    std::optional<Reuse> reuse;
    bool reuse_allowlisted = false;
};

struct Assessment {
    std::vector<Finding> findings;
    std::vector<Grade> grades;
};

/// A unit of grading: a deployment, or a TLS endpoint that offered a valid
/// ServerHello but did not reach the valid stage (keyed by endpoint).
struct GradedUnit {
    std::string id;
    std::vector<const ProbeRecord*> records;
};

std::vector<GradedUnit> graded_units(const std::vector<Deployment>& deployments,
                                     const std::vector<ProbeRecord>& records);

/// Version, cipher and certificate checks for every unit, and reuse over
/// all leaf certificates seen in the run.
Assessment assess(const std::vector<GradedUnit>& units, const AssessmentInput& in);

}  // namespace iiot

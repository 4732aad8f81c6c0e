#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "iiot/codecs.hpp"
#include "iiot/endpoint.hpp"
#include "iiot/prober.hpp"

namespace iiot {

/// Validation funnel, each stage implying the previous ones.
enum class Stage : std::uint8_t { none, transport, tls_valid, auth_ok, tls_success, valid };
inline constexpr std::array<Stage, 5> kFunnelStages = {Stage::transport, Stage::tls_valid, Stage::auth_ok,
                                                       Stage::tls_success, Stage::valid};
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

/// Everything learned about one endpoint.
struct ProbeRecord {
    Endpoint endpoint;
    TransportResult transport = TransportResult::dead;
    /// Absent when the endpoint answered in plaintext and no TLS was tried.
    std::optional<SuiteBattery> battery;
    /// Verdict used for staging: over TLS when a battery ran, else plaintext.
    std::optional<ValidationVerdict> app_verdict;
    /// Plaintext attempt on a standard port, kept even when TLS followed.
    std::optional<ValidationVerdict> plaintext_verdict;
    std::optional<bool> tls13;
    std::uint32_t asn = 0;
    Stage stage = Stage::none;
    std::string probed_at;

    bool tls_probed() const { return battery.has_value(); }
    /// Chain of the first accepted handshake, leaf first. Empty if none.
    const std::vector<Bytes>& chain() const;
    /// SHA-256 of the leaf certificate, empty when there is none.
    std::string leaf_fingerprint() const;
};

Stage classify_stage(const ProbeRecord& r);

enum class Adoption : std::uint8_t { plaintext_only, tls_only, optional_tls };
std::string_view to_string(Adoption a);

/// A logical service: one host and protocol, possibly reachable on several
/// ports.
struct Deployment {
    std::string id;  ///< "<host>/<protocol>/<n>"
    Ipv4 host;
    Protocol protocol{};
    Adoption adoption = Adoption::plaintext_only;
    std::vector<ProbeRecord> records;
    std::uint32_t asn = 0;
    std::set<std::string> cert_fingerprints;

    bool tls() const { return adoption != Adoption::plaintext_only; }
    /// First record carrying a TLS battery; nullptr for plaintext-only.
    const ProbeRecord* tls_record() const;
};

/// Merges valid records per host and protocol. Records on the standard and
/// secure port become one deployment when their leaf certificate and
/// battery outcomes match; a plaintext record joins the host's first TLS
/// deployment and makes it optional_tls. Records below the valid stage do
/// not form deployments.
std::vector<Deployment> dedup(std::vector<ProbeRecord> records);
std::vector<ProbeRecord> expand(const std::vector<Deployment>& deployments);

/// Per-protocol row of the summary table.
struct ProtocolSummary {
    Protocol protocol{};
    /// Records of TLS-probed endpoints at stage >= transport .. valid.
    std::array<std::size_t, 5> funnel{};
    std::size_t deployments = 0;
    std::size_t tls_deployments = 0;
    double pct_tls = 0.0;
    std::size_t distinct_as = 0;   ///< over TLS deployments
    std::size_t distinct_cn = 0;   ///< leaf common names over TLS deployments
    AdoptionGroup group = AdoptionGroup::small;
};

/// Deployment columns for every catalogued protocol, in catalog order.
/// When `as_map` is given it overrides the ASN stored on each deployment.
std::vector<ProtocolSummary> aggregate(const std::vector<Deployment>& deployments, const AsMap* as_map = nullptr);
/// Adds funnel counts from the raw records to `rows`.
void add_funnel_counts(std::vector<ProtocolSummary>& rows, const std::vector<ProbeRecord>& records);

// JSON forms used by the report files.
nlohmann::json to_json(const Endpoint& e);
Endpoint endpoint_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HandshakeResult& r);
HandshakeResult handshake_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ValidationVerdict& v);
ValidationVerdict verdict_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProbeRecord& r);
ProbeRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Deployment& d);

}  // namespace iiot

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iiot/access.hpp"
#include "iiot/assessor.hpp"
#include "iiot/clustering.hpp"
#include "iiot/pipeline.hpp"

// Target ingestion, pacing-aware scheduling, probe execution and report
// files. All outbound traffic goes through one Dialer, which refuses
// blocklisted addresses and logs every contact.

namespace iiot {

using PortOverrides = std::map<std::pair<Protocol, Variant>, std::uint16_t>;

struct ScanPolicy {
    Millis per_host_interval = std::chrono::minutes{15};
    Millis per_host_time_limit = std::chrono::minutes{30};
    std::size_t per_host_byte_limit = 10'000'000;
    CidrSet blocklist;
    /// Loopback/lab runs: no pacing, CIDR targets allowed.
    bool lab_mode = false;
    /// Subscribe to "#" on open MQTT brokers. Off unless asked for.
    bool subscribe_root = false;
    /// Required with subscribe_root outside lab mode.
    bool acknowledge_payload_collection = false;
    Timeouts timeouts;
    /// Optional fifth handshake offering TLS 1.3 only.
    bool tls13_probe = false;
    std::size_t concurrency = 32;
    std::string contact_url = "https://scanner.example/contact";
    std::optional<std::filesystem::path> trust_store_dir;
    std::optional<std::filesystem::path> identity_dir;
    std::vector<ReusePattern> reuse_allowlist;
    PortOverrides port_overrides;

    /// Zero in lab mode.
    Millis effective_interval() const { return lab_mode ? Millis{0} : per_host_interval; }
    SubscriptionLimits subscription_limits() const { return {per_host_time_limit, per_host_byte_limit}; }
    /// Throws AuditError on inconsistent settings.
    void validate() const;
};

/// JSON keys mirror the field names; durations are in seconds (`*_s`) or
/// milliseconds (`*_ms`). Missing keys keep their defaults.
ScanPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScanPolicy& p);
ScanPolicy load_policy(const std::filesystem::path& path);

/// Blocklist named by AUDIT_BLOCKLIST, if the variable is set.
std::optional<CidrSet> env_blocklist();

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct TargetList {
    std::vector<Endpoint> endpoints;
    std::vector<RowError> errors;
};

/// CSV with header `address,protocol,variant[,port]`, or JSONL objects
/// with the same keys (chosen by a leading `{`). Rows that do not parse
/// are reported with their line number; an unknown protocol name throws
/// UnknownProtocol. CIDR addresses expand to every host address and are
/// accepted only when `allow_cidr` is set.
TargetList load_targets(const std::filesystem::path& path, const PortOverrides& overrides = {},
                        bool allow_cidr = false, const Catalog& catalog = Catalog::builtin());
TargetList parse_targets(std::string_view text, const PortOverrides& overrides = {}, bool allow_cidr = false,
                         const Catalog& catalog = Catalog::builtin());

std::vector<Endpoint> apply_blocklist(std::vector<Endpoint> targets, const ScanPolicy& policy);

enum class JobKind : std::uint8_t { handshake, tls13, access };
std::string_view to_string(JobKind k);

struct Job {
    Endpoint endpoint;
    JobKind kind = JobKind::handshake;
    SuiteSetName suite_set = SuiteSetName::REC;  ///< handshake jobs only
    /// Earliest start relative to the host's first job.
    Millis offset{0};
};

/// Jobs grouped by host, in execution order within each host.
struct ProbePlan {
    Millis interval{0};
    std::map<Ipv4, std::vector<Job>> hosts;

    std::size_t size() const;
    /// All jobs ordered by (offset, host): hosts interleave freely.
    std::vector<Job> flattened() const;
};

/// One handshake job per target and suite set (plus a TLS 1.3 job when
/// enabled). Consecutive jobs on one host are `effective_interval` apart.
ProbePlan schedule(const std::vector<Endpoint>& targets, const ScanPolicy& policy);

struct JobLogEntry {
    Job job;
    Clock::time_point started;
    Clock::time_point finished;
    bool skipped = false;
    std::string note;
};

struct AccessResult {
    std::string deployment_id;
    Endpoint endpoint;
    std::string check;  ///< "amqp_default_credentials", "mqtt_open_access" or "http_login_check"
    AccessVerdict verdict;
};

struct ContactRow {
    std::string address;
    Ipv4 source;
    bool mx_verified = false;
};

struct ScanResult {
    std::vector<ProbeRecord> records;
    std::vector<Deployment> deployments;
    Assessment assessment;
    std::vector<AccessResult> access;
    std::vector<ContactRow> contacts;
    ClusterReport clusters;
    std::vector<JobLogEntry> jobs;
    std::vector<Contact> dialer_contacts;
    std::vector<RowError> row_errors;
    std::string started;
    std::string finished;
};

/// The full read-only application exchange for one protocol over an open
/// channel. The first reply decides the verdict.
ValidationVerdict app_exchange(Channel& ch, Protocol p, Millis timeout);

struct ScanInputs {
    ScanPolicy policy;
    const AsMap* as_map = nullptr;
    const TrustStores* trust_stores = nullptr;
    const ClientIdentity* identity = nullptr;
    MxResolver resolver;
    /// Wall clock used for certificate grading.
    TimePoint now{};
};

/// Runs the plan, then dedup, grading, access checks and clustering.
/// Distinct hosts run concurrently; each host's jobs run in order.
ScanResult execute(const ProbePlan& plan, const ScanInputs& in);

/// Findings for access verdicts: open -> no_access_control, default
/// credentials -> default_credentials.
std::vector<Finding> access_findings(const std::vector<AccessResult>& access);

/// Writes records.jsonl, handshakes.jsonl, deployments.jsonl, access.jsonl,
/// jobs.jsonl, summary.csv, findings.csv, contacts.csv, clusters.json and
/// metadata.json. Throws AuditError when `dir` is not writable.
void emit_report(const ScanResult& r, const ScanPolicy& policy, const std::filesystem::path& dir,
                 const AsMap* as_map = nullptr);

/// summary.csv content for `deployments` and the funnel over `records`.
std::string summary_csv(const std::vector<Deployment>& deployments, const std::vector<ProbeRecord>& records,
                        const AsMap* as_map = nullptr);
std::string findings_csv(const std::vector<Finding>& findings);

/// Rebuilds deployments, grades and summary files from a scan directory.
/// Returns the summary table as text.
std::string rebuild_report(const std::filesystem::path& dir);

}  // namespace iiot

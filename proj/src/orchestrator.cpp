#include "iiot/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace iiot {

using nlohmann::json;

namespace {

Millis seconds_to_ms(double s) {
    if (s < 0) throw AuditError("negative duration in policy");
    return std::chrono::duration_cast<Millis>(std::chrono::duration<double>(s));
}

double ms_to_seconds(Millis m) { return std::chrono::duration<double>(m).count(); }

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string override_key(Protocol p, Variant v) {
    return std::string(to_string(p)) + "/" + std::string(to_string(v));
}

std::string iso_now() {
    return format_time(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw AuditError("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AuditError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

// ---------------------------------------------------------------- policy

void ScanPolicy::validate() const {
    if (per_host_interval < Millis{0}) throw AuditError("per_host_interval must not be negative");
    if (per_host_time_limit <= Millis{0}) throw AuditError("per_host_time_limit must be positive");
    if (per_host_byte_limit == 0) throw AuditError("per_host_byte_limit must be positive");
    if (concurrency == 0) throw AuditError("concurrency must be at least 1");
    if (subscribe_root && !lab_mode && !acknowledge_payload_collection)
        throw AuditError("subscribe_root outside lab mode needs acknowledge_payload_collection");
}

ScanPolicy policy_from_json(const json& j) {
    ScanPolicy p;
    if (j.contains("per_host_interval_s")) p.per_host_interval = seconds_to_ms(j["per_host_interval_s"].get<double>());
    if (j.contains("per_host_time_limit_s"))
        p.per_host_time_limit = seconds_to_ms(j["per_host_time_limit_s"].get<double>());
    p.per_host_byte_limit = j.value("per_host_byte_limit", p.per_host_byte_limit);
    for (const auto& c : j.value("blocklist", json::array())) p.blocklist.add(Cidr::parse(c.get<std::string>()));
    p.lab_mode = j.value("lab_mode", false);
    p.subscribe_root = j.value("subscribe_root", false);
    p.acknowledge_payload_collection = j.value("acknowledge_payload_collection", false);
    if (j.contains("timeouts")) {
        const auto& t = j["timeouts"];
        p.timeouts.connect = Millis{t.value("connect_ms", p.timeouts.connect.count())};
        p.timeouts.read = Millis{t.value("read_ms", p.timeouts.read.count())};
        p.timeouts.udp_retransmits = t.value("udp_retransmits", p.timeouts.udp_retransmits);
        p.timeouts.udp_initial = Millis{t.value("udp_initial_ms", p.timeouts.udp_initial.count())};
        p.timeouts.linger_check = Millis{t.value("linger_check_ms", p.timeouts.linger_check.count())};
    }
    p.tls13_probe = j.value("tls13_probe", false);
    p.concurrency = j.value("concurrency", p.concurrency);
    p.contact_url = j.value("contact_url", p.contact_url);
    if (j.contains("trust_store_dir")) p.trust_store_dir = j["trust_store_dir"].get<std::string>();
    if (j.contains("identity_dir")) p.identity_dir = j["identity_dir"].get<std::string>();
    for (const auto& r : j.value("reuse_allowlist", json::array()))
        p.reuse_allowlist.push_back({r.value("common_name", "*"), r.value("organization", "*")});
    const auto overrides = j.value("port_overrides", json::object());
    for (const auto& [key, port] : overrides.items()) {
        const auto slash = key.find('/');
        if (slash == std::string::npos) throw AuditError("port override key must be protocol/variant: " + key);
        p.port_overrides[{parse_protocol(key.substr(0, slash)), parse_variant(key.substr(slash + 1))}] =
            port.get<std::uint16_t>();
    }
    p.validate();
    return p;
}

json to_json(const ScanPolicy& p) {
    json blocklist = json::array();
    for (const auto& c : p.blocklist.ranges()) blocklist.push_back(c.to_string());
    json allow = json::array();
    for (const auto& r : p.reuse_allowlist) allow.push_back({{"common_name", r.common_name}, {"organization", r.organization}});
    json overrides = json::object();
    for (const auto& [k, port] : p.port_overrides) overrides[override_key(k.first, k.second)] = port;
    json j = {{"per_host_interval_s", ms_to_seconds(p.per_host_interval)},
              {"per_host_time_limit_s", ms_to_seconds(p.per_host_time_limit)},
              {"per_host_byte_limit", p.per_host_byte_limit},
              {"blocklist", blocklist},
              {"lab_mode", p.lab_mode},
              {"subscribe_root", p.subscribe_root},
              {"acknowledge_payload_collection", p.acknowledge_payload_collection},
              {"timeouts",
               {{"connect_ms", p.timeouts.connect.count()},
                {"read_ms", p.timeouts.read.count()},
                {"udp_retransmits", p.timeouts.udp_retransmits},
                {"udp_initial_ms", p.timeouts.udp_initial.count()},
                {"linger_check_ms", p.timeouts.linger_check.count()}}},
              {"tls13_probe", p.tls13_probe},
              {"concurrency", p.concurrency},
              {"contact_url", p.contact_url},
              {"reuse_allowlist", allow},
              {"port_overrides", overrides}};
    if (p.trust_store_dir) j["trust_store_dir"] = p.trust_store_dir->string();
    if (p.identity_dir) j["identity_dir"] = p.identity_dir->string();
    return j;
}

ScanPolicy load_policy(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw AuditError("policy " + path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const char* key) {
        if (j.contains(key) && j[key].is_string()) {
            std::filesystem::path p = j[key].get<std::string>();
            if (p.is_relative()) j[key] = (base / p).string();
        }
    };
    resolve("trust_store_dir");
    resolve("identity_dir");
    resolve("blocklist_file");
    auto policy = policy_from_json(j);
    if (j.contains("blocklist_file")) policy.blocklist.merge(CidrSet::load(j["blocklist_file"].get<std::string>()));
    return policy;
}

std::optional<CidrSet> env_blocklist() {
    const char* path = std::getenv("AUDIT_BLOCKLIST");
    if (!path || !*path) return std::nullopt;
    return CidrSet::load(path);
}

// ---------------------------------------------------------------- targets

namespace {

constexpr std::uint64_t kMaxCidrExpansion = 1u << 16;

struct RawRow {
    std::string address, protocol, variant, port;
};

void add_row(const RawRow& row, std::size_t line, const PortOverrides& overrides, bool allow_cidr,
             const Catalog& catalog, TargetList& out, std::set<Endpoint>& seen) {
    auto fail = [&](std::string msg) { out.errors.push_back({line, std::move(msg)}); };
    if (row.address.empty() || row.protocol.empty() || row.variant.empty()) return fail("missing column");

    const auto& entry = catalog.lookup(row.protocol);  // unknown protocol is fatal
    Variant variant;
    try {
        variant = parse_variant(row.variant);
    } catch (const AuditError& e) {
        return fail(e.what());
    }

    std::vector<std::uint16_t> ports;
    if (!row.port.empty()) {
        int port = 0;
        try {
            std::size_t used = 0;
            port = std::stoi(row.port, &used);
            if (used != row.port.size()) port = 0;
        } catch (const std::exception&) {
            port = 0;
        }
        if (port < 1 || port > 65535) return fail("invalid port: " + row.port);
        ports.push_back(static_cast<std::uint16_t>(port));
    } else if (auto it = overrides.find({entry.protocol, variant}); it != overrides.end()) {
        ports.push_back(it->second);
    } else {
        ports = variant == Variant::secure ? entry.secure_ports : entry.standard_ports;
    }

    std::vector<Ipv4> addresses;
    if (row.address.find('/') != std::string::npos) {
        if (!allow_cidr) return fail("CIDR targets are only accepted in lab mode");
        Cidr c;
        try {
            c = Cidr::parse(row.address);
        } catch (const AuditError& e) {
            return fail(e.what());
        }
        if (c.size() > kMaxCidrExpansion) return fail("CIDR larger than /16: " + row.address);
        const std::uint32_t first = c.network().value();
        const std::uint64_t n = c.size();
        const bool trim_edges = c.prefix_len() < 31;
        for (std::uint64_t i = trim_edges ? 1 : 0; i < (trim_edges ? n - 1 : n); ++i)
            addresses.emplace_back(first + static_cast<std::uint32_t>(i));
    } else {
        auto a = Ipv4::try_parse(row.address);
        if (!a) return fail("invalid address: " + row.address);
        addresses.push_back(*a);
    }

    for (auto a : addresses)
        for (auto port : ports) {
            Endpoint ep{a, port, entry.protocol, variant, entry.transport};
            if (seen.insert(ep).second) out.endpoints.push_back(ep);
        }
}

}  // namespace

TargetList parse_targets(std::string_view text, const PortOverrides& overrides, bool allow_cidr,
                         const Catalog& catalog) {
    TargetList out;
    std::set<Endpoint> seen;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return out;
    const bool jsonl = text[first] == '{';

    std::vector<std::string> header;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;

        RawRow row;
        if (jsonl) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception&) {
                out.errors.push_back({line_no, "invalid JSON"});
                continue;
            }
            if (!j.is_object()) {
                out.errors.push_back({line_no, "expected a JSON object"});
                continue;
            }
            auto field = [&](const char* k) -> std::string {
                if (!j.contains(k)) return {};
                return j[k].is_string() ? j[k].get<std::string>() : j[k].dump();
            };
            row = {field("address"), field("protocol"), field("variant"), field("port")};
        } else {
            auto cols = split_csv_line(line);
            if (header.empty()) {
                header = cols;
                for (auto& h : header) std::ranges::transform(h, h.begin(), ::tolower);
                const std::set<std::string> need{"address", "protocol", "variant"};
                for (const auto& n : need)
                    if (std::ranges::find(header, n) == header.end())
                        throw AuditError("targets header must name address,protocol,variant[,port]");
                continue;
            }
            if (cols.size() > header.size()) {
                out.errors.push_back({line_no, "too many columns"});
                continue;
            }
            for (std::size_t i = 0; i < cols.size(); ++i) {
                if (header[i] == "address") row.address = cols[i];
                else if (header[i] == "protocol") row.protocol = cols[i];
                else if (header[i] == "variant") row.variant = cols[i];
                else if (header[i] == "port") row.port = cols[i];
            }
        }
        add_row(row, line_no, overrides, allow_cidr, catalog, out, seen);
    }
    return out;
}

TargetList load_targets(const std::filesystem::path& path, const PortOverrides& overrides, bool allow_cidr,
                        const Catalog& catalog) {
    if (!std::filesystem::exists(path)) throw AuditError("targets file not found: " + path.string());
    return parse_targets(read_file(path), overrides, allow_cidr, catalog);
}

std::vector<Endpoint> apply_blocklist(std::vector<Endpoint> targets, const ScanPolicy& policy) {
    std::erase_if(targets, [&](const Endpoint& e) { return policy.blocklist.contains(e.address); });
    return targets;
}

// ---------------------------------------------------------------- schedule

std::string_view to_string(JobKind k) {
    switch (k) {
        case JobKind::handshake: return "handshake";
        case JobKind::tls13: return "tls13";
        case JobKind::access: return "access";
    }
    return "handshake";
}

std::size_t ProbePlan::size() const {
    std::size_t n = 0;
    for (const auto& [_, jobs] : hosts) n += jobs.size();
    return n;
}

std::vector<Job> ProbePlan::flattened() const {
    std::vector<Job> out;
    for (const auto& [_, jobs] : hosts) out.insert(out.end(), jobs.begin(), jobs.end());
    std::ranges::stable_sort(out, [](const Job& a, const Job& b) {
        return std::tie(a.offset, a.endpoint.address) < std::tie(b.offset, b.endpoint.address);
    });
    return out;
}

ProbePlan schedule(const std::vector<Endpoint>& targets, const ScanPolicy& policy) {
    ProbePlan plan;
    plan.interval = policy.effective_interval();
    for (const auto& ep : targets) {
        auto& jobs = plan.hosts[ep.address];
        auto push = [&](JobKind k, SuiteSetName s) {
            jobs.push_back({ep, k, s, plan.interval * static_cast<Millis::rep>(jobs.size())});
        };
        for (auto set : kBatteryOrder) push(JobKind::handshake, set);
        if (policy.tls13_probe && ep.transport == Transport::tcp) push(JobKind::tls13, SuiteSetName::REC);
    }
    return plan;
}

// ---------------------------------------------------------------- execution

ValidationVerdict app_exchange(Channel& ch, Protocol p, Millis timeout) {
    auto complete = [p](ByteView b) { return frame_complete(p, b); };
    std::optional<ValidationVerdict> first;
    bool channel_open = true;
    try {
        for (const auto& msg : build_probe_sequence(p)) {
            ch.send(msg.payload);
            if (!msg.expects_reply) continue;
            const auto reply = read_until(ch, complete, timeout);
            auto v = validate_response(p, reply);
            if (!first) first = v;
            if (reply.empty()) {
                channel_open = false;
                break;
            }
            if (!v.valid) break;
        }
        if (first && !first->valid && first->reason == VerdictReason::empty && channel_open) {
            if (auto fb = build_fallback_probe(p)) {
                ch.send(fb->payload);
                auto v = validate_response(p, read_until(ch, complete, timeout));
                if (v.valid) first = v;
            }
        }
    } catch (const AuditError& e) {
        if (!first) first = ValidationVerdict::bad(VerdictReason::empty, e.what());
    }
    return first.value_or(ValidationVerdict::bad(VerdictReason::empty, "no reply"));
}

std::vector<Finding> access_findings(const std::vector<AccessResult>& access) {
    std::vector<Finding> out;
    for (const auto& a : access) {
        std::string ev = "check=" + a.check + " endpoint=" + a.endpoint.to_string();
        for (int code : a.verdict.evidence) ev += " code=" + std::to_string(code);
        if (a.verdict.status == AccessStatus::open)
            out.push_back(make_finding(a.deployment_id, Check::no_access_control, ev));
        else if (a.verdict.status == AccessStatus::default_credentials)
            out.push_back(make_finding(a.deployment_id, Check::default_credentials, ev));
    }
    return out;
}

namespace {

bool access_checked(Protocol p) {
    return p == Protocol::AMQP || p == Protocol::MQTT || p == Protocol::FoxPlatform;
}

struct EndpointState {
    ProbeRecord record;
    std::vector<HandshakeResult> handshakes;
    std::optional<ValidationVerdict> tls_verdict;
    bool started = false;
    bool skip = false;
};

struct HostOutcome {
    std::vector<ProbeRecord> records;
    std::vector<AccessResult> access;
    std::vector<ContactRow> contacts;
    std::vector<JobLogEntry> jobs;
};

class HostRunner {
public:
    HostRunner(Prober& prober, const ScanInputs& in, Millis interval)
        : prober_(prober), in_(in), interval_(interval) {}

    HostOutcome run(Ipv4 host, const std::vector<Job>& jobs) {
        HostOutcome out;
        std::map<Endpoint, EndpointState> states;
        std::vector<Endpoint> order;
        for (const auto& job : jobs) {
            auto [it, fresh] = states.try_emplace(job.endpoint);
            if (fresh) order.push_back(job.endpoint);
            auto& st = it->second;
            JobLogEntry log{job, {}, {}, false, {}};
            if (st.skip) {
                log.skipped = true;
                log.started = log.finished = Clock::now();
                out.jobs.push_back(std::move(log));
                continue;
            }
            pace();
            log.started = Clock::now();
            try {
                run_job(job, st, log);
            } catch (const std::exception& e) {
                log.note = e.what();
                st.skip = true;
            }
            log.finished = Clock::now();
            out.jobs.push_back(std::move(log));
        }

        for (const auto& ep : order) out.records.push_back(finish(ep, states[ep]));
        run_access(host, out);
        return out;
    }

private:
    void pace() {
        if (last_start_ && interval_ > Millis{0}) {
            const auto due = *last_start_ + interval_;
            if (Clock::now() < due) std::this_thread::sleep_until(due);
        }
        last_start_ = Clock::now();
    }

    AppProbe app_for(const Endpoint& ep, std::optional<ValidationVerdict>& sink) const {
        const Millis t = in_.policy.timeouts.read;
        return [&sink, p = ep.protocol, t](Channel& ch) { sink = app_exchange(ch, p, t); };
    }

    void run_job(const Job& job, EndpointState& st, JobLogEntry& log) {
        const Endpoint& ep = job.endpoint;
        if (!st.started) {
            st.started = true;
            st.record.endpoint = ep;
            Bytes udp_payload;
            if (ep.transport == Transport::udp) {
                if (ep.variant == Variant::secure) {
                    tls::ClientHelloSpec hello;
                    hello.suites = suite_set(SuiteSetName::REC).codes();
                    hello.max_version = tls::kDtls12;
                    udp_payload = tls::encode_client_hello_record(hello);
                } else {
                    udp_payload = build_probe(ep.protocol).payload;
                }
            }
            st.record.transport = prober_.probe_transport(ep, udp_payload);
            if (st.record.transport != TransportResult::alive) {
                st.skip = true;
                log.note = "transport " + std::string(to_string(st.record.transport));
                return;
            }
            if (ep.variant == Variant::standard) {
                std::optional<ValidationVerdict> v;
                prober_.plaintext_session(ep, app_for(ep, v));
                st.record.plaintext_verdict = v;
                if (v && v->valid) {
                    st.skip = true;
                    log.note = "plaintext valid";
                    return;
                }
            }
        }
        if (job.kind == JobKind::tls13) {
            st.record.tls13 = prober_.probe_tls13(ep);
            return;
        }
        const bool want_app = !st.tls_verdict.has_value();
        std::optional<ValidationVerdict> v;
        const auto app = app_for(ep, v);
        auto r = prober_.handshake(ep, job.suite_set, want_app ? &app : nullptr);
        if (v) st.tls_verdict = v;
        log.note = std::string(to_string(r.outcome));
        st.handshakes.push_back(std::move(r));
    }

    ProbeRecord finish(const Endpoint& ep, EndpointState& st) {
        ProbeRecord r = std::move(st.record);
        r.endpoint = ep;
        if (!st.handshakes.empty()) {
            SuiteBattery b;
            b.results = std::move(st.handshakes);
            r.battery = std::move(b);
            r.app_verdict = st.tls_verdict;
        } else {
            r.app_verdict = r.plaintext_verdict;
        }
        r.asn = in_.as_map ? in_.as_map->lookup(ep.address) : 0;
        r.stage = classify_stage(r);
        r.probed_at = iso_now();
        return r;
    }

    void run_access(Ipv4 host, HostOutcome& out) {
        std::vector<ProbeRecord> copy = out.records;
        for (const auto& d : dedup(std::move(copy))) {
            if (!access_checked(d.protocol)) continue;
            const ProbeRecord* rec = d.tls_record();
            const bool tls = rec != nullptr;
            if (!rec) rec = &d.records.front();
            const Endpoint ep = rec->endpoint;
            Job job{ep, JobKind::access, SuiteSetName::REC, Millis{0}};
            JobLogEntry log{job, {}, {}, false, {}};
            pace();
            log.started = Clock::now();

            const Millis t = in_.policy.timeouts.read;
            ChannelFactory open = [this, ep, tls] { return prober_.open_session(ep, tls); };
            AccessResult res{d.id, ep, {}, {}};
            std::string payload;
            switch (d.protocol) {
                case Protocol::AMQP:
                    res.check = "amqp_default_credentials";
                    res.verdict = amqp_default_credentials(open, t);
                    break;
                case Protocol::MQTT:
                    res.check = "mqtt_open_access";
                    res.verdict = mqtt_open_access(open, in_.policy.subscribe_root, in_.policy.subscription_limits(), t,
                                                   [&](std::string_view s) { payload.append(s); });
                    break;
                default:
                    res.check = "http_login_check";
                    res.verdict = http_login_check(open, t);
                    break;
            }
            if (!payload.empty()) {
                const auto resolver = in_.resolver ? in_.resolver : system_mx_resolver();
                for (auto& c : extract_contacts(payload, resolver)) out.contacts.push_back({c.address, host, c.mx_verified});
            }
            log.finished = Clock::now();
            log.note = std::string(to_string(res.verdict.status));
            out.jobs.push_back(std::move(log));
            out.access.push_back(std::move(res));
        }
    }

    Prober& prober_;
    const ScanInputs& in_;
    Millis interval_;
    std::optional<Clock::time_point> last_start_;
};

std::vector<CertificateRecord> leaf_certificates(const std::vector<ProbeRecord>& records) {
    std::vector<CertificateRecord> out;
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!r.battery) continue;
        const auto& chain = r.chain();
        if (chain.empty()) continue;
        try {
            auto c = parse_certificate(chain.front());
            if (seen.insert(c.fingerprint).second) out.push_back(std::move(c));
        } catch (const AuditError&) {
        }
    }
    return out;
}

Assessment grade(const std::vector<Deployment>& deployments, const std::vector<ProbeRecord>& records,
                 const std::vector<AccessResult>& access, const TrustStores& stores, TimePoint now,
                 const std::vector<ReusePattern>& allow) {
    const auto units = graded_units(deployments, records);
    AssessmentInput ai;
    ai.trust_stores = &stores;
    ai.now = now;
    ai.reuse_allowlist = allow;
    auto a = assess(units, ai);
    auto extra = access_findings(access);
    a.findings.insert(a.findings.end(), extra.begin(), extra.end());
    return a;
}

}  // namespace

ScanResult execute(const ProbePlan& plan, const ScanInputs& in) {
    in.policy.validate();
    if (!in.identity) throw AuditError("execute needs a client identity");
    ScanResult result;
    result.started = iso_now();

    Dialer dialer(in.policy.blocklist, in.policy.timeouts);
    Prober prober(dialer, *in.identity);

    std::vector<std::pair<Ipv4, const std::vector<Job>*>> hosts;
    for (const auto& [h, jobs] : plan.hosts) hosts.emplace_back(h, &jobs);
    std::vector<HostOutcome> outcomes(hosts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < hosts.size(); i = next++) {
            HostRunner runner(prober, in, plan.interval);
            outcomes[i] = runner.run(hosts[i].first, *hosts[i].second);
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::min(in.policy.concurrency, std::max<std::size_t>(hosts.size(), 1));
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    }

    for (auto& o : outcomes) {
        std::ranges::move(o.records, std::back_inserter(result.records));
        std::ranges::move(o.access, std::back_inserter(result.access));
        std::ranges::move(o.contacts, std::back_inserter(result.contacts));
        std::ranges::move(o.jobs, std::back_inserter(result.jobs));
    }
    std::ranges::sort(result.records, {}, &ProbeRecord::endpoint);

    result.deployments = dedup(result.records);
    TrustStores empty;
    const TrustStores& stores = in.trust_stores ? *in.trust_stores : empty;
    const TimePoint now = in.now != TimePoint{} ? in.now
                                                : std::chrono::time_point_cast<std::chrono::seconds>(
                                                      std::chrono::system_clock::now());
    result.assessment = grade(result.deployments, result.records, result.access, stores, now,
                              in.policy.reuse_allowlist);
    result.clusters = cluster_certificates(leaf_certificates(result.records));
    result.dialer_contacts = dialer.contacts();
    result.finished = iso_now();
    return result;
}

// ---------------------------------------------------------------- reports

namespace {

json access_to_json(const AccessResult& a) {
    return {{"deployment_id", a.deployment_id},
            {"endpoint", to_json(a.endpoint)},
            {"check", a.check},
            {"status", to_string(a.verdict.status)},
            {"evidence", a.verdict.evidence},
            {"payload_bytes_read", a.verdict.payload_bytes_read},
            {"messages_seen", a.verdict.messages_seen},
            {"detail", a.verdict.detail}};
}

AccessResult access_from_json(const json& j) {
    AccessResult a;
    a.deployment_id = j.at("deployment_id").get<std::string>();
    a.endpoint = endpoint_from_json(j.at("endpoint"));
    a.check = j.at("check").get<std::string>();
    a.verdict.status = parse_access_status(j.at("status").get<std::string>());
    a.verdict.evidence = j.value("evidence", std::vector<int>{});
    a.verdict.payload_bytes_read = j.value("payload_bytes_read", std::size_t{0});
    a.verdict.messages_seen = j.value("messages_seen", std::size_t{0});
    a.verdict.detail = j.value("detail", "");
    return a;
}

template <typename T, typename F>
std::string jsonl(const std::vector<T>& items, F f) {
    std::string out;
    for (const auto& i : items) out += f(i).dump() + '\n';
    return out;
}

std::string fmt_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

json cluster_json(const ClusterReport& c) {
    json j = to_json(c);
    j["vectorizer"] = {{"ngram_range", {1, 3}}, {"tf", "raw count"}, {"idf", "ln(N/df)+1"}, {"norm", "l2"}};
    j["graph"] = {{"top_k", 500}, {"threshold", 0.5}, {"truncation", "per row, then symmetrized by union"}};
    j["dbscan"] = {{"eps", 0.8}, {"min_points", 3}, {"metric", "1 - cosine"}};
    j["manual_review_required"] = !c.clusters.empty();
    return j;
}

void write_derived(const std::filesystem::path& dir, const std::vector<Deployment>& deployments,
                   const std::vector<ProbeRecord>& records, const Assessment& a, const ClusterReport& clusters,
                   const AsMap* as_map) {
    write_file(dir / "deployments.jsonl", jsonl(deployments, [&](const Deployment& d) {
                   json j = to_json(d);
                   for (const auto& g : a.grades) {
                       if (g.id != d.id) continue;
                       if (g.battery_class) j["battery_class"] = to_string(*g.battery_class);
                       if (g.client_auth) j["client_auth"] = to_string(*g.client_auth);
                       if (g.trust_anchor) j["trust_anchor"] = to_string(*g.trust_anchor);
                       if (g.reuse) j["reuse"] = to_string(*g.reuse);
                       if (g.version) {
                           j["tls13_capable"] = g.version->tls13_capable;
                           if (g.version->max_version) j["max_version"] = tls::version_name(*g.version->max_version);
                       }
                   }
                   return j;
               }));
    write_file(dir / "summary.csv", summary_csv(deployments, records, as_map));
    write_file(dir / "findings.csv", findings_csv(a.findings));
    write_file(dir / "clusters.json", cluster_json(clusters).dump(2) + '\n');
}

std::string summary_table(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) rows.push_back(split_csv_line(line));
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        width.resize(std::max(width.size(), r.size()));
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::string out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            out += r[i];
            if (i + 1 < r.size()) out += std::string(width[i] - r[i].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

}  // namespace

std::string summary_csv(const std::vector<Deployment>& deployments, const std::vector<ProbeRecord>& records,
                        const AsMap* as_map) {
    auto rows = aggregate(deployments, as_map);
    add_funnel_counts(rows, records);
    std::string out =
        "protocol,transport,tls_valid,auth_ok,tls_success,valid,deployments,tls_deployments,pct_tls,distinct_as,"
        "distinct_cn,adoption_group\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.protocol));
        for (auto n : r.funnel) out += ',' + std::to_string(n);
        out += ',' + std::to_string(r.deployments) + ',' + std::to_string(r.tls_deployments) + ',' + fmt_pct(r.pct_tls) +
               ',' + std::to_string(r.distinct_as) + ',' + std::to_string(r.distinct_cn) + ',' +
               std::string(to_string(r.group)) + '\n';
    }
    return out;
}

std::string findings_csv(const std::vector<Finding>& findings) {
    std::string out = "deployment_id,check,severity,evidence\n";
    for (const auto& f : findings)
        out += csv_field(f.deployment_id) + ',' + std::string(to_string(f.check)) + ',' +
               std::string(to_string(f.severity)) + ',' + csv_field(f.evidence) + '\n';
    return out;
}

void emit_report(const ScanResult& r, const ScanPolicy& policy, const std::filesystem::path& dir,
                 const AsMap* as_map) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw AuditError("cannot create " + dir.string() + ": " + ec.message());

    write_file(dir / "records.jsonl", jsonl(r.records, [](const ProbeRecord& p) { return to_json(p); }));
    std::string hs;
    for (const auto& rec : r.records) {
        if (!rec.battery) continue;
        for (const auto& h : rec.battery->results) {
            json j = to_json(h);
            j["endpoint"] = rec.endpoint.to_string();
            hs += j.dump() + '\n';
        }
    }
    write_file(dir / "handshakes.jsonl", hs);
    write_file(dir / "access.jsonl", jsonl(r.access, access_to_json));

    const auto t0 = r.jobs.empty() ? Clock::time_point{}
                                   : std::ranges::min(r.jobs, {}, &JobLogEntry::started).started;
    auto rel = [&](Clock::time_point t) { return std::chrono::duration_cast<Millis>(t - t0).count(); };
    write_file(dir / "jobs.jsonl", jsonl(r.jobs, [&](const JobLogEntry& e) {
                   return json{{"host", e.job.endpoint.address.to_string()},
                               {"endpoint", e.job.endpoint.to_string()},
                               {"kind", to_string(e.job.kind)},
                               {"suite_set", e.job.kind == JobKind::handshake ? json(to_string(e.job.suite_set))
                                                                              : json(nullptr)},
                               {"planned_offset_ms", e.job.offset.count()},
                               {"start_ms", rel(e.started)},
                               {"end_ms", rel(e.finished)},
                               {"skipped", e.skipped},
                               {"note", e.note}};
               }));

    std::string contacts = "address,source_host,mx_verified\n";
    for (const auto& c : r.contacts)
        contacts += csv_field(c.address) + ',' + c.source.to_string() + ',' + (c.mx_verified ? "true" : "false") + '\n';
    write_file(dir / "contacts.csv", contacts);

    write_derived(dir, r.deployments, r.records, r.assessment, r.clusters, as_map);

    json errors = json::array();
    for (const auto& e : r.row_errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    json meta = {{"tool", "iiot-audit"},
                 {"version", "1.0.0"},
                 {"started", r.started},
                 {"finished", r.finished},
                 {"assessed_at", r.finished},
                 {"policy", to_json(policy)},
                 {"records", r.records.size()},
                 {"deployments", r.deployments.size()},
                 {"findings", r.assessment.findings.size()},
                 {"row_errors", errors}};
    write_file(dir / "metadata.json", meta.dump(2) + '\n');
}

std::string rebuild_report(const std::filesystem::path& dir) {
    std::vector<ProbeRecord> records;
    std::istringstream rin(read_file(dir / "records.jsonl"));
    for (std::string line; std::getline(rin, line);)
        if (!line.empty()) records.push_back(record_from_json(json::parse(line)));

    std::vector<AccessResult> access;
    if (std::filesystem::exists(dir / "access.jsonl")) {
        std::istringstream ain(read_file(dir / "access.jsonl"));
        for (std::string line; std::getline(ain, line);)
            if (!line.empty()) access.push_back(access_from_json(json::parse(line)));
    }

    const json meta = json::parse(read_file(dir / "metadata.json"));
    const auto policy = policy_from_json(meta.value("policy", json::object()));
    TrustStores stores;
    if (policy.trust_store_dir && std::filesystem::exists(*policy.trust_store_dir))
        stores = TrustStores::load_dir(*policy.trust_store_dir);
    const TimePoint now = parse_time(meta.at("assessed_at").get<std::string>());

    auto deployments = dedup(records);
    auto a = grade(deployments, records, access, stores, now, policy.reuse_allowlist);
    write_derived(dir, deployments, records, a, cluster_certificates(leaf_certificates(records)), nullptr);
    return summary_table(summary_csv(deployments, records)) + std::to_string(deployments.size()) + " deployments, " +
           std::to_string(a.findings.size()) + " findings\n";
}

}  // namespace iiot

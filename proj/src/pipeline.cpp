#include "iiot/pipeline.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "iiot/x509.hpp"

namespace iiot {

using nlohmann::json;

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::none: return "none";
        case Stage::transport: return "transport";
        case Stage::tls_valid: return "tls_valid";
        case Stage::auth_ok: return "auth_ok";
        case Stage::tls_success: return "tls_success";
        case Stage::valid: return "valid";
    }
    return "none";
}

Stage parse_stage(std::string_view s) {
    for (auto st : {Stage::none, Stage::transport, Stage::tls_valid, Stage::auth_ok, Stage::tls_success, Stage::valid})
        if (to_string(st) == s) return st;
    throw AuditError("invalid stage: " + std::string(s));
}

std::string_view to_string(Adoption a) {
    switch (a) {
        case Adoption::plaintext_only: return "plaintext_only";
        case Adoption::tls_only: return "tls_only";
        case Adoption::optional_tls: return "optional_tls";
    }
    return "plaintext_only";
}

const std::vector<Bytes>& ProbeRecord::chain() const {
    static const std::vector<Bytes> none;
    if (!battery) return none;
    for (const auto& r : battery->results)
        if (r.outcome == HandshakeOutcome::accepted && !r.chain.empty()) return r.chain;
    return none;
}

std::string ProbeRecord::leaf_fingerprint() const {
    const auto& c = chain();
    return c.empty() ? std::string{} : sha256_hex(c.front());
}

Stage classify_stage(const ProbeRecord& r) {
    if (r.transport != TransportResult::alive) return Stage::none;
    if (!r.battery) return r.app_verdict && r.app_verdict->valid ? Stage::valid : Stage::transport;
    const auto& results = r.battery->results;
    if (!r.battery->any_server_hello()) return Stage::transport;
    const bool auth_ok = std::ranges::any_of(results, [](const HandshakeResult& h) {
        return h.outcome == HandshakeOutcome::accepted && !h.rejected_after_client_cert;
    });
    if (!auth_ok) return Stage::tls_valid;
    if (!r.battery->any_completed()) return Stage::auth_ok;
    return r.app_verdict && r.app_verdict->valid ? Stage::valid : Stage::tls_success;
}

const ProbeRecord* Deployment::tls_record() const {
    for (const auto& r : records)
        if (r.tls_probed()) return &r;
    return nullptr;
}

std::vector<Deployment> dedup(std::vector<ProbeRecord> records) {
    std::ranges::sort(records, {}, &ProbeRecord::endpoint);
    // host+protocol -> records at the valid stage
    std::map<std::pair<Ipv4, Protocol>, std::vector<ProbeRecord>> groups;
    for (auto& r : records)
        if (r.stage == Stage::valid) groups[{r.endpoint.address, r.endpoint.protocol}].push_back(std::move(r));

    std::vector<Deployment> out;
    for (auto& [key, group] : groups) {
        std::vector<Deployment> tls;
        std::vector<ProbeRecord> plain;
        for (auto& r : group) {
            if (!r.tls_probed()) {
                plain.push_back(std::move(r));
                continue;
            }
            const auto fp = r.leaf_fingerprint();
            const auto outcomes = r.battery->outcome_vector();
            auto same = std::ranges::find_if(tls, [&](const Deployment& d) {
                const auto* first = d.tls_record();
                return first->leaf_fingerprint() == fp && first->battery->outcome_vector() == outcomes;
            });
            if (same == tls.end()) {
                Deployment d;
                d.host = key.first;
                d.protocol = key.second;
                d.adoption = Adoption::tls_only;
                d.asn = r.asn;
                tls.push_back(std::move(d));
                same = std::prev(tls.end());
            }
            if (!fp.empty()) same->cert_fingerprints.insert(fp);
            same->records.push_back(std::move(r));
        }
        if (tls.empty()) {
            Deployment d;
            d.host = key.first;
            d.protocol = key.second;
            d.adoption = Adoption::plaintext_only;
            d.asn = plain.front().asn;
            d.records = std::move(plain);
            tls.push_back(std::move(d));
        } else if (!plain.empty()) {
            auto& first = tls.front();
            first.adoption = Adoption::optional_tls;
            for (auto& r : plain) first.records.push_back(std::move(r));
            std::ranges::sort(first.records, {}, &ProbeRecord::endpoint);
        }
        for (std::size_t i = 0; i < tls.size(); ++i) {
            tls[i].id = key.first.to_string() + "/" + std::string(to_string(key.second)) + "/" + std::to_string(i + 1);
            out.push_back(std::move(tls[i]));
        }
    }
    return out;
}

std::vector<ProbeRecord> expand(const std::vector<Deployment>& deployments) {
    std::vector<ProbeRecord> out;
    for (const auto& d : deployments) out.insert(out.end(), d.records.begin(), d.records.end());
    return out;
}

std::vector<ProtocolSummary> aggregate(const std::vector<Deployment>& deployments, const AsMap* as_map) {
    std::vector<ProtocolSummary> rows;
    for (auto p : kAllProtocols) {
        ProtocolSummary s;
        s.protocol = p;
        std::set<std::uint32_t> ases;
        std::set<std::string> cns;
        for (const auto& d : deployments) {
            if (d.protocol != p) continue;
            ++s.deployments;
            if (!d.tls()) continue;
            ++s.tls_deployments;
            ases.insert(as_map ? as_map->lookup(d.host) : d.asn);
            if (const auto* r = d.tls_record(); r && !r->chain().empty()) {
                try {
                    cns.insert(parse_certificate(r->chain().front()).common_name);
                } catch (const AuditError&) {
                    // unparsable leaf: counted in neither CN nor fingerprint sets
                }
            }
        }
        s.pct_tls = s.deployments ? 100.0 * static_cast<double>(s.tls_deployments) / static_cast<double>(s.deployments)
                                  : 0.0;
        s.distinct_as = ases.size();
        s.distinct_cn = cns.size();
        s.group = classify_adoption_group(s.tls_deployments, s.pct_tls);
        rows.push_back(s);
    }
    return rows;
}

void add_funnel_counts(std::vector<ProtocolSummary>& rows, const std::vector<ProbeRecord>& records) {
    for (auto& row : rows) {
        row.funnel.fill(0);
        for (const auto& r : records) {
            if (r.endpoint.protocol != row.protocol || !r.tls_probed()) continue;
            for (std::size_t k = 0; k < kFunnelStages.size(); ++k)
                if (r.stage >= kFunnelStages[k]) ++row.funnel[k];
        }
    }
}

// ---------------------------------------------------------------- JSON

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string hex16(std::uint16_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    return {'0', 'x', digits[v >> 12], digits[(v >> 8) & 15], digits[(v >> 4) & 15], digits[v & 15]};
}

}  // namespace

json to_json(const Endpoint& e) {
    return {{"address", e.address.to_string()},
            {"port", e.port},
            {"protocol", to_string(e.protocol)},
            {"variant", to_string(e.variant)},
            {"transport", to_string(e.transport)}};
}

Endpoint endpoint_from_json(const json& j) {
    Endpoint e;
    e.address = Ipv4::parse(j.at("address").get<std::string>());
    e.port = j.at("port").get<std::uint16_t>();
    e.protocol = parse_protocol(j.at("protocol").get<std::string>());
    e.variant = parse_variant(j.at("variant").get<std::string>());
    e.transport = j.at("transport").get<std::string>() == "UDP" || j.at("transport").get<std::string>() == "udp"
                      ? Transport::udp
                      : Transport::tcp;
    return e;
}

json to_json(const HandshakeResult& r) {
    json chain = json::array();
    for (const auto& c : r.chain) chain.push_back(base64_encode(c));
    return {
        {"suite_set", to_string(r.suite_set)},
        {"outcome", to_string(r.outcome)},
        {"negotiated_version", r.negotiated_version ? json(tls::version_name(*r.negotiated_version)) : json(nullptr)},
        {"negotiated_suite", r.negotiated_suite ? json(suite_name(*r.negotiated_suite)) : json(nullptr)},
        {"negotiated_suite_code", r.negotiated_suite ? json(hex16(*r.negotiated_suite)) : json(nullptr)},
        {"server_random", r.server_random ? json(to_hex(*r.server_random)) : json(nullptr)},
        {"downgrade_sentinel", r.server_random ? json(r.downgrade_sentinel()) : json(nullptr)},
        {"chain", chain},
        {"client_cert_requested", r.client_cert_requested},
        {"rejected_after_client_cert", r.rejected_after_client_cert},
        {"server_hello_valid", r.server_hello_valid},
        {"completed", r.completed},
        {"error", r.error},
        {"completion_error", r.completion_error},
    };
}

HandshakeResult handshake_from_json(const json& j) {
    HandshakeResult r;
    r.suite_set = parse_suite_set(j.at("suite_set").get<std::string>());
    r.outcome = parse_handshake_outcome(j.at("outcome").get<std::string>());
    if (!j.at("negotiated_version").is_null()) {
        auto v = tls::parse_version_name(j.at("negotiated_version").get<std::string>());
        if (!v) throw AuditError("unknown version name in record");
        r.negotiated_version = *v;
    }
    if (!j.at("negotiated_suite_code").is_null())
        r.negotiated_suite = static_cast<std::uint16_t>(std::stoul(j.at("negotiated_suite_code").get<std::string>(), nullptr, 16));
    if (!j.at("server_random").is_null()) {
        auto b = from_hex(j.at("server_random").get<std::string>());
        if (b.size() != 32) throw AuditError("server_random must be 32 bytes");
        tls::Random rnd{};
        std::ranges::copy(b, rnd.begin());
        r.server_random = rnd;
    }
    for (const auto& c : j.at("chain")) r.chain.push_back(base64_decode(c.get<std::string>()));
    r.client_cert_requested = j.at("client_cert_requested").get<bool>();
    r.rejected_after_client_cert = j.at("rejected_after_client_cert").get<bool>();
    r.server_hello_valid = j.at("server_hello_valid").get<bool>();
    r.completed = j.at("completed").get<bool>();
    r.error = j.value("error", "");
    r.completion_error = j.value("completion_error", "");
    return r;
}

json to_json(const ValidationVerdict& v) {
    return {{"valid", v.valid},
            {"reason", to_string(v.reason)},
            {"code", opt(v.code)},
            {"detail", v.detail},
            {"truncated", v.truncated}};
}

ValidationVerdict verdict_from_json(const json& j) {
    ValidationVerdict v;
    v.valid = j.at("valid").get<bool>();
    v.reason = parse_verdict_reason(j.at("reason").get<std::string>());
    if (!j.at("code").is_null()) v.code = j.at("code").get<int>();
    v.detail = j.value("detail", "");
    v.truncated = j.value("truncated", false);
    return v;
}

json to_json(const ProbeRecord& r) {
    json j = {{"endpoint", to_json(r.endpoint)},
              {"transport", to_string(r.transport)},
              {"battery", nullptr},
              {"app_verdict", r.app_verdict ? to_json(*r.app_verdict) : json(nullptr)},
              {"plaintext_verdict", r.plaintext_verdict ? to_json(*r.plaintext_verdict) : json(nullptr)},
              {"tls13", opt(r.tls13)},
              {"asn", r.asn},
              {"stage", to_string(r.stage)},
              {"probed_at", r.probed_at}};
    if (r.battery) {
        json b = json::array();
        for (const auto& h : r.battery->results) b.push_back(to_json(h));
        j["battery"] = b;
        j["client_auth"] = to_string(classify_client_auth(*r.battery));
    }
    return j;
}

ProbeRecord record_from_json(const json& j) {
    ProbeRecord r;
    r.endpoint = endpoint_from_json(j.at("endpoint"));
    r.transport = parse_transport_result(j.at("transport").get<std::string>());
    if (!j.at("battery").is_null()) {
        SuiteBattery b;
        for (const auto& h : j.at("battery")) b.results.push_back(handshake_from_json(h));
        r.battery = std::move(b);
    }
    if (!j.at("app_verdict").is_null()) r.app_verdict = verdict_from_json(j.at("app_verdict"));
    if (!j.at("plaintext_verdict").is_null()) r.plaintext_verdict = verdict_from_json(j.at("plaintext_verdict"));
    if (!j.at("tls13").is_null()) r.tls13 = j.at("tls13").get<bool>();
    r.asn = j.value("asn", 0u);
    r.stage = parse_stage(j.at("stage").get<std::string>());
    r.probed_at = j.value("probed_at", "");
    return r;
}

json to_json(const Deployment& d) {
    json endpoints = json::array();
    for (const auto& r : d.records) endpoints.push_back(r.endpoint.to_string());
    return {{"id", d.id},
            {"host", d.host.to_string()},
            {"protocol", to_string(d.protocol)},
            {"adoption", to_string(d.adoption)},
            {"asn", d.asn},
            {"endpoints", endpoints},
            {"cert_fingerprints", d.cert_fingerprints},
            {"merge_predicate", "leaf-sha256 + battery-outcome-vector"}};
}

}  // namespace iiot

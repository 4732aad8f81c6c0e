#include "iiot/assessor.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace iiot {

namespace {

template <typename... Kv>
std::string evidence(const Kv&... kv) {
    std::string out;
    auto add = [&](const auto& pair) {
        if (!out.empty()) out += ';';
        out += pair.first;
        out += '=';
        out += pair.second;
    };
    (add(kv), ...);
    return out;
}

std::pair<std::string, std::string> kv(std::string k, std::string v) { return {std::move(k), std::move(v)}; }

}  // namespace

std::string_view to_string(Check c) {
    switch (c) {
        case Check::deprecated_version: return "deprecated_version";
        case Check::no_rec_suite: return "no_rec_suite";
        case Check::weak_cipher_accepted: return "weak_cipher_accepted";
        case Check::weak_mac_accepted: return "weak_mac_accepted";
        case Check::insecure_suite_accepted: return "insecure_suite_accepted";
        case Check::expired_cert: return "expired_cert";
        case Check::over_long_lifetime: return "over_long_lifetime";
        case Check::short_key: return "short_key";
        case Check::weak_sig_hash: return "weak_sig_hash";
        case Check::cert_reuse_intra_as: return "cert_reuse_intra_as";
        case Check::cert_reuse_inter_as: return "cert_reuse_inter_as";
        case Check::no_access_control: return "no_access_control";
        case Check::default_credentials: return "default_credentials";
    }
    return "";
}

Check parse_check(std::string_view s) {
    for (auto c : kAllChecks)
        if (to_string(c) == s) return c;
    throw AuditError("unknown check: " + std::string(s));
}

std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::info: return "info";
        case Severity::warn: return "warn";
        case Severity::critical: return "critical";
    }
    return "";
}

Severity severity_of(Check c) {
    switch (c) {
        case Check::deprecated_version:
        case Check::weak_cipher_accepted:
        case Check::insecure_suite_accepted:
        case Check::short_key:
        case Check::cert_reuse_inter_as:
        case Check::no_access_control:
        case Check::default_credentials: return Severity::critical;
        case Check::over_long_lifetime: return Severity::info;
        default: return Severity::warn;
    }
}

Finding make_finding(std::string deployment_id, Check check, std::string ev) {
    return Finding{std::move(deployment_id), check, severity_of(check), std::move(ev)};
}

// ---------------------------------------------------------------- versions

VersionAssessment check_version(const SuiteBattery& battery, const std::string& id) {
    VersionAssessment a;
    for (const auto& r : battery.results) {
        if (r.outcome != HandshakeOutcome::accepted || !r.negotiated_version) continue;
        const auto v = *r.negotiated_version;
        if (!a.max_version || tls::version_rank(v) > tls::version_rank(*a.max_version)) a.max_version = v;
        if ((v == tls::kTls12 || v == tls::kDtls12) && r.downgrade_sentinel()) a.tls13_capable = true;
    }
    if (!a.max_version) throw AuditError("version check needs an accepted handshake");
    if (tls::version_rank(*a.max_version) < tls::version_rank(tls::kTls12))
        a.finding = make_finding(id, Check::deprecated_version,
                                 evidence(kv("max_version", tls::version_name(*a.max_version))));
    return a;
}

// ---------------------------------------------------------------- ciphers

std::string_view to_string(BatteryClass c) {
    switch (c) {
        case BatteryClass::secure: return "secure";
        case BatteryClass::denies_harmless: return "denies_harmless";
        case BatteryClass::insecure_accepting: return "insecure_accepting";
    }
    return "";
}

namespace {

void require_complete(const SuiteBattery& b) {
    if (!b.complete()) throw AuditError("cipher checks need all four handshakes");
}

std::optional<SuiteWeakness> comp_weakness(const SuiteBattery& b) {
    const auto& comp = b.at(SuiteSetName::COMP);
    if (comp.outcome != HandshakeOutcome::accepted || !comp.negotiated_suite) return std::nullopt;
    return classify_suite(*comp.negotiated_suite);
}

}  // namespace

BatteryClass classify_battery(const SuiteBattery& b) {
    require_complete(b);
    const auto weak = comp_weakness(b);
    if (b.accepted(SuiteSetName::INS) || (weak && weak->any())) return BatteryClass::insecure_accepting;
    if (b.accepted(SuiteSetName::REC) && b.accepted(SuiteSetName::COMP)) return BatteryClass::secure;
    return BatteryClass::denies_harmless;
}

std::vector<Finding> check_ciphers(const SuiteBattery& b, const std::string& id) {
    require_complete(b);
    std::vector<Finding> out;
    if (!b.accepted(SuiteSetName::REC))
        out.push_back(make_finding(id, Check::no_rec_suite,
                                   evidence(kv("rec_outcome", std::string(to_string(b.at(SuiteSetName::REC).outcome))))));
    if (auto weak = comp_weakness(b); weak && weak->any()) {
        const auto suite = suite_name(*b.at(SuiteSetName::COMP).negotiated_suite);
        if (weak->weak_cipher)
            out.push_back(make_finding(id, Check::weak_cipher_accepted, evidence(kv("set", "COMP"), kv("suite", suite))));
        if (weak->weak_mac)
            out.push_back(make_finding(id, Check::weak_mac_accepted, evidence(kv("set", "COMP"), kv("suite", suite))));
    }
    if (b.accepted(SuiteSetName::INS)) {
        const auto& ins = b.at(SuiteSetName::INS);
        out.push_back(make_finding(id, Check::insecure_suite_accepted,
                                   evidence(kv("set", "INS"), kv("suite", suite_name(*ins.negotiated_suite)))));
    }
    return out;
}

// ---------------------------------------------------------------- certificates

std::string_view to_string(TrustAnchor t) {
    switch (t) {
        case TrustAnchor::public_ca: return "public_ca";
        case TrustAnchor::private_ca: return "private_ca";
        case TrustAnchor::self_signed: return "self_signed";
    }
    return "";
}

TrustAnchor classify_trust_anchor(const std::vector<Bytes>& chain, const TrustStores& stores) {
    if (chain.empty()) throw AuditError("trust anchor needs a certificate");
    if (stores.validating_store(chain)) return TrustAnchor::public_ca;
    const auto leaf = parse_certificate(chain.front());
    return leaf.self_issued() ? TrustAnchor::self_signed : TrustAnchor::private_ca;
}

std::optional<std::chrono::seconds> lifetime_cap(TimePoint nb) {
    using namespace std::chrono;
    const auto day = floor<days>(nb);
    const year_month_day ymd{day};
    if (day >= sys_days{2020y / September / 1}) return days{398};
    if (day >= sys_days{2018y / February / 1}) return days{825};
    if (day >= sys_days{2016y / June / 1}) {
        // 39 calendar months, clamping the day to the target month's end.
        auto target = year_month{ymd.year(), ymd.month()} + months{39};
        auto d = std::min(ymd.day(), year_month_day_last{target.year(), month_day_last{target.month()}}.day());
        const TimePoint end = sys_days{target / d} + (nb - day);
        return duration_cast<seconds>(end - nb);
    }
    return std::nullopt;
}

std::vector<Finding> check_lifetime(const CertificateRecord& c, TimePoint now, const std::string& id) {
    std::vector<Finding> out;
    const auto lifetime = c.not_after - c.not_before;
    if (auto cap = lifetime_cap(c.not_before); cap && lifetime > *cap) {
        out.push_back(make_finding(
            id, Check::over_long_lifetime,
            evidence(kv("not_before", format_time(c.not_before)), kv("not_after", format_time(c.not_after)),
                     kv("lifetime_days", std::to_string(lifetime.count() / 86400)),
                     kv("cap_days", std::to_string(cap->count() / 86400)), kv("fingerprint", c.fingerprint))));
    }
    if (now > c.not_after)
        out.push_back(make_finding(id, Check::expired_cert,
                                   evidence(kv("not_after", format_time(c.not_after)), kv("now", format_time(now)),
                                            kv("fingerprint", c.fingerprint))));
    return out;
}

std::vector<Finding> check_primitives(const CertificateRecord& c, const std::string& id) {
    std::vector<Finding> out;
    if (c.key_type == KeyType::RSA && c.key_bits < 2000)
        out.push_back(make_finding(id, Check::short_key,
                                   evidence(kv("key_type", "RSA"), kv("key_bits", std::to_string(c.key_bits)),
                                            kv("fingerprint", c.fingerprint))));
    if (c.sig_hash == SigHash::MD5 || c.sig_hash == SigHash::SHA1)
        out.push_back(make_finding(id, Check::weak_sig_hash,
                                   evidence(kv("sig_hash", std::string(to_string(c.sig_hash))),
                                            kv("sig_algorithm", c.sig_algorithm), kv("fingerprint", c.fingerprint))));
    return out;
}

// ---------------------------------------------------------------- reuse

std::string_view to_string(Reuse r) {
    switch (r) {
        case Reuse::not_reused: return "not_reused";
        case Reuse::intra_as: return "intra_as";
        case Reuse::inter_as: return "inter_as";
    }
    return "";
}

Reuse classify_reuse(const std::vector<Usage>& usage) {
    if (usage.empty()) throw AuditError("reuse needs at least one usage");
    std::set<Ipv4> ips;
    std::set<std::uint32_t> ases;
    for (const auto& u : usage) {
        ips.insert(u.address);
        ases.insert(u.asn);
    }
    if (ips.size() <= 1) return Reuse::not_reused;
    if (ips.size() == 2) return ases.size() == 1 ? Reuse::not_reused : Reuse::inter_as;
    return ases.size() == 1 ? Reuse::intra_as : Reuse::inter_as;
}

bool reuse_allowlisted(const CertificateRecord& cert, const std::vector<ReusePattern>& allow) {
    return std::ranges::any_of(allow, [&](const ReusePattern& p) {
        return fnmatch(p.common_name.c_str(), cert.common_name.c_str(), 0) == 0 &&
               fnmatch(p.organization.c_str(), cert.organization.c_str(), 0) == 0;
    });
}

// ---------------------------------------------------------------- statistics

namespace {

std::vector<double> midranks(const std::vector<double>& pooled) {
    std::vector<std::size_t> idx(pooled.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::ranges::sort(idx, [&](auto x, auto y) { return pooled[x] < pooled[y]; });
    std::vector<double> ranks(pooled.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

MannWhitney mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw AuditError("Mann-Whitney U needs two non-empty samples");
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);
    const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    const double ra = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
    MannWhitney res;
    res.u = ra - n * (n + 1) / 2;
    const double mu = n * m / 2;
    const double observed = std::abs(res.u - mu);

    if (a.size() <= 8 && b.size() <= 8) {
        // Every way of assigning |a| of the pooled ranks to sample a.
        const std::size_t total_n = pooled.size(), k = a.size();
        std::size_t hits = 0, total = 0;
        std::vector<std::size_t> pick(k);
        std::iota(pick.begin(), pick.end(), 0);
        for (;;) {
            double sum = 0;
            for (auto i : pick) sum += ranks[i];
            const double u = sum - n * (n + 1) / 2;
            ++total;
            if (std::abs(u - mu) >= observed - 1e-9) ++hits;
            std::size_t i = k;
            while (i > 0 && pick[i - 1] == total_n - k + i - 1) --i;
            if (i == 0) break;
            ++pick[i - 1];
            for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
        }
        res.p = static_cast<double>(hits) / static_cast<double>(total);
        res.exact = true;
        return res;
    }

    std::map<double, double> ties;
    for (double v : pooled) ties[v] += 1;
    const double N = n + m;
    double tie_sum = 0;
    for (const auto& [v, t] : ties) tie_sum += t * t * t - t;
    const double var = n * m / 12.0 * ((N + 1) - tie_sum / (N * (N - 1)));
    if (var <= 0) {
        res.p = 1.0;
        return res;
    }
    const double z = std::max(0.0, observed - 0.5) / std::sqrt(var);
    res.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return res;
}

// ---------------------------------------------------------------- whole run

std::vector<GradedUnit> graded_units(const std::vector<Deployment>& deployments,
                                     const std::vector<ProbeRecord>& records) {
    std::vector<GradedUnit> units;
    for (const auto& d : deployments) {
        GradedUnit u{d.id, {}};
        for (const auto& r : d.records) u.records.push_back(&r);
        units.push_back(std::move(u));
    }
    for (const auto& r : records) {
        if (r.tls_probed() && r.stage >= Stage::tls_valid && r.stage < Stage::valid)
            units.push_back(GradedUnit{r.endpoint.to_string(), {&r}});
    }
    return units;
}

Assessment assess(const std::vector<GradedUnit>& units, const AssessmentInput& in) {
    Assessment out;
    struct Leaf {
        std::string unit;
        CertificateRecord cert;
    };
    std::vector<Leaf> leaves;
    std::map<std::string, std::set<Usage>> usage;

    for (const auto& unit : units) {
        Grade g;
        g.id = unit.id;
        const ProbeRecord* tls = nullptr;
        for (const auto* r : unit.records)
            if (r->tls_probed() && r->battery->any_accepted()) {
                tls = r;
                break;
            }
        if (tls) {
            const auto& b = *tls->battery;
            g.version = check_version(b, unit.id);
            if (g.version->finding) out.findings.push_back(*g.version->finding);
            if (b.complete()) {
                g.battery_class = classify_battery(b);
                auto f = check_ciphers(b, unit.id);
                out.findings.insert(out.findings.end(), f.begin(), f.end());
            }
            g.client_auth = classify_client_auth(b);
            const auto& chain = tls->chain();
            if (!chain.empty()) {
                try {
                    auto cert = parse_certificate(chain.front());
                    if (in.trust_stores) g.trust_anchor = classify_trust_anchor(chain, *in.trust_stores);
                    auto lf = check_lifetime(cert, in.now, unit.id);
                    auto pf = check_primitives(cert, unit.id);
                    out.findings.insert(out.findings.end(), lf.begin(), lf.end());
                    out.findings.insert(out.findings.end(), pf.begin(), pf.end());
                    for (const auto* r : unit.records) usage[cert.fingerprint].insert({r->endpoint.address, r->asn});
                    leaves.push_back({unit.id, std::move(cert)});
                } catch (const AuditError&) {
                    // a leaf that does not parse yields no certificate findings
                }
            }
        }
        out.grades.push_back(std::move(g));
    }

    for (const auto& leaf : leaves) {
        const auto& u = usage[leaf.cert.fingerprint];
        const auto reuse = classify_reuse({u.begin(), u.end()});
        auto grade = std::ranges::find(out.grades, leaf.unit, &Grade::id);
        grade->reuse = reuse;
        grade->reuse_allowlisted = reuse_allowlisted(leaf.cert, in.reuse_allowlist);
        if (reuse == Reuse::not_reused || grade->reuse_allowlisted) continue;
        std::set<Ipv4> ips;
        std::set<std::uint32_t> ases;
        for (const auto& x : u) {
            ips.insert(x.address);
            ases.insert(x.asn);
        }
        out.findings.push_back(make_finding(
            leaf.unit, reuse == Reuse::intra_as ? Check::cert_reuse_intra_as : Check::cert_reuse_inter_as,
            evidence(kv("fingerprint", leaf.cert.fingerprint), kv("hosts", std::to_string(ips.size())),
                     kv("ases", std::to_string(ases.size())))));
    }
    return out;
}

}  // namespace iiot

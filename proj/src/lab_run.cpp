#include "iiot/lab_run.hpp"

#include <sstream>

namespace iiot::lab {

Timeouts lab_timeouts() {
    Timeouts t;
    t.connect = Millis{1000};
    t.read = Millis{1500};
    t.udp_retransmits = 2;
    t.udp_initial = Millis{250};
    t.linger_check = Millis{200};
    return t;
}

MxResolver lab_resolver() {
    return [](const std::string& domain) -> std::optional<bool> {
        if (domain == "lab.example") return true;
        if (domain == "nomx.example") return false;
        return std::nullopt;
    };
}

bool LabRun::all_pass() const {
    return std::ranges::all_of(outcomes, &ScenarioOutcome::pass);
}

namespace {

template <typename T>
std::string show(const std::optional<T>& v) {
    return v ? std::string(to_string(*v)) : "none";
}

std::string show(const std::set<Check>& s) {
    std::string out = "{";
    for (auto c : s) {
        if (out.size() > 1) out += ',';
        out += to_string(c);
    }
    return out + '}';
}

ScenarioOutcome evaluate(const Scenario& s, const Endpoint& ep, const ServerLog& log, const ScanResult& scan) {
    ScenarioOutcome o;
    o.name = s.name;
    o.endpoint = ep;
    auto mismatch = [&](std::string what, const std::string& want, const std::string& got) {
        o.pass = false;
        o.mismatches.push_back(what + ": expected " + want + ", got " + got);
    };

    const auto rec = std::ranges::find(scan.records, ep, &ProbeRecord::endpoint);
    if (!s.expect.stage) {
        if (rec != scan.records.end()) mismatch("record", "none", "present");
        if (log.accepted != 0) mismatch("packets received", "0", std::to_string(log.accepted));
        return o;
    }
    if (rec == scan.records.end()) {
        mismatch("record", "present", "none");
        return o;
    }
    o.stage = rec->stage;
    if (rec->stage != *s.expect.stage) mismatch("stage", show(s.expect.stage), show(o.stage));

    const Deployment* dep = nullptr;
    for (const auto& d : scan.deployments)
        if (std::ranges::find(d.records, ep, &ProbeRecord::endpoint) != d.records.end()) dep = &d;
    const std::string unit = dep ? dep->id : ep.to_string();
    for (const auto& f : scan.assessment.findings)
        if (f.deployment_id == unit) o.findings.insert(f.check);
    if (o.findings != s.expect.findings) mismatch("findings", show(s.expect.findings), show(o.findings));

    const auto grade = std::ranges::find(scan.assessment.grades, unit, &Grade::id);
    const Grade* g = grade != scan.assessment.grades.end() ? &*grade : nullptr;
    if (s.expect.battery_class && (!g || g->battery_class != s.expect.battery_class))
        mismatch("battery class", show(s.expect.battery_class), g ? show(g->battery_class) : "ungraded");
    if (s.expect.client_auth && (!g || g->client_auth != s.expect.client_auth))
        mismatch("client auth", show(s.expect.client_auth), g ? show(g->client_auth) : "ungraded");
    if (s.expect.tls13_capable) {
        const bool got = g && g->version && g->version->tls13_capable;
        if (got != *s.expect.tls13_capable)
            mismatch("tls13 capable", *s.expect.tls13_capable ? "true" : "false", got ? "true" : "false");
    }
    if (s.expect.adoption) {
        const std::optional<Adoption> got = dep ? std::optional(dep->adoption) : std::nullopt;
        if (got != s.expect.adoption) mismatch("adoption", show(s.expect.adoption), show(got));
    }
    if (s.expect.access) {
        std::optional<AccessStatus> got;
        for (const auto& a : scan.access)
            if (a.deployment_id == unit) got = a.verdict.status;
        if (got != s.expect.access) mismatch("access", show(s.expect.access), show(got));
    }
    return o;
}

}  // namespace

LabRun run_lab(const LabOptions& opt) {
    const auto t0 = Clock::now();
    LabRun run;
    run.scenarios = opt.scenarios;

    const auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
    const Pki pki = Pki::create(now);
    CertBank certs(pki);
    const auto trust_dir = opt.work_dir / "trust";
    pki.install_trust(trust_dir);
    const auto stores = TrustStores::load_dir(trust_dir);

    std::vector<std::unique_ptr<Server>> servers;
    std::vector<Endpoint> targets;
    for (const auto& s : opt.scenarios) {
        servers.push_back(spawn(s, certs, pki));
        const auto ep = servers.back()->endpoint();
        run.endpoints[s.name] = ep;
        targets.push_back(ep);
        run.as_map.add(Cidr(s.address(), 32), s.asn);
    }

    auto& p = run.policy;
    p.lab_mode = opt.interval == Millis{0};
    p.per_host_interval = opt.interval;
    p.per_host_time_limit = opt.limits.time_limit;
    p.per_host_byte_limit = opt.limits.byte_limit;
    p.subscribe_root = opt.subscribe_root;
    p.acknowledge_payload_collection = opt.subscribe_root;
    p.timeouts = lab_timeouts();
    p.concurrency = 64;
    p.contact_url = "https://lab.example/scanner-contact";
    p.trust_store_dir = trust_dir;
    p.blocklist.add(Cidr::parse("127.0.2.0/24"));

    const auto identity = ClientIdentity::create(p.contact_url);
    ScanInputs in;
    in.policy = p;
    in.as_map = &run.as_map;
    in.trust_stores = &stores;
    in.identity = &identity;
    in.resolver = lab_resolver();
    in.now = now;

    const auto plan = schedule(apply_blocklist(targets, p), p);
    run.scan = execute(plan, in);

    for (std::size_t i = 0; i < servers.size(); ++i) {
        servers[i]->stop();
        run.server_logs[opt.scenarios[i].name] = servers[i]->log();
    }
    for (const auto& s : opt.scenarios)
        run.outcomes.push_back(evaluate(s, run.endpoints.at(s.name), run.server_logs.at(s.name), run.scan));
    run.elapsed = std::chrono::duration_cast<Millis>(Clock::now() - t0);
    return run;
}

std::string format_outcomes(const LabRun& run) {
    std::ostringstream out;
    std::size_t passed = 0;
    for (const auto& o : run.outcomes) {
        passed += o.pass;
        out << (o.pass ? "ok   " : "FAIL ") << o.name << "  " << o.endpoint.to_string() << "  stage=" << show(o.stage)
            << "  findings=" << show(o.findings) << '\n';
        for (const auto& m : o.mismatches) out << "       " << m << '\n';
    }
    out << passed << '/' << run.outcomes.size() << " scenarios match, " << run.elapsed.count() << " ms\n";
    return out.str();
}

}  // namespace iiot::lab

// audit: command-line front end for scans, reports and the lab matrix.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "iiot/lab_run.hpp"
#include "iiot/orchestrator.hpp"

namespace {

using namespace iiot;

int cmd_scan(const std::string& targets_path, const std::string& policy_path, const std::string& as_map_path,
             const std::string& as_types_path, const std::string& out_dir) {
    auto policy = load_policy(policy_path);
    if (auto env = env_blocklist()) policy.blocklist.merge(*env);

    auto targets = load_targets(targets_path, policy.port_overrides, policy.lab_mode);
    for (const auto& e : targets.errors) std::cerr << targets_path << ':' << e.line << ": " << e.message << '\n';

    std::optional<AsMap> as_map;
    if (!as_map_path.empty())
        as_map = AsMap::load(as_map_path, as_types_path.empty() ? std::nullopt
                                                                : std::optional<std::filesystem::path>(as_types_path));

    const auto before = targets.endpoints.size();
    auto endpoints = apply_blocklist(std::move(targets.endpoints), policy);
    std::cerr << endpoints.size() << " targets (" << before - endpoints.size() << " blocklisted)\n";

    TrustStores stores;
    if (policy.trust_store_dir) stores = TrustStores::load_dir(*policy.trust_store_dir);
    const auto identity = policy.identity_dir ? ClientIdentity::load_or_create(*policy.identity_dir, policy.contact_url)
                                              : ClientIdentity::create(policy.contact_url);

    ScanInputs in;
    in.policy = policy;
    in.as_map = as_map ? &*as_map : nullptr;
    in.trust_stores = &stores;
    in.identity = &identity;
    in.resolver = system_mx_resolver();

    const auto plan = schedule(endpoints, policy);
    auto result = execute(plan, in);
    result.row_errors = std::move(targets.errors);
    emit_report(result, policy, out_dir, in.as_map);
    std::cout << summary_csv(result.deployments, result.records, in.as_map);
    std::cerr << result.records.size() << " records, " << result.deployments.size() << " deployments, "
              << result.assessment.findings.size() << " findings written to " << out_dir << '\n';
    return 0;
}

int cmd_lab(const std::string& which, const std::string& out_dir, double interval_s, bool list_only,
            const std::string& scenario_file) {
    lab::LabOptions opt;
    if (!scenario_file.empty()) {
        std::ifstream in(scenario_file);
        if (!in) throw AuditError("cannot read " + scenario_file);
        const auto j = nlohmann::json::parse(in);
        opt.scenarios.clear();
        for (const auto& s : j.is_array() ? j : nlohmann::json::array({j}))
            opt.scenarios.push_back(lab::scenario_from_json(s));
    }
    if (which != "all") {
        std::erase_if(opt.scenarios, [&](const lab::Scenario& s) { return s.name.find(which) == std::string::npos; });
        if (opt.scenarios.empty()) throw AuditError("no scenario matches " + which);
    }
    if (list_only) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : opt.scenarios) arr.push_back(lab::to_json(s));
        std::cout << arr.dump(2) << '\n';
        return 0;
    }
    opt.interval = std::chrono::duration_cast<Millis>(std::chrono::duration<double>(interval_s));
    if (!out_dir.empty()) opt.work_dir = out_dir;
    const auto run = lab::run_lab(opt);
    if (!out_dir.empty()) emit_report(run.scan, run.policy, std::filesystem::path(out_dir) / "scan", &run.as_map);
    std::cout << lab::format_outcomes(run);
    return run.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit (I)IoT protocol endpoints for TLS configuration and access control"};
    app.require_subcommand(1);

    std::string targets, policy, as_map, as_types, out;
    auto* scan = app.add_subcommand("scan", "Probe a target list and write report files");
    scan->add_option("--targets", targets, "CSV or JSONL target list")->required()->check(CLI::ExistingFile);
    scan->add_option("--policy", policy, "Scan policy JSON")->required()->check(CLI::ExistingFile);
    scan->add_option("--as-map", as_map, "cidr<TAB>asn prefix table")->check(CLI::ExistingFile);
    scan->add_option("--as-types", as_types, "asn<TAB>category table")->check(CLI::ExistingFile);
    scan->add_option("--out", out, "Output directory")->required();

    std::string in_dir;
    auto* report = app.add_subcommand("report", "Recompute summaries from a scan directory");
    report->add_option("--in", in_dir, "Scan output directory")->required()->check(CLI::ExistingDirectory);

    std::string which = "all", lab_out, scenario_file;
    double interval_s = 0;
    bool list_only = false;
    auto* lab = app.add_subcommand("lab", "Spawn mock servers and audit them");
    lab->add_option("--scenarios", which, "\"all\" or a name substring")->default_val("all");
    lab->add_option("--scenario-file", scenario_file, "JSON scenario or array of scenarios");
    lab->add_option("--out", lab_out, "Keep trust store and scan output here");
    lab->add_option("--interval", interval_s, "Per-host pacing in seconds (0 = lab mode)")->default_val(0);
    lab->add_flag("--list", list_only, "Print the selected scenarios as JSON and exit");

    auto* catalog = app.add_subcommand("catalog", "Print the built-in protocol catalog as JSON");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*catalog) {
            std::cout << Catalog::builtin().to_json();
            return 0;
        }
        if (*scan) return cmd_scan(targets, policy, as_map, as_types, out);
        if (*report) {
            std::cout << rebuild_report(in_dir);
            return 0;
        }
        if (*lab) return cmd_lab(which, lab_out, interval_s, list_only, scenario_file);
    } catch (const std::exception& e) {
        std::cerr << "audit: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

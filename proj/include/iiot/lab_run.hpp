#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "iiot/lab.hpp"
#include "iiot/orchestrator.hpp"

// End-to-end lab runs: spawn scenarios, scan them with the real pipeline
// and compare every record with the scenario's expectation.

namespace iiot::lab {

struct LabOptions {
    std::vector<Scenario> scenarios = canonical_suite();
    /// Zero runs in lab mode (no pacing).
    Millis interval{0};
    bool subscribe_root = true;
    SubscriptionLimits limits;
    /// Trust store and scan output go below this directory.
    std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "iiot-lab";
};

/// Short timeouts suited to loopback servers.
Timeouts lab_timeouts();

struct ScenarioOutcome {
    std::string name;
    Endpoint endpoint;
    bool pass = true;
    std::vector<std::string> mismatches;
    std::optional<Stage> stage;
    std::set<Check> findings;
};

struct LabRun {
    ScanPolicy policy;
    AsMap as_map;
    ScanResult scan;
    std::vector<ScenarioOutcome> outcomes;
    std::map<std::string, ServerLog> server_logs;
    std::map<std::string, Endpoint> endpoints;
    std::vector<Scenario> scenarios;
    Millis elapsed{0};

    bool all_pass() const;
};

/// MX answers for the lab domains: lab.example has MX, nomx.example not.
MxResolver lab_resolver();

LabRun run_lab(const LabOptions& opt);

/// One line per scenario, then a pass count.
std::string format_outcomes(const LabRun& run);

}  // namespace iiot::lab

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qsd/config.hpp"
#include "qsd/sde_engine.hpp"

namespace qsd {

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct RunOutcome {
    std::filesystem::path manifest_path;
    std::vector<CheckResult> checks;

    bool passed() const;
    /// 0 when every check passed, 1 otherwise.
    int exit_code() const;
};

/// Deviation of one filtered trajectory from the closed-form monitored-decay
/// laws. Samples at the south pole are skipped; `defined` is false when the
/// initial state itself has no alpha.
struct TrajectoryInvariants {
    bool defined = false;
    double alpha_flow_max_rel_error = 0;
    double spheroid_residual_max_abs = 0;
    /// Max Bloch distance between the record-only reconstruction and the
    /// trajectory itself.
    double reconstruction_max_distance = 0;
};

TrajectoryInvariants trajectory_invariants(const InitialState &init, const Trajectory &tr,
                                           const HeterodyneRecord &rec);

// Each command writes its outputs plus manifest.json under config.output_dir.
// Invalid configurations and unreadable inputs throw (ConfigError, ParseError)
// before any output is written.
RunOutcome cli_simulate(const RunConfig &config);
RunOutcome cli_filter(const RunConfig &config, const std::vector<std::filesystem::path> &records);
/// Filters the given records (or a synthesized ensemble when none are given)
/// and checks the alpha-flow, spheroid and reconstruction laws. The checks
/// only apply without dephasing and are reported as skipped otherwise.
RunOutcome cli_analyze(const RunConfig &config, const std::vector<std::filesystem::path> &records);
/// Fails (exit 1) when the likelihood maximum sits on the grid boundary.
RunOutcome cli_estimate_eta(const RunConfig &config, const std::vector<std::filesystem::path> &records);
RunOutcome cli_validate(const RunConfig &config);
RunOutcome cli_grid(const RunConfig &config);

}  // namespace qsd

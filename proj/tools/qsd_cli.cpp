// qsd: command-line front end for synthesis, filtering, estimation and
// validation runs. Exit codes: 0 success, 1 failed check, 2 usage/config/input error.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "qsd/config.hpp"
#include "qsd/errors.hpp"
#include "qsd/runs.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string output_dir;
    int threads = -1;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("-c,--config", c.config_file, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "Override a config key: key.path=value (value parsed as JSON if possible)")
        ->allow_extra_args(false)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    cmd->add_option("-o,--out", c.output_dir, "Output directory (overrides output_dir)");
    cmd->add_option("--threads", c.threads, "Worker threads (0 = machine parallelism)")->check(CLI::NonNegativeNumber);
}

qsd::RunConfig resolve(const Common &c) {
    std::vector<std::string> overrides = c.overrides;
    if (!c.output_dir.empty()) overrides.push_back("output_dir=" + nlohmann::json(c.output_dir).dump());
    if (c.threads >= 0) overrides.push_back("threads=" + std::to_string(c.threads));
    std::optional<std::filesystem::path> file;
    if (!c.config_file.empty()) file = c.config_file;
    return qsd::load_config(file, overrides, std::getenv("QSD_SEED"));
}

int report(const qsd::RunOutcome &out) {
    std::cout << out.manifest_path.string() << "\n";
    for (const auto &check : out.checks) {
        if (!check.passed) std::cerr << "check failed: " << check.name << ": " << check.detail << "\n";
    }
    return out.passed() ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum state diffusion toolkit for a monitored decaying qubit"};
    app.set_version_flag("--version", std::string(QSD_VERSION));
    app.require_subcommand(1);

    Common simulate_opts, filter_opts, analyze_opts, estimate_opts, validate_opts, grid_opts;
    std::vector<std::string> filter_inputs, analyze_inputs, estimate_inputs;

    auto *simulate = app.add_subcommand("simulate", "Synthesize records and hidden trajectories");
    add_common(simulate, simulate_opts);

    auto *filter = app.add_subcommand("filter", "Filter record files into trajectory CSVs");
    add_common(filter, filter_opts);
    filter->add_option("records", filter_inputs, "Record files (CSV or binary)")->required();

    auto *analyze = app.add_subcommand("analyze", "Check the alpha-flow, spheroid and reconstruction laws");
    add_common(analyze, analyze_opts);
    analyze->add_option("records", analyze_inputs, "Record files; a synthetic ensemble is used when omitted");

    auto *estimate = app.add_subcommand("estimate-eta", "Maximum-likelihood estimate of the detection efficiency");
    add_common(estimate, estimate_opts);
    estimate->add_option("records", estimate_inputs, "Record files; a synthetic ensemble is used when omitted");

    auto *validate = app.add_subcommand("validate", "Tomography cross-validation of filtered predictions");
    add_common(validate, validate_opts);

    auto *grid = app.add_subcommand("grid", "Bloch-ball occupancy grids of a synthetic ensemble");
    add_common(grid, grid_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    }

    auto paths = [](const std::vector<std::string> &v) {
        return std::vector<std::filesystem::path>(v.begin(), v.end());
    };
    try {
        if (*simulate) return report(qsd::cli_simulate(resolve(simulate_opts)));
        if (*filter) return report(qsd::cli_filter(resolve(filter_opts), paths(filter_inputs)));
        if (*analyze) return report(qsd::cli_analyze(resolve(analyze_opts), paths(analyze_inputs)));
        if (*estimate) return report(qsd::cli_estimate_eta(resolve(estimate_opts), paths(estimate_inputs)));
        if (*validate) return report(qsd::cli_validate(resolve(validate_opts)));
        if (*grid) return report(qsd::cli_grid(resolve(grid_opts)));
    } catch (const qsd::NumericalBlowup &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

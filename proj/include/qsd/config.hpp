#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsd/core.hpp"
#include "qsd/estimation.hpp"
#include "qsd/sde_engine.hpp"
#include "qsd/validation.hpp"

namespace qsd {

enum class Output { Records, Trajectories, Invariants, Grid, Tomography, Likelihood };

const char *output_name(Output o);
Output parse_output(const std::string &text);

enum class RecordFormat { Csv, Binary };

/// Pass/fail limits applied by the analyze and validate commands.
struct Thresholds {
    double slope_tolerance = 0.05;
    double bin_fraction = 0.9;
    double bin_sigmas = 3;
    double total_mean_sigmas = 3;
    double alpha_flow_rel = 0.01;
    double spheroid_residual = 0.01;
    double reconstruction_distance = 0.02;
};

/// One run of the command-line tool. JSON keys (all optional):
///   params.{gamma1_us, gamma_phi_us, eta, dt_us, horizon_us, master_seed, substeps}
///   initial, ensemble_size, first_index, outputs, output_dir, threads, scheme,
///   record_format, filter_eta, readout_fidelity.{ground, excited},
///   bins.{half_width, min_count}, cell_side, tomography_time_us, axes,
///   grid_times_us, eta_grid.{lo, hi, n}, thresholds.{...}
struct RunConfig {
    SimParams params;
    InitialState initial = InitialState::plus_x();
    size_t ensemble_size = 1;
    uint64_t first_index = 0;
    std::set<Output> outputs{Output::Records};
    std::filesystem::path output_dir = "qsd_out";
    unsigned threads = 0;
    Scheme scheme = Scheme::Kraus;
    RecordFormat record_format = RecordFormat::Csv;
    /// eta assumed by the filter in validate; defaults to params.eta.
    std::optional<double> filter_eta;
    ReadoutFidelity readout_fidelity;
    BinOptions bins;
    double cell_side = 0.04;
    double tomography_time = 4;
    std::vector<Axis> axes{Axis::X, Axis::Y, Axis::Z};
    std::vector<double> grid_times{0, 1, 2, 4, 8};
    EtaGrid eta_grid;
    Thresholds thresholds;
    /// Set when QSD_SEED replaced params.master_seed.
    bool seed_from_env = false;

    bool wants(Output o) const {
        return outputs.count(o) != 0;
    }
    double effective_filter_eta() const {
        return filter_eta.value_or(params.eta);
    }
    /// Throws ConfigError on any out-of-range field.
    void validate() const;
};

nlohmann::json to_json(const RunConfig &c);
/// Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json &j);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json &doc, const std::string &assignment);

/// Reads the optional config file, applies overrides in order, then QSD_SEED
/// (when `env_seed` is non-null), and validates.
RunConfig load_config(const std::optional<std::filesystem::path> &file, const std::vector<std::string> &overrides,
                      const char *env_seed);

}  // namespace qsd

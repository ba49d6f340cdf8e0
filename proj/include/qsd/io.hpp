#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "qsd/analytics.hpp"
#include "qsd/estimation.hpp"
#include "qsd/sde_engine.hpp"
#include "qsd/validation.hpp"

namespace qsd {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
/// Times: microseconds with 9 significant digits.
std::string format_time(double t_us);

// Record CSV:
//   # qsd-record v1, dt_us=<f>, gamma1_us=<f>, gamma_phi_us=<f>, eta=<f>, seed=<u64>, index=<u64>
//   t_us,dI,dQ
//   <t_k>,<dI_k>,<dQ_k>        (t_k = k dt, start of the interval)
void write_record_csv(std::ostream &os, const HeterodyneRecord &rec);
void write_record_csv(const fs::path &path, const HeterodyneRecord &rec);
/// `name` is used in ParseError messages.
HeterodyneRecord read_record_csv(std::istream &is, const std::string &name);
HeterodyneRecord read_record_csv(const fs::path &path);

// Binary record: "QSDR", u16 version (1), f64 dt, gamma1, gamma_phi, eta,
// u64 seed, index, count, then count (dI, dQ) f64 pairs; all little-endian.
void write_record_binary(const fs::path &path, const HeterodyneRecord &rec);
HeterodyneRecord read_record_binary(const fs::path &path);

/// Dispatches on the magic bytes.
HeterodyneRecord read_record(const fs::path &path);

struct TrajectoryRow {
    double t = 0;
    Bloch b;
    double linear_entropy = 0;
    std::optional<double> alpha;
    std::optional<Xi> xi;
};

std::vector<TrajectoryRow> trajectory_rows(const Trajectory &tr);

// Trajectory CSV: t_us,x,y,z,S_L,alpha,xi_x,xi_y ; south-pole cells empty.
void write_trajectory_csv(std::ostream &os, const Trajectory &tr, const std::string &initial_name);
void write_trajectory_csv(const fs::path &path, const Trajectory &tr, const std::string &initial_name);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream &is, const std::string &name);
std::vector<TrajectoryRow> read_trajectory_csv(const fs::path &path);

json to_json(const LikelihoodResult &r);
LikelihoodResult likelihood_from_json(const json &j);

json to_json(const ConditionalMeanReport &r);
ConditionalMeanReport conditional_mean_from_json(const json &j);

json to_json(const OccupancyGrid &g);
OccupancyGrid occupancy_from_json(const json &j);

// Grid CSV: t_us,ix,iy,iz,count
void write_grid_csv(std::ostream &os, const OccupancyGrid &g);
OccupancyGrid read_grid_csv(std::istream &is, const std::string &name, double cell_side);

/// Writes text atomically (temp file + rename).
void write_text_file(const fs::path &path, const std::string &text);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path &path);

}  // namespace qsd

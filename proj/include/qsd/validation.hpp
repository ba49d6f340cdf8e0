#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qsd/core.hpp"
#include "qsd/rng.hpp"
#include "qsd/sde_engine.hpp"

namespace qsd {

enum class Axis { X, Y, Z };

const char *axis_name(Axis a);
Axis parse_axis(const std::string &text);
double coordinate(const Bloch &b, Axis a);

/// Assignment fidelities of the final projective readout: F_g for an ideal
/// -1 outcome, F_e for an ideal +1 outcome.
struct ReadoutFidelity {
    double ground = 1;
    double excited = 1;

    void validate() const;
};

struct TomographySample {
    Axis axis = Axis::Z;
    int outcome = 1;
    uint64_t trajectory_index = 0;
    double final_time = 0;
};

/// A tomography outcome paired with the filter's prediction of the measured
/// coordinate at the same final time.
struct TomographyEntry {
    double predicted = 0;
    TomographySample sample;
};

/// Ideal outcome +1 with probability (1 + <sigma_axis>)/2, then flipped with
/// probability 1 - F_e (ideal +1) or 1 - F_g (ideal -1).
int simulate_readout(const QubitState &s, Axis axis, const ReadoutFidelity &f, Stream &rng);

/// Inverts the binary confusion matrix on a mean outcome:
/// (raw - (F_e - F_g)) / (F_e + F_g - 1). Throws ConfigError if F_e + F_g <= 1.
double correct_readout_means(double raw_mean, const ReadoutFidelity &f);

struct BinOptions {
    double half_width = 0.02;
    size_t min_count = 40;
};

struct ConditionalMeanBin {
    double center = 0;
    double half_width = 0;
    size_t count = 0;
    /// Readout-corrected mean outcome.
    double mean_tomo = 0;
    double std_error = 0;
    double mean_predicted = 0;
};

struct ConditionalMeanReport {
    Axis axis = Axis::Z;
    double final_time = 0;
    size_t total = 0;
    /// Bins holding at least min_count entries, ordered by center.
    std::vector<ConditionalMeanBin> bins;
    size_t dropped_bins = 0;
    /// Count-weighted least-squares slope of mean_tomo against bin center
    /// (NaN with fewer than two bins) and its propagated standard error.
    double slope = 0;
    double slope_std_error = 0;
    /// Unbinned means over the whole ensemble.
    double mean_predicted = 0;
    double mean_tomo = 0;
    double mean_tomo_std_error = 0;

    /// Bins with |mean_tomo - center| <= 3 std_error.
    size_t bins_within(double sigmas = 3) const;
};

/// Bins entries by predicted coordinate (width 2 * half_width, centers on
/// multiples of the width) and compares the corrected tomography mean with
/// the bin center. Throws ConfigError on an empty ensemble or mixed axes/times.
ConditionalMeanReport conditional_mean_test(std::span<const TomographyEntry> entries, Axis axis, double final_time,
                                            const ReadoutFidelity &f = {}, const BinOptions &opt = {});

/// Same, reading the predicted coordinate from each trajectory at final_time.
ConditionalMeanReport conditional_mean_test(std::span<const Trajectory> trajectories,
                                            std::span<const TomographySample> samples, Axis axis,
                                            double final_time, const ReadoutFidelity &f = {},
                                            const BinOptions &opt = {});

struct TomographyRun {
    InitialState init;
    /// Parameters the records are synthesized with (horizon = final time).
    SimParams truth;
    /// eta used by the filter; equal to truth.eta for a calibrated run.
    double filter_eta = 0.24;
    Axis axis = Axis::X;
    ReadoutFidelity fidelity;
    uint64_t first_index = 0;
    size_t count = 0;
};

/// Synthesizes records, filters them with filter_eta, and reads out the
/// hidden (true) state at the horizon along the requested axis.
std::vector<TomographyEntry> run_tomography(const TomographyRun &run, unsigned threads = 0);

struct CellIndex {
    int ix = 0;
    int iy = 0;
    int iz = 0;
    auto operator<=>(const CellIndex &) const = default;
};

struct OccupancyGrid {
    double cell_side = 0.04;
    std::vector<double> times;
    /// counts[k] holds the occupied cells at times[k].
    std::vector<std::map<CellIndex, uint64_t>> counts;
    /// Optional alpha_flow value per time (spheroid overlay for plots).
    std::vector<double> alpha_flow;

    uint64_t total(size_t time_index) const;
    int cells_per_axis() const;
    /// Cell of a coordinate in [-1, 1]; the upper edge folds into the last cell.
    int cell_of(double coordinate) const;
    double cell_center(int index) const;
};

/// Incremental form of occupancy() for ensembles that are not kept in memory.
class OccupancyAccumulator {
   public:
    OccupancyAccumulator(std::vector<double> times, double cell_side);
    void add(const Trajectory &tr);
    void merge(const OccupancyAccumulator &other);
    const OccupancyGrid &grid() const {
        return grid_;
    }

   private:
    OccupancyGrid grid_;
};

OccupancyGrid occupancy(std::span<const Trajectory> ensemble, std::span<const double> times, double cell_side = 0.04);

struct ExcitationIncreaseStats {
    size_t count = 0;
    /// Fraction of trajectories with max_{t > 0} <sigma_z> > 0.
    double fraction_zpos = 0;
    /// Fraction whose <sigma_z> rises above its first-step value later on.
    double fraction_reincrease = 0;
    /// Positions (within the ensemble) of trajectories counted in fraction_zpos.
    std::vector<size_t> example_indices;
};

ExcitationIncreaseStats excitation_increase_stats(std::span<const Trajectory> ensemble, size_t max_examples = 10);

}  // namespace qsd

#include "qsd/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsd/parallel.hpp"

namespace qsd {

const char *axis_name(Axis a) {
    switch (a) {
        case Axis::X:
            return "x";
        case Axis::Y:
            return "y";
        case Axis::Z:
            return "z";
    }
    return "z";
}

Axis parse_axis(const std::string &text) {
    if (text == "x" || text == "X") return Axis::X;
    if (text == "y" || text == "Y") return Axis::Y;
    if (text == "z" || text == "Z") return Axis::Z;
    throw ConfigError("unknown axis '" + text + "'");
}

double coordinate(const Bloch &b, Axis a) {
    switch (a) {
        case Axis::X:
            return b.x;
        case Axis::Y:
            return b.y;
        case Axis::Z:
            return b.z;
    }
    return b.z;
}

void ReadoutFidelity::validate() const {
    if (!(ground > 0.5 && ground <= 1 && excited > 0.5 && excited <= 1)) {
        throw ConfigError("readout fidelities must lie in (0.5, 1]");
    }
}

int simulate_readout(const QubitState &s, Axis axis, const ReadoutFidelity &f, Stream &rng) {
    double p_plus = 0.5 * (1 + coordinate(s.bloch(), axis));
    int ideal = rng.uniform() < p_plus ? +1 : -1;
    double flip = ideal > 0 ? 1 - f.excited : 1 - f.ground;
    if (rng.uniform() < flip) return -ideal;
    return ideal;
}

double correct_readout_means(double raw_mean, const ReadoutFidelity &f) {
    double denom = f.excited + f.ground - 1;
    if (!(denom > 0)) {
        throw ConfigError("readout fidelities must satisfy F_g + F_e > 1");
    }
    return (raw_mean - (f.excited - f.ground)) / denom;
}

size_t ConditionalMeanReport::bins_within(double sigmas) const {
    return static_cast<size_t>(std::count_if(bins.begin(), bins.end(), [&](const ConditionalMeanBin &b) {
        return std::abs(b.mean_tomo - b.center) <= sigmas * b.std_error;
    }));
}

ConditionalMeanReport conditional_mean_test(std::span<const TomographyEntry> entries, Axis axis, double final_time,
                                            const ReadoutFidelity &f, const BinOptions &opt) {
    if (entries.empty()) {
        throw ConfigError("conditional_mean_test: empty ensemble");
    }
    if (!(opt.half_width > 0)) {
        throw ConfigError("bin half width must be > 0");
    }
    f.validate();
    const double scale = 1 / (f.excited + f.ground - 1);
    const double width = 2 * opt.half_width;

    struct Acc {
        size_t n = 0;
        double sum = 0;
        double sum_sq = 0;
        double sum_pred = 0;
    };
    std::map<long long, Acc> acc;
    Acc all;
    for (const auto &e : entries) {
        if (e.sample.axis != axis || std::abs(e.sample.final_time - final_time) > 1e-9 * std::max(1.0, final_time)) {
            throw ConfigError("conditional_mean_test: samples must share axis and final time");
        }
        double o = e.sample.outcome;
        for (Acc *a : {&acc[std::llround(e.predicted / width)], &all}) {
            a->n += 1;
            a->sum += o;
            a->sum_sq += o * o;
            a->sum_pred += e.predicted;
        }
    }

    auto sample_sd = [](const Acc &a) {
        if (a.n < 2) return 0.0;
        double mean = a.sum / a.n;
        double var = (a.sum_sq - a.n * mean * mean) / (a.n - 1);
        return std::sqrt(std::max(0.0, var));
    };

    ConditionalMeanReport rep;
    rep.axis = axis;
    rep.final_time = final_time;
    rep.total = entries.size();
    rep.mean_predicted = all.sum_pred / all.n;
    rep.mean_tomo = correct_readout_means(all.sum / all.n, f);
    rep.mean_tomo_std_error = scale * sample_sd(all) / std::sqrt(static_cast<double>(all.n));
    for (const auto &[key, a] : acc) {
        if (a.n < opt.min_count) {
            ++rep.dropped_bins;
            continue;
        }
        ConditionalMeanBin b;
        b.center = key * width;
        b.half_width = opt.half_width;
        b.count = a.n;
        b.mean_tomo = correct_readout_means(a.sum / a.n, f);
        b.std_error = scale * sample_sd(a) / std::sqrt(static_cast<double>(a.n));
        b.mean_predicted = a.sum_pred / a.n;
        rep.bins.push_back(b);
    }

    double sw = 0, swc = 0;
    for (const auto &b : rep.bins) {
        sw += b.count;
        swc += b.count * b.center;
    }
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    rep.slope_std_error = std::numeric_limits<double>::quiet_NaN();
    if (rep.bins.size() >= 2) {
        double cbar = swc / sw;
        double sxx = 0, sxy = 0, var = 0;
        for (const auto &b : rep.bins) {
            double dc = b.center - cbar;
            sxx += b.count * dc * dc;
            sxy += b.count * dc * b.mean_tomo;
            var += (b.count * dc) * (b.count * dc) * b.std_error * b.std_error;
        }
        rep.slope = sxy / sxx;
        rep.slope_std_error = std::sqrt(var) / sxx;
    }
    return rep;
}

ConditionalMeanReport conditional_mean_test(std::span<const Trajectory> trajectories,
                                            std::span<const TomographySample> samples, Axis axis,
                                            double final_time, const ReadoutFidelity &f, const BinOptions &opt) {
    if (trajectories.size() != samples.size()) {
        throw ConfigError("conditional_mean_test: one tomography sample per trajectory expected");
    }
    std::vector<TomographyEntry> entries;
    entries.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const Trajectory &tr = trajectories[i];
        auto k = static_cast<size_t>(std::llround(final_time / tr.params.dt));
        if (k >= tr.size() || std::abs(tr.times[k] - final_time) > 1e-9 * std::max(1.0, final_time)) {
            throw ConfigError("conditional_mean_test: final time is not a trajectory sample time");
        }
        entries.push_back({coordinate(tr.states[k].bloch(), axis), samples[i]});
    }
    return conditional_mean_test(entries, axis, final_time, f, opt);
}

std::vector<TomographyEntry> run_tomography(const TomographyRun &run, unsigned threads) {
    run.fidelity.validate();
    SimParams filter_params = run.truth;
    filter_params.eta = run.filter_eta;
    filter_params.validate();
    const bool calibrated = run.filter_eta == run.truth.eta && run.truth.substeps == 1;
    std::vector<TomographyEntry> out(run.count);
    parallel_for(run.count, threads, [&](size_t i) {
        uint64_t index = run.first_index + i;
        Synthesis syn = synthesize(run.init, run.truth, index);
        const QubitState &truth = syn.trajectory.states.back();
        QubitState predicted_state = calibrated ? truth : filter(run.init, syn.record, filter_params).states.back();
        Stream rng = Stream::for_trajectory(run.truth.master_seed, index, StreamTag::Readout);
        TomographySample sample{run.axis, simulate_readout(truth, run.axis, run.fidelity, rng), index,
                                syn.trajectory.times.back()};
        out[i] = {coordinate(predicted_state.bloch(), run.axis), sample};
    });
    return out;
}

uint64_t OccupancyGrid::total(size_t time_index) const {
    uint64_t n = 0;
    for (const auto &[cell, c] : counts.at(time_index)) n += c;
    return n;
}

int OccupancyGrid::cells_per_axis() const {
    return static_cast<int>(std::ceil(2 / cell_side - 1e-9));
}

int OccupancyGrid::cell_of(double c) const {
    int i = static_cast<int>(std::floor((c + 1) / cell_side));
    return std::clamp(i, 0, cells_per_axis() - 1);
}

double OccupancyGrid::cell_center(int index) const {
    return -1 + (index + 0.5) * cell_side;
}

OccupancyAccumulator::OccupancyAccumulator(std::vector<double> times, double cell_side) {
    if (!(cell_side > 0 && cell_side <= 2)) {
        throw ConfigError("cell side must lie in (0, 2]");
    }
    grid_.cell_side = cell_side;
    grid_.times = std::move(times);
    grid_.counts.resize(grid_.times.size());
}

void OccupancyAccumulator::add(const Trajectory &tr) {
    for (size_t k = 0; k < grid_.times.size(); ++k) {
        double t = grid_.times[k];
        auto j = static_cast<size_t>(std::llround(t / tr.params.dt));
        if (j >= tr.size() || std::abs(tr.times[j] - t) > 1e-9 * std::max(1.0, t)) {
            throw ConfigError("occupancy: time " + std::to_string(t) + " is not a trajectory sample time");
        }
        Bloch b = tr.states[j].bloch();
        ++grid_.counts[k][{grid_.cell_of(b.x), grid_.cell_of(b.y), grid_.cell_of(b.z)}];
    }
}

void OccupancyAccumulator::merge(const OccupancyAccumulator &other) {
    if (other.grid_.times != grid_.times || other.grid_.cell_side != grid_.cell_side) {
        throw ConfigError("occupancy: cannot merge grids with different layouts");
    }
    for (size_t k = 0; k < grid_.times.size(); ++k) {
        for (const auto &[cell, c] : other.grid_.counts[k]) grid_.counts[k][cell] += c;
    }
}

OccupancyGrid occupancy(std::span<const Trajectory> ensemble, std::span<const double> times, double cell_side) {
    OccupancyAccumulator acc(std::vector<double>(times.begin(), times.end()), cell_side);
    for (const auto &tr : ensemble) acc.add(tr);
    return acc.grid();
}

ExcitationIncreaseStats excitation_increase_stats(std::span<const Trajectory> ensemble, size_t max_examples) {
    ExcitationIncreaseStats st;
    st.count = ensemble.size();
    if (ensemble.empty()) return st;
    size_t zpos = 0, reinc = 0;
    for (size_t i = 0; i < ensemble.size(); ++i) {
        const auto &states = ensemble[i].states;
        bool positive = false, rises = false;
        for (size_t k = 1; k < states.size(); ++k) {
            double z = states[k].z();
            positive = positive || z > 0;
            rises = rises || (k >= 2 && z > states[1].z());
        }
        if (positive) {
            ++zpos;
            if (st.example_indices.size() < max_examples) st.example_indices.push_back(i);
        }
        reinc += rises;
    }
    st.fraction_zpos = static_cast<double>(zpos) / ensemble.size();
    st.fraction_reincrease = static_cast<double>(reinc) / ensemble.size();
    return st;
}

}  // namespace qsd

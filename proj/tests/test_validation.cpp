#include <gtest/gtest.h>

#include <cmath>

#include "qsd/analytics.hpp"
#include "qsd/errors.hpp"
#include "qsd/parallel.hpp"
#include "qsd/validation.hpp"

using namespace qsd;

namespace {

std::vector<Trajectory> ensemble(const InitialState &init, const SimParams &p, size_t n, uint64_t first = 0) {
    std::vector<Trajectory> out(n);
    parallel_for(n, 0, [&](size_t i) { out[i] = synthesize(init, p, first + i).trajectory; });
    return out;
}

double readout_mean(const QubitState &s, Axis axis, const ReadoutFidelity &f, size_t n, uint64_t seed) {
    Stream rng = Stream::for_trajectory(seed, 0, StreamTag::Readout);
    double sum = 0;
    for (size_t i = 0; i < n; ++i) sum += simulate_readout(s, axis, f, rng);
    return sum / n;
}

TomographyEntry entry(double predicted, int outcome, Axis axis = Axis::X, double t = 4) {
    return {predicted, {axis, outcome, 0, t}};
}

}  // namespace

TEST(Axis, NamesAndCoordinates) {
    EXPECT_EQ(parse_axis(axis_name(Axis::Y)), Axis::Y);
    EXPECT_THROW(parse_axis("w"), ConfigError);
    EXPECT_EQ(coordinate({0.1, 0.2, 0.3}, Axis::Z), 0.3);
}

TEST(SimulateReadout, DeterministicCases) {
    Stream rng(1);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(simulate_readout(QubitState::from_bloch({0, 0, 1}), Axis::Z, {}, rng), 1);
        EXPECT_EQ(simulate_readout(QubitState::from_bloch({1, 0, 0}), Axis::X, {}, rng), 1);
        EXPECT_EQ(simulate_readout(QubitState::from_bloch({0, 0, -1}), Axis::Z, {}, rng), -1);
    }
}

TEST(SimulateReadout, MaximallyMixedIsUnbiased) {
    const size_t n = 100000;
    for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
        EXPECT_LE(std::abs(readout_mean(QubitState::from_bloch({0, 0, 0}), a, {}, n, 2)), 3 / std::sqrt(double(n)));
    }
}

TEST(CorrectReadoutMeans, Examples) {
    EXPECT_DOUBLE_EQ(correct_readout_means(0.37, {}), 0.37);
    EXPECT_DOUBLE_EQ(correct_readout_means(0, {0.9, 0.9}), 0);
    // Forward model: a true mean of 0.5 under symmetric 0.9 fidelity reads 0.4.
    EXPECT_NEAR(correct_readout_means(0.4, {0.9, 0.9}), 0.5, 1e-15);
    EXPECT_THROW(correct_readout_means(0.1, {0.5, 0.5}), ConfigError);
}

// Forward-then-invert oracle with asymmetric fidelities: the raw mean follows
// from the confusion matrix in closed form and from sampling.
TEST(CorrectReadoutMeans, InvertsAsymmetricConfusion) {
    ReadoutFidelity f{0.93, 0.97};
    for (double z : {-0.8, -0.1, 0.35, 0.9}) {
        double p_plus = 0.5 * (1 + z);
        double prob_plus = p_plus * f.excited + (1 - p_plus) * (1 - f.ground);
        double raw = 2 * prob_plus - 1;
        EXPECT_NEAR(correct_readout_means(raw, f), z, 1e-14);
        const size_t n = 200000;
        double simulated = readout_mean(QubitState::from_bloch({0, 0, z}), Axis::Z, f, n, 3);
        double se = std::sqrt(1 - raw * raw) / std::sqrt(double(n)) / (f.excited + f.ground - 1);
        EXPECT_NEAR(correct_readout_means(simulated, f), z, 4 * se);
    }
}

TEST(ReadoutFidelity, Range) {
    EXPECT_THROW((ReadoutFidelity{0.5, 0.9}).validate(), ConfigError);
    EXPECT_THROW((ReadoutFidelity{0.9, 1.1}).validate(), ConfigError);
    EXPECT_NO_THROW((ReadoutFidelity{0.51, 1}).validate());
}

TEST(ConditionalMeanTest, BinningStatisticsByHand) {
    std::vector<TomographyEntry> entries;
    // Bin centred on 0.4: 30 of 50 outcomes +1 -> mean 0.2.
    for (int i = 0; i < 50; ++i) entries.push_back(entry(0.41, i < 30 ? 1 : -1));
    // Bin centred on -0.4: 45 of 60 outcomes -1 -> mean -0.5.
    for (int i = 0; i < 60; ++i) entries.push_back(entry(-0.39, i < 45 ? -1 : 1));
    // Sparse bin, dropped.
    for (int i = 0; i < 10; ++i) entries.push_back(entry(0.0, 1));

    ConditionalMeanReport r = conditional_mean_test(entries, Axis::X, 4);
    ASSERT_EQ(r.bins.size(), 2u);
    EXPECT_EQ(r.dropped_bins, 1u);
    EXPECT_EQ(r.total, 120u);
    EXPECT_NEAR(r.bins[0].center, -0.4, 1e-15);
    EXPECT_EQ(r.bins[0].count, 60u);
    EXPECT_NEAR(r.bins[0].mean_tomo, -0.5, 1e-15);
    // Sample sd of 15 (+1) and 45 (-1): sqrt(60 * 0.75 / 59).
    EXPECT_NEAR(r.bins[0].std_error, std::sqrt(60 * 0.75 / 59) / std::sqrt(60.0), 1e-14);
    EXPECT_NEAR(r.bins[1].mean_tomo, 0.2, 1e-15);
    EXPECT_NEAR(r.bins[1].mean_predicted, 0.41, 1e-15);
    // Two points: the weighted least-squares slope is the chord.
    EXPECT_NEAR(r.slope, (0.2 - -0.5) / 0.8, 1e-12);
    // Deviations are 0.89 SE (bin -0.4) and 1.43 SE (bin 0.4).
    EXPECT_EQ(r.bins_within(3), 2u);
    EXPECT_EQ(r.bins_within(1), 1u);
    EXPECT_EQ(r.bins_within(0.5), 0u);
}

TEST(ConditionalMeanTest, AllGroundSingleBin) {
    SimParams p;
    p.horizon = 4;
    TomographyRun run{InitialState::ground(), p, p.eta, Axis::Z, {}, 0, 500};
    auto entries = run_tomography(run, 0);
    ConditionalMeanReport r = conditional_mean_test(entries, Axis::Z, 4);
    ASSERT_EQ(r.bins.size(), 1u);
    EXPECT_NEAR(r.bins[0].center, -1, 1e-15);
    EXPECT_DOUBLE_EQ(r.bins[0].mean_tomo, -1);
    EXPECT_TRUE(std::isnan(r.slope));
}

TEST(ConditionalMeanTest, Errors) {
    std::vector<TomographyEntry> none;
    EXPECT_THROW(conditional_mean_test(none, Axis::X, 4), ConfigError);
    std::vector<TomographyEntry> mixed{entry(0.1, 1, Axis::X), entry(0.1, 1, Axis::Y)};
    EXPECT_THROW(conditional_mean_test(mixed, Axis::X, 4), ConfigError);
    std::vector<TomographyEntry> times{entry(0.1, 1, Axis::X, 4), entry(0.1, 1, Axis::X, 5)};
    EXPECT_THROW(conditional_mean_test(times, Axis::X, 4), ConfigError);
}

TEST(ConditionalMeanTest, TrajectoryOverloadReadsFinalCoordinate) {
    SimParams p;
    p.horizon = 2;
    auto trajs = ensemble(InitialState::plus_x(), p, 100);
    std::vector<TomographySample> samples(100, TomographySample{Axis::X, 1, 0, 2});
    ConditionalMeanReport r = conditional_mean_test(trajs, samples, Axis::X, 2, {}, {0.5, 1});
    double mean = 0;
    for (const auto &t : trajs) mean += t.states.back().x() / 100;
    EXPECT_NEAR(r.mean_predicted, mean, 1e-12);
    std::vector<TomographySample> short_samples(99);
    EXPECT_THROW(conditional_mean_test(trajs, short_samples, Axis::X, 2), ConfigError);
    EXPECT_THROW(conditional_mean_test(trajs, samples, Axis::X, 2.1), ConfigError);
}

// Law of total expectation: corrected mean outcome equals mean prediction.
TEST(Tomography, TotalExpectationPerAxisAndTime) {
    SimParams p;
    ReadoutFidelity f{0.95, 0.92};
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
        for (int T = 1; T <= 10; ++T) {
            p.horizon = T;
            TomographyRun run{InitialState::plus_x(), p, p.eta, axis, f, uint64_t(T) * 100000, 4000};
            ConditionalMeanReport r = conditional_mean_test(run_tomography(run, 0), axis, T, f);
            EXPECT_LE(std::abs(r.mean_tomo - r.mean_predicted), 3 * r.mean_tomo_std_error)
                << axis_name(axis) << " T=" << T;
        }
    }
}

TEST(Tomography, CalibratedSlopeNearOne) {
    SimParams p;
    p.horizon = 4;
    TomographyRun run{InitialState::plus_x(), p, p.eta, Axis::X, {}, 0, 20000};
    ConditionalMeanReport r = conditional_mean_test(run_tomography(run, 0), Axis::X, 4);
    EXPECT_LE(std::abs(r.slope - 1), 4 * r.slope_std_error);
    EXPECT_GE(r.bins_within(3), static_cast<size_t>(0.9 * r.bins.size()));
}

TEST(Occupancy, InitialCellAndConservation) {
    SimParams p;
    p.horizon = 2;
    auto trajs = ensemble(InitialState::plus_x(), p, 300);
    std::vector<double> times{0, 1, 2};
    OccupancyGrid g = occupancy(trajs, times, 0.04);
    ASSERT_EQ(g.counts[0].size(), 1u);
    const auto &[cell, n] = *g.counts[0].begin();
    EXPECT_EQ(n, 300u);
    EXPECT_LE(std::abs(g.cell_center(cell.ix) - 1), 0.02 + 1e-12);
    EXPECT_LE(std::abs(g.cell_center(cell.iy)), 0.02 + 1e-12);
    for (size_t k = 0; k < times.size(); ++k) EXPECT_EQ(g.total(k), 300u);
    for (const auto &layer : g.counts) {
        for (const auto &[c, count] : layer) {
            for (int i : {c.ix, c.iy, c.iz}) {
                EXPECT_GE(i, 0);
                EXPECT_LT(i, g.cells_per_axis());
            }
        }
    }
    std::vector<double> bad{0.3};
    EXPECT_THROW(occupancy(trajs, bad, 0.04), ConfigError);
    EXPECT_THROW(occupancy(trajs, times, 0), ConfigError);
}

TEST(Occupancy, LateTimesConcentrateAtSouthPole) {
    SimParams p;
    p.horizon = 40;
    auto trajs = ensemble(InitialState::plus_x(), p, 300);
    std::vector<double> times{40};
    OccupancyGrid g = occupancy(trajs, times, 0.04);
    uint64_t near = 0;
    for (const auto &[c, n] : g.counts[0]) {
        if (c.iz == 0 && std::abs(g.cell_center(c.ix)) < 0.05 && std::abs(g.cell_center(c.iy)) < 0.05) near += n;
    }
    EXPECT_EQ(near, 300u);
}

TEST(Occupancy, MergeMatchesSinglePassAndHalvesAgree) {
    SimParams p;
    p.horizon = 2;
    auto trajs = ensemble(InitialState::excited(), p, 8000);
    std::vector<double> times{2};
    const double side = 0.25;
    OccupancyAccumulator a(times, side), b(times, side);
    for (size_t i = 0; i < trajs.size(); ++i) (i % 2 ? b : a).add(trajs[i]);
    OccupancyAccumulator merged = a;
    merged.merge(b);
    EXPECT_EQ(merged.grid().counts, occupancy(trajs, times, side).counts);

    // Two-sample chi-square homogeneity over cells with enough mass.
    double stat = 0;
    int dof = -1;
    auto layer_a = a.grid().counts[0], layer_b = b.grid().counts[0];
    for (const auto &[cell, na] : merged.grid().counts[0]) {
        double x = layer_a.count(cell) ? double(layer_a.at(cell)) : 0;
        double y = layer_b.count(cell) ? double(layer_b.at(cell)) : 0;
        if (x + y < 20) continue;
        stat += (x - y) * (x - y) / (x + y);
        ++dof;
    }
    ASSERT_GT(dof, 5);
    EXPECT_LT(stat, dof + 5 * std::sqrt(2.0 * dof));

    OccupancyAccumulator other(std::vector<double>{1}, side);
    EXPECT_THROW(merged.merge(other), ConfigError);
}

// Residual-distribution oracle: the ensemble at 4 us hugs the flowing spheroid
// on the scale set by its own RMS residual.
TEST(Occupancy, StatesHugTheSpheroidUnderDephasing) {
    SimParams p;
    p.horizon = 4;
    auto trajs = ensemble(InitialState::excited(), p, 5000);
    double flow = alpha_flow(1, p, 4);
    std::vector<double> r;
    double sum2 = 0;
    for (const auto &t : trajs) {
        r.push_back(std::abs(spheroid_residual(t.states.back(), flow)));
        sum2 += r.back() * r.back();
    }
    double rms = std::sqrt(sum2 / r.size());
    size_t inside = std::count_if(r.begin(), r.end(), [&](double v) { return v <= 3 * rms; });
    EXPECT_GE(inside, static_cast<size_t>(0.95 * r.size()));
}

TEST(ExcitationIncrease, ZeroEfficiencyNeverRises) {
    SimParams p;
    p.eta = 0;
    auto st = excitation_increase_stats(ensemble(InitialState::plus_x(), p, 200));
    EXPECT_EQ(st.fraction_zpos, 0.0);
    EXPECT_TRUE(st.example_indices.empty());
}

TEST(ExcitationIncrease, MonitoringCanLiftExcitation) {
    SimParams p;
    auto st = excitation_increase_stats(ensemble(InitialState::plus_x(), p, 2000), 5);
    EXPECT_GT(st.fraction_zpos, 0.0);
    EXPECT_LE(st.example_indices.size(), 5u);
    auto ex = excitation_increase_stats(ensemble(InitialState::excited(), p, 2000));
    EXPECT_GT(ex.fraction_reincrease, 0.0);
    EXPECT_LT(ex.fraction_reincrease, 1.0);
}

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qsd/core.hpp"
#include "qsd/sde_engine.hpp"

namespace qsd {

/// Innovations (prediction-error) log-likelihood of one record under the
/// candidate parameters: the Kraus filter runs with p, and each increment is
/// scored as N(dI; sqrt(eta gamma1/2) <sigma_x> dt, dt) times the Q analogue,
/// using the state before that increment.
double record_log_likelihood(const InitialState &init, const HeterodyneRecord &rec, const SimParams &p);

/// Sum over records; per-record values are sorted before summation so the
/// total does not depend on record order or thread scheduling.
double ensemble_log_likelihood(const InitialState &init, std::span<const HeterodyneRecord> recs,
                               const SimParams &p, unsigned threads = 0);

struct EtaGrid {
    double lo = 0;
    double hi = 1;
    int n = 41;
};

struct LikelihoodResult {
    double eta_hat = 0;
    double max_log_likelihood = 0;
    /// (eta, log-likelihood) on the grid.
    std::vector<std::pair<double, double>> curve;
    /// Profile-likelihood interval: where the curve is 1.92 below its maximum,
    /// clipped to the grid range.
    std::pair<double, double> ci95{0, 1};
    /// The grid maximizer sat on the first or last grid point.
    bool boundary_warning = false;
};

/// Grid search over eta, then golden-section refinement to 1e-4 between the
/// grid neighbours of the best point. gamma1 and gamma_phi are taken from
/// `known`; its eta is ignored.
LikelihoodResult estimate_eta(const InitialState &init, std::span<const HeterodyneRecord> recs,
                              const SimParams &known, const EtaGrid &grid = {}, unsigned threads = 0);

}  // namespace qsd

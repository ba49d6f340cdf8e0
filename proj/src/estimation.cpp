#include "qsd/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qsd/parallel.hpp"

namespace qsd {

namespace {

constexpr double kProfileDrop = 1.92;
constexpr double kGoldenTol = 1e-4;
constexpr double kIntervalTol = 1e-5;

SimParams with_eta(const SimParams &p, double eta) {
    SimParams q = p;
    q.eta = eta;
    return q;
}

double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double total = 0;
    for (double x : v) total += x;
    return total;
}

}  // namespace

double record_log_likelihood(const InitialState &init, const HeterodyneRecord &rec, const SimParams &p) {
    if (std::abs(rec.dt - p.dt) > 1e-12 * p.dt) {
        throw ConfigError("record dt does not match parameter dt");
    }
    const double dt = p.dt;
    const double k = p.measurement_amplitude();
    const double norm = -std::log(2 * std::numbers::pi * dt);  // two channels
    double ll = 0;
    const KrausPropagator kraus(p, detail::kQuadratureSign);
    QubitState s = init.state();
    for (const auto &inc : rec.increments) {
        double rI = inc.dI - k * s.x() * dt;
        double rQ = inc.dQ - k * s.y() * dt;
        ll += norm - (rI * rI + rQ * rQ) / (2 * dt);
        s = kraus.step(s, inc.dI, inc.dQ);
    }
    return ll;
}

double ensemble_log_likelihood(const InitialState &init, std::span<const HeterodyneRecord> recs,
                               const SimParams &p, unsigned threads) {
    std::vector<double> per(recs.size());
    parallel_for(recs.size(), threads, [&](size_t i) { per[i] = record_log_likelihood(init, recs[i], p); });
    return sorted_sum(std::move(per));
}

LikelihoodResult estimate_eta(const InitialState &init, std::span<const HeterodyneRecord> recs,
                              const SimParams &known, const EtaGrid &grid, unsigned threads) {
    if (recs.empty()) {
        throw ConfigError("estimate_eta needs at least one record");
    }
    if (!(grid.lo >= 0 && grid.lo < grid.hi && grid.hi <= 1) || grid.n < 2) {
        throw ConfigError("eta grid must satisfy 0 <= lo < hi <= 1 with n >= 2");
    }
    auto ll = [&](double eta) { return ensemble_log_likelihood(init, recs, with_eta(known, eta), threads); };

    LikelihoodResult out;
    size_t best = 0;
    for (int i = 0; i < grid.n; ++i) {
        double eta = grid.lo + (grid.hi - grid.lo) * i / (grid.n - 1);
        double v = ll(eta);
        out.curve.emplace_back(eta, v);
        if (v > out.curve[best].second) best = static_cast<size_t>(i);
    }
    out.boundary_warning = best == 0 || best + 1 == out.curve.size();

    // Golden-section between the grid neighbours of the best point.
    double a = out.curve[best == 0 ? 0 : best - 1].first;
    double b = out.curve[std::min(best + 1, out.curve.size() - 1)].first;
    const double inv_phi = (std::sqrt(5.0) - 1) / 2;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = ll(c), fd = ll(d);
    while (b - a > kGoldenTol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ll(d);
        }
    }
    double refined = 0.5 * (a + b);
    double f_refined = ll(refined);
    out.eta_hat = refined;
    out.max_log_likelihood = f_refined;
    if (out.curve[best].second > f_refined) {
        out.eta_hat = out.curve[best].first;
        out.max_log_likelihood = out.curve[best].second;
    }

    // Profile-likelihood interval by bisection on each side.
    const double target = out.max_log_likelihood - kProfileDrop;
    auto crossing = [&](double inside, double outside) {
        if (ll(outside) >= target) return outside;
        while (std::abs(outside - inside) > kIntervalTol) {
            double mid = 0.5 * (inside + outside);
            (ll(mid) >= target ? inside : outside) = mid;
        }
        return 0.5 * (inside + outside);
    };
    out.ci95 = {crossing(out.eta_hat, grid.lo), crossing(out.eta_hat, grid.hi)};
    return out;
}

}  // namespace qsd

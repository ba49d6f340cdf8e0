#pragma once

#include <optional>
#include <vector>

#include "qsd/core.hpp"
#include "qsd/sde_engine.hpp"

namespace qsd {

/// Position on a spheroid through the south pole.
struct Xi {
    double x = 0;
    double y = 0;
};

struct SpheroidCoord {
    double alpha = 1;
    Xi xi;
};

/// Below this excited population a state is treated as absorbed in |g>:
/// alpha_of and xi_of both return nullopt. Equivalently z + 1 <= 2 * floor.
inline constexpr double kSouthPoleFloor = 1e-6;

/// alpha = 1 + S_L / (2 p_e^2); nullopt at the south pole.
std::optional<double> alpha_of(const QubitState &s, double pe_floor = kSouthPoleFloor);

/// alpha(t) = eta + (alpha0 - eta) e^{gamma1 t}.
double alpha_flow(double alpha0, const SimParams &p, double t);

/// alpha (x^2 + y^2) + alpha^2 (z + 1 - 1/alpha)^2 - 1.
double spheroid_residual(const QubitState &s, double alpha);
double spheroid_residual(const Bloch &b, double alpha);

/// (x, y) / (z + 1); nullopt at the south pole.
std::optional<Xi> xi_of(const QubitState &s, double pe_floor = kSouthPoleFloor);

/// Record-only reconstruction of xi at time t (a multiple of rec.dt):
///   xi(t) = xi0 e^{gamma1 t/2} + sqrt(eta gamma1/2) sum_k e^{gamma1 (t - t_k)/2} dI_k
/// with left-point weights; the Q channel feeds xi.y.
Xi xi_from_record(const Xi &xi0, const HeterodyneRecord &rec, const SimParams &p, double t);

/// xi at every record time 0, dt, ..., n dt (same quadrature, O(n)).
std::vector<Xi> xi_path_from_record(const Xi &xi0, const HeterodyneRecord &rec, const SimParams &p);

/// Inverse of (alpha_of, xi_of): w = z + 1 is the positive root of
/// alpha |xi|^2 w^2 + alpha^2 (w - 1/alpha)^2 = 1, i.e. w = 2 / (|xi|^2 + alpha).
QubitState state_from_spheroid(const SpheroidCoord &c);

}  // namespace qsd

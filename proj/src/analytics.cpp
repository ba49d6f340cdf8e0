#include "qsd/analytics.hpp"

#include <cmath>
#include <stdexcept>

namespace qsd {

std::optional<double> alpha_of(const QubitState &s, double pe_floor) {
    double pe = excited_prob(s);
    if (pe <= pe_floor) {
        return std::nullopt;
    }
    return 1 + linear_entropy(s) / (2 * pe * pe);
}

double alpha_flow(double alpha0, const SimParams &p, double t) {
    return p.eta + (alpha0 - p.eta) * std::exp(p.gamma1 * t);
}

double spheroid_residual(const Bloch &b, double alpha) {
    double lift = b.z + 1 - 1 / alpha;
    return alpha * (b.x * b.x + b.y * b.y) + alpha * alpha * lift * lift - 1;
}

double spheroid_residual(const QubitState &s, double alpha) {
    return spheroid_residual(s.bloch(), alpha);
}

std::optional<Xi> xi_of(const QubitState &s, double pe_floor) {
    if (excited_prob(s) <= pe_floor) {
        return std::nullopt;
    }
    double w = s.z() + 1;
    return Xi{s.x() / w, s.y() / w};
}

Xi xi_from_record(const Xi &xi0, const HeterodyneRecord &rec, const SimParams &p, double t) {
    double steps_f = t / rec.dt;
    auto n = static_cast<size_t>(std::llround(steps_f));
    if (t < 0 || std::abs(steps_f - static_cast<double>(n)) > 1e-6 || n > rec.size()) {
        throw ConfigError("xi_from_record: t must be a multiple of dt within the record");
    }
    const double half_rate = 0.5 * p.gamma1;
    const double k = p.measurement_amplitude();
    const double tn = rec.time(n);
    Xi out{xi0.x * std::exp(half_rate * tn), xi0.y * std::exp(half_rate * tn)};
    for (size_t j = 0; j < n; ++j) {
        double w = k * std::exp(half_rate * (tn - rec.time(j)));
        out.x += w * rec.increments[j].dI;
        out.y += w * rec.increments[j].dQ;
    }
    return out;
}

std::vector<Xi> xi_path_from_record(const Xi &xi0, const HeterodyneRecord &rec, const SimParams &p) {
    const double growth = std::exp(0.5 * p.gamma1 * rec.dt);
    const double k = p.measurement_amplitude();
    std::vector<Xi> out;
    out.reserve(rec.size() + 1);
    out.push_back(xi0);
    Xi cur = xi0;
    for (const auto &inc : rec.increments) {
        cur.x = growth * (cur.x + k * inc.dI);
        cur.y = growth * (cur.y + k * inc.dQ);
        out.push_back(cur);
    }
    return out;
}

QubitState state_from_spheroid(const SpheroidCoord &c) {
    if (!(c.alpha >= 1 - 1e-9)) {
        throw ConfigError("state_from_spheroid requires alpha >= 1");
    }
    double xi2 = c.xi.x * c.xi.x + c.xi.y * c.xi.y;
    double w = 2 / (xi2 + c.alpha);
    if (!(w > 0) || !std::isfinite(w)) {
        throw std::logic_error("state_from_spheroid: no positive root");
    }
    return QubitState::from_bloch({c.xi.x * w, c.xi.y * w, w - 1});
}

}  // namespace qsd

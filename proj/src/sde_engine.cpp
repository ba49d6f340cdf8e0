#include "qsd/sde_engine.hpp"

#include <cmath>
#include <string>

#include "qsd/rng.hpp"

namespace qsd {

namespace {

constexpr double kBlowupTrace = 0.1;

Trajectory start_trajectory(const QubitState &s0, const SimParams &p, size_t steps, Provenance prov, Scheme scheme) {
    Trajectory tr;
    tr.params = p;
    tr.provenance = prov;
    tr.scheme = scheme;
    tr.times.reserve(steps + 1);
    tr.states.reserve(steps + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(s0);
    return tr;
}

}  // namespace

HeterodyneRecord coarsen(const HeterodyneRecord &rec, size_t factor) {
    if (factor == 0 || rec.size() % factor != 0) {
        throw ConfigError("coarsening factor must divide the record length");
    }
    HeterodyneRecord out;
    out.dt = rec.dt * static_cast<double>(factor);
    out.meta = rec.meta;
    out.increments.reserve(rec.size() / factor);
    for (size_t k = 0; k < rec.size(); k += factor) {
        Increment sum;
        for (size_t j = 0; j < factor; ++j) {
            sum.dI += rec.increments[k + j].dI;
            sum.dQ += rec.increments[k + j].dQ;
        }
        out.increments.push_back(sum);
    }
    return out;
}

const char *scheme_name(Scheme s) {
    return s == Scheme::Kraus ? "kraus" : "euler";
}

Scheme parse_scheme(const std::string &text) {
    if (text == "kraus") return Scheme::Kraus;
    if (text == "euler") return Scheme::Euler;
    throw ConfigError("unknown scheme '" + text + "' (expected kraus or euler)");
}

Matrix2c lindblad_dissipator(const Matrix2c &L, const Matrix2c &rho) {
    Matrix2c LdL = L.adjoint() * L;
    return L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

Matrix2c measurement_superop(const Matrix2c &L, const Matrix2c &rho) {
    Complex mean = (L * rho).trace();
    Matrix2c shifted = L - mean * Matrix2c::Identity();
    return shifted * rho + rho * shifted.adjoint();
}

KrausPropagator::KrausPropagator(const SimParams &p, int quadrature_sign)
    : decay_(std::exp(-p.gamma1 * p.dt)),
      amp_(std::sqrt(decay_)),
      coherence_keep_(std::exp(-p.gamma_phi * p.dt)),
      unmonitored_((1 - p.eta) * (1 - decay_)),
      meas_(p.measurement_amplitude()),
      sign_(quadrature_sign) {
}

QubitState KrausPropagator::step(const QubitState &s, double dI, double dQ) const {
    const Matrix2c &rho = s.rho();
    const double ree = rho(kExcited, kExcited).real();
    const double rgg = rho(kGround, kGround).real();
    const Complex reg = rho(kExcited, kGround);
    const Complex c = meas_ * Complex(dI, sign_ * dQ);

    // M = [[amp, 0], [c, 1]] in the (e, g) basis; dephasing scales coherences
    // only, unmonitored decay feeds the ground population.
    double ee = decay_ * ree;
    Complex eg = coherence_keep_ * amp_ * (ree * std::conj(c) + reg);
    double gg = rgg + std::norm(c) * ree + 2 * (c * reg).real() + unmonitored_ * ree;

    double tr = ee + gg;
    Matrix2c out;
    out << ee / tr, eg / tr, std::conj(eg) / tr, gg / tr;
    return QubitState::unchecked(out);
}

namespace detail {

QubitState kraus_step_signed(const QubitState &s, double dI, double dQ, const SimParams &p, int quadrature_sign) {
    return KrausPropagator(p, quadrature_sign).step(s, dI, dQ);
}

}  // namespace detail

QubitState kraus_step(const QubitState &s, double dI, double dQ, const SimParams &p) {
    return KrausPropagator(p, detail::kQuadratureSign).step(s, dI, dQ);
}

EulerStep euler_step(const QubitState &s, double dI, double dQ, const SimParams &p) {
    const Matrix2c &rho = s.rho();
    const double k = p.measurement_amplitude();
    const double dWI = dI - k * s.x() * p.dt;
    const double dWQ = dQ - k * s.y() * p.dt;
    const Matrix2c &sm = pauli::sigma_minus();
    const Matrix2c ism = Complex(0, 1) * sm;

    Matrix2c drho = (p.gamma1 * lindblad_dissipator(sm, rho) +
                     0.5 * p.gamma_phi * lindblad_dissipator(pauli::sigma_z(), rho)) *
                        p.dt +
                    k * measurement_superop(sm, rho) * dWI + k * measurement_superop(ism, rho) * dWQ;
    Matrix2c next = rho + drho;
    next = 0.5 * (next + next.adjoint());
    double tr = next.trace().real();
    if (!next.allFinite() || !std::isfinite(tr) || std::abs(tr - 1) > kBlowupTrace) {
        throw NumericalBlowup("euler step lost trace: Tr(rho') = " + std::to_string(tr));
    }
    return {QubitState::unchecked(next / tr), std::abs(tr - 1)};
}

std::vector<Increment> noise_path(const SimParams &p, uint64_t index) {
    size_t n = p.steps() * static_cast<size_t>(p.substeps);
    double sd = std::sqrt(p.dt / p.substeps);
    Stream rng = Stream::for_trajectory(p.master_seed, index, StreamTag::Noise);
    std::vector<Increment> out(n);
    for (auto &inc : out) {
        auto [a, b] = rng.normal_pair();
        inc = {sd * a, sd * b};
    }
    return out;
}

Synthesis synthesize(const InitialState &init, const SimParams &p, uint64_t trajectory_index) {
    p.validate();
    const size_t n = p.steps();
    const int sub = p.substeps;
    SimParams fine = p;
    fine.dt = p.dt / sub;
    const double k = p.measurement_amplitude();

    Synthesis out;
    out.record.dt = p.dt;
    out.record.meta = {p.gamma1, p.gamma_phi, p.eta, p.master_seed, trajectory_index};
    out.record.increments.reserve(n);
    out.trajectory = start_trajectory(init.state(), p, n, Provenance::Synthesized, Scheme::Kraus);

    Stream rng = Stream::for_trajectory(p.master_seed, trajectory_index, StreamTag::Noise);
    const double sd = std::sqrt(fine.dt);
    const KrausPropagator kraus(fine, detail::kQuadratureSign);
    QubitState s = out.trajectory.states.front();
    for (size_t step = 0; step < n; ++step) {
        Increment acc;
        for (int j = 0; j < sub; ++j) {
            auto [a, b] = rng.normal_pair();
            double dI = k * s.x() * fine.dt + sd * a;
            double dQ = k * s.y() * fine.dt + sd * b;
            s = kraus.step(s, dI, dQ);
            acc.dI += dI;
            acc.dQ += dQ;
        }
        out.record.increments.push_back(acc);
        out.trajectory.times.push_back(p.dt * static_cast<double>(step + 1));
        out.trajectory.states.push_back(s);
    }
    return out;
}

Trajectory filter(const InitialState &init, const HeterodyneRecord &rec, const SimParams &p, Scheme scheme) {
    p.validate();
    if (std::abs(rec.dt - p.dt) > 1e-12 * p.dt) {
        throw ConfigError("record dt " + std::to_string(rec.dt) + " does not match parameter dt " +
                          std::to_string(p.dt));
    }
    if (rec.size() == 0) {
        throw ConfigError("record is empty");
    }
    Trajectory tr = start_trajectory(init.state(), p, rec.size(), Provenance::Filtered, scheme);
    const KrausPropagator kraus(p, detail::kQuadratureSign);
    QubitState s = tr.states.front();
    for (size_t k = 0; k < rec.size(); ++k) {
        const auto &inc = rec.increments[k];
        if (scheme == Scheme::Kraus) {
            s = kraus.step(s, inc.dI, inc.dQ);
        } else {
            EulerStep e = euler_step(s, inc.dI, inc.dQ, p);
            s = e.state;
            tr.max_trace_correction = std::max(tr.max_trace_correction, e.trace_correction);
            if (s.min_eigenvalue() < -1e-12) {
                ++tr.positivity_violations;
            }
        }
        tr.times.push_back(rec.time(k + 1));
        tr.states.push_back(s);
    }
    return tr;
}

QubitState lindblad_solve(const InitialState &init, const SimParams &p, double t) {
    if (!(t >= 0)) {
        throw ConfigError("lindblad_solve requires t >= 0");
    }
    Bloch b = init.state().bloch();
    double coherence = std::exp(-(0.5 * p.gamma1 + p.gamma_phi) * t);
    double population = std::exp(-p.gamma1 * t);
    return QubitState::from_bloch({b.x * coherence, b.y * coherence, -1 + (b.z + 1) * population});
}

}  // namespace qsd

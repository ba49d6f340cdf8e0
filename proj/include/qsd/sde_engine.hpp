#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qsd/core.hpp"

namespace qsd {

/// One heterodyne sample: quadrature increments over [t, t + dt), normalized
/// so that the pure-noise variance of each is dt.
struct Increment {
    double dI = 0;
    double dQ = 0;
};

/// Where a record came from; carried through the record file header.
struct RecordMeta {
    double gamma1 = 0;
    double gamma_phi = 0;
    double eta = 0;
    uint64_t seed = 0;
    uint64_t index = 0;
};

struct HeterodyneRecord {
    double dt = 0;
    std::vector<Increment> increments;
    RecordMeta meta;

    size_t size() const {
        return increments.size();
    }
    double horizon() const {
        return dt * static_cast<double>(increments.size());
    }
    double time(size_t k) const {
        return dt * static_cast<double>(k);
    }
};

/// Sum groups of `factor` consecutive increments (shared-path coarsening).
HeterodyneRecord coarsen(const HeterodyneRecord &rec, size_t factor);

enum class Provenance { Synthesized, Filtered };
enum class Scheme { Kraus, Euler };

const char *scheme_name(Scheme s);
Scheme parse_scheme(const std::string &text);

/// states[k] is the conditioned state at times[k] = k * dt; there is one more
/// state than record increments.
struct Trajectory {
    std::vector<double> times;
    std::vector<QubitState> states;
    Provenance provenance = Provenance::Filtered;
    Scheme scheme = Scheme::Kraus;
    SimParams params;
    /// Euler only: steps whose output was not positive semidefinite.
    size_t positivity_violations = 0;
    /// Euler only: largest |Tr(rho') - 1| removed by renormalization.
    double max_trace_correction = 0;

    size_t size() const {
        return states.size();
    }
};

struct Synthesis {
    HeterodyneRecord record;
    Trajectory trajectory;
};

/// Wiener increments (dW_I, dW_Q) of trajectory `index`, variance dt each.
std::vector<Increment> noise_path(const SimParams &p, uint64_t index);

/// Forward simulation: draws dW from the (master_seed, index) stream, forms
/// dI = sqrt(eta gamma1 / 2) <sigma_x> dt + dW_I (and Q alike) from the current
/// state, and advances the hidden state with the Kraus update. With
/// substeps == 1, filter(init, record, p) reproduces the trajectory exactly.
Synthesis synthesize(const InitialState &init, const SimParams &p, uint64_t trajectory_index);

/// Reconstructs the conditioned trajectory from a record.
///
/// Throws ConfigError when rec.dt differs from p.dt or the record is empty,
/// NumericalBlowup when the Euler scheme loses more than 0.1 of trace.
Trajectory filter(const InitialState &init, const HeterodyneRecord &rec, const SimParams &p,
                  Scheme scheme = Scheme::Kraus);

/// Positivity-preserving update. The deterministic factors are the exact
/// amplitude-damping / dephasing channel over dt; the measured branch is
///   M = sqrt(1-q) [ diag(e^{-gamma1 dt/2}, 1) + sqrt(eta gamma1/2) (dI + i dQ) sigma_minus ]
/// and
///   rho' ~ (1-q) M0 + q sz M0 sz + (1-eta)(1-e^{-gamma1 dt}) sigma_minus rho sigma_plus,
/// with M0 = M rho M^dagger / (1-q), q = (1 - e^{-gamma_phi dt}) / 2,
/// normalized by its trace. To first order in dt it is
///   M = 1 - [(gamma1/2) sp sm + (gamma_phi/4)] dt + sqrt(eta gamma1/2)(dI + i dQ) sm
/// plus the (1-eta) gamma1 dt and (gamma_phi/2) dt jump terms.
QubitState kraus_step(const QubitState &s, double dI, double dQ, const SimParams &p);

/// kraus_step with the per-dt constants computed once; used by every loop
/// that applies many steps with the same parameters.
class KrausPropagator {
   public:
    explicit KrausPropagator(const SimParams &p, int quadrature_sign = +1);
    QubitState step(const QubitState &s, double dI, double dQ) const;

   private:
    double decay_;
    double amp_;
    double coherence_keep_;
    double unmonitored_;
    double meas_;
    int sign_;
};

struct EulerStep {
    QubitState state;
    /// |Tr(rho') - 1| before renormalization.
    double trace_correction = 0;
};

/// Literal Ito-Euler discretization of the stochastic master equation, with
/// dW_I = dI - sqrt(eta gamma1/2) <sigma_x> dt and dW_Q alike. May leave the
/// positive cone for large dt; the result is returned unchecked.
EulerStep euler_step(const QubitState &s, double dI, double dQ, const SimParams &p);

/// Closed-form unconditioned (Lindblad) evolution.
QubitState lindblad_solve(const InitialState &init, const SimParams &p, double t);

/// Lindblad dissipator D[L]rho.
Matrix2c lindblad_dissipator(const Matrix2c &L, const Matrix2c &rho);
/// Measurement superoperator M[L]rho = (L - <L>) rho + rho (L - <L>)^dagger.
Matrix2c measurement_superop(const Matrix2c &L, const Matrix2c &rho);

namespace detail {
/// Sign s in (dI + s i dQ) sigma_minus that matches the M[i sigma_minus] dW_Q
/// term of the master equation; pinned by the expansion test.
inline constexpr int kQuadratureSign = +1;

QubitState kraus_step_signed(const QubitState &s, double dI, double dQ, const SimParams &p, int quadrature_sign);
}  // namespace detail

}  // namespace qsd

#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>

#include "qsd/errors.hpp"

namespace qsd {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

/// Basis ordering used for every 2x2 matrix in the toolkit: index 0 is the
/// excited state |e> (north pole, z = +1), index 1 is the ground state |g>.
constexpr int kExcited = 0;
constexpr int kGround = 1;

struct Bloch {
    double x = 0;
    double y = 0;
    double z = 0;

    double norm() const;
};

double distance(const Bloch &a, const Bloch &b);

namespace pauli {
const Matrix2c &identity();
const Matrix2c &sigma_x();
const Matrix2c &sigma_y();
const Matrix2c &sigma_z();
/// sigma_minus = |g><e|.
const Matrix2c &sigma_minus();
/// sigma_plus = |e><g|.
const Matrix2c &sigma_plus();
}  // namespace pauli

/// Single-qubit density matrix. The matrix is the primary representation;
/// the Bloch vector is derived on demand.
///
/// States built through `from_bloch` / `from_density` are checked against the
/// physical invariants (unit trace, Hermitian, positive semidefinite). The
/// explicit Euler integrator can leave the physical set, so `unchecked` exists
/// for it; such states are reported through `is_physical`.
class QubitState {
   public:
    QubitState();

    static QubitState from_bloch(const Bloch &b);
    static QubitState from_density(const Matrix2c &rho);
    static QubitState unchecked(const Matrix2c &rho);

    const Matrix2c &rho() const {
        return rho_;
    }
    Bloch bloch() const;
    double x() const;
    double y() const;
    double z() const;

    double min_eigenvalue() const;
    double purity() const;
    bool is_physical(double tol = 1e-12) const;

   private:
    explicit QubitState(const Matrix2c &rho) : rho_(rho) {
    }
    Matrix2c rho_;
};

QubitState density_from_bloch(const Bloch &b);
Bloch bloch_from_density(const QubitState &s);

/// 1 - Tr(rho^2), in [0, 1/2].
double linear_entropy(const QubitState &s);

/// (1 + <sigma_z>) / 2.
double excited_prob(const QubitState &s);

/// Rates in inverse microseconds, times in microseconds.
struct SimParams {
    double gamma1 = 1.0 / 4.15;
    double gamma_phi = 1.0 / 35.0;
    double eta = 0.24;
    double dt = 0.2;
    double horizon = 10.0;
    uint64_t master_seed = 1;
    /// Synthesis-only: evolve the hidden state on dt/substeps and sum the
    /// fine increments into each recorded increment.
    int substeps = 1;

    static SimParams nominal();

    /// Throws ConfigError on violated ranges.
    void validate() const;
    /// True when gamma1*dt is above the first-order comfort zone (0.05).
    bool coarse_step() const;

    size_t steps() const;
    /// sqrt(eta * gamma1 / 2), the record drift prefactor.
    double measurement_amplitude() const;
};

enum class InitialKind { PlusX, Excited, Ground, Custom };

class InitialState {
   public:
    InitialState() = default;
    static InitialState plus_x();
    static InitialState excited();
    static InitialState ground();
    static InitialState custom(const QubitState &s);

    InitialKind kind() const {
        return kind_;
    }
    QubitState state() const;
    std::string name() const;

    /// Accepts "plus_x", "excited", "ground" or "x,y,z".
    static InitialState parse(const std::string &text);

   private:
    InitialKind kind_ = InitialKind::Ground;
    std::optional<QubitState> custom_;
};

}  // namespace qsd

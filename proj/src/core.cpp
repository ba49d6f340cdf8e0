#include "qsd/core.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace qsd {

namespace {

constexpr double kTraceTol = 1e-12;
constexpr double kHermitianTol = 1e-12;
constexpr double kEigenTol = 1e-12;
constexpr double kBlochTol = 1e-9;

Matrix2c make(Complex a, Complex b, Complex c, Complex d) {
    Matrix2c m;
    m << a, b, c, d;
    return m;
}

}  // namespace

double Bloch::norm() const {
    return std::sqrt(x * x + y * y + z * z);
}

double distance(const Bloch &a, const Bloch &b) {
    double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

namespace pauli {

const Matrix2c &identity() {
    static const Matrix2c m = Matrix2c::Identity();
    return m;
}
const Matrix2c &sigma_x() {
    static const Matrix2c m = make(0, 1, 1, 0);
    return m;
}
const Matrix2c &sigma_y() {
    static const Matrix2c m = make(0, Complex(0, -1), Complex(0, 1), 0);
    return m;
}
const Matrix2c &sigma_z() {
    static const Matrix2c m = make(1, 0, 0, -1);
    return m;
}
const Matrix2c &sigma_minus() {
    // row g, column e
    static const Matrix2c m = make(0, 0, 1, 0);
    return m;
}
const Matrix2c &sigma_plus() {
    static const Matrix2c m = make(0, 1, 0, 0);
    return m;
}

}  // namespace pauli

QubitState::QubitState() : rho_(make(0, 0, 0, 1)) {
}

QubitState QubitState::from_bloch(const Bloch &b) {
    double n = b.norm();
    if (!std::isfinite(n) || n > 1 + kBlochTol) {
        std::ostringstream ss;
        ss << "Bloch vector (" << b.x << ", " << b.y << ", " << b.z << ") has norm " << n << " > 1";
        throw InvalidState(ss.str());
    }
    Bloch c = b;
    if (n > 1) {
        c.x /= n;
        c.y /= n;
        c.z /= n;
    }
    return QubitState(make(
        0.5 * (1 + c.z), Complex(0.5 * c.x, -0.5 * c.y), Complex(0.5 * c.x, 0.5 * c.y), 0.5 * (1 - c.z)));
}

QubitState QubitState::from_density(const Matrix2c &rho) {
    if (!rho.allFinite()) {
        throw InvalidState("density matrix has non-finite entries");
    }
    if (std::abs(rho.trace() - Complex(1)) > kTraceTol) {
        throw InvalidState("density matrix trace differs from 1");
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol) {
        throw InvalidState("density matrix is not Hermitian");
    }
    QubitState s(0.5 * (rho + rho.adjoint()));
    if (s.min_eigenvalue() < -kEigenTol) {
        throw InvalidState("density matrix has a negative eigenvalue");
    }
    return s;
}

QubitState QubitState::unchecked(const Matrix2c &rho) {
    return QubitState(rho);
}

Bloch QubitState::bloch() const {
    return {x(), y(), z()};
}

double QubitState::x() const {
    return 2 * rho_(kGround, kExcited).real();
}

double QubitState::y() const {
    return 2 * rho_(kGround, kExcited).imag();
}

double QubitState::z() const {
    return (rho_(kExcited, kExcited) - rho_(kGround, kGround)).real();
}

double QubitState::min_eigenvalue() const {
    double a = rho_(0, 0).real();
    double d = rho_(1, 1).real();
    double off = std::abs(rho_(0, 1));
    double half_gap = std::sqrt(0.25 * (a - d) * (a - d) + off * off);
    return 0.5 * (a + d) - half_gap;
}

double QubitState::purity() const {
    return (rho_ * rho_).trace().real();
}

bool QubitState::is_physical(double tol) const {
    return rho_.allFinite() && std::abs(rho_.trace() - Complex(1)) <= tol &&
           (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() <= tol && min_eigenvalue() >= -tol;
}

QubitState density_from_bloch(const Bloch &b) {
    return QubitState::from_bloch(b);
}

Bloch bloch_from_density(const QubitState &s) {
    return s.bloch();
}

double linear_entropy(const QubitState &s) {
    return 1 - s.purity();
}

double excited_prob(const QubitState &s) {
    return s.rho()(kExcited, kExcited).real();
}

SimParams SimParams::nominal() {
    return SimParams{};
}

void SimParams::validate() const {
    auto fail = [](const std::string &msg) { throw ConfigError(msg); };
    if (!(gamma1 > 0) || !std::isfinite(gamma1)) fail("gamma1 must be > 0");
    if (!(gamma_phi >= 0) || !std::isfinite(gamma_phi)) fail("gamma_phi must be >= 0");
    if (!(eta >= 0 && eta <= 1)) fail("eta must lie in [0, 1]");
    if (!(dt > 0) || !std::isfinite(dt)) fail("dt must be > 0");
    if (!(horizon >= dt) || !std::isfinite(horizon)) fail("horizon must be >= dt");
    if (substeps < 1) fail("substeps must be >= 1");
}

bool SimParams::coarse_step() const {
    return gamma1 * dt > 0.05;
}

size_t SimParams::steps() const {
    return static_cast<size_t>(std::llround(horizon / dt));
}

double SimParams::measurement_amplitude() const {
    return std::sqrt(eta * gamma1 / 2);
}

InitialState InitialState::plus_x() {
    InitialState s;
    s.kind_ = InitialKind::PlusX;
    return s;
}

InitialState InitialState::excited() {
    InitialState s;
    s.kind_ = InitialKind::Excited;
    return s;
}

InitialState InitialState::ground() {
    return InitialState{};
}

InitialState InitialState::custom(const QubitState &state) {
    InitialState s;
    s.kind_ = InitialKind::Custom;
    s.custom_ = state;
    return s;
}

QubitState InitialState::state() const {
    switch (kind_) {
        case InitialKind::PlusX:
            return QubitState::from_bloch({1, 0, 0});
        case InitialKind::Excited:
            return QubitState::from_bloch({0, 0, 1});
        case InitialKind::Ground:
            return QubitState::from_bloch({0, 0, -1});
        case InitialKind::Custom:
            return *custom_;
    }
    return QubitState{};
}

std::string InitialState::name() const {
    switch (kind_) {
        case InitialKind::PlusX:
            return "plus_x";
        case InitialKind::Excited:
            return "excited";
        case InitialKind::Ground:
            return "ground";
        case InitialKind::Custom: {
            auto b = custom_->bloch();
            std::ostringstream ss;
            ss.precision(17);
            ss << b.x << "," << b.y << "," << b.z;
            return ss.str();
        }
    }
    return "ground";
}

InitialState InitialState::parse(const std::string &text) {
    if (text == "plus_x" || text == "+x") return plus_x();
    if (text == "excited" || text == "e") return excited();
    if (text == "ground" || text == "g") return ground();
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception &) {
            throw ConfigError("unrecognized initial state '" + text + "'");
        }
    }
    if (v.size() != 3) {
        throw ConfigError("unrecognized initial state '" + text + "'");
    }
    try {
        return custom(QubitState::from_bloch({v[0], v[1], v[2]}));
    } catch (const InvalidState &e) {
        throw ConfigError(std::string("initial state: ") + e.what());
    }
}

}  // namespace qsd

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qsd/analytics.hpp"
#include "qsd/errors.hpp"
#include "qsd/estimation.hpp"
#include "qsd/io.hpp"
#include "qsd/sde_engine.hpp"

namespace py = pybind11;
using namespace qsd;

namespace {

using BlochTuple = std::tuple<double, double, double>;

QubitState state_of(const BlochTuple &b) {
    return QubitState::from_bloch({std::get<0>(b), std::get<1>(b), std::get<2>(b)});
}

BlochTuple tuple_of(const QubitState &s) {
    return {s.x(), s.y(), s.z()};
}

py::array_t<double> column(const HeterodyneRecord &rec, bool quadrature) {
    py::array_t<double> out(static_cast<py::ssize_t>(rec.size()));
    auto v = out.mutable_unchecked<1>();
    for (size_t k = 0; k < rec.size(); ++k) v(k) = quadrature ? rec.increments[k].dQ : rec.increments[k].dI;
    return out;
}

HeterodyneRecord make_record(double dt, py::array_t<double, py::array::c_style | py::array::forcecast> dI,
                             py::array_t<double, py::array::c_style | py::array::forcecast> dQ) {
    if (dI.ndim() != 1 || dQ.ndim() != 1 || dI.shape(0) != dQ.shape(0)) {
        throw ConfigError("dI and dQ must be 1-d arrays of equal length");
    }
    HeterodyneRecord rec;
    rec.dt = dt;
    rec.increments.resize(static_cast<size_t>(dI.shape(0)));
    auto a = dI.unchecked<1>();
    auto b = dQ.unchecked<1>();
    for (py::ssize_t k = 0; k < dI.shape(0); ++k) rec.increments[k] = {a(k), b(k)};
    return rec;
}

}  // namespace

PYBIND11_MODULE(_qsd, m) {
    m.doc() = "Monitored qubit relaxation: record synthesis, filtering, invariants and eta estimation";
    m.attr("__version__") = QSD_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidState>(m, "InvalidState", PyExc_ValueError);
    py::register_exception<NumericalBlowup>(m, "NumericalBlowup", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<SimParams>(m, "SimParams")
        .def(py::init<>())
        .def(py::init([](double gamma1, double gamma_phi, double eta, double dt, double horizon, uint64_t seed,
                         int substeps) {
                 SimParams p{gamma1, gamma_phi, eta, dt, horizon, seed, substeps};
                 p.validate();
                 return p;
             }),
             py::arg("gamma1") = 1.0 / 4.15, py::arg("gamma_phi") = 1.0 / 35.0, py::arg("eta") = 0.24,
             py::arg("dt") = 0.2, py::arg("horizon") = 10.0, py::arg("master_seed") = 1, py::arg("substeps") = 1)
        .def_readwrite("gamma1", &SimParams::gamma1)
        .def_readwrite("gamma_phi", &SimParams::gamma_phi)
        .def_readwrite("eta", &SimParams::eta)
        .def_readwrite("dt", &SimParams::dt)
        .def_readwrite("horizon", &SimParams::horizon)
        .def_readwrite("master_seed", &SimParams::master_seed)
        .def_readwrite("substeps", &SimParams::substeps)
        .def("validate", &SimParams::validate)
        .def_property_readonly("steps", &SimParams::steps)
        .def("__repr__", [](const SimParams &p) {
            return "SimParams(gamma1=" + format_double(p.gamma1) + ", gamma_phi=" + format_double(p.gamma_phi) +
                   ", eta=" + format_double(p.eta) + ", dt=" + format_double(p.dt) +
                   ", horizon=" + format_double(p.horizon) + ", master_seed=" + std::to_string(p.master_seed) + ")";
        });

    py::class_<HeterodyneRecord>(m, "Record")
        .def(py::init(&make_record), py::arg("dt"), py::arg("dI"), py::arg("dQ"))
        .def_readonly("dt", &HeterodyneRecord::dt)
        .def_property_readonly("dI", [](const HeterodyneRecord &r) { return column(r, false); })
        .def_property_readonly("dQ", [](const HeterodyneRecord &r) { return column(r, true); })
        .def_property_readonly("seed", [](const HeterodyneRecord &r) { return r.meta.seed; })
        .def_property_readonly("index", [](const HeterodyneRecord &r) { return r.meta.index; })
        .def("__len__", &HeterodyneRecord::size);

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("times",
                               [](const Trajectory &t) { return py::array_t<double>(t.times.size(), t.times.data()); })
        .def_property_readonly("bloch",
                               [](const Trajectory &t) {
                                   py::array_t<double> out({static_cast<py::ssize_t>(t.size()), py::ssize_t{3}});
                                   auto v = out.mutable_unchecked<2>();
                                   for (size_t k = 0; k < t.size(); ++k) {
                                       Bloch b = t.states[k].bloch();
                                       v(k, 0) = b.x;
                                       v(k, 1) = b.y;
                                       v(k, 2) = b.z;
                                   }
                                   return out;
                               })
        .def_property_readonly("min_eigenvalue",
                               [](const Trajectory &t) {
                                   double lo = 1;
                                   for (const auto &s : t.states) lo = std::min(lo, s.min_eigenvalue());
                                   return lo;
                               })
        .def_readonly("positivity_violations", &Trajectory::positivity_violations)
        .def_property_readonly("scheme", [](const Trajectory &t) { return scheme_name(t.scheme); })
        .def("__len__", &Trajectory::size);

    m.def(
        "synthesize",
        [](const std::string &initial, const SimParams &p, uint64_t index) {
            Synthesis s = synthesize(InitialState::parse(initial), p, index);
            return py::make_tuple(std::move(s.record), std::move(s.trajectory));
        },
        py::arg("initial"), py::arg("params"), py::arg("index") = 0,
        "Synthesize (record, hidden trajectory) for trajectory `index`.");
    m.def(
        "filter",
        [](const std::string &initial, const HeterodyneRecord &rec, const SimParams &p, const std::string &scheme) {
            return filter(InitialState::parse(initial), rec, p, parse_scheme(scheme));
        },
        py::arg("initial"), py::arg("record"), py::arg("params"), py::arg("scheme") = "kraus");
    m.def(
        "kraus_step", [](const BlochTuple &b, double dI, double dQ, const SimParams &p) {
            return tuple_of(kraus_step(state_of(b), dI, dQ, p));
        },
        py::arg("bloch"), py::arg("dI"), py::arg("dQ"), py::arg("params"));
    m.def(
        "lindblad_solve",
        [](const std::string &initial, const SimParams &p, double t) {
            return tuple_of(lindblad_solve(InitialState::parse(initial), p, t));
        },
        py::arg("initial"), py::arg("params"), py::arg("t"));

    m.def(
        "alpha_of", [](const BlochTuple &b) { return alpha_of(state_of(b)); }, py::arg("bloch"));
    m.def("alpha_flow", &alpha_flow, py::arg("alpha0"), py::arg("params"), py::arg("t"));
    m.def(
        "spheroid_residual",
        [](const BlochTuple &b, double alpha) {
            return spheroid_residual(Bloch{std::get<0>(b), std::get<1>(b), std::get<2>(b)}, alpha);
        },
        py::arg("bloch"), py::arg("alpha"));
    m.def(
        "xi_of",
        [](const BlochTuple &b) -> std::optional<std::pair<double, double>> {
            auto xi = xi_of(state_of(b));
            if (!xi) return std::nullopt;
            return std::make_pair(xi->x, xi->y);
        },
        py::arg("bloch"));
    m.def(
        "xi_from_record",
        [](std::pair<double, double> xi0, const HeterodyneRecord &rec, const SimParams &p, double t) {
            Xi xi = xi_from_record({xi0.first, xi0.second}, rec, p, t);
            return std::make_pair(xi.x, xi.y);
        },
        py::arg("xi0"), py::arg("record"), py::arg("params"), py::arg("t"));
    m.def(
        "state_from_spheroid",
        [](double alpha, std::pair<double, double> xi) {
            return tuple_of(state_from_spheroid({alpha, {xi.first, xi.second}}));
        },
        py::arg("alpha"), py::arg("xi"));

    m.def(
        "record_log_likelihood",
        [](const std::string &initial, const HeterodyneRecord &rec, const SimParams &p) {
            return record_log_likelihood(InitialState::parse(initial), rec, p);
        },
        py::arg("initial"), py::arg("record"), py::arg("params"));
    m.def(
        "estimate_eta",
        [](const std::string &initial, const std::vector<HeterodyneRecord> &recs, const SimParams &known, double lo,
           double hi, int n, unsigned threads) {
            LikelihoodResult r;
            {
                py::gil_scoped_release release;
                r = estimate_eta(InitialState::parse(initial), recs, known, {lo, hi, n}, threads);
            }
            return py::dict(py::arg("eta_hat") = r.eta_hat, py::arg("ci95") = r.ci95,
                            py::arg("boundary_warning") = r.boundary_warning, py::arg("curve") = r.curve,
                            py::arg("max_log_likelihood") = r.max_log_likelihood);
        },
        py::arg("initial"), py::arg("records"), py::arg("params"), py::arg("lo") = 0.0, py::arg("hi") = 1.0,
        py::arg("n") = 41, py::arg("threads") = 0);

    m.def("read_record", [](const std::filesystem::path &p) { return read_record(p); }, py::arg("path"));
    m.def(
        "write_record_csv", [](const std::filesystem::path &p, const HeterodyneRecord &r) { write_record_csv(p, r); },
        py::arg("path"), py::arg("record"));
}

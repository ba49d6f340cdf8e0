#include "qsd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "qsd/errors.hpp"

namespace qsd {

using nlohmann::json;

namespace {

constexpr std::pair<Output, const char *> kOutputNames[] = {
    {Output::Records, "records"},       {Output::Trajectories, "trajectories"}, {Output::Invariants, "invariants"},
    {Output::Grid, "grid"},             {Output::Tomography, "tomography"},     {Output::Likelihood, "likelihood"},
};

void reject_unknown(const json &obj, std::initializer_list<const char *> known, const std::string &where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto &[key, _] : obj.items()) {
        bool ok = false;
        for (const char *k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown config key '" + where + key + "'");
    }
}

template <typename T>
void read(const json &obj, const char *key, T &out, const std::string &where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception &e) {
        throw ConfigError("config key '" + where + key + "': " + e.what());
    }
}

template <typename T>
void read_number(const json &obj, const char *key, T &out, const std::string &where) {
    if (!obj.contains(key)) return;
    const json &v = obj.at(key);
    if (!v.is_number()) throw ConfigError("config key '" + where + key + "' must be a number");
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("config key '" + where + key + "' must be an integer");
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<int64_t>() < 0) {
            throw ConfigError("config key '" + where + key + "' must be non-negative");
        }
    }
    out = v.get<T>();
}

}  // namespace

const char *output_name(Output o) {
    for (const auto &[k, name] : kOutputNames)
        if (k == o) return name;
    return "records";
}

Output parse_output(const std::string &text) {
    for (const auto &[k, name] : kOutputNames)
        if (text == name) return k;
    throw ConfigError("unknown output '" + text +
                      "' (expected records, trajectories, invariants, grid, tomography or likelihood)");
}

void RunConfig::validate() const {
    params.validate();
    if (ensemble_size < 1) throw ConfigError("ensemble_size must be >= 1");
    if (filter_eta && !(*filter_eta >= 0 && *filter_eta <= 1)) throw ConfigError("filter_eta must lie in [0, 1]");
    readout_fidelity.validate();
    if (!(bins.half_width > 0 && bins.half_width <= 1)) throw ConfigError("bins.half_width must lie in (0, 1]");
    if (bins.min_count < 1) throw ConfigError("bins.min_count must be >= 1");
    if (!(cell_side > 0 && cell_side <= 2)) throw ConfigError("cell_side must lie in (0, 2]");
    if (!(tomography_time > 0)) throw ConfigError("tomography_time_us must be > 0");
    if (axes.empty()) throw ConfigError("axes must not be empty");
    if (grid_times.empty()) throw ConfigError("grid_times_us must not be empty");
    for (double t : grid_times) {
        if (!(t >= 0)) throw ConfigError("grid_times_us entries must be >= 0");
    }
    if (!(eta_grid.lo >= 0 && eta_grid.lo < eta_grid.hi && eta_grid.hi <= 1 && eta_grid.n >= 3)) {
        throw ConfigError("eta_grid requires 0 <= lo < hi <= 1 and n >= 3");
    }
    const Thresholds &t = thresholds;
    if (!(t.slope_tolerance > 0 && t.bin_fraction >= 0 && t.bin_fraction <= 1 && t.bin_sigmas > 0 &&
          t.total_mean_sigmas > 0 && t.alpha_flow_rel > 0 && t.spheroid_residual > 0 &&
          t.reconstruction_distance > 0)) {
        throw ConfigError("thresholds must be positive (bin_fraction in [0, 1])");
    }
}

json to_json(const RunConfig &c) {
    json outputs = json::array();
    for (Output o : c.outputs) outputs.push_back(output_name(o));
    json axes = json::array();
    for (Axis a : c.axes) axes.push_back(axis_name(a));
    const Thresholds &t = c.thresholds;
    return {
        {"params",
         {{"gamma1_us", c.params.gamma1},
          {"gamma_phi_us", c.params.gamma_phi},
          {"eta", c.params.eta},
          {"dt_us", c.params.dt},
          {"horizon_us", c.params.horizon},
          {"master_seed", c.params.master_seed},
          {"substeps", c.params.substeps}}},
        {"initial", c.initial.name()},
        {"ensemble_size", c.ensemble_size},
        {"first_index", c.first_index},
        {"outputs", outputs},
        {"output_dir", c.output_dir.string()},
        {"threads", c.threads},
        {"scheme", scheme_name(c.scheme)},
        {"record_format", c.record_format == RecordFormat::Csv ? "csv" : "binary"},
        {"filter_eta", c.filter_eta ? json(*c.filter_eta) : json(nullptr)},
        {"readout_fidelity", {{"ground", c.readout_fidelity.ground}, {"excited", c.readout_fidelity.excited}}},
        {"bins", {{"half_width", c.bins.half_width}, {"min_count", c.bins.min_count}}},
        {"cell_side", c.cell_side},
        {"tomography_time_us", c.tomography_time},
        {"axes", axes},
        {"grid_times_us", c.grid_times},
        {"eta_grid", {{"lo", c.eta_grid.lo}, {"hi", c.eta_grid.hi}, {"n", c.eta_grid.n}}},
        {"thresholds",
         {{"slope_tolerance", t.slope_tolerance},
          {"bin_fraction", t.bin_fraction},
          {"bin_sigmas", t.bin_sigmas},
          {"total_mean_sigmas", t.total_mean_sigmas},
          {"alpha_flow_rel", t.alpha_flow_rel},
          {"spheroid_residual", t.spheroid_residual},
          {"reconstruction_distance", t.reconstruction_distance}}},
    };
}

RunConfig config_from_json(const json &j) {
    reject_unknown(j,
                   {"params", "initial", "ensemble_size", "first_index", "outputs", "output_dir", "threads", "scheme",
                    "record_format", "filter_eta", "readout_fidelity", "bins", "cell_side", "tomography_time_us",
                    "axes", "grid_times_us", "eta_grid", "thresholds"},
                   "");
    RunConfig c;
    if (j.contains("params")) {
        const json &p = j.at("params");
        reject_unknown(p, {"gamma1_us", "gamma_phi_us", "eta", "dt_us", "horizon_us", "master_seed", "substeps"},
                       "params.");
        read_number(p, "gamma1_us", c.params.gamma1, "params.");
        read_number(p, "gamma_phi_us", c.params.gamma_phi, "params.");
        read_number(p, "eta", c.params.eta, "params.");
        read_number(p, "dt_us", c.params.dt, "params.");
        read_number(p, "horizon_us", c.params.horizon, "params.");
        read_number(p, "master_seed", c.params.master_seed, "params.");
        read_number(p, "substeps", c.params.substeps, "params.");
    }
    if (j.contains("initial")) {
        std::string init;
        read(j, "initial", init, "");
        c.initial = InitialState::parse(init);
    }
    read_number(j, "ensemble_size", c.ensemble_size, "");
    read_number(j, "first_index", c.first_index, "");
    if (j.contains("outputs")) {
        std::vector<std::string> names;
        read(j, "outputs", names, "");
        c.outputs.clear();
        for (const auto &n : names) c.outputs.insert(parse_output(n));
    }
    if (j.contains("output_dir")) {
        std::string dir;
        read(j, "output_dir", dir, "");
        if (dir.empty()) throw ConfigError("output_dir must not be empty");
        c.output_dir = dir;
    }
    read_number(j, "threads", c.threads, "");
    if (j.contains("scheme")) {
        std::string s;
        read(j, "scheme", s, "");
        c.scheme = parse_scheme(s);
    }
    if (j.contains("record_format")) {
        std::string s;
        read(j, "record_format", s, "");
        if (s == "csv") c.record_format = RecordFormat::Csv;
        else if (s == "binary") c.record_format = RecordFormat::Binary;
        else throw ConfigError("record_format must be csv or binary");
    }
    if (j.contains("filter_eta") && !j.at("filter_eta").is_null()) {
        double e = 0;
        read_number(j, "filter_eta", e, "");
        c.filter_eta = e;
    }
    if (j.contains("readout_fidelity")) {
        const json &f = j.at("readout_fidelity");
        reject_unknown(f, {"ground", "excited"}, "readout_fidelity.");
        read_number(f, "ground", c.readout_fidelity.ground, "readout_fidelity.");
        read_number(f, "excited", c.readout_fidelity.excited, "readout_fidelity.");
    }
    if (j.contains("bins")) {
        const json &b = j.at("bins");
        reject_unknown(b, {"half_width", "min_count"}, "bins.");
        read_number(b, "half_width", c.bins.half_width, "bins.");
        read_number(b, "min_count", c.bins.min_count, "bins.");
    }
    read_number(j, "cell_side", c.cell_side, "");
    read_number(j, "tomography_time_us", c.tomography_time, "");
    if (j.contains("axes")) {
        std::vector<std::string> names;
        read(j, "axes", names, "");
        c.axes.clear();
        for (const auto &n : names) c.axes.push_back(parse_axis(n));
    }
    read(j, "grid_times_us", c.grid_times, "");
    if (j.contains("eta_grid")) {
        const json &g = j.at("eta_grid");
        reject_unknown(g, {"lo", "hi", "n"}, "eta_grid.");
        read_number(g, "lo", c.eta_grid.lo, "eta_grid.");
        read_number(g, "hi", c.eta_grid.hi, "eta_grid.");
        read_number(g, "n", c.eta_grid.n, "eta_grid.");
    }
    if (j.contains("thresholds")) {
        const json &t = j.at("thresholds");
        reject_unknown(t,
                       {"slope_tolerance", "bin_fraction", "bin_sigmas", "total_mean_sigmas", "alpha_flow_rel",
                        "spheroid_residual", "reconstruction_distance"},
                       "thresholds.");
        Thresholds &th = c.thresholds;
        read_number(t, "slope_tolerance", th.slope_tolerance, "thresholds.");
        read_number(t, "bin_fraction", th.bin_fraction, "thresholds.");
        read_number(t, "bin_sigmas", th.bin_sigmas, "thresholds.");
        read_number(t, "total_mean_sigmas", th.total_mean_sigmas, "thresholds.");
        read_number(t, "alpha_flow_rel", th.alpha_flow_rel, "thresholds.");
        read_number(t, "spheroid_residual", th.spheroid_residual, "thresholds.");
        read_number(t, "reconstruction_distance", th.reconstruction_distance, "thresholds.");
    }
    return c;
}

void apply_override(json &doc, const std::string &assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    std::string path = assignment.substr(0, eq);
    std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json *node = &doc;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

RunConfig load_config(const std::optional<std::filesystem::path> &file, const std::vector<std::string> &overrides,
                      const char *env_seed) {
    json doc = json::object();
    if (file) {
        std::ifstream is(*file);
        if (!is) throw ConfigError("cannot open config file " + file->string());
        try {
            doc = json::parse(is);
        } catch (const json::parse_error &e) {
            throw ConfigError("config file " + file->string() + ": " + e.what());
        }
    }
    for (const auto &o : overrides) apply_override(doc, o);
    RunConfig c = config_from_json(doc);
    if (env_seed != nullptr && *env_seed != '\0') {
        std::string s(env_seed);
        uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ConfigError("QSD_SEED must be an unsigned 64-bit integer, got '" + s + "'");
        }
        c.params.master_seed = seed;
        c.seed_from_env = true;
    }
    c.validate();
    return c;
}

}  // namespace qsd

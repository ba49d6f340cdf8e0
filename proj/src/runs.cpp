#include "qsd/runs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qsd/analytics.hpp"
#include "qsd/errors.hpp"
#include "qsd/io.hpp"
#include "qsd/parallel.hpp"

namespace qsd {

namespace {

// Ensembles are processed in fixed-size chunks; per-chunk partial results are
// combined in chunk order, so sums do not depend on the thread count.
constexpr size_t kChunk = 256;

std::string utc_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

class Manifest {
   public:
    Manifest(std::string command, const RunConfig &config)
        : command_(std::move(command)), config_(config), started_(utc_now()),
          t0_(std::chrono::steady_clock::now()) {
    }

    void add_file(const fs::path &path) {
        files_.push_back(path);
    }
    void add_check(CheckResult c) {
        checks_.push_back(std::move(c));
    }
    void set_rng(json rng) {
        rng_ = std::move(rng);
    }
    void set_summary(json s) {
        summary_ = std::move(s);
    }

    RunOutcome finish() {
        std::sort(files_.begin(), files_.end());
        json files = json::array();
        for (const auto &f : files_) {
            files.push_back({{"path", fs::relative(f, config_.output_dir).generic_string()},
                             {"sha256", sha256_file(f)},
                             {"bytes", fs::file_size(f)}});
        }
        RunOutcome out;
        out.checks = checks_;
        json checks = json::array();
        for (const auto &c : checks_) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        json m = {{"tool", "qsd"},
                  {"version", QSD_VERSION},
                  {"command", command_},
                  {"config", to_json(config_)},
                  {"rng", rng_},
                  {"files", files},
                  {"checks", checks},
                  {"exit_code", out.exit_code()},
                  {"wall_clock", {{"started_utc", started_}, {"seconds", seconds}}}};
        if (!summary_.is_null()) m["summary"] = summary_;
        out.manifest_path = config_.output_dir / "manifest.json";
        write_text_file(out.manifest_path, m.dump(2) + "\n");
        return out;
    }

   private:
    std::string command_;
    const RunConfig &config_;
    std::string started_;
    std::chrono::steady_clock::time_point t0_;
    std::vector<fs::path> files_;
    std::vector<CheckResult> checks_;
    json rng_ = nullptr;
    json summary_ = nullptr;
};

json rng_provenance(const RunConfig &c, size_t count, uint64_t first_index, std::vector<const char *> streams) {
    return {{"generator", "splitmix64 counter streams keyed by (master_seed, trajectory_index, stream)"},
            {"master_seed", c.params.master_seed},
            {"seed_source", c.seed_from_env ? "QSD_SEED" : "config"},
            {"first_index", first_index},
            {"trajectories", count},
            {"streams", streams}};
}

void prepare_output_dir(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    fs::path probe = dir / ".qsd_write_probe";
    {
        std::ofstream os(probe);
        if (!os) throw ConfigError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

std::string record_file_name(const RunConfig &c, uint64_t index) {
    return "record_" + std::to_string(index) + (c.record_format == RecordFormat::Csv ? ".csv" : ".qsdr");
}

void require_outputs(const RunConfig &c, std::initializer_list<Output> allowed, const char *command) {
    for (Output o : c.outputs) {
        if (std::find(allowed.begin(), allowed.end(), o) == allowed.end()) {
            throw ConfigError(std::string("output '") + output_name(o) + "' is not produced by '" + command + "'");
        }
    }
}

std::vector<HeterodyneRecord> read_records(const std::vector<fs::path> &paths, const SimParams &p) {
    std::vector<HeterodyneRecord> recs;
    recs.reserve(paths.size());
    for (const auto &path : paths) {
        HeterodyneRecord rec = read_record(path);
        if (std::abs(rec.dt - p.dt) > 1e-12 * p.dt) {
            throw ConfigError(path.string() + ": record dt " + format_double(rec.dt) +
                              " us does not match params.dt_us " + format_double(p.dt));
        }
        recs.push_back(std::move(rec));
    }
    return recs;
}

struct Counter {
    double max = 0;
    void add(double v) {
        max = std::max(max, v);
    }
};

json invariants_json(const std::vector<TrajectoryInvariants> &inv) {
    Counter a, s, r;
    size_t defined = 0;
    for (const auto &i : inv) {
        if (!i.defined) continue;
        ++defined;
        a.add(i.alpha_flow_max_rel_error);
        s.add(i.spheroid_residual_max_abs);
        r.add(i.reconstruction_max_distance);
    }
    json j = {{"trajectories", inv.size()}, {"with_defined_alpha", defined}};
    if (defined > 0) {
        j["alpha_flow_max_rel_error"] = a.max;
        j["spheroid_residual_max_abs"] = s.max;
        j["reconstruction_max_distance"] = r.max;
    }
    return j;
}

void add_invariant_checks(Manifest &m, const RunConfig &c, const std::vector<TrajectoryInvariants> &inv) {
    if (c.params.gamma_phi != 0) {
        m.add_check({"invariants", true, "skipped: the closed-form laws hold without dephasing (gamma_phi_us = 0)"});
        return;
    }
    double a = 0, s = 0, r = 0;
    bool any = false;
    for (const auto &i : inv) {
        if (!i.defined) continue;
        any = true;
        a = std::max(a, i.alpha_flow_max_rel_error);
        s = std::max(s, i.spheroid_residual_max_abs);
        r = std::max(r, i.reconstruction_max_distance);
    }
    if (!any) {
        m.add_check({"invariants", true, "skipped: initial state has no alpha (south pole)"});
        return;
    }
    const Thresholds &t = c.thresholds;
    m.add_check({"alpha_flow", a <= t.alpha_flow_rel,
                 "max relative error " + format_double(a) + " (limit " + format_double(t.alpha_flow_rel) + ")"});
    m.add_check({"spheroid_residual", s <= t.spheroid_residual,
                 "max |residual| " + format_double(s) + " (limit " + format_double(t.spheroid_residual) + ")"});
    m.add_check({"reconstruction", r <= t.reconstruction_distance,
                 "max Bloch distance " + format_double(r) + " (limit " + format_double(t.reconstruction_distance) +
                     ")"});
}

}  // namespace

bool RunOutcome::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult &c) { return c.passed; });
}

int RunOutcome::exit_code() const {
    return passed() ? 0 : 1;
}

TrajectoryInvariants trajectory_invariants(const InitialState &init, const Trajectory &tr,
                                           const HeterodyneRecord &rec) {
    TrajectoryInvariants out;
    QubitState s0 = init.state();
    auto alpha0 = alpha_of(s0);
    auto xi0 = xi_of(s0);
    if (!alpha0 || !xi0) return out;
    out.defined = true;
    const SimParams &p = tr.params;
    std::vector<Xi> xi_path = xi_path_from_record(*xi0, rec, p);
    for (size_t k = 0; k < tr.size(); ++k) {
        const QubitState &s = tr.states[k];
        double flow = alpha_flow(*alpha0, p, tr.times[k]);
        if (auto a = alpha_of(s)) {
            out.alpha_flow_max_rel_error = std::max(out.alpha_flow_max_rel_error, std::abs(*a - flow) / flow);
        }
        out.spheroid_residual_max_abs = std::max(out.spheroid_residual_max_abs, std::abs(spheroid_residual(s, flow)));
        if (xi_of(s) && k < xi_path.size()) {
            QubitState rebuilt = state_from_spheroid({flow, xi_path[k]});
            out.reconstruction_max_distance =
                std::max(out.reconstruction_max_distance, distance(rebuilt.bloch(), s.bloch()));
        }
    }
    return out;
}

namespace {

RunOutcome simulate_impl(const RunConfig &c, const char *command) {
    c.validate();
    require_outputs(c, {Output::Records, Output::Trajectories, Output::Invariants, Output::Grid}, command);
    const SimParams &p = c.params;
    if (c.wants(Output::Grid)) {
        for (double t : c.grid_times) {
            if (t > p.horizon + 1e-9) throw ConfigError("grid time " + format_double(t) + " exceeds horizon_us");
        }
    }
    prepare_output_dir(c.output_dir);
    Manifest manifest(command, c);
    manifest.set_rng(rng_provenance(c, c.ensemble_size, c.first_index, {"noise"}));

    const size_t n = c.ensemble_size;
    const size_t steps = p.steps();
    const size_t chunks = (n + kChunk - 1) / kChunk;
    struct ChunkResult {
        std::vector<double> sum_dI, sum_sq_dI;
        std::vector<TrajectoryInvariants> invariants;
        size_t zpos = 0, reincrease = 0;
        std::optional<OccupancyAccumulator> grid;
    };
    std::vector<ChunkResult> results(chunks);
    const fs::path record_dir = c.output_dir / "records";
    const fs::path traj_dir = c.output_dir / "trajectories";
    if (c.wants(Output::Records)) fs::create_directories(record_dir);
    if (c.wants(Output::Trajectories)) fs::create_directories(traj_dir);

    parallel_for(chunks, c.threads, [&](size_t chunk) {
        ChunkResult &r = results[chunk];
        if (c.wants(Output::Invariants)) {
            r.sum_dI.assign(steps, 0);
            r.sum_sq_dI.assign(steps, 0);
        }
        if (c.wants(Output::Grid)) r.grid.emplace(c.grid_times, c.cell_side);
        size_t end = std::min(n, (chunk + 1) * kChunk);
        for (size_t i = chunk * kChunk; i < end; ++i) {
            uint64_t index = c.first_index + i;
            Synthesis syn = synthesize(c.initial, p, index);
            if (c.wants(Output::Records)) {
                fs::path path = record_dir / record_file_name(c, index);
                if (c.record_format == RecordFormat::Csv) write_record_csv(path, syn.record);
                else write_record_binary(path, syn.record);
            }
            if (c.wants(Output::Trajectories)) {
                write_trajectory_csv(traj_dir / ("trajectory_" + std::to_string(index) + ".csv"), syn.trajectory,
                                     c.initial.name());
            }
            if (c.wants(Output::Invariants)) {
                for (size_t k = 0; k < steps; ++k) {
                    double v = syn.record.increments[k].dI / p.dt;
                    r.sum_dI[k] += v;
                    r.sum_sq_dI[k] += v * v;
                }
                r.invariants.push_back(trajectory_invariants(c.initial, syn.trajectory, syn.record));
                auto st = excitation_increase_stats(std::span<const Trajectory>(&syn.trajectory, 1), 0);
                r.zpos += st.fraction_zpos > 0;
                r.reincrease += st.fraction_reincrease > 0;
            }
            if (r.grid) r.grid->add(syn.trajectory);
        }
    });

    if (c.wants(Output::Records)) {
        for (size_t i = 0; i < n; ++i) manifest.add_file(record_dir / record_file_name(c, c.first_index + i));
    }
    if (c.wants(Output::Trajectories)) {
        for (size_t i = 0; i < n; ++i) {
            manifest.add_file(traj_dir / ("trajectory_" + std::to_string(c.first_index + i) + ".csv"));
        }
    }
    if (c.wants(Output::Invariants)) {
        std::vector<double> sum(steps, 0), sum_sq(steps, 0);
        std::vector<TrajectoryInvariants> inv;
        size_t zpos = 0, reinc = 0;
        for (const auto &r : results) {
            for (size_t k = 0; k < steps; ++k) {
                sum[k] += r.sum_dI[k];
                sum_sq[k] += r.sum_sq_dI[k];
            }
            inv.insert(inv.end(), r.invariants.begin(), r.invariants.end());
            zpos += r.zpos;
            reinc += r.reincrease;
        }
        std::ostringstream mean_csv;
        mean_csv << "t_us,mean_dI_over_dt,stderr,lindblad_model\n";
        const double amp = p.measurement_amplitude();
        for (size_t k = 0; k < steps; ++k) {
            double t = p.dt * static_cast<double>(k);
            double mean = sum[k] / n;
            double var = n > 1 ? std::max(0.0, (sum_sq[k] - n * mean * mean) / (n - 1)) : 0.0;
            double model = amp * lindblad_solve(c.initial, p, t).x();
            mean_csv << format_time(t) << ',' << format_double(mean) << ','
                     << format_double(std::sqrt(var / n)) << ',' << format_double(model) << '\n';
        }
        write_text_file(c.output_dir / "ensemble_mean.csv", mean_csv.str());
        manifest.add_file(c.output_dir / "ensemble_mean.csv");

        json j = invariants_json(inv);
        j["gamma_phi_us"] = p.gamma_phi;
        j["fraction_zpos"] = static_cast<double>(zpos) / n;
        j["fraction_reincrease"] = static_cast<double>(reinc) / n;
        write_text_file(c.output_dir / "invariants.json", j.dump(2) + "\n");
        manifest.add_file(c.output_dir / "invariants.json");
        manifest.set_summary(j);
    }
    if (c.wants(Output::Grid)) {
        OccupancyAccumulator acc(c.grid_times, c.cell_side);
        for (const auto &r : results) acc.merge(*r.grid);
        OccupancyGrid g = acc.grid();
        if (auto a0 = alpha_of(c.initial.state())) {
            for (double t : g.times) g.alpha_flow.push_back(alpha_flow(*a0, p, t));
        }
        write_text_file(c.output_dir / "grid.json", to_json(g).dump(2) + "\n");
        std::ostringstream csv;
        write_grid_csv(csv, g);
        write_text_file(c.output_dir / "grid.csv", csv.str());
        manifest.add_file(c.output_dir / "grid.json");
        manifest.add_file(c.output_dir / "grid.csv");
        bool conserved = true;
        for (size_t k = 0; k < g.times.size(); ++k) conserved = conserved && g.total(k) == n;
        manifest.add_check({"grid_totals", conserved, "per-time counts sum to the ensemble size"});
    }
    return manifest.finish();
}

}  // namespace

RunOutcome cli_simulate(const RunConfig &c) {
    return simulate_impl(c, "simulate");
}

RunOutcome cli_filter(const RunConfig &c, const std::vector<fs::path> &record_paths) {
    c.validate();
    if (record_paths.empty()) throw ConfigError("filter needs at least one record file");
    std::vector<HeterodyneRecord> recs = read_records(record_paths, c.params);

    // Everything is filtered before the first write so a failure leaves no
    // partial output behind.
    std::vector<Trajectory> trajs(recs.size());
    parallel_for(recs.size(), c.threads, [&](size_t i) { trajs[i] = filter(c.initial, recs[i], c.params, c.scheme); });

    prepare_output_dir(c.output_dir);
    Manifest manifest("filter", c);
    json per_file = json::array();
    const fs::path dir = c.output_dir / "trajectories";
    fs::create_directories(dir);
    for (size_t i = 0; i < recs.size(); ++i) {
        fs::path out = dir / (record_paths[i].stem().string() + ".trajectory.csv");
        write_trajectory_csv(out, trajs[i], c.initial.name());
        manifest.add_file(out);
        per_file.push_back({{"record", record_paths[i].string()},
                            {"trajectory", fs::relative(out, c.output_dir).generic_string()},
                            {"scheme", scheme_name(c.scheme)},
                            {"positivity_violations", trajs[i].positivity_violations},
                            {"max_trace_correction", trajs[i].max_trace_correction}});
    }
    manifest.set_summary({{"trajectories", per_file}, {"coarse_step", c.params.coarse_step()}});
    return manifest.finish();
}

RunOutcome cli_analyze(const RunConfig &c, const std::vector<fs::path> &record_paths) {
    c.validate();
    std::vector<HeterodyneRecord> recs;
    if (!record_paths.empty()) recs = read_records(record_paths, c.params);
    const size_t n = record_paths.empty() ? c.ensemble_size : recs.size();
    prepare_output_dir(c.output_dir);
    Manifest manifest("analyze", c);
    if (record_paths.empty()) manifest.set_rng(rng_provenance(c, n, c.first_index, {"noise"}));

    std::vector<TrajectoryInvariants> inv(n);
    parallel_for(n, c.threads, [&](size_t i) {
        if (record_paths.empty()) {
            Synthesis syn = synthesize(c.initial, c.params, c.first_index + i);
            Trajectory tr = filter(c.initial, syn.record, c.params, c.scheme);
            inv[i] = trajectory_invariants(c.initial, tr, syn.record);
        } else {
            Trajectory tr = filter(c.initial, recs[i], c.params, c.scheme);
            inv[i] = trajectory_invariants(c.initial, tr, recs[i]);
        }
    });
    json j = invariants_json(inv);
    j["gamma_phi_us"] = c.params.gamma_phi;
    j["scheme"] = scheme_name(c.scheme);
    write_text_file(c.output_dir / "invariants.json", j.dump(2) + "\n");
    manifest.add_file(c.output_dir / "invariants.json");
    manifest.set_summary(j);
    add_invariant_checks(manifest, c, inv);
    return manifest.finish();
}

RunOutcome cli_estimate_eta(const RunConfig &c, const std::vector<fs::path> &record_paths) {
    c.validate();
    std::vector<HeterodyneRecord> recs;
    if (!record_paths.empty()) {
        recs = read_records(record_paths, c.params);
    } else {
        recs.resize(c.ensemble_size);
        parallel_for(recs.size(), c.threads,
                     [&](size_t i) { recs[i] = synthesize(c.initial, c.params, c.first_index + i).record; });
    }
    prepare_output_dir(c.output_dir);
    Manifest manifest("estimate-eta", c);
    if (record_paths.empty()) manifest.set_rng(rng_provenance(c, recs.size(), c.first_index, {"noise"}));

    LikelihoodResult res = estimate_eta(c.initial, recs, c.params, c.eta_grid, c.threads);
    json j = to_json(res);
    j["records"] = recs.size();
    write_text_file(c.output_dir / "likelihood.json", j.dump(2) + "\n");
    manifest.add_file(c.output_dir / "likelihood.json");
    manifest.set_summary({{"eta_hat", res.eta_hat}, {"ci95", {res.ci95.first, res.ci95.second}}});
    manifest.add_check({"boundary", !res.boundary_warning,
                        res.boundary_warning ? "likelihood maximum on the eta grid boundary (eta_hat = " +
                                                   format_double(res.eta_hat) + "); the data do not constrain eta"
                                             : "interior maximum"});
    return manifest.finish();
}

RunOutcome cli_validate(const RunConfig &c) {
    c.validate();
    require_outputs(c, {Output::Tomography, Output::Records}, "validate");
    prepare_output_dir(c.output_dir);
    Manifest manifest("validate", c);
    manifest.set_rng(rng_provenance(c, c.ensemble_size * c.axes.size(), c.first_index, {"noise", "readout"}));

    SimParams truth = c.params;
    truth.horizon = c.tomography_time;
    truth.validate();
    const Thresholds &th = c.thresholds;
    json summary = json::object();
    for (size_t a = 0; a < c.axes.size(); ++a) {
        const Axis axis = c.axes[a];
        TomographyRun run;
        run.init = c.initial;
        run.truth = truth;
        run.filter_eta = c.effective_filter_eta();
        run.axis = axis;
        run.fidelity = c.readout_fidelity;
        // Each axis gets its own trajectories, as separate experiments would.
        run.first_index = c.first_index + a * c.ensemble_size;
        run.count = c.ensemble_size;
        std::vector<TomographyEntry> entries = run_tomography(run, c.threads);
        ConditionalMeanReport rep = conditional_mean_test(entries, axis, truth.horizon, c.readout_fidelity, c.bins);

        json j = to_json(rep);
        j["truth_eta"] = truth.eta;
        j["filter_eta"] = run.filter_eta;
        fs::path out = c.output_dir / (std::string("tomography_") + axis_name(axis) + ".json");
        write_text_file(out, j.dump(2) + "\n");
        manifest.add_file(out);
        summary[axis_name(axis)] = {{"slope", j["slope"]}, {"slope_stderr", j["slope_stderr"]}, {"bins", rep.bins.size()}};

        const std::string ax = axis_name(axis);
        bool slope_ok = std::isfinite(rep.slope) && std::abs(rep.slope - 1) <= th.slope_tolerance;
        manifest.add_check({"slope_" + ax, slope_ok,
                            "slope " + format_double(rep.slope) + " +- " + format_double(rep.slope_std_error) +
                                " (limit |slope - 1| <= " + format_double(th.slope_tolerance) + ")"});
        size_t within = rep.bins_within(th.bin_sigmas);
        double frac = rep.bins.empty() ? 0.0 : static_cast<double>(within) / rep.bins.size();
        manifest.add_check({"bins_" + ax, !rep.bins.empty() && frac >= th.bin_fraction,
                            std::to_string(within) + "/" + std::to_string(rep.bins.size()) + " bins within " +
                                format_double(th.bin_sigmas) + " stderr"});
        double gap = std::abs(rep.mean_tomo - rep.mean_predicted);
        manifest.add_check({"total_mean_" + ax, gap <= th.total_mean_sigmas * rep.mean_tomo_std_error,
                            "|mean_tomo - mean_predicted| = " + format_double(gap) + ", stderr " +
                                format_double(rep.mean_tomo_std_error)});
    }
    manifest.set_summary(summary);
    return manifest.finish();
}

RunOutcome cli_grid(const RunConfig &c) {
    RunConfig g = c;
    g.outputs = {Output::Grid};
    return simulate_impl(g, "grid");
}

}  // namespace qsd

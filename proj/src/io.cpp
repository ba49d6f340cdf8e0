#include "qsd/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace qsd {

namespace {

constexpr char kRecordTag[] = "# qsd-record v1";
constexpr char kRecordColumns[] = "t_us,dI,dQ";
constexpr char kTrajectoryTag[] = "# qsd-trajectory v1";
constexpr char kTrajectoryColumns[] = "t_us,x,y,z,S_L,alpha,xi_x,xi_y";
constexpr char kGridColumns[] = "t_us,ix,iy,iz,count";
constexpr char kBinaryMagic[4] = {'Q', 'S', 'D', 'R'};
constexpr uint16_t kBinaryVersion = 1;

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

template <typename T>
bool parse_number(const std::string &s, T &out) {
    if (s.empty()) return false;
    const char *first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

template <typename T>
T number_or_throw(const std::string &s, const std::string &file, size_t line, const std::string &what) {
    T v{};
    if (!parse_number(s, v)) throw ParseError(file, line, "cannot parse " + what + " '" + s + "'");
    return v;
}

void ensure_parent(const fs::path &path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_with(const fs::path &path, const std::function<void(std::ostream &)> &body) {
    ensure_parent(path);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        body(os);
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

template <typename T>
void put_le(std::ostream &os, T v) {
    static_assert(std::endian::native == std::endian::little, "binary records assume a little-endian host");
    os.write(reinterpret_cast<const char *>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream &is, const std::string &name) {
    T v{};
    if (!is.read(reinterpret_cast<char *>(&v), sizeof v)) {
        throw ParseError(name, 0, "truncated binary record");
    }
    return v;
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string format_time(double t_us) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), t_us, std::chars_format::general, 9);
    return std::string(buf.data(), ptr);
}

void write_record_csv(std::ostream &os, const HeterodyneRecord &rec) {
    os << kRecordTag << ", dt_us=" << format_double(rec.dt) << ", gamma1_us=" << format_double(rec.meta.gamma1)
       << ", gamma_phi_us=" << format_double(rec.meta.gamma_phi) << ", eta=" << format_double(rec.meta.eta)
       << ", seed=" << rec.meta.seed << ", index=" << rec.meta.index << "\n";
    os << kRecordColumns << "\n";
    for (size_t k = 0; k < rec.size(); ++k) {
        const auto &inc = rec.increments[k];
        os << format_time(rec.time(k)) << ',' << format_double(inc.dI) << ',' << format_double(inc.dQ) << '\n';
    }
}

void write_record_csv(const fs::path &path, const HeterodyneRecord &rec) {
    write_with(path, [&](std::ostream &os) { write_record_csv(os, rec); });
}

HeterodyneRecord read_record_csv(std::istream &is, const std::string &name) {
    HeterodyneRecord rec;
    std::string line;
    size_t lineno = 0;
    if (!std::getline(is, line)) throw ParseError(name, 1, "empty record file");
    ++lineno;
    line = trim(line);
    if (line.rfind(kRecordTag, 0) != 0) {
        throw ParseError(name, lineno, "missing '# qsd-record v1' header");
    }
    bool have_dt = false;
    auto fields = split(line.substr(std::strlen(kRecordTag)), ',');
    for (const auto &f : fields) {
        if (f.empty()) continue;
        auto eq = f.find('=');
        if (eq == std::string::npos) throw ParseError(name, lineno, "malformed header field '" + f + "'");
        std::string key = f.substr(0, eq), val = f.substr(eq + 1);
        if (key == "dt_us") {
            rec.dt = number_or_throw<double>(val, name, lineno, key);
            have_dt = true;
        } else if (key == "gamma1_us") {
            rec.meta.gamma1 = number_or_throw<double>(val, name, lineno, key);
        } else if (key == "gamma_phi_us") {
            rec.meta.gamma_phi = number_or_throw<double>(val, name, lineno, key);
        } else if (key == "eta") {
            rec.meta.eta = number_or_throw<double>(val, name, lineno, key);
        } else if (key == "seed") {
            rec.meta.seed = number_or_throw<uint64_t>(val, name, lineno, key);
        } else if (key == "index") {
            rec.meta.index = number_or_throw<uint64_t>(val, name, lineno, key);
        } else {
            throw ParseError(name, lineno, "unknown header field '" + key + "'");
        }
    }
    if (!have_dt || !(rec.dt > 0)) throw ParseError(name, lineno, "header lacks a positive dt_us");

    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line == kRecordColumns) continue;
        auto cols = split(line, ',');
        if (cols.size() != 3) throw ParseError(name, lineno, "expected 3 columns t_us,dI,dQ");
        double t = number_or_throw<double>(cols[0], name, lineno, "t_us");
        Increment inc{number_or_throw<double>(cols[1], name, lineno, "dI"),
                      number_or_throw<double>(cols[2], name, lineno, "dQ")};
        if (!std::isfinite(inc.dI) || !std::isfinite(inc.dQ)) throw ParseError(name, lineno, "non-finite increment");
        double expected = rec.time(rec.size());
        if (std::abs(t - expected) > 1e-7 * std::max(1.0, std::abs(expected))) {
            throw ParseError(name, lineno, "time " + cols[0] + " inconsistent with dt (expected " +
                                               format_time(expected) + ")");
        }
        rec.increments.push_back(inc);
    }
    if (rec.increments.empty()) throw ParseError(name, lineno, "record has no increments");
    return rec;
}

HeterodyneRecord read_record_csv(const fs::path &path) {
    std::ifstream is(path);
    if (!is) throw ParseError(path.string(), 0, "cannot open file");
    return read_record_csv(is, path.string());
}

void write_record_binary(const fs::path &path, const HeterodyneRecord &rec) {
    write_with(path, [&](std::ostream &os) {
        os.write(kBinaryMagic, 4);
        put_le<uint16_t>(os, kBinaryVersion);
        put_le(os, rec.dt);
        put_le(os, rec.meta.gamma1);
        put_le(os, rec.meta.gamma_phi);
        put_le(os, rec.meta.eta);
        put_le<uint64_t>(os, rec.meta.seed);
        put_le<uint64_t>(os, rec.meta.index);
        put_le<uint64_t>(os, rec.size());
        for (const auto &inc : rec.increments) {
            put_le(os, inc.dI);
            put_le(os, inc.dQ);
        }
    });
}

HeterodyneRecord read_record_binary(const fs::path &path) {
    const std::string name = path.string();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError(name, 0, "cannot open file");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0) throw ParseError(name, 0, "bad magic");
    if (get_le<uint16_t>(is, name) != kBinaryVersion) throw ParseError(name, 0, "unsupported version");
    HeterodyneRecord rec;
    rec.dt = get_le<double>(is, name);
    rec.meta.gamma1 = get_le<double>(is, name);
    rec.meta.gamma_phi = get_le<double>(is, name);
    rec.meta.eta = get_le<double>(is, name);
    rec.meta.seed = get_le<uint64_t>(is, name);
    rec.meta.index = get_le<uint64_t>(is, name);
    auto n = get_le<uint64_t>(is, name);
    if (n == 0) throw ParseError(name, 0, "record has no increments");
    if (!(rec.dt > 0)) throw ParseError(name, 0, "non-positive dt");
    rec.increments.resize(n);
    for (auto &inc : rec.increments) {
        inc.dI = get_le<double>(is, name);
        inc.dQ = get_le<double>(is, name);
    }
    return rec;
}

HeterodyneRecord read_record(const fs::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError(path.string(), 0, "cannot open file");
    char magic[4] = {};
    is.read(magic, 4);
    if (is.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0) return read_record_binary(path);
    return read_record_csv(path);
}

std::vector<TrajectoryRow> trajectory_rows(const Trajectory &tr) {
    std::vector<TrajectoryRow> rows;
    rows.reserve(tr.size());
    for (size_t k = 0; k < tr.size(); ++k) {
        const QubitState &s = tr.states[k];
        rows.push_back({tr.times[k], s.bloch(), linear_entropy(s), alpha_of(s), xi_of(s)});
    }
    return rows;
}

void write_trajectory_csv(std::ostream &os, const Trajectory &tr, const std::string &initial_name) {
    const SimParams &p = tr.params;
    os << kTrajectoryTag << ", scheme=" << scheme_name(tr.scheme)
       << ", provenance=" << (tr.provenance == Provenance::Synthesized ? "synthesized" : "filtered")
       << ", dt_us=" << format_double(p.dt) << ", gamma1_us=" << format_double(p.gamma1)
       << ", gamma_phi_us=" << format_double(p.gamma_phi) << ", eta=" << format_double(p.eta)
       << ", initial=" << initial_name << "\n";
    os << kTrajectoryColumns << "\n";
    for (const auto &r : trajectory_rows(tr)) {
        os << format_time(r.t) << ',' << format_double(r.b.x) << ',' << format_double(r.b.y) << ','
           << format_double(r.b.z) << ',' << format_double(r.linear_entropy) << ',';
        if (r.alpha) os << format_double(*r.alpha);
        os << ',';
        if (r.xi) os << format_double(r.xi->x) << ',' << format_double(r.xi->y);
        else os << ',';
        os << '\n';
    }
}

void write_trajectory_csv(const fs::path &path, const Trajectory &tr, const std::string &initial_name) {
    write_with(path, [&](std::ostream &os) { write_trajectory_csv(os, tr, initial_name); });
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream &is, const std::string &name) {
    std::vector<TrajectoryRow> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line == kTrajectoryColumns) continue;
        auto c = split(line, ',');
        if (c.size() != 8) throw ParseError(name, lineno, "expected 8 columns " + std::string(kTrajectoryColumns));
        TrajectoryRow r;
        r.t = number_or_throw<double>(c[0], name, lineno, "t_us");
        r.b = {number_or_throw<double>(c[1], name, lineno, "x"), number_or_throw<double>(c[2], name, lineno, "y"),
               number_or_throw<double>(c[3], name, lineno, "z")};
        r.linear_entropy = number_or_throw<double>(c[4], name, lineno, "S_L");
        if (!c[5].empty()) r.alpha = number_or_throw<double>(c[5], name, lineno, "alpha");
        if (c[6].empty() != c[7].empty()) throw ParseError(name, lineno, "xi_x and xi_y must both be set or empty");
        if (!c[6].empty()) {
            r.xi = Xi{number_or_throw<double>(c[6], name, lineno, "xi_x"),
                      number_or_throw<double>(c[7], name, lineno, "xi_y")};
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<TrajectoryRow> read_trajectory_csv(const fs::path &path) {
    std::ifstream is(path);
    if (!is) throw ParseError(path.string(), 0, "cannot open file");
    return read_trajectory_csv(is, path.string());
}

json to_json(const LikelihoodResult &r) {
    json curve = json::array();
    for (const auto &[eta, ll] : r.curve) curve.push_back({eta, ll});
    return {{"eta_hat", r.eta_hat},
            {"max_log_likelihood", r.max_log_likelihood},
            {"ci95", {r.ci95.first, r.ci95.second}},
            {"boundary_warning", r.boundary_warning},
            {"curve", curve}};
}

LikelihoodResult likelihood_from_json(const json &j) {
    LikelihoodResult r;
    r.eta_hat = j.at("eta_hat").get<double>();
    r.max_log_likelihood = j.value("max_log_likelihood", 0.0);
    r.ci95 = {j.at("ci95").at(0).get<double>(), j.at("ci95").at(1).get<double>()};
    r.boundary_warning = j.value("boundary_warning", false);
    for (const auto &pt : j.at("curve")) r.curve.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
    return r;
}

namespace {

// JSON has no NaN; undefined slopes are written as null.
json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_from(const json &j) {
    return j.is_null() ? std::nan("") : j.get<double>();
}

}  // namespace

json to_json(const ConditionalMeanReport &r) {
    json bins = json::array();
    for (const auto &b : r.bins) {
        bins.push_back({{"center", b.center},
                        {"half_width", b.half_width},
                        {"count", b.count},
                        {"mean_tomo", b.mean_tomo},
                        {"stderr", b.std_error},
                        {"mean_predicted", b.mean_predicted}});
    }
    return {{"axis", axis_name(r.axis)},
            {"final_time_us", r.final_time},
            {"total", r.total},
            {"dropped_bins", r.dropped_bins},
            {"slope", number_or_null(r.slope)},
            {"slope_stderr", number_or_null(r.slope_std_error)},
            {"mean_predicted", r.mean_predicted},
            {"mean_tomo", r.mean_tomo},
            {"mean_tomo_stderr", r.mean_tomo_std_error},
            {"bins", bins}};
}

ConditionalMeanReport conditional_mean_from_json(const json &j) {
    ConditionalMeanReport r;
    r.axis = parse_axis(j.at("axis").get<std::string>());
    r.final_time = j.at("final_time_us").get<double>();
    r.total = j.at("total").get<size_t>();
    r.dropped_bins = j.value("dropped_bins", size_t{0});
    r.slope = number_from(j.at("slope"));
    r.slope_std_error = number_from(j.at("slope_stderr"));
    r.mean_predicted = j.at("mean_predicted").get<double>();
    r.mean_tomo = j.at("mean_tomo").get<double>();
    r.mean_tomo_std_error = j.at("mean_tomo_stderr").get<double>();
    for (const auto &b : j.at("bins")) {
        r.bins.push_back({b.at("center").get<double>(), b.at("half_width").get<double>(), b.at("count").get<size_t>(),
                          b.at("mean_tomo").get<double>(), b.at("stderr").get<double>(),
                          b.at("mean_predicted").get<double>()});
    }
    return r;
}

json to_json(const OccupancyGrid &g) {
    json layers = json::array();
    for (size_t k = 0; k < g.times.size(); ++k) {
        json cells = json::array();
        for (const auto &[c, n] : g.counts[k]) cells.push_back({c.ix, c.iy, c.iz, n});
        json layer = {{"t_us", g.times[k]}, {"total", g.total(k)}, {"cells", cells}};
        if (k < g.alpha_flow.size()) layer["alpha_flow"] = g.alpha_flow[k];
        layers.push_back(layer);
    }
    return {{"cell_side", g.cell_side}, {"cells_per_axis", g.cells_per_axis()}, {"layers", layers}};
}

OccupancyGrid occupancy_from_json(const json &j) {
    OccupancyGrid g;
    g.cell_side = j.at("cell_side").get<double>();
    for (const auto &layer : j.at("layers")) {
        g.times.push_back(layer.at("t_us").get<double>());
        auto &m = g.counts.emplace_back();
        for (const auto &c : layer.at("cells")) {
            m[{c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()}] = c.at(3).get<uint64_t>();
        }
        if (layer.contains("alpha_flow")) g.alpha_flow.push_back(layer.at("alpha_flow").get<double>());
    }
    return g;
}

void write_grid_csv(std::ostream &os, const OccupancyGrid &g) {
    os << kGridColumns << "\n";
    for (size_t k = 0; k < g.times.size(); ++k) {
        for (const auto &[c, n] : g.counts[k]) {
            os << format_time(g.times[k]) << ',' << c.ix << ',' << c.iy << ',' << c.iz << ',' << n << '\n';
        }
    }
}

OccupancyGrid read_grid_csv(std::istream &is, const std::string &name, double cell_side) {
    OccupancyGrid g;
    g.cell_side = cell_side;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line == kGridColumns) continue;
        auto c = split(line, ',');
        if (c.size() != 5) throw ParseError(name, lineno, "expected 5 columns " + std::string(kGridColumns));
        double t = number_or_throw<double>(c[0], name, lineno, "t_us");
        if (g.times.empty() || g.times.back() != t) {
            g.times.push_back(t);
            g.counts.emplace_back();
        }
        CellIndex cell{number_or_throw<int>(c[1], name, lineno, "ix"), number_or_throw<int>(c[2], name, lineno, "iy"),
                       number_or_throw<int>(c[3], name, lineno, "iz")};
        g.counts.back()[cell] = number_or_throw<uint64_t>(c[4], name, lineno, "count");
    }
    return g;
}

void write_text_file(const fs::path &path, const std::string &text) {
    write_with(path, [&](std::ostream &os) { os << text; });
}

std::string sha256_file(const fs::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf;
    while (is) {
        is.read(buf.data(), buf.size());
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(is.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

}  // namespace qsd

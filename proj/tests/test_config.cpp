#include <gtest/gtest.h>

#include "qsd/config.hpp"
#include "qsd/errors.hpp"

using namespace qsd;
using nlohmann::json;

TEST(RunConfig, DefaultsUseNominalParameters) {
    RunConfig c = load_config(std::nullopt, {}, nullptr);
    EXPECT_DOUBLE_EQ(c.params.gamma1, 1 / 4.15);
    EXPECT_DOUBLE_EQ(c.params.eta, 0.24);
    EXPECT_EQ(c.initial.kind(), InitialKind::PlusX);
    EXPECT_EQ(c.ensemble_size, 1u);
    EXPECT_TRUE(c.wants(Output::Records));
    EXPECT_DOUBLE_EQ(c.effective_filter_eta(), 0.24);
    EXPECT_DOUBLE_EQ(c.bins.half_width, 0.02);
    EXPECT_EQ(c.bins.min_count, 40u);
    EXPECT_DOUBLE_EQ(c.cell_side, 0.04);
}

TEST(RunConfig, JsonRoundTrip) {
    RunConfig c;
    c.params.eta = 0.5;
    c.params.master_seed = 0xFFFFFFFFFFFFFFFFULL;
    c.initial = InitialState::parse("0.1,0.2,0.3");
    c.outputs = {Output::Grid, Output::Invariants};
    c.filter_eta = 0.05;
    c.axes = {Axis::Z};
    c.readout_fidelity = {0.9, 0.8};
    c.record_format = RecordFormat::Binary;
    c.scheme = Scheme::Euler;
    c.thresholds.slope_tolerance = 0.2;
    json j = to_json(c);
    RunConfig b = config_from_json(json::parse(j.dump()));
    EXPECT_EQ(to_json(b), j);
    EXPECT_EQ(b.params.master_seed, c.params.master_seed);
    EXPECT_EQ(*b.filter_eta, 0.05);
}

TEST(ApplyOverride, ParsesJsonValuesAndCreatesObjects) {
    json doc = json::object();
    apply_override(doc, "params.eta=0.3");
    apply_override(doc, "initial=excited");
    apply_override(doc, "outputs=[\"records\",\"grid\"]");
    apply_override(doc, "filter_eta=null");
    apply_override(doc, "output_dir=\"a=b\"");
    EXPECT_EQ(doc["params"]["eta"], 0.3);
    EXPECT_EQ(doc["initial"], "excited");
    EXPECT_EQ(doc["outputs"].size(), 2u);
    EXPECT_TRUE(doc["filter_eta"].is_null());
    EXPECT_EQ(doc["output_dir"], "a=b");
    EXPECT_THROW(apply_override(doc, "noequals"), ConfigError);
    EXPECT_THROW(apply_override(doc, "=3"), ConfigError);
    EXPECT_THROW(apply_override(doc, "params..eta=3"), ConfigError);
    EXPECT_THROW(apply_override(doc, "initial.kind=3"), ConfigError);
}

TEST(LoadConfig, OverridesThenEnvironmentSeed) {
    RunConfig c = load_config(std::nullopt, {"params.master_seed=5", "ensemble_size=7"}, nullptr);
    EXPECT_EQ(c.params.master_seed, 5u);
    EXPECT_FALSE(c.seed_from_env);
    c = load_config(std::nullopt, {"params.master_seed=5"}, "18446744073709551615");
    EXPECT_EQ(c.params.master_seed, 18446744073709551615ULL);
    EXPECT_TRUE(c.seed_from_env);
    EXPECT_FALSE(load_config(std::nullopt, {}, "").seed_from_env);
    EXPECT_THROW(load_config(std::nullopt, {}, "12abc"), ConfigError);
    EXPECT_THROW(load_config(std::nullopt, {}, "-1"), ConfigError);
    EXPECT_THROW(load_config(std::filesystem::path("/nonexistent/qsd.json"), {}, nullptr), ConfigError);
}

TEST(LoadConfig, RejectsOutOfRangeAndUnknownKeys) {
    const std::vector<std::string> bad = {
        "colour=1",
        "params.omega=1",
        "params.eta=1.5",
        "params.dt_us=0",
        "params.master_seed=-3",
        "params.substeps=0",
        "params.eta=\"high\"",
        "ensemble_size=0",
        "initial=sideways",
        "outputs=[\"plots\"]",
        "scheme=rk4",
        "record_format=xml",
        "filter_eta=2",
        "readout_fidelity.ground=0.4",
        "readout_fidelity.excited=1.01",
        "bins.half_width=0",
        "bins.min_count=0",
        "cell_side=3",
        "tomography_time_us=0",
        "axes=[]",
        "axes=[\"w\"]",
        "grid_times_us=[-1]",
        "eta_grid.lo=1",
        "eta_grid.hi=0",
        "eta_grid.n=2",
        "thresholds.slope_tolerance=0",
        "thresholds.bin_fraction=1.5",
        "thresholds.unknown=1",
    };
    for (const auto &o : bad) {
        EXPECT_THROW(load_config(std::nullopt, {o}, nullptr), ConfigError) << o;
    }
}

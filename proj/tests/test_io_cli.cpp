#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <tripcast/app.hpp>
#include <tripcast/csv.hpp>
#include <tripcast/io.hpp>
#include <tripcast/synth.hpp>

using namespace tripcast;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run tripcast_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = app::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++n;
    }
    return n == 0 ? 0 : n - 1;
}

class Cli : public ::testing::Test {
protected:
    static fs::path root() { return fs::temp_directory_path() / "tripcast_cli_tests"; }
    static fs::path fx() { return root() / "fixtures"; }

    static void SetUpTestSuite() {
        fs::remove_all(root());
        fs::create_directories(root());
        const auto r = tripcast_cli({"synth", "--out", fx().string(), "--intervals", "4", "--od-pairs", "30"});
        ASSERT_EQ(r.code, 0) << r.err;
    }

    fs::path dir(const std::string& name) const { return root() / name; }
};

}  // namespace

TEST(Clock, ParseAndFormat) {
    EXPECT_DOUBLE_EQ(io::parse_clock("06:00"), 21600.0);
    EXPECT_DOUBLE_EQ(io::parse_clock("09:57:30"), 9 * 3600.0 + 57 * 60.0 + 30.0);
    EXPECT_EQ(io::format_clock(36000.0), "10:00");
    EXPECT_EQ(io::format_clock(36005.0), "10:00:05");
    EXPECT_THROW(io::parse_clock("10h"), ConfigError);
    EXPECT_THROW(io::parse_clock("10:75"), ConfigError);
}

TEST(IdList, ParsesCommaSeparatedIds) {
    EXPECT_EQ(io::parse_id_list("3, 5,7"), (std::vector<long long>{3, 5, 7}));
    EXPECT_THROW(io::parse_id_list("3,x"), ConfigError);
}

TEST_F(Cli, NetworkAndDemandRoundTrip) {
    const auto net = synth::grid_network({}, 9);
    const TimeGrid grid{21600.0, 900.0, 3};
    const auto demand = synth::truth_demand(net, grid, 9);
    const auto d = dir("roundtrip");
    io::write_network(net, d);
    io::demand_writer(demand, io::zone_ids(net)).save(d / "demand.csv");

    const auto back = load_network(d / "nodes.csv", d / "links.csv", d / "zones.csv");
    ASSERT_EQ(back.num_links(), net.num_links());
    for (LinkIndex l = 0; l < net.num_links(); ++l) {
        EXPECT_EQ(back.link(l).id, net.link(l).id);
        EXPECT_NEAR(back.link(l).free_flow_time, net.link(l).free_flow_time, 1e-9);
    }
    const auto m = io::read_demand(d / "demand.csv", back, grid);
    ASSERT_EQ(m.num_pairs(), demand.num_pairs());
    for (std::size_t i = 0; i < m.num_pairs(); ++i) {
        for (int t = 0; t < grid.num_intervals; ++t) EXPECT_NEAR(m.at(i, t), demand.at(i, t), 1e-9 * demand.at(i, t));
    }
}

TEST_F(Cli, ScenarioFile) {
    const auto s = io::read_scenario(fx() / "bottleneck" / "scenario.txt");
    EXPECT_EQ(s.link_ids, (std::vector<long long>{2}));
    EXPECT_DOUBLE_EQ(s.start_time, 10 * 3600.0 + 300.0);
    EXPECT_DOUBLE_EQ(s.duration, 600.0);
    EXPECT_NEAR(s.capacity_factor, 1.0 / 3.0, 1e-9);
}

TEST_F(Cli, SimulateWritesFlows) {
    const auto out = dir("simulate");
    const auto r = tripcast_cli({"simulate", "--network-dir", fx().string(), "--demand",
                                 (fx() / "truth_demand.csv").string(), "--out", out.string(), "--dump-proportions"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(out / "flows.csv"), 34u * 4u);
    EXPECT_GT(data_rows(out / "proportions.csv"), 0u);
    const auto report = slurp(out / "report.txt");
    EXPECT_NE(report.find("command: simulate"), std::string::npos);
    EXPECT_NE(report.find("[config]"), std::string::npos);
}

TEST_F(Cli, SimulateMatchesTheSynthCounts) {
    const auto out = dir("simulate_counts");
    ASSERT_EQ(tripcast_cli({"simulate", "--network-dir", fx().string(), "--demand",
                            (fx() / "truth_demand.csv").string(), "--out", out.string()})
                  .code,
              0);
    const auto flows = csv::read_file(out / "flows.csv", {"link_id", "interval", "flow_veh"});
    const auto counts = csv::read_file(fx() / "counts.csv", {"link_id", "interval", "count_veh"});
    ASSERT_EQ(flows.rows.size(), counts.rows.size());
    for (std::size_t k = 0; k < flows.rows.size(); ++k) {
        // the demand went through a 12-digit CSV round trip
        EXPECT_EQ(flows.rows[k].fields[0], counts.rows[k].fields[0]);
        EXPECT_EQ(flows.rows[k].fields[1], counts.rows[k].fields[1]);
        const double c = csv::to_double(counts.rows[k], 2, "counts");
        EXPECT_NEAR(csv::to_double(flows.rows[k], 2, "flows"), c, 1e-8 * std::max(1.0, c));
    }
}

TEST_F(Cli, MissingDemandFileIsReported) {
    const auto r = tripcast_cli({"simulate", "--network-dir", fx().string(), "--demand",
                                 (fx() / "nope.csv").string(), "--out", dir("missing").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("file not found"), std::string::npos);
}

TEST_F(Cli, EstimateWritesItsOutputs) {
    const auto out = dir("estimate");
    const auto r = tripcast_cli({"estimate", "--network-dir", fx().string(), "--prior",
                                 (fx() / "prior_demand.csv").string(), "--counts", (fx() / "counts.csv").string(),
                                 "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"estimated_demand.csv", "convergence_trace.csv", "scatter.csv", "report.txt"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    EXPECT_EQ(data_rows(out / "estimated_demand.csv"), 12u * 4u);
    EXPECT_EQ(data_rows(out / "scatter.csv"), 34u * 4u);
    EXPECT_GE(data_rows(out / "convergence_trace.csv"), 1u);
}

TEST_F(Cli, SelfGeneratedCountsGiveASingleTraceRow) {
    const auto out = dir("estimate_self");
    const auto r = tripcast_cli({"estimate", "--network-dir", fx().string(), "--prior",
                                 (fx() / "truth_demand.csv").string(), "--counts", (fx() / "counts.csv").string(),
                                 "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(out / "convergence_trace.csv"), 1u);
}

TEST_F(Cli, OmegaOutOfRangeIsAConfigError) {
    const auto r = tripcast_cli({"estimate", "--network-dir", fx().string(), "--prior",
                                 (fx() / "prior_demand.csv").string(), "--counts", (fx() / "counts.csv").string(),
                                 "--omega", "1.5", "--out", dir("bad_omega").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("omega"), std::string::npos);
}

TEST_F(Cli, ForecastShape) {
    const auto out = dir("forecast");
    const auto r = tripcast_cli({"forecast", "--demand", (fx() / "fleet.csv").string(), "--spec", "1,0,0",
                                 "--steps", "2", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(out / "forecast.csv"), 30u * 2u);
    const auto t = csv::read_file(out / "forecast.csv", {"origin_zone", "dest_zone", "interval", "predicted_trips"});
    for (const auto& row : t.rows) EXPECT_GE(csv::to_double(row, 3, "forecast.csv"), 0.0);
    EXPECT_FALSE(fs::exists(out / "selection_report.csv"));
}

TEST_F(Cli, ForecastSelectionReport) {
    const auto out = dir("forecast_select");
    const auto r = tripcast_cli({"forecast", "--demand", (fx() / "fleet.csv").string(), "--select", "--out",
                                 out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(out / "selection_report.csv"), 5u);
    EXPECT_EQ(slurp(out / "selection_report.csv").rfind("spec,nrmse,r_squared\nnaive,", 0), 0u);
    // ARIMA labels contain commas and are quoted
    EXPECT_NE(slurp(out / "selection_report.csv").find("\n\"1,0,0\","), std::string::npos);
}

TEST_F(Cli, ForecastOnEmptyDemandFails) {
    const auto d = dir("empty");
    fs::create_directories(d);
    std::ofstream(d / "demand.csv") << "origin_zone,dest_zone,interval,trips\n";
    const auto r = tripcast_cli({"forecast", "--demand", (d / "demand.csv").string(), "--out", (d / "o").string()});
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, IncidentSweep) {
    const auto bn = fx() / "bottleneck";
    const auto out = dir("incident");
    const auto r = tripcast_cli({"incident", "--network-dir", bn.string(), "--demand", (bn / "demand.csv").string(),
                                 "--scenario", (bn / "scenario.txt").string(), "--start", "10:00", "--watched-link",
                                 "2", "--durations-min", "3,5,7,10", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = csv::read_file(out / "incident_report.csv",
                                  {"scenario", "duration_s", "capacity_factor", "avg_delay_s",
                                   "delay_ratio_vs_baseline", "min_throughput_vph"});
    ASSERT_EQ(t.rows.size(), 5u);
    EXPECT_EQ(t.rows[0].fields[0], "baseline");
    for (std::size_t k = 2; k < t.rows.size(); ++k) {
        EXPECT_GE(csv::to_double(t.rows[k], 3, "r"), csv::to_double(t.rows[k - 1], 3, "r"));
    }
}

TEST_F(Cli, UnitCapacityFactorGivesUnitRatio) {
    const auto bn = fx() / "bottleneck";
    const auto out = dir("incident_unit");
    const auto r = tripcast_cli({"incident", "--network-dir", bn.string(), "--demand", (bn / "demand.csv").string(),
                                 "--start", "10:00", "--incident-links", "2", "--incident-start", "10:05",
                                 "--capacity-factor", "1", "--watched-link", "2", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = csv::read_file(out / "incident_report.csv",
                                  {"scenario", "duration_s", "capacity_factor", "avg_delay_s",
                                   "delay_ratio_vs_baseline", "min_throughput_vph"});
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(csv::to_double(t.rows[1], 4, "r"), 1.0);
}

TEST_F(Cli, UnknownWatchedLinkFails) {
    const auto bn = fx() / "bottleneck";
    const auto r = tripcast_cli({"incident", "--network-dir", bn.string(), "--demand", (bn / "demand.csv").string(),
                                 "--scenario", (bn / "scenario.txt").string(), "--start", "10:00", "--watched-link",
                                 "999", "--out", dir("incident_bad").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("999"), std::string::npos);
}

TEST_F(Cli, SynthIsDeterministic) {
    const auto a = dir("synth_a");
    const auto b = dir("synth_b");
    ASSERT_EQ(tripcast_cli({"synth", "--out", a.string(), "--intervals", "3", "--seed", "5"}).code, 0);
    ASSERT_EQ(tripcast_cli({"synth", "--out", b.string(), "--intervals", "3", "--seed", "5"}).code, 0);
    for (const char* f : {"links.csv", "truth_demand.csv", "prior_demand.csv", "counts.csv", "fleet.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST_F(Cli, SynthPriorStaysWithinTheNoiseBand) {
    const std::vector<std::string> cols{"origin_zone", "dest_zone", "interval", "trips"};
    const auto truth = csv::read_file(fx() / "truth_demand.csv", cols);
    const auto prior = csv::read_file(fx() / "prior_demand.csv", cols);
    ASSERT_EQ(truth.rows.size(), prior.rows.size());
    for (std::size_t k = 0; k < truth.rows.size(); ++k) {
        const double t = csv::to_double(truth.rows[k], 3, "t");
        const double p = csv::to_double(prior.rows[k], 3, "p");
        EXPECT_GE(p, 0.7 * t - 1e-9);
        EXPECT_LE(p, 1.3 * t + 1e-9);
    }
}

TEST_F(Cli, SynthFleetSize) {
    const auto out = dir("synth_fleet");
    ASSERT_EQ(tripcast_cli({"synth", "--out", out.string(), "--intervals", "2", "--od-pairs", "3000"}).code, 0);
    const auto records = io::read_demand_records(out / "fleet.csv");
    const auto fleet = io::fleet_from_records(records, 900.0);
    EXPECT_EQ(fleet.series.size(), 3000u);
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
    const auto d = dir("config");
    fs::create_directories(d);
    std::ofstream(d / "run.cfg") << "# forecast settings\nspec = 0,0,0\nsteps = 3\n";
    const auto r = tripcast_cli({"forecast", "--config", (d / "run.cfg").string(), "--demand",
                                 (fx() / "fleet.csv").string(), "--steps", "1", "--out", (d / "o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(d / "o" / "forecast.csv"), 30u);
    const auto report = slurp(d / "o" / "report.txt");
    EXPECT_NE(report.find("spec = 0,0,0"), std::string::npos);
    EXPECT_NE(report.find("steps = 1"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(tripcast_cli({}).code, 1);
    EXPECT_EQ(tripcast_cli({"frobnicate"}).code, 1);
    EXPECT_EQ(tripcast_cli({"forecast", "--no-such-flag", "1"}).code, 1);
    EXPECT_EQ(tripcast_cli({"forecast", "--demand", (fx() / "fleet.csv").string(), "--spec", "1,x,0", "--out",
                            dir("bad_spec").string()})
                  .code,
              1);
    const auto v = tripcast_cli({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("tripcast"), std::string::npos);
}

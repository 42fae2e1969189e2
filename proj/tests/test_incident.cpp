#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <tripcast/incident.hpp>
#include <tripcast/synth.hpp>

using namespace tripcast;
using namespace tripcast::incident;

namespace {

void expect_same_outcome(const ScenarioOutcome& a, const ScenarioOutcome& b) {
    EXPECT_EQ(a.watched_throughput_vph, b.watched_throughput_vph);
    EXPECT_EQ(a.average_delay, b.average_delay);
    EXPECT_EQ(a.total_travel_time, b.total_travel_time);
    EXPECT_EQ(a.total_delay, b.total_delay);
    EXPECT_EQ(a.vehicles_unfinished, b.vehicles_unfinished);
    EXPECT_EQ(a.gridlocked, b.gridlocked);
}

double clock(int h, int m) { return h * 3600.0 + m * 60.0; }

}  // namespace

TEST(LaneFactor, FractionOfOpenLanes) {
    EXPECT_DOUBLE_EQ(lane_capacity_factor(3, 2), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(lane_capacity_factor(2, 5), 0.0);
    EXPECT_THROW(lane_capacity_factor(0, 0), ConfigError);
}

TEST(ApplyIncident, CapacityProfileSwitchesAtTheWindowEdges) {
    const auto f = synth::bottleneck_fixture();
    const TimeGrid grid{clock(9, 45), 900.0, 4};
    IncidentScenario s;
    s.link_ids = {2};
    s.start_time = clock(9, 57);
    s.duration = 600.0;
    s.capacity_factor = lane_capacity_factor(3, 2);
    const auto out = apply_incident(f.network, s, grid);
    const auto l = *out.find_link(2);
    EXPECT_DOUBLE_EQ(out.capacity_at(l, clock(9, 57) - 1e-6), 3000.0);
    EXPECT_DOUBLE_EQ(out.capacity_at(l, clock(9, 57)), 1000.0);
    EXPECT_DOUBLE_EQ(out.capacity_at(l, clock(10, 7) - 1e-6), 1000.0);
    EXPECT_DOUBLE_EQ(out.capacity_at(l, clock(10, 7)), 3000.0);
    // the other links are untouched
    EXPECT_DOUBLE_EQ(out.capacity_at(*out.find_link(1), clock(10, 0)), 3600.0);
}

TEST(ApplyIncident, LeavesTheInputNetworkAlone) {
    const auto f = synth::bottleneck_fixture();
    const auto l = *f.network.find_link(2);
    auto s = f.scenario;
    const auto out = apply_incident(f.network, s, f.demand.grid());
    EXPECT_TRUE(f.network.capacity_windows(l).empty());
    EXPECT_EQ(out.capacity_windows(l).size(), 1u);
}

TEST(ApplyIncident, PreconditionsAreChecked) {
    const auto f = synth::bottleneck_fixture();
    auto s = f.scenario;
    s.link_ids = {42};
    EXPECT_THROW(apply_incident(f.network, s, f.demand.grid()), DataError);
    s = f.scenario;
    s.start_time = clock(12, 0);
    EXPECT_THROW(apply_incident(f.network, s, f.demand.grid()), ConfigError);
    s = f.scenario;
    s.start_time = clock(9, 0);
    s.duration = 600.0;
    EXPECT_THROW(apply_incident(f.network, s, f.demand.grid()), ConfigError);
    s = f.scenario;
    s.capacity_factor = 1.5;
    EXPECT_THROW(apply_incident(f.network, s, f.demand.grid()), ConfigError);
    s = f.scenario;
    s.duration = 0.0;
    EXPECT_THROW(apply_incident(f.network, s, f.demand.grid()), ConfigError);
}

TEST(Analysis, UnitFactorMatchesTheBaseline) {
    const auto f = synth::bottleneck_fixture();
    auto s = f.scenario;
    s.capacity_factor = 1.0;
    const std::vector<IncidentScenario> scenarios{s};
    const auto out = run_incident_analysis(f.network, f.demand, scenarios, f.watched_link);
    ASSERT_EQ(out.size(), 2u);
    expect_same_outcome(out[0], out[1]);
    EXPECT_FALSE(out[0].scenario.has_value());
    EXPECT_DOUBLE_EQ(comparison_table(out)[1].delay_ratio_vs_baseline, 1.0);
}

TEST(Analysis, BaselineIsTheDirectSimulation) {
    const auto f = synth::bottleneck_fixture();
    const auto out = run_incident_analysis(f.network, f.demand, {}, f.watched_link);
    ASSERT_EQ(out.size(), 1u);
    const auto direct = summarize(assign(f.network, f.demand, default_incident_config()), *f.network.find_link(2));
    expect_same_outcome(out[0], direct);
    EXPECT_GT(out[0].average_delay, 0.0);
}

TEST(Analysis, FullBlockageStrandsEveryTrip) {
    auto f = synth::bottleneck_fixture();
    for (int t = 0; t < f.demand.num_intervals(); ++t) f.demand.set(1, t, 0.0);
    auto s = f.scenario;
    s.capacity_factor = 0.0;
    s.start_time = f.demand.grid().start;
    s.duration = f.demand.grid().end() - f.demand.grid().start + default_incident_config().clearance + 3600.0;
    const std::vector<IncidentScenario> scenarios{s};
    const auto out = run_incident_analysis(f.network, f.demand, scenarios, f.watched_link);
    EXPECT_NEAR(out[1].vehicles_unfinished, f.demand.total(), 1e-6);
    EXPECT_TRUE(out[1].gridlocked);
    EXPECT_EQ(out[1].min_throughput(), 0.0);
}

TEST(Analysis, UnknownWatchedLinkIsRejected) {
    const auto f = synth::bottleneck_fixture();
    EXPECT_THROW(run_incident_analysis(f.network, f.demand, {}, 77), DataError);
}

TEST(Sweep, LongerIncidentsHurtMore) {
    const auto f = synth::bottleneck_fixture();
    const std::vector<double> durations{180.0, 300.0, 420.0, 600.0};
    const auto rows = duration_sweep(f.network, f.demand, f.scenario, durations, f.watched_link);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0].scenario, "baseline");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        EXPECT_DOUBLE_EQ(rows[k].duration_s, durations[k - 1]);
        EXPECT_GE(rows[k].avg_delay_s, rows[k - 1].avg_delay_s);
        EXPECT_LE(rows[k].min_throughput_vph, rows[k - 1].min_throughput_vph);
        EXPECT_TRUE(std::isfinite(rows[k].delay_ratio_vs_baseline));
    }
    EXPECT_GT(rows.back().delay_ratio_vs_baseline, rows[1].delay_ratio_vs_baseline);
}

TEST(Sweep, SingleDurationEqualsSingleScenario) {
    const auto f = synth::bottleneck_fixture();
    const std::vector<double> durations{420.0};
    const auto rows = duration_sweep(f.network, f.demand, f.scenario, durations, f.watched_link);
    auto s = f.scenario;
    s.duration = 420.0;
    const std::vector<IncidentScenario> scenarios{s};
    const auto table = comparison_table(run_incident_analysis(f.network, f.demand, scenarios, f.watched_link));
    ASSERT_EQ(rows.size(), table.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        EXPECT_EQ(rows[k].avg_delay_s, table[k].avg_delay_s);
        EXPECT_EQ(rows[k].min_throughput_vph, table[k].min_throughput_vph);
        EXPECT_EQ(rows[k].delay_ratio_vs_baseline, table[k].delay_ratio_vs_baseline);
    }
}

TEST(Sweep, RejectsEmptyOrZeroDurations) {
    const auto f = synth::bottleneck_fixture();
    EXPECT_THROW(duration_sweep(f.network, f.demand, f.scenario, {}, f.watched_link), ConfigError);
    const std::vector<double> zero{0.0};
    EXPECT_THROW(duration_sweep(f.network, f.demand, f.scenario, zero, f.watched_link), ConfigError);
}

TEST(DelayRatio, EdgeCases) {
    EXPECT_DOUBLE_EQ(delay_ratio(0.0, 0.0), 1.0);
    EXPECT_TRUE(std::isinf(delay_ratio(3.0, 0.0)));
    EXPECT_DOUBLE_EQ(delay_ratio(6.0, 2.0), 3.0);
}

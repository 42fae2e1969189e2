#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <tripcast/simulator.hpp>
#include <tripcast/synth.hpp>

#include "sim_cases.hpp"

using namespace tripcast;
using simcase::one_pair;
using simcase::single_link;
using simcase::two_routes;

namespace {

void check_invariants(const Network& net, const ODMatrixSeries& demand, const SimulationResult& r) {
    for (const auto& msg : simcase::invariant_violations(net, demand, r)) ADD_FAILURE() << msg;
}

}  // namespace

TEST(Loading, BelowCapacityHasNoDelay) {
    const auto net = single_link();
    const TimeGrid g{0, 900, 1};
    const auto demand = one_pair(g, {100});
    SimulationConfig cfg;
    cfg.clearance = 3600;
    const auto r = assign(net, demand, cfg);
    EXPECT_NEAR(r.flow(0, 0), 100.0, 1e-9);
    EXPECT_DOUBLE_EQ(r.total_delay, 0.0);
    EXPECT_DOUBLE_EQ(r.vehicles_unfinished, 0.0);
    EXPECT_NEAR(r.total_travel_time, 100.0 * 300.0, 1e-9);
    check_invariants(net, demand, r);
}

TEST(Loading, OversaturatedLinkMatchesQueueTriangle) {
    // inflow 1200 vph for 900 s against 600 vph: the queue peaks at 150 veh after
    // 900 s and clears 900 s later, so delay is the triangle 0.5 * 1800 * 150
    const auto net = single_link();
    const TimeGrid g{0, 900, 1};
    const auto demand = one_pair(g, {300});
    SimulationConfig cfg;
    cfg.clearance = 3600;
    const auto r = assign(net, demand, cfg);
    EXPECT_NEAR(r.total_delay, 135000.0, 1e-6);
    EXPECT_NEAR(r.flow(0, 0), 300.0, 1e-9);
    // service runs at 1/6 veh/s from 300 s to 2100 s: 100 veh leave by 900 s,
    // 150 in the next interval and the last 50 after 1800 s
    EXPECT_NEAR(r.outflow(0, 0), 100.0, 1e-9);
    EXPECT_NEAR(r.outflow(0, 1), 150.0, 1e-9);
    EXPECT_NEAR(r.outflow(0, 2), 50.0, 1e-9);
    EXPECT_DOUBLE_EQ(r.vehicles_unfinished, 0.0);
    check_invariants(net, demand, r);
}

TEST(Loading, QueueTriangleHoldsAtUnitTimeStep) {
    const auto net = single_link();
    const TimeGrid g{0, 900, 1};
    const auto demand = one_pair(g, {300});
    SimulationConfig cfg;
    cfg.clearance = 3600;
    cfg.time_step = 1;
    EXPECT_NEAR(assign(net, demand, cfg).total_delay, 135000.0, 1e-6);
}

TEST(Loading, ZeroDemand) {
    const auto net = single_link();
    const TimeGrid g{0, 900, 2};
    const auto demand = one_pair(g, {0, 0});
    const auto r = assign(net, demand);
    for (double f : r.link_flows) EXPECT_EQ(f, 0.0);
    EXPECT_EQ(r.total_delay, 0.0);
    EXPECT_EQ(r.relative_gap, 0.0);
    EXPECT_TRUE(r.proportions.entries().empty());
}

TEST(Loading, HorizonOverflowIsReportedNotThrown) {
    const auto net = single_link();
    const TimeGrid g{0, 900, 1};
    const auto demand = one_pair(g, {300});
    const auto r = assign(net, demand);  // no clearance
    EXPECT_TRUE(r.horizon_overflow());
    EXPECT_GT(r.vehicles_unfinished, 0.0);
    EXPECT_NEAR(r.exited[0] + r.unfinished[0], 300.0, 1e-9);
}

TEST(Loading, InvalidPathIsAnError) {
    const auto net = two_routes();
    const TimeGrid g{0, 900, 1};
    const auto demand = one_pair(g, {10});
    PathFlowBundle bundle(1);
    bundle.assign_all(0, {2});  // link 3 runs 2 -> 1
    EXPECT_THROW((void)dynamic_network_loading(net, bundle, demand), DataError);
}

TEST(Loading, ProportionsAreCausalAcrossIntervals) {
    // 500 s link: half the departures of interval 0 cross the exit in interval 1
    const auto net = simcase::long_first_link();
    const TimeGrid g{0, 900, 3};
    ODMatrixSeries demand(g, {{0, 1}});
    demand.set(0, 0, 90);
    demand.set(0, 1, 45);
    SimulationConfig cfg;
    cfg.clearance = 900;
    const auto r = assign(net, demand, cfg);
    check_invariants(net, demand, r);
    EXPECT_NEAR(r.proportions.get(0, 0, demand.column(0, 0)), 1.0, 1e-12);
    const double second = r.proportions.get(1, 0, demand.column(0, 0));
    EXPECT_GT(second, 0.3);
    EXPECT_NEAR(second + r.proportions.get(1, 1, demand.column(0, 0)), 1.0, 1e-12);
    EXPECT_EQ(r.proportions.get(0, 0, demand.column(0, 1)), 0.0);
}

TEST(Assign, SingleRouteConvergesImmediately) {
    const auto net = single_link();
    const auto demand = one_pair({0, 900, 2}, {100, 50});
    const auto r = assign(net, demand);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.relative_gap, 0.0);
}

TEST(Assign, OneIterationIsAllOrNothingOnFreeFlow) {
    const auto net = two_routes();
    const auto demand = one_pair({0, 900, 1}, {400});
    SimulationConfig cfg;
    cfg.max_iterations = 1;
    cfg.clearance = 3600;
    const auto r = assign(net, demand, cfg);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_NEAR(r.flow(0, 0), 400.0, 1e-9);
    EXPECT_DOUBLE_EQ(r.flow(1, 0), 0.0);
}

TEST(Assign, TwoRouteEquilibriumMatchesClosedForm) {
    // fast link: f1 = 60 s, mu = 1/6 veh/s; slow link: f2 = 180 s, ample capacity.
    // Uniform inflow r over L = 900 s gives an average wait (r - mu) L / (2 mu);
    // equal costs need r = mu (1 + 2 (f2 - f1) / L), i.e. 190 veh on the fast link.
    const auto net = two_routes();
    const auto demand = one_pair({0, 900, 1}, {400});
    SimulationConfig cfg;
    cfg.clearance = 3600;
    cfg.max_iterations = 200;
    const auto r = assign(net, demand, cfg);
    const double mu = 600.0 / 3600.0;
    const double expected_fast = mu * (1.0 + 2.0 * (180.0 - 60.0) / 900.0) * 900.0;
    EXPECT_GT(r.flow(0, 0), 0.0);
    EXPECT_GT(r.flow(1, 0), 0.0);
    EXPECT_NEAR(r.flow(0, 0), expected_fast, 0.03 * expected_fast);
    const double t_fast = r.link_times.at(0, 0);
    const double t_slow = r.link_times.at(1, 0);
    EXPECT_NEAR(t_fast, t_slow, 0.05 * t_slow);
    check_invariants(net, demand, r);
}

TEST(Assign, GapTraceEndsBelowToleranceWhenConverged) {
    const auto net = two_routes();
    const auto demand = one_pair({0, 900, 1}, {400});
    SimulationConfig cfg;
    cfg.clearance = 3600;
    cfg.max_iterations = 500;
    const auto r = assign(net, demand, cfg);
    ASSERT_EQ(r.gap_trace.size(), static_cast<std::size_t>(r.iterations));
    if (r.iterations < cfg.max_iterations) EXPECT_LT(r.relative_gap, cfg.gap_tolerance);
}

TEST(RelativeGap, HandValues) {
    const std::vector<GapTerm> unique{{10, 100, 100}, {5, 50, 50}};
    EXPECT_EQ(compute_relative_gap(unique), 0.0);
    const std::vector<GapTerm> split{{50, 100, 100}, {50, 120, 100}};
    EXPECT_NEAR(compute_relative_gap(split), 0.10, 1e-15);
    EXPECT_EQ(compute_relative_gap(std::vector<GapTerm>{}), 0.0);
}

TEST(Demand, RejectsNegativeAndUnreachable) {
    ODMatrixSeries m({0, 900, 1}, {{0, 1}});
    EXPECT_THROW(m.set(0, 0, -1.0), DataError);
    const auto net = Network::build({{1, 0, 0}, {2, 0, 0}}, {{1, 2, 1, 60, 600, 1}}, {{1, 1}, {2, 2}});
    m.set(0, 0, 5.0);
    EXPECT_THROW((void)assign(net, m), DataError);
}

TEST(Properties, GridFixtureInvariantsAndDeterminism) {
    const auto net = synth::grid_network();
    const TimeGrid g;
    const auto demand = synth::truth_demand(net, g, 7);
    SimulationConfig cfg;
    cfg.clearance = 1800;
    const auto a = assign(net, demand, cfg);
    const auto b = assign(net, demand, cfg);
    EXPECT_TRUE(a == b);
    check_invariants(net, demand, a);
}

TEST(Properties, BottleneckInvariants) {
    const auto fx = synth::bottleneck_fixture();
    SimulationConfig cfg;
    cfg.clearance = 3600;
    check_invariants(fx.network, fx.demand, assign(fx.network, fx.demand, cfg));
}

TEST(Properties, DelayIsMonotoneInDemandScale) {
    const auto net = single_link();
    const TimeGrid g{0, 900, 2};
    SimulationConfig cfg;
    cfg.clearance = 3600;
    double previous = -1.0;
    for (double scale : {0.5, 1.0, 1.5, 2.0}) {
        const auto demand = one_pair(g, {200 * scale, 100 * scale});
        const auto r = assign(net, demand, cfg);
        EXPECT_GE(r.total_delay, previous);
        previous = r.total_delay;
        check_invariants(net, demand, r);
    }
    EXPECT_GT(previous, 0.0);
}

TEST(Properties, ConfigValidation) {
    const TimeGrid g{0, 900, 1};
    SimulationConfig cfg;
    cfg.time_step = 7;
    EXPECT_THROW(cfg.validate(g), ConfigError);
    cfg.time_step = 5;
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.validate(g), ConfigError);
}

TEST(Properties, InvariantsHoldOnEveryInstance) {
    for (const auto& c : simcase::all_cases()) {
        const auto r = assign(c.network, c.demand, c.config);
        for (const auto& msg : simcase::invariant_violations(c.network, c.demand, r)) ADD_FAILURE() << c.name << ": " << msg;
    }
}

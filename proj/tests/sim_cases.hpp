// Small simulator instances shared by the unit tests and the acceptance run,
// plus a framework-free check of the loading invariants.

#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <tripcast/simulator.hpp>
#include <tripcast/synth.hpp>

namespace simcase {

using namespace tripcast;

// zone 1 on node 1, zone 2 on node 2, one link 1->2 (plus a return link)
inline Network single_link(double capacity = 600.0, double fft = 300.0) {
    return Network::build({{1, 0, 0}, {2, 0, 0}}, {{1, 1, 2, fft, capacity, 1}, {2, 2, 1, fft, capacity, 1}},
                          {{1, 1}, {2, 2}});
}

inline ODMatrixSeries one_pair(const TimeGrid& g, std::vector<double> per_interval) {
    ODMatrixSeries m(g, {{0, 1}});
    for (int t = 0; t < g.num_intervals; ++t) m.set(0, t, per_interval.at(static_cast<std::size_t>(t)));
    return m;
}

// fast low-capacity link 1 and slow high-capacity link 2 between the same nodes
inline Network two_routes() {
    return Network::build({{1, 0, 0}, {2, 0, 0}},
                          {{1, 1, 2, 60, 600, 1}, {2, 1, 2, 180, 7200, 4}, {3, 2, 1, 60, 7200, 4}},
                          {{1, 1}, {2, 2}});
}

// 500 s first link so departures straddle interval boundaries
inline Network long_first_link() {
    return Network::build({{1, 0, 0}, {2, 0, 0}, {3, 0, 0}},
                          {{1, 1, 2, 500, 3600, 1}, {2, 2, 3, 60, 3600, 1}, {3, 3, 1, 60, 3600, 1}},
                          {{1, 1}, {2, 3}});
}

struct Case {
    std::string name;
    Network network;
    ODMatrixSeries demand;
    SimulationConfig config;
};

inline SimulationConfig with_clearance(double clearance, int max_iterations = 50, double time_step = 5.0) {
    SimulationConfig c;
    c.clearance = clearance;
    c.max_iterations = max_iterations;
    c.time_step = time_step;
    return c;
}

/// Every instance the simulator tests load.
inline std::vector<Case> all_cases() {
    std::vector<Case> v;
    v.push_back({"below capacity", single_link(), one_pair({0, 900, 1}, {100}), with_clearance(3600)});
    v.push_back({"queue triangle", single_link(), one_pair({0, 900, 1}, {300}), with_clearance(3600)});
    v.push_back({"queue triangle dt=1", single_link(), one_pair({0, 900, 1}, {300}), with_clearance(3600, 50, 1)});
    v.push_back({"zero demand", single_link(), one_pair({0, 900, 2}, {0, 0}), {}});
    v.push_back({"horizon overflow", single_link(), one_pair({0, 900, 1}, {300}), {}});
    {
        ODMatrixSeries d({0, 900, 3}, {{0, 1}});
        d.set(0, 0, 90);
        d.set(0, 1, 45);
        v.push_back({"causal proportions", long_first_link(), d, with_clearance(900)});
    }
    v.push_back({"single route", single_link(), one_pair({0, 900, 2}, {100, 50}), {}});
    v.push_back({"all or nothing", two_routes(), one_pair({0, 900, 1}, {400}), with_clearance(3600, 1)});
    v.push_back({"two-route equilibrium", two_routes(), one_pair({0, 900, 1}, {400}), with_clearance(3600, 200)});
    v.push_back({"gap trace", two_routes(), one_pair({0, 900, 1}, {400}), with_clearance(3600, 500)});
    {
        const auto net = synth::grid_network();
        auto d = synth::truth_demand(net, TimeGrid{}, 7);
        v.push_back({"grid fixture", net, std::move(d), with_clearance(1800)});
    }
    {
        auto fx = synth::bottleneck_fixture();
        v.push_back({"bottleneck", std::move(fx.network), std::move(fx.demand), with_clearance(3600)});
    }
    for (double scale : {0.5, 1.0, 1.5, 2.0}) {
        std::ostringstream name;
        name << "demand scale " << scale;
        v.push_back({name.str(), single_link(), one_pair({0, 900, 2}, {200 * scale, 100 * scale}),
                     with_clearance(3600)});
    }
    return v;
}

/// Conservation (1e-9), reconstruction (1e-6 relative), causality, capacity
/// and sign checks. Returns one message per violation.
inline std::vector<std::string> invariant_violations(const Network& net, const ODMatrixSeries& demand,
                                                     const SimulationResult& r) {
    std::vector<std::string> bad;
    auto fail = [&](const std::string& what, double a, double b) {
        std::ostringstream s;
        s.precision(17);
        s << what << ": " << a << " vs " << b;
        bad.push_back(s.str());
    };
    const auto& g = demand.grid();
    for (std::size_t c = 0; c < demand.num_columns(); ++c) {
        const double x = demand.values()[c];
        if (std::abs(x - (r.exited[c] + r.unfinished[c])) > 1e-9 * std::max(1.0, x)) {
            fail("conservation, column " + std::to_string(c), x, r.exited[c] + r.unfinished[c]);
        }
    }
    for (LinkIndex l = 0; l < net.num_links(); ++l) {
        for (int h = 0; h < g.num_intervals; ++h) {
            const double y = r.proportions.apply_row(l, h, demand.values());
            if (std::abs(y - r.flow(l, h)) > 1e-6 * std::max(1.0, r.flow(l, h))) {
                fail("reconstruction, link " + std::to_string(l) + " interval " + std::to_string(h), y, r.flow(l, h));
            }
            if (r.flow(l, h) < 0.0) fail("negative flow", r.flow(l, h), 0.0);
            for (const auto& e : r.proportions.row(l, h)) {
                if (e.crossing < demand.interval_of(e.column)) fail("causality", e.crossing, demand.interval_of(e.column));
                if (e.value < 0.0 || e.value > 1.0) fail("proportion range", e.value, 1.0);
            }
        }
        for (int h = 0; h < r.num_sim_intervals; ++h) {
            const double t0 = g.start + h * g.interval_length;
            const double cap = net.discharge_volume(l, t0, t0 + g.interval_length);
            if (r.outflow(l, h) > cap + 1e-9) fail("capacity, link " + std::to_string(l), r.outflow(l, h), cap);
        }
    }
    if (r.total_delay < 0.0) fail("negative delay", r.total_delay, 0.0);
    return bad;
}

}  // namespace simcase

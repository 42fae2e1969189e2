/// @file  incident.hpp
/// @brief Capacity-reduction incident scenarios and their impact on delay and throughput.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "network.hpp"
#include "simulator.hpp"

namespace tripcast::incident {

struct IncidentScenario {
    std::string name;
    std::vector<long long> link_ids;
    double start_time{};  // wall-clock seconds after midnight
    double duration{};    // seconds
    double capacity_factor{1.0};  // fraction of capacity remaining
    int lanes_blocked{0};

    [[nodiscard]] double end_time() const { return start_time + duration; }

    void validate(const TimeGrid& grid) const {
        if (link_ids.empty()) throw ConfigError("incident needs at least one link");
        if (!(duration > 0.0)) throw ConfigError("incident duration must be positive");
        if (!(capacity_factor >= 0.0 && capacity_factor <= 1.0)) {
            throw ConfigError("capacity_factor must lie in [0, 1]");
        }
        if (lanes_blocked < 0) throw ConfigError("lanes_blocked must be >= 0");
        if (!(start_time < grid.end() && end_time() > grid.start)) {
            throw ConfigError("incident window lies outside the simulation horizon");
        }
    }
};

/// Remaining-capacity share when @p blocked of @p lanes lanes are closed.
inline double lane_capacity_factor(int lanes, int blocked) {
    if (lanes < 1 || blocked < 0) throw ConfigError("invalid lane counts");
    return static_cast<double>(std::max(0, lanes - blocked)) / lanes;
}

/// Copy of @p net with the scenario's capacity cut on each affected link.
inline Network apply_incident(const Network& net, const IncidentScenario& scenario, const TimeGrid& grid) {
    scenario.validate(grid);
    Network out = net;
    for (auto id : scenario.link_ids) {
        const auto l = net.find_link(id);
        if (!l) throw DataError("incident references unknown link id " + std::to_string(id));
        out = out.with_capacity_window(*l, {scenario.start_time, scenario.end_time(), scenario.capacity_factor});
    }
    return out;
}

struct ScenarioOutcome {
    std::optional<IncidentScenario> scenario;  // empty for the baseline
    std::vector<double> watched_throughput_vph;  // exits from the watched link per grid interval
    double average_delay{};  // seconds per vehicle entering the network
    double total_travel_time{};
    double total_delay{};
    double vehicles_unfinished{};
    bool gridlocked{false};

    [[nodiscard]] double min_throughput() const {
        if (watched_throughput_vph.empty()) return 0.0;
        return *std::min_element(watched_throughput_vph.begin(), watched_throughput_vph.end());
    }
};

/// Simulation settings for incident runs: an hour of clearance so post-incident
/// queues are accounted for.
inline SimulationConfig default_incident_config() {
    SimulationConfig c;
    c.clearance = 3600.0;
    return c;
}

inline ScenarioOutcome summarize(const SimulationResult& sim, LinkIndex watched, double gridlock_share = 0.10) {
    ScenarioOutcome o;
    const auto& grid = sim.grid;
    for (int h = 0; h < grid.num_intervals; ++h) {
        o.watched_throughput_vph.push_back(sim.outflow(watched, h) * 3600.0 / grid.interval_length);
    }
    o.average_delay = sim.average_delay();
    o.total_travel_time = sim.total_travel_time;
    o.total_delay = sim.total_delay;
    o.vehicles_unfinished = sim.vehicles_unfinished;
    o.gridlocked = sim.vehicles_entered > 0.0 && sim.vehicles_unfinished > gridlock_share * sim.vehicles_entered;
    return o;
}

/// Baseline plus one run per scenario, all with the same route-choice settings.
inline std::vector<ScenarioOutcome> run_incident_analysis(const Network& net, const ODMatrixSeries& demand,
                                                          std::span<const IncidentScenario> scenarios,
                                                          long long watched_link,
                                                          const SimulationConfig& config = default_incident_config()) {
    const auto watched = net.find_link(watched_link);
    if (!watched) throw DataError("unknown watched link id " + std::to_string(watched_link));
    std::vector<Network> variants;
    for (const auto& s : scenarios) variants.push_back(apply_incident(net, s, demand.grid()));

    std::vector<ScenarioOutcome> out;
    out.push_back(summarize(assign(net, demand, config), *watched));
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        auto o = summarize(assign(variants[k], demand, config), *watched);
        o.scenario = scenarios[k];
        out.push_back(std::move(o));
    }
    return out;
}

struct ComparisonRow {
    std::string scenario;
    double duration_s{};
    double capacity_factor{1.0};
    double avg_delay_s{};
    double delay_ratio_vs_baseline{1.0};
    double min_throughput_vph{};
    bool gridlocked{false};
};

/// avg_delay / baseline avg_delay; 1 when both are zero, +inf when only the baseline is.
inline double delay_ratio(double delay, double baseline) {
    if (baseline > 0.0) return delay / baseline;
    return delay > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

inline std::vector<ComparisonRow> comparison_table(std::span<const ScenarioOutcome> outcomes) {
    if (outcomes.empty()) return {};
    const double base = outcomes.front().average_delay;
    std::vector<ComparisonRow> rows;
    for (const auto& o : outcomes) {
        ComparisonRow r;
        if (o.scenario) {
            r.scenario = o.scenario->name;
            r.duration_s = o.scenario->duration;
            r.capacity_factor = o.scenario->capacity_factor;
        } else {
            r.scenario = "baseline";
        }
        r.avg_delay_s = o.average_delay;
        r.delay_ratio_vs_baseline = delay_ratio(o.average_delay, base);
        r.min_throughput_vph = o.min_throughput();
        r.gridlocked = o.gridlocked;
        rows.push_back(std::move(r));
    }
    return rows;
}

/// One scenario per duration built from @p templ; baseline row first.
inline std::vector<ComparisonRow> duration_sweep(const Network& net, const ODMatrixSeries& demand,
                                                 const IncidentScenario& templ, std::span<const double> durations,
                                                 long long watched_link,
                                                 const SimulationConfig& config = default_incident_config()) {
    if (durations.empty()) throw ConfigError("duration sweep needs at least one duration");
    std::vector<IncidentScenario> scenarios;
    for (double d : durations) {
        if (!(d > 0.0)) throw ConfigError("incident durations must be positive");
        auto s = templ;
        s.duration = d;
        char buf[64];
        std::snprintf(buf, sizeof buf, "incident_%gs", d);
        s.name = buf;
        scenarios.push_back(std::move(s));
    }
    const auto outcomes = run_incident_analysis(net, demand, scenarios, watched_link, config);
    return comparison_table(outcomes);
}

}  // namespace tripcast::incident

/// @file  synth.hpp
/// @brief Seeded synthetic fixtures: grid network, ground-truth demand, counts,
///        noisy prior, AR(1) demand fleets and a single-bottleneck corridor.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "error.hpp"
#include "estimation.hpp"
#include "forecast.hpp"
#include "incident.hpp"
#include "network.hpp"
#include "simulator.hpp"

namespace tripcast::synth {

struct GridSpec {
    int rows{3};
    int cols{4};
    double horizontal_fft{60.0};
    double vertical_fft{90.0};
    double capacity{1200.0};
    int lanes{2};
    double fft_jitter{0.3};  // free-flow times scaled by U(1 - j, 1 + j) per link
};

/// Bidirectional grid. Node ids are 1..rows*cols row by row; zones 1..4 sit on
/// the four corners. Jittered free-flow times keep equal-cost routes rare.
inline Network grid_network(const GridSpec& spec = {}, std::uint64_t seed = 42) {
    if (spec.rows < 2 || spec.cols < 2) throw ConfigError("grid needs at least 2 rows and 2 columns");
    if (!(spec.fft_jitter >= 0.0 && spec.fft_jitter < 1.0)) throw ConfigError("fft_jitter must lie in [0, 1)");
    std::mt19937_64 rng(seed + 0x51ed2701ULL);
    std::uniform_real_distribution<double> jitter(1.0 - spec.fft_jitter, 1.0 + spec.fft_jitter);
    std::vector<Node> nodes;
    auto id = [&](int r, int c) { return static_cast<long long>(r * spec.cols + c + 1); };
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) nodes.push_back({id(r, c), c * 500.0, r * 500.0});
    }
    std::vector<LinkRecord> links;
    long long next = 1;
    auto both = [&](long long a, long long b, double fft) {
        const double forward = fft * jitter(rng);
        const double backward = fft * jitter(rng);
        links.push_back({next++, a, b, forward, spec.capacity, spec.lanes});
        links.push_back({next++, b, a, backward, spec.capacity, spec.lanes});
    };
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c + 1 < spec.cols; ++c) both(id(r, c), id(r, c + 1), spec.horizontal_fft);
    }
    for (int r = 0; r + 1 < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) both(id(r, c), id(r + 1, c), spec.vertical_fft);
    }
    const std::vector<ZoneRecord> zones{{1, id(0, 0)},
                                        {2, id(0, spec.cols - 1)},
                                        {3, id(spec.rows - 1, 0)},
                                        {4, id(spec.rows - 1, spec.cols - 1)}};
    return Network::build(std::move(nodes), links, zones);
}

/// Peaked demand for every ordered zone pair: a per-pair level times a bell
/// profile peaking mid-period.
inline ODMatrixSeries truth_demand(const Network& net, const TimeGrid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> level(30.0, 80.0);
    std::vector<OdPair> pairs;
    for (ZoneIndex o = 0; o < net.num_zones(); ++o) {
        for (ZoneIndex d = 0; d < net.num_zones(); ++d) {
            if (o != d) pairs.push_back({o, d});
        }
    }
    ODMatrixSeries m(grid, pairs);
    const double peak = 0.5 * (grid.num_intervals - 1);
    const double width = std::max(1.0, grid.num_intervals / 5.0);
    for (std::size_t i = 0; i < m.num_pairs(); ++i) {
        const double base = level(rng) * grid.interval_length / 900.0;
        for (int t = 0; t < grid.num_intervals; ++t) {
            const double z = (t - peak) / width;
            m.set(i, t, base * (1.0 + 0.8 * std::exp(-z * z)));
        }
    }
    return m;
}

/// truth * U(1 - noise, 1 + noise), entry by entry.
inline ODMatrixSeries noisy_prior(const ODMatrixSeries& truth, double noise, std::uint64_t seed) {
    if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("noise must lie in [0, 1)");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(1.0 - noise, 1.0 + noise);
    ODMatrixSeries prior = truth;
    for (std::size_t i = 0; i < truth.num_pairs(); ++i) {
        for (int t = 0; t < truth.num_intervals(); ++t) prior.set(i, t, truth.at(i, t) * u(rng));
    }
    return prior;
}

/// Counts on every link and interval, read off a simulation.
inline LinkCountSeries counts_from(const SimulationResult& sim) {
    std::vector<LinkCount> entries;
    for (LinkIndex l = 0; l < sim.num_links; ++l) {
        for (int h = 0; h < sim.grid.num_intervals; ++h) entries.push_back({l, h, sim.flow(l, h)});
    }
    return LinkCountSeries(std::move(entries));
}

struct RecoveryFixture {
    Network network;
    ODMatrixSeries truth;
    ODMatrixSeries prior;
    LinkCountSeries counts;
};

inline RecoveryFixture recovery_fixture(std::uint64_t seed, double noise = 0.3, const TimeGrid& grid = {},
                                        const SimulationConfig& sim = {}) {
    auto net = grid_network({}, seed);
    auto truth = truth_demand(net, grid, seed);
    auto prior = noisy_prior(truth, noise, seed);
    auto counts = counts_from(assign(net, truth, sim));
    return {std::move(net), std::move(truth), std::move(prior), std::move(counts)};
}

struct Ar1 {
    double phi{0.6};
    double c{10.0};
    double sigma{1.0};
};

/// x_t = c + phi x_{t-1} + e_t, started at the stationary mean with a burn-in.
inline std::vector<double> ar1_series(std::mt19937_64& rng, std::size_t n, const Ar1& p = {}) {
    std::normal_distribution<double> noise(0.0, p.sigma);
    double x = p.c / (1.0 - p.phi);
    for (int k = 0; k < 100; ++k) x = p.c + p.phi * x + noise(rng);
    std::vector<double> out(n);
    for (auto& v : out) {
        x = p.c + p.phi * x + noise(rng);
        v = x;
    }
    return out;
}

/// @p pairs AR(1) series over the smallest zone set that holds that many
/// ordered pairs.
inline std::vector<forecast::DemandSeries> ar1_fleet(std::size_t pairs, std::size_t length, std::uint64_t seed,
                                                     const Ar1& p = {}, double interval_length = 900.0) {
    if (pairs == 0) throw ConfigError("fleet needs at least one OD pair");
    std::mt19937_64 rng(seed);
    ZoneIndex zones = 2;
    while (static_cast<std::size_t>(zones) * (zones - 1) < pairs) ++zones;
    std::vector<forecast::DemandSeries> fleet;
    for (ZoneIndex o = 0; o < zones && fleet.size() < pairs; ++o) {
        for (ZoneIndex d = 0; d < zones && fleet.size() < pairs; ++d) {
            if (o == d) continue;
            fleet.push_back({{o, d}, ar1_series(rng, length, p), interval_length});
        }
    }
    return fleet;
}

/// Corridor where one link carries all of its OD's demand, plus a separate
/// mildly oversaturated link so the baseline has some delay.
///
///   zone 1 (n1) -> n2 ==bridge(link 2)==> n3 -> zone 2 (n4)
///   zone 3 (n5) -> zone 4 (n6), with n6 -> n4 tying the zones together
struct BottleneckFixture {
    Network network;
    ODMatrixSeries demand;
    incident::IncidentScenario scenario;  // duration set per run
    long long watched_link{2};
};

inline BottleneckFixture bottleneck_fixture() {
    std::vector<Node> nodes;
    for (long long i = 1; i <= 6; ++i) nodes.push_back({i, static_cast<double>(i) * 400.0, 0.0});
    const std::vector<LinkRecord> links{
        {1, 1, 2, 60.0, 3600.0, 3},
        {2, 2, 3, 120.0, 3000.0, 3},
        {3, 3, 4, 60.0, 3600.0, 3},
        {4, 5, 6, 60.0, 600.0, 1},
        {5, 6, 4, 60.0, 1800.0, 1},
    };
    const std::vector<ZoneRecord> zones{{1, 1}, {2, 4}, {3, 5}, {4, 6}};
    auto net = Network::build(std::move(nodes), links, zones);

    const TimeGrid grid{10.0 * 3600.0, 900.0, 2};
    ODMatrixSeries demand(grid, {{0, 1}, {2, 3}});
    for (int t = 0; t < 2; ++t) {
        demand.set(0, t, 2700.0 / 4.0);  // 90% of the bridge capacity
        demand.set(1, t, 660.0 / 4.0);   // 110% of link 4
    }
    incident::IncidentScenario s;
    s.name = "bridge";
    s.link_ids = {2};
    s.start_time = 10.0 * 3600.0 + 300.0;
    s.duration = 600.0;
    s.lanes_blocked = 2;
    s.capacity_factor = incident::lane_capacity_factor(3, 2);
    return {std::move(net), std::move(demand), s, 2};
}

}  // namespace tripcast::synth

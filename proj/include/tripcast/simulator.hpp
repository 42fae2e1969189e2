/// @file  simulator.hpp
/// @brief Dynamic traffic assignment: point-queue network loading and MSA route choice.
///
/// Demand is continuous flow. Departures of interval t are routed on the path
/// that is shortest at the interval's start instant and released at a uniform
/// rate over the interval. Each link is a point queue: flow entering at step k
/// becomes eligible to leave at step k + ceil(fft / step) and is discharged in
/// FIFO order at most at the link's capacity. Link counts are attributed to the
/// interval of link entry.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "network.hpp"

namespace tripcast {

struct OdPair {
    ZoneIndex origin{};
    ZoneIndex dest{};

    friend auto operator<=>(const OdPair&, const OdPair&) = default;
};

/// Demand x_i^t per OD pair i and departure interval t.
///
/// Values are stored row-major; column(i, t) = i * T + t is the flat index the
/// estimator optimizes over.
class ODMatrixSeries {
public:
    ODMatrixSeries() = default;

    ODMatrixSeries(TimeGrid grid, std::vector<OdPair> pairs) : grid_(grid), pairs_(std::move(pairs)) {
        std::sort(pairs_.begin(), pairs_.end());
        if (std::adjacent_find(pairs_.begin(), pairs_.end()) != pairs_.end()) {
            throw DataError("duplicate OD pair in demand");
        }
        values_.assign(pairs_.size() * static_cast<std::size_t>(grid_.num_intervals), 0.0);
    }

    /// Builds from flat values laid out as column(i, t); @p pairs must already be sorted.
    static ODMatrixSeries from_flat(TimeGrid grid, std::vector<OdPair> pairs, std::vector<double> values) {
        ODMatrixSeries m(grid, std::move(pairs));
        if (values.size() != m.values_.size()) throw DataError("demand vector has the wrong size");
        for (std::size_t c = 0; c < values.size(); ++c) check_value(values[c]);
        m.values_ = std::move(values);
        return m;
    }

    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] const std::vector<OdPair>& pairs() const { return pairs_; }
    [[nodiscard]] std::size_t num_pairs() const { return pairs_.size(); }
    [[nodiscard]] int num_intervals() const { return grid_.num_intervals; }
    [[nodiscard]] std::size_t num_columns() const { return values_.size(); }
    [[nodiscard]] std::size_t column(std::size_t pair, int t) const {
        return pair * static_cast<std::size_t>(grid_.num_intervals) + static_cast<std::size_t>(t);
    }
    [[nodiscard]] std::size_t pair_of(std::size_t column) const { return column / grid_.num_intervals; }
    [[nodiscard]] int interval_of(std::size_t column) const {
        return static_cast<int>(column % static_cast<std::size_t>(grid_.num_intervals));
    }

    [[nodiscard]] double at(std::size_t pair, int t) const { return values_.at(column(pair, t)); }
    void set(std::size_t pair, int t, double trips) {
        check_value(trips);
        values_.at(column(pair, t)) = trips;
    }

    [[nodiscard]] std::span<const double> values() const { return values_; }

    [[nodiscard]] std::optional<std::size_t> find_pair(OdPair od) const {
        const auto it = std::lower_bound(pairs_.begin(), pairs_.end(), od);
        if (it == pairs_.end() || *it != od) return std::nullopt;
        return static_cast<std::size_t>(it - pairs_.begin());
    }

    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s;
    }

    /// Demand series of one OD pair across all intervals.
    [[nodiscard]] std::vector<double> series(std::size_t pair) const {
        const auto b = values_.begin() + static_cast<std::ptrdiff_t>(column(pair, 0));
        return {b, b + grid_.num_intervals};
    }

    friend bool operator==(const ODMatrixSeries&, const ODMatrixSeries&) = default;

private:
    static void check_value(double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("demand values must be finite and >= 0");
    }

    TimeGrid grid_{};
    std::vector<OdPair> pairs_;
    std::vector<double> values_;
};

/// Checks zone references and that every OD pair with positive demand has a path.
inline void validate_demand(const Network& net, const ODMatrixSeries& demand) {
    for (std::size_t i = 0; i < demand.num_pairs(); ++i) {
        const auto od = demand.pairs()[i];
        if (od.origin >= net.num_zones() || od.dest >= net.num_zones()) {
            throw DataError("OD pair references a zone outside the network");
        }
        if (od.origin == od.dest) {
            throw DataError("OD pair with origin == destination (zone " +
                            std::to_string(net.zones()[od.origin].id) + ")");
        }
        double total = 0.0;
        for (int t = 0; t < demand.num_intervals(); ++t) total += demand.at(i, t);
        if (total > 0.0 && !net.reachable(net.zones()[od.origin].node, net.zones()[od.dest].node)) {
            throw DataError("unreachable OD pair " + std::to_string(net.zones()[od.origin].id) + " -> " +
                            std::to_string(net.zones()[od.dest].id));
        }
    }
}

struct PathShare {
    std::vector<LinkIndex> links;
    double share{};

    friend bool operator==(const PathShare&, const PathShare&) = default;
};

/// Route-choice output: per demand column, the paths in use and their flow shares.
class PathFlowBundle {
public:
    PathFlowBundle() = default;
    explicit PathFlowBundle(std::size_t num_columns) : columns_(num_columns) {}

    [[nodiscard]] std::size_t num_columns() const { return columns_.size(); }
    [[nodiscard]] const std::vector<PathShare>& paths(std::size_t column) const { return columns_.at(column); }
    std::vector<PathShare>& paths(std::size_t column) { return columns_.at(column); }

    /// Sets a single path carrying the whole column.
    void assign_all(std::size_t column, std::vector<LinkIndex> links) {
        columns_.at(column) = {PathShare{std::move(links), 1.0}};
    }

    /// MSA blend: existing shares scaled by (1 - weight), @p target gains weight.
    void blend(const PathFlowBundle& target, double weight) {
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            auto& mine = columns_[c];
            const auto& theirs = target.columns_.at(c);
            if (mine.empty()) {
                mine = theirs;
                continue;
            }
            for (auto& p : mine) p.share *= (1.0 - weight);
            for (const auto& q : theirs) {
                auto it = std::find_if(mine.begin(), mine.end(), [&](const PathShare& p) { return p.links == q.links; });
                if (it == mine.end()) {
                    mine.push_back({q.links, q.share * weight});
                } else {
                    it->share += q.share * weight;
                }
            }
        }
    }

    friend bool operator==(const PathFlowBundle&, const PathFlowBundle&) = default;

private:
    std::vector<std::vector<PathShare>> columns_;
};

struct ProportionEntry {
    LinkIndex link{};
    int crossing{};           // h
    std::size_t column{};     // (i, t) flat index
    double value{};

    friend bool operator==(const ProportionEntry&, const ProportionEntry&) = default;
};

/// Sparse p_{a,i}^{h,t}: share of demand column (i, t) entering link a during interval h.
///
/// Entries are sorted by (link, crossing interval, column) and grouped into rows
/// indexed by (link, crossing interval).
class AssignmentProportions {
public:
    AssignmentProportions() = default;

    AssignmentProportions(std::size_t num_links, int num_intervals, std::size_t num_columns,
                          std::vector<ProportionEntry> entries)
        : num_links_(num_links), num_intervals_(num_intervals), num_columns_(num_columns), entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(), [](const ProportionEntry& a, const ProportionEntry& b) {
            return std::tie(a.link, a.crossing, a.column) < std::tie(b.link, b.crossing, b.column);
        });
        row_begin_.assign(num_links_ * static_cast<std::size_t>(num_intervals_) + 1, 0);
        for (const auto& e : entries_) ++row_begin_[row_index(e.link, e.crossing) + 1];
        for (std::size_t r = 0; r + 1 < row_begin_.size(); ++r) row_begin_[r + 1] += row_begin_[r];
    }

    [[nodiscard]] std::size_t num_links() const { return num_links_; }
    [[nodiscard]] int num_intervals() const { return num_intervals_; }
    [[nodiscard]] std::size_t num_columns() const { return num_columns_; }
    [[nodiscard]] std::span<const ProportionEntry> entries() const { return entries_; }

    [[nodiscard]] std::span<const ProportionEntry> row(LinkIndex link, int crossing) const {
        const auto r = row_index(link, crossing);
        return {entries_.data() + row_begin_[r], row_begin_[r + 1] - row_begin_[r]};
    }

    [[nodiscard]] double get(LinkIndex link, int crossing, std::size_t column) const {
        for (const auto& e : row(link, crossing)) {
            if (e.column == column) return e.value;
        }
        return 0.0;
    }

    /// y_a^h = sum over columns of p * x for one (link, interval) row.
    [[nodiscard]] double apply_row(LinkIndex link, int crossing, std::span<const double> x) const {
        double y = 0.0;
        for (const auto& e : row(link, crossing)) y += e.value * x[e.column];
        return y;
    }

    friend bool operator==(const AssignmentProportions&, const AssignmentProportions&) = default;

private:
    [[nodiscard]] std::size_t row_index(std::size_t link, int crossing) const {
        return link * static_cast<std::size_t>(num_intervals_) + static_cast<std::size_t>(crossing);
    }

    std::size_t num_links_{0};
    int num_intervals_{0};
    std::size_t num_columns_{0};
    std::vector<ProportionEntry> entries_;
    std::vector<std::size_t> row_begin_;
};

struct SimulationConfig {
    int max_iterations{50};
    double gap_tolerance{1e-3};
    double time_step{5.0};  // seconds; must divide the interval length
    double clearance{0.0};  // seconds simulated past the grid end

    void validate(const TimeGrid& grid) const {
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
        if (!(gap_tolerance >= 0.0)) throw ConfigError("gap_tolerance must be >= 0");
        if (!(time_step > 0.0)) throw ConfigError("time_step must be positive");
        const double ratio = grid.interval_length / time_step;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
            throw ConfigError("time_step must divide the interval length");
        }
        if (!(clearance >= 0.0)) throw ConfigError("clearance must be >= 0");
    }
};

struct SimulationResult {
    TimeGrid grid;
    std::size_t num_links{0};
    int num_sim_intervals{0};           // grid intervals plus clearance intervals
    std::vector<double> link_flows;     // y_a^h, entries per (link, h < T)
    std::vector<double> link_outflows;  // exits per (link, simulated interval)
    LinkTimes link_times;               // experienced entry-to-exit seconds
    AssignmentProportions proportions;
    PathFlowBundle path_flows;
    std::vector<double> exited;      // per demand column
    std::vector<double> unfinished;  // per demand column
    double vehicles_entered{0.0};
    double vehicles_unfinished{0.0};
    double total_travel_time{0.0};  // vehicle-seconds
    double total_delay{0.0};        // vehicle-seconds spent queueing
    double relative_gap{0.0};
    int iterations{0};
    std::vector<double> gap_trace;

    [[nodiscard]] double flow(LinkIndex l, int h) const {
        return link_flows[static_cast<std::size_t>(l) * grid.num_intervals + h];
    }
    [[nodiscard]] double outflow(LinkIndex l, int h) const {
        return link_outflows[static_cast<std::size_t>(l) * num_sim_intervals + h];
    }
    [[nodiscard]] bool horizon_overflow() const { return vehicles_unfinished > 1e-9; }
    [[nodiscard]] double average_delay() const {
        return vehicles_entered > 0.0 ? total_delay / vehicles_entered : 0.0;
    }

    friend bool operator==(const SimulationResult&, const SimulationResult&) = default;
};

/// One (path, flow) observation for the relative gap.
struct GapTerm {
    double flow{};
    double path_cost{};
    double shortest_cost{};
};

/// (sum flow * path cost - sum flow * shortest cost) / sum flow * shortest cost.
inline double compute_relative_gap(std::span<const GapTerm> terms) {
    double excess = 0.0;
    double base = 0.0;
    for (const auto& g : terms) {
        if (g.flow <= 0.0) continue;
        excess += g.flow * (g.path_cost - g.shortest_cost);
        base += g.flow * g.shortest_cost;
    }
    if (base <= 0.0) return 0.0;
    return std::max(0.0, excess) / base;
}

namespace detail {

struct Chunk {
    std::uint32_t path{};
    std::uint32_t pos{};
    int entry_step{};
    int depart_step{};
    double amount{};
};

struct LinkQueue {
    std::deque<Chunk> chunks;
    std::size_t eligible_count{0};
    double eligible_amount{0.0};
};

inline void check_path(const Network& net, const OdPair& od, std::span<const LinkIndex> links) {
    if (links.empty()) throw DataError("empty path in path-flow bundle");
    NodeIndex at = net.zones().at(od.origin).node;
    for (auto l : links) {
        if (l >= net.num_links() || net.link(l).from != at) throw DataError("path is not a connected link sequence");
        at = net.link(l).to;
    }
    if (at != net.zones().at(od.dest).node) throw DataError("path does not end at the destination zone");
}

/// Shortest-path cache keyed by (origin node, departure interval).
class TreeCache {
public:
    TreeCache(const Network& net, const LinkTimes& times) : net_(net), times_(times) {}

    const ArrivalTree& get(NodeIndex origin, int t) {
        const auto key = std::make_pair(origin, t);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            it = cache_.emplace(key, earliest_arrival_tree(net_, times_, origin, times_.grid().interval_begin(t))).first;
        }
        return it->second;
    }

private:
    const Network& net_;
    const LinkTimes& times_;
    std::map<std::pair<NodeIndex, int>, ArrivalTree> cache_;
};

inline double bundle_gap(const Network& net, const ODMatrixSeries& demand, const PathFlowBundle& bundle,
                         const LinkTimes& times) {
    TreeCache trees(net, times);
    std::vector<GapTerm> terms;
    for (std::size_t c = 0; c < demand.num_columns(); ++c) {
        const double x = demand.values()[c];
        if (x <= 0.0) continue;
        const auto od = demand.pairs()[demand.pair_of(c)];
        const int t = demand.interval_of(c);
        const double depart = demand.grid().interval_begin(t);
        const auto& tree = trees.get(net.zones()[od.origin].node, t);
        const double shortest = tree.arrival[net.zones()[od.dest].node] - depart;
        for (const auto& p : bundle.paths(c)) {
            terms.push_back({x * p.share, times.path_arrival(p.links, depart) - depart, shortest});
        }
    }
    return compute_relative_gap(terms);
}

}  // namespace detail

/// Loads @p path_flows onto the network with point queues and records link flows,
/// experienced link times and assignment proportions.
inline SimulationResult dynamic_network_loading(const Network& net, const PathFlowBundle& path_flows,
                                                const ODMatrixSeries& demand, const SimulationConfig& config = {}) {
    const TimeGrid& grid = demand.grid();
    grid.validate();
    config.validate(grid);
    if (path_flows.num_columns() != demand.num_columns()) {
        throw DataError("path-flow bundle does not match the demand layout");
    }

    const double dt = config.time_step;
    const int T = grid.num_intervals;
    const int steps_per_interval = static_cast<int>(std::lround(grid.interval_length / dt));
    const double horizon = grid.duration() + config.clearance;
    const int total_steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
    const int num_sim_intervals = (total_steps + steps_per_interval - 1) / steps_per_interval;
    const std::size_t L = net.num_links();
    const std::size_t C = demand.num_columns();

    std::vector<int> ff_steps(L);
    for (LinkIndex l = 0; l < L; ++l) {
        ff_steps[l] = std::max(1, static_cast<int>(std::ceil(net.link(l).free_flow_time / dt - 1e-9)));
    }

    // path table and per-step release sources
    struct Source {
        std::uint32_t path;
        int first_step;
        double per_step;
        double last;
    };
    std::vector<std::vector<LinkIndex>> path_links;
    std::vector<std::size_t> path_column;
    std::vector<Source> sources;
    double entered = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        const double x = demand.values()[c];
        if (x <= 0.0) continue;
        const auto od = demand.pairs()[demand.pair_of(c)];
        const auto& paths = path_flows.paths(c);
        if (paths.empty()) throw DataError("no path flows for a demand column with positive demand");
        for (const auto& p : paths) {
            detail::check_path(net, od, p.links);
            if (p.share <= 0.0) continue;
            const double volume = x * p.share;
            const double per_step = volume / steps_per_interval;
            sources.push_back({static_cast<std::uint32_t>(path_links.size()), demand.interval_of(c) * steps_per_interval,
                               per_step, volume - per_step * (steps_per_interval - 1)});
            path_links.push_back(p.links);
            path_column.push_back(c);
            entered += volume;
        }
    }

    SimulationResult result;
    result.grid = grid;
    result.num_links = L;
    result.num_sim_intervals = num_sim_intervals;
    result.link_flows.assign(L * T, 0.0);
    result.link_outflows.assign(L * num_sim_intervals, 0.0);
    result.exited.assign(C, 0.0);
    result.unfinished.assign(C, 0.0);
    result.vehicles_entered = entered;
    result.path_flows = path_flows;

    std::vector<double> column_flow(L * T * C, 0.0);  // entries per (link, h, column)
    std::vector<double> time_weighted(L * T, 0.0);    // sum amount * traversal seconds
    std::vector<double> time_amount(L * T, 0.0);
    std::vector<double> backlog_at_step(L * static_cast<std::size_t>(total_steps + 1), 0.0);
    std::vector<detail::LinkQueue> queues(L);

    auto enter = [&](LinkIndex l, const detail::Chunk& ch) {
        const int h = ch.entry_step / steps_per_interval;
        if (h < T) {
            result.link_flows[static_cast<std::size_t>(l) * T + h] += ch.amount;
            column_flow[(static_cast<std::size_t>(l) * T + h) * C + path_column[ch.path]] += ch.amount;
        }
        queues[l].chunks.push_back(ch);
    };

    auto record_traversal = [&](LinkIndex l, int entry_step, double amount, int exit_step) {
        const int h = entry_step / steps_per_interval;
        if (h >= T) return;
        time_weighted[static_cast<std::size_t>(l) * T + h] += amount * (exit_step - entry_step) * dt;
        time_amount[static_cast<std::size_t>(l) * T + h] += amount;
    };

    std::size_t first_open_source = 0;
    std::sort(sources.begin(), sources.end(), [](const Source& a, const Source& b) {
        return std::tie(a.first_step, a.path) < std::tie(b.first_step, b.path);
    });

    int step = 0;
    for (; step < total_steps; ++step) {
        // releases
        for (std::size_t s = first_open_source; s < sources.size(); ++s) {
            const auto& src = sources[s];
            if (src.first_step > step) break;
            const int k = step - src.first_step;
            if (k >= steps_per_interval) {
                if (s == first_open_source) ++first_open_source;
                continue;
            }
            const double amount = k + 1 == steps_per_interval ? src.last : src.per_step;
            enter(path_links[src.path].front(), {src.path, 0, step, step, amount});
        }

        const double t0 = grid.start + step * dt;
        for (LinkIndex l = 0; l < L; ++l) {
            auto& q = queues[l];
            while (q.eligible_count < q.chunks.size() && q.chunks[q.eligible_count].entry_step + ff_steps[l] <= step) {
                q.eligible_amount += q.chunks[q.eligible_count].amount;
                ++q.eligible_count;
            }
            backlog_at_step[static_cast<std::size_t>(l) * (total_steps + 1) + step] = q.eligible_amount;
            if (q.eligible_count == 0) continue;
            double capacity = net.discharge_volume(l, t0, t0 + dt);
            while (q.eligible_count > 0 && capacity > 0.0) {
                auto& front = q.chunks.front();
                const double served = std::min(front.amount, capacity);
                capacity -= served;
                const int eligible_step = front.entry_step + ff_steps[l];
                result.total_delay += served * (step - eligible_step) * dt;
                record_traversal(l, front.entry_step, served, step);
                const int h_out = step / steps_per_interval;
                result.link_outflows[static_cast<std::size_t>(l) * num_sim_intervals + h_out] += served;
                const auto& links = path_links[front.path];
                if (front.pos + 1 < links.size()) {
                    enter(links[front.pos + 1], {front.path, front.pos + 1, step, front.depart_step, served});
                } else {
                    result.exited[path_column[front.path]] += served;
                    result.total_travel_time += served * (step - front.depart_step) * dt;
                }
                if (served >= front.amount) {
                    q.eligible_amount -= front.amount;
                    q.chunks.pop_front();
                    --q.eligible_count;
                } else {
                    front.amount -= served;
                    q.eligible_amount -= served;
                }
            }
            if (q.eligible_count == 0) q.eligible_amount = 0.0;
        }
        if (first_open_source == sources.size()) {
            bool empty = true;
            for (const auto& q : queues) empty = empty && q.chunks.empty();
            if (empty) {
                ++step;
                break;
            }
        }
    }
    const int end_step = step;

    // flow still inside at the horizon contributes time and queueing up to the horizon
    for (LinkIndex l = 0; l < L; ++l) {
        for (const auto& ch : queues[l].chunks) {
            result.unfinished[path_column[ch.path]] += ch.amount;
            result.total_travel_time += ch.amount * (end_step - ch.depart_step) * dt;
            const int eligible_step = ch.entry_step + ff_steps[l];
            if (eligible_step < end_step) result.total_delay += ch.amount * (end_step - eligible_step) * dt;
            record_traversal(l, ch.entry_step, ch.amount, end_step);
        }
    }
    for (double u : result.unfinished) result.vehicles_unfinished += u;

    // experienced link times; intervals without entering flow get the wait a
    // vehicle entering at the interval start would see
    result.link_times = LinkTimes(grid, L);
    for (LinkIndex l = 0; l < L; ++l) {
        for (int h = 0; h < T; ++h) {
            const auto idx = static_cast<std::size_t>(l) * T + h;
            if (time_amount[idx] > 0.0) {
                result.link_times.set(l, h, time_weighted[idx] / time_amount[idx]);
                continue;
            }
            const int eligible = h * steps_per_interval + ff_steps[l];
            double wait = 0.0;
            if (eligible < end_step) {
                double backlog = backlog_at_step[static_cast<std::size_t>(l) * (total_steps + 1) + eligible];
                int k = eligible;
                while (backlog > 0.0 && k < end_step) {
                    const double t0 = grid.start + k * dt;
                    backlog -= net.discharge_volume(l, t0, t0 + dt);
                    if (backlog > 0.0) ++k;
                }
                wait = (k - eligible) * dt;
            }
            result.link_times.set(l, h, ff_steps[l] * dt + wait);
        }
    }

    std::vector<ProportionEntry> entries;
    for (LinkIndex l = 0; l < L; ++l) {
        for (int h = 0; h < T; ++h) {
            const double* row = &column_flow[(static_cast<std::size_t>(l) * T + h) * C];
            for (std::size_t c = 0; c < C; ++c) {
                if (row[c] > 0.0) entries.push_back({l, h, c, std::min(1.0, row[c] / demand.values()[c])});
            }
        }
    }
    result.proportions = AssignmentProportions(L, T, C, std::move(entries));
    result.relative_gap = detail::bundle_gap(net, demand, path_flows, result.link_times);
    result.gap_trace = {result.relative_gap};
    result.iterations = 1;
    return result;
}

/// All-or-nothing bundle: every column on its time-dependent shortest path.
inline PathFlowBundle all_or_nothing(const Network& net, const ODMatrixSeries& demand, const LinkTimes& times) {
    PathFlowBundle bundle(demand.num_columns());
    detail::TreeCache trees(net, times);
    for (std::size_t c = 0; c < demand.num_columns(); ++c) {
        if (demand.values()[c] <= 0.0) continue;
        const auto od = demand.pairs()[demand.pair_of(c)];
        const int t = demand.interval_of(c);
        const auto o = net.zones()[od.origin].node;
        const auto& tree = trees.get(o, t);
        bundle.assign_all(c, extract_path(net, tree, o, net.zones()[od.dest].node, times.grid().interval_begin(t)).links);
    }
    return bundle;
}

/// Method of successive averages toward dynamic user equilibrium.
inline SimulationResult assign(const Network& net, const ODMatrixSeries& demand, const SimulationConfig& config = {}) {
    demand.grid().validate();
    config.validate(demand.grid());
    validate_demand(net, demand);

    PathFlowBundle bundle = all_or_nothing(net, demand, LinkTimes::free_flow(net, demand.grid()));
    SimulationResult result = dynamic_network_loading(net, bundle, demand, config);
    std::vector<double> gaps{result.relative_gap};
    int k = 1;
    while (result.relative_gap >= config.gap_tolerance && k < config.max_iterations) {
        ++k;
        const auto target = all_or_nothing(net, demand, result.link_times);
        bundle.blend(target, 1.0 / k);
        result = dynamic_network_loading(net, bundle, demand, config);
        gaps.push_back(result.relative_gap);
    }
    result.iterations = k;
    result.gap_trace = std::move(gaps);
    return result;
}

}  // namespace tripcast

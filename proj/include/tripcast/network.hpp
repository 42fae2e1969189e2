/// @file  network.hpp
/// @brief Road network, time discretization and time-dependent shortest paths.
///
/// Nodes, links and zones keep their external integer ids but are re-indexed
/// densely on load; every other module works with the dense indices. Interval
/// indices are 0-based in the C++ API and 1-based in files.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "csv.hpp"
#include "error.hpp"

namespace tripcast {

using NodeIndex = std::uint32_t;
using LinkIndex = std::uint32_t;
using ZoneIndex = std::uint32_t;

inline constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

struct Node {
    long long id{};
    double x{};
    double y{};
};

struct Link {
    long long id{};
    NodeIndex from{};
    NodeIndex to{};
    double free_flow_time{};  // seconds
    double capacity{};        // vehicles per hour
    int lanes{1};
};

struct Zone {
    long long id{};
    NodeIndex node{};
};

/// Raw link row as it appears in links.csv (node ids, not indices).
struct LinkRecord {
    long long id{};
    long long from_node{};
    long long to_node{};
    double free_flow_time{};
    double capacity{};
    int lanes{1};
};

struct ZoneRecord {
    long long id{};
    long long node_id{};
};

/// Uniform discretization of the analysis period.
struct TimeGrid {
    double start{6.0 * 3600.0};  // wall-clock seconds after midnight
    double interval_length{900.0};
    int num_intervals{16};

    [[nodiscard]] double duration() const { return interval_length * num_intervals; }
    [[nodiscard]] double end() const { return start + duration(); }
    /// Offset (seconds after start) at which interval @p t begins.
    [[nodiscard]] double interval_begin(int t) const { return interval_length * t; }
    /// Interval containing offset @p tau, clamped to [0, T-1].
    [[nodiscard]] int interval_of(double tau) const {
        if (tau <= 0.0) return 0;
        const auto h = static_cast<long long>(std::floor(tau / interval_length));
        return static_cast<int>(std::min<long long>(h, num_intervals - 1));
    }

    void validate() const {
        if (!(interval_length > 0.0)) throw ConfigError("interval length must be positive");
        if (num_intervals < 1) throw ConfigError("number of intervals must be >= 1");
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Capacity multiplier active on a link during [begin, end) wall-clock seconds.
struct CapacityWindow {
    double begin{};
    double end{};
    double factor{1.0};
};

class Network {
public:
    Network() = default;

    /// Builds and validates a network from raw records.
    static Network build(std::vector<Node> nodes, const std::vector<LinkRecord>& links,
                         const std::vector<ZoneRecord>& zones) {
        Network net;
        net.nodes_ = std::move(nodes);
        for (NodeIndex i = 0; i < net.nodes_.size(); ++i) {
            if (!net.node_by_id_.emplace(net.nodes_[i].id, i).second) {
                throw DataError("duplicate node id " + std::to_string(net.nodes_[i].id));
            }
        }
        net.links_.reserve(links.size());
        for (const auto& rec : links) {
            const auto from = net.node_by_id_.find(rec.from_node);
            const auto to = net.node_by_id_.find(rec.to_node);
            if (from == net.node_by_id_.end() || to == net.node_by_id_.end()) {
                const auto missing = from == net.node_by_id_.end() ? rec.from_node : rec.to_node;
                throw DataError("link " + std::to_string(rec.id) + " references unknown node " +
                                std::to_string(missing));
            }
            if (rec.from_node == rec.to_node) {
                throw DataError("link " + std::to_string(rec.id) + " is a self loop");
            }
            if (!(rec.capacity > 0.0) || !std::isfinite(rec.capacity)) {
                throw DataError("link " + std::to_string(rec.id) + " has nonpositive capacity");
            }
            if (!(rec.free_flow_time > 0.0) || !std::isfinite(rec.free_flow_time)) {
                throw DataError("link " + std::to_string(rec.id) + " has nonpositive free-flow time");
            }
            if (rec.lanes < 1) throw DataError("link " + std::to_string(rec.id) + " has fewer than 1 lane");
            const auto index = static_cast<LinkIndex>(net.links_.size());
            if (!net.link_by_id_.emplace(rec.id, index).second) {
                throw DataError("duplicate link id " + std::to_string(rec.id));
            }
            net.links_.push_back({rec.id, from->second, to->second, rec.free_flow_time, rec.capacity, rec.lanes});
        }
        for (const auto& rec : zones) {
            const auto node = net.node_by_id_.find(rec.node_id);
            if (node == net.node_by_id_.end()) {
                throw DataError("zone " + std::to_string(rec.id) + " attaches to unknown node " +
                                std::to_string(rec.node_id));
            }
            if (!net.zone_by_id_.emplace(rec.id, static_cast<ZoneIndex>(net.zones_.size())).second) {
                throw DataError("duplicate zone id " + std::to_string(rec.id));
            }
            net.zones_.push_back({rec.id, node->second});
        }
        net.index_adjacency();
        net.windows_.assign(net.links_.size(), {});
        net.validate_topology();
        return net;
    }

    [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<Link>& links() const { return links_; }
    [[nodiscard]] const std::vector<Zone>& zones() const { return zones_; }
    [[nodiscard]] const Link& link(LinkIndex l) const { return links_.at(l); }
    [[nodiscard]] std::size_t num_nodes() const { return nodes_.size(); }
    [[nodiscard]] std::size_t num_links() const { return links_.size(); }
    [[nodiscard]] std::size_t num_zones() const { return zones_.size(); }

    [[nodiscard]] std::span<const LinkIndex> out_links(NodeIndex n) const {
        return {out_.data() + out_begin_[n], out_begin_[n + 1] - out_begin_[n]};
    }
    [[nodiscard]] std::span<const LinkIndex> in_links(NodeIndex n) const {
        return {in_.data() + in_begin_[n], in_begin_[n + 1] - in_begin_[n]};
    }

    [[nodiscard]] std::optional<NodeIndex> find_node(long long id) const { return lookup(node_by_id_, id); }
    [[nodiscard]] std::optional<LinkIndex> find_link(long long id) const { return lookup(link_by_id_, id); }
    [[nodiscard]] std::optional<ZoneIndex> find_zone(long long id) const { return lookup(zone_by_id_, id); }

    [[nodiscard]] LinkIndex link_index(long long id) const {
        if (auto l = find_link(id)) return *l;
        throw DataError("unknown link id " + std::to_string(id));
    }
    [[nodiscard]] ZoneIndex zone_index(long long id) const {
        if (auto z = find_zone(id)) return *z;
        throw DataError("unknown zone id " + std::to_string(id));
    }

    /// Returns a copy with an extra capacity window on link @p l.
    [[nodiscard]] Network with_capacity_window(LinkIndex l, CapacityWindow w) const {
        Network copy = *this;
        copy.windows_.at(l).push_back(w);
        return copy;
    }

    [[nodiscard]] const std::vector<CapacityWindow>& capacity_windows(LinkIndex l) const {
        return windows_.at(l);
    }

    /// Capacity (veh/h) of link @p l at wall-clock instant @p t.
    [[nodiscard]] double capacity_at(LinkIndex l, double t) const {
        double cap = links_[l].capacity;
        for (const auto& w : windows_[l]) {
            if (t >= w.begin && t < w.end) cap *= w.factor;
        }
        return cap;
    }

    /// Vehicles link @p l can discharge over wall-clock [t0, t1]; exact integral of the
    /// piecewise-constant capacity profile.
    [[nodiscard]] double discharge_volume(LinkIndex l, double t0, double t1) const {
        const auto& ws = windows_[l];
        if (ws.empty()) return links_[l].capacity * (t1 - t0) / 3600.0;
        std::vector<double> cuts{t0, t1};
        for (const auto& w : ws) {
            if (w.begin > t0 && w.begin < t1) cuts.push_back(w.begin);
            if (w.end > t0 && w.end < t1) cuts.push_back(w.end);
        }
        std::sort(cuts.begin(), cuts.end());
        double volume = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            volume += capacity_at(l, cuts[i]) * (cuts[i + 1] - cuts[i]) / 3600.0;
        }
        return volume;
    }

    /// True when every node of @p dest is reachable from @p origin along directed links.
    [[nodiscard]] bool reachable(NodeIndex origin, NodeIndex dest) const {
        std::vector<char> seen(nodes_.size(), 0);
        std::vector<NodeIndex> stack{origin};
        seen[origin] = 1;
        while (!stack.empty()) {
            const auto n = stack.back();
            stack.pop_back();
            if (n == dest) return true;
            for (auto l : out_links(n)) {
                const auto m = links_[l].to;
                if (!seen[m]) {
                    seen[m] = 1;
                    stack.push_back(m);
                }
            }
        }
        return false;
    }

private:
    template <typename Map>
    static std::optional<std::uint32_t> lookup(const Map& m, long long id) {
        const auto it = m.find(id);
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    void index_adjacency() {
        const auto n = nodes_.size();
        out_begin_.assign(n + 1, 0);
        in_begin_.assign(n + 1, 0);
        for (const auto& l : links_) {
            ++out_begin_[l.from + 1];
            ++in_begin_[l.to + 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            out_begin_[i + 1] += out_begin_[i];
            in_begin_[i + 1] += in_begin_[i];
        }
        out_.assign(links_.size(), 0);
        in_.assign(links_.size(), 0);
        auto out_fill = out_begin_;
        auto in_fill = in_begin_;
        for (LinkIndex l = 0; l < links_.size(); ++l) {
            out_[out_fill[links_[l].from]++] = l;
            in_[in_fill[links_[l].to]++] = l;
        }
    }

    void validate_topology() const {
        for (const auto& z : zones_) {
            if (out_links(z.node).empty() && in_links(z.node).empty()) {
                throw DataError("zone " + std::to_string(z.id) + " attaches to isolated node " +
                                std::to_string(nodes_[z.node].id));
            }
        }
        if (zones_.size() < 2) return;
        // weak connectivity over the zone set
        std::vector<char> seen(nodes_.size(), 0);
        std::vector<NodeIndex> stack{zones_.front().node};
        seen[zones_.front().node] = 1;
        while (!stack.empty()) {
            const auto n = stack.back();
            stack.pop_back();
            auto visit = [&](NodeIndex m) {
                if (!seen[m]) {
                    seen[m] = 1;
                    stack.push_back(m);
                }
            };
            for (auto l : out_links(n)) visit(links_[l].to);
            for (auto l : in_links(n)) visit(links_[l].from);
        }
        for (const auto& z : zones_) {
            if (!seen[z.node]) {
                throw DataError("zone " + std::to_string(z.id) + " is disconnected from zone " +
                                std::to_string(zones_.front().id));
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<Zone> zones_;
    std::unordered_map<long long, NodeIndex> node_by_id_;
    std::unordered_map<long long, LinkIndex> link_by_id_;
    std::unordered_map<long long, ZoneIndex> zone_by_id_;
    std::vector<std::size_t> out_begin_, in_begin_;
    std::vector<LinkIndex> out_, in_;
    std::vector<std::vector<CapacityWindow>> windows_;
};

/// Loads nodes.csv, links.csv and zones.csv into a validated Network.
inline Network load_network(const std::filesystem::path& nodes_file, const std::filesystem::path& links_file,
                            const std::filesystem::path& zones_file) {
    const auto node_table = csv::read_file(nodes_file, {"node_id", "x", "y"});
    std::vector<Node> nodes;
    for (const auto& row : node_table.rows) {
        nodes.push_back({csv::to_int(row, 0, node_table.source), csv::to_double(row, 1, node_table.source),
                         csv::to_double(row, 2, node_table.source)});
    }
    const auto link_table = csv::read_file(
        links_file, {"link_id", "from_node", "to_node", "free_flow_time_s", "capacity_vph", "lanes"});
    std::vector<LinkRecord> links;
    for (const auto& row : link_table.rows) {
        const auto& src = link_table.source;
        LinkRecord rec{csv::to_int(row, 0, src),        csv::to_int(row, 1, src),
                       csv::to_int(row, 2, src),        csv::to_double(row, 3, src),
                       csv::to_double(row, 4, src),     static_cast<int>(csv::to_int(row, 5, src))};
        links.push_back(rec);
    }
    const auto zone_table = csv::read_file(zones_file, {"zone_id", "node_id"});
    std::vector<ZoneRecord> zones;
    for (const auto& row : zone_table.rows) {
        zones.push_back({csv::to_int(row, 0, zone_table.source), csv::to_int(row, 1, zone_table.source)});
    }
    return Network::build(std::move(nodes), links, zones);
}

/// Piecewise-constant traversal times per (link, interval), in seconds.
///
/// Traversal is evaluated at link entry. The arrival function is the FIFO
/// envelope of the entry-time rule: entering later in a faster interval is
/// never better than entering now.
class LinkTimes {
public:
    LinkTimes() = default;
    LinkTimes(TimeGrid grid, std::size_t num_links, double fill = 0.0)
        : grid_(grid), num_links_(num_links), times_(num_links * grid.num_intervals, fill) {}

    static LinkTimes free_flow(const Network& net, const TimeGrid& grid) {
        LinkTimes lt(grid, net.num_links());
        for (LinkIndex l = 0; l < net.num_links(); ++l) {
            for (int h = 0; h < grid.num_intervals; ++h) lt.set(l, h, net.link(l).free_flow_time);
        }
        return lt;
    }

    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] std::size_t num_links() const { return num_links_; }
    [[nodiscard]] double at(LinkIndex l, int h) const { return times_[index(l, h)]; }

    void set(LinkIndex l, int h, double seconds) {
        times_[index(l, h)] = seconds;
        envelope_.clear();
    }

    /// Arrival offset at the link's head when entering @p l at offset @p tau.
    [[nodiscard]] double arrival(LinkIndex l, double tau) const {
        if (envelope_.empty()) build_envelope();
        const int h = grid_.interval_of(tau);
        const double direct = tau + at(l, h);
        if (h + 1 >= grid_.num_intervals) return direct;
        return std::min(direct, envelope_[index(l, h + 1)]);
    }

    /// Traversal offsets along @p path departing at @p depart; returns arrival.
    [[nodiscard]] double path_arrival(std::span<const LinkIndex> path, double depart) const {
        double tau = depart;
        for (auto l : path) tau = arrival(l, tau);
        return tau;
    }

    void validate_positive() const {
        for (double t : times_) {
            if (!(t > 0.0) || !std::isfinite(t)) throw DataError("link times must be positive and finite");
        }
    }

    friend bool operator==(const LinkTimes& a, const LinkTimes& b) {
        return a.grid_ == b.grid_ && a.num_links_ == b.num_links_ && a.times_ == b.times_;
    }

private:
    [[nodiscard]] std::size_t index(LinkIndex l, int h) const {
        return static_cast<std::size_t>(l) * grid_.num_intervals + static_cast<std::size_t>(h);
    }

    // envelope_[l, h] = min over h' >= h of begin(h') + time(l, h')
    void build_envelope() const {
        envelope_.assign(times_.size(), 0.0);
        for (LinkIndex l = 0; l < num_links_; ++l) {
            double best = std::numeric_limits<double>::infinity();
            for (int h = grid_.num_intervals - 1; h >= 0; --h) {
                best = std::min(best, grid_.interval_begin(h) + at(l, h));
                envelope_[index(l, h)] = best;
            }
        }
    }

    TimeGrid grid_{};
    std::size_t num_links_{0};
    std::vector<double> times_;
    mutable std::vector<double> envelope_;
};

struct Path {
    std::vector<LinkIndex> links;
    double depart{};  // offset seconds
    double arrive{};

    [[nodiscard]] double travel_time() const { return arrive - depart; }
};

/// Earliest-arrival tree from one origin node.
struct ArrivalTree {
    std::vector<double> arrival;       // offset seconds, +inf when unreachable
    std::vector<LinkIndex> pred_link;  // kNone at the root and unreachable nodes
};

/// Time-dependent label-setting search from @p origin departing at offset @p depart.
/// Equal arrivals prefer the predecessor with the lower node id, then the lower link index.
inline ArrivalTree earliest_arrival_tree(const Network& net, const LinkTimes& times, NodeIndex origin,
                                         double depart) {
    const auto n = net.num_nodes();
    ArrivalTree tree{std::vector<double>(n, std::numeric_limits<double>::infinity()),
                     std::vector<LinkIndex>(n, kNone)};
    std::vector<char> settled(n, 0);
    using Entry = std::pair<double, long long>;  // (arrival, node id) -> node id breaks ties
    std::priority_queue<std::pair<Entry, NodeIndex>, std::vector<std::pair<Entry, NodeIndex>>, std::greater<>> heap;
    tree.arrival[origin] = depart;
    heap.push({{depart, net.nodes()[origin].id}, origin});
    while (!heap.empty()) {
        const auto [key, u] = heap.top();
        heap.pop();
        if (settled[u] || key.first > tree.arrival[u]) continue;
        settled[u] = 1;
        for (auto l : net.out_links(u)) {
            const auto v = net.link(l).to;
            if (settled[v]) continue;
            const double t = times.arrival(l, tree.arrival[u]);
            bool better = t < tree.arrival[v];
            if (!better && t == tree.arrival[v] && tree.pred_link[v] != kNone) {
                const auto& cur = net.link(tree.pred_link[v]);
                const long long cur_id = net.nodes()[cur.from].id;
                const long long new_id = net.nodes()[u].id;
                better = new_id < cur_id || (new_id == cur_id && l < tree.pred_link[v]);
            }
            if (better) {
                const bool improved = t < tree.arrival[v];
                tree.arrival[v] = t;
                tree.pred_link[v] = l;
                if (improved) heap.push({{t, net.nodes()[v].id}, v});
            }
        }
    }
    return tree;
}

/// Extracts the link sequence to @p dest from a tree; throws NoPathError when unreachable.
inline Path extract_path(const Network& net, const ArrivalTree& tree, NodeIndex origin, NodeIndex dest,
                         double depart) {
    if (!std::isfinite(tree.arrival[dest])) {
        throw NoPathError("node " + std::to_string(net.nodes()[dest].id) + " unreachable from node " +
                          std::to_string(net.nodes()[origin].id));
    }
    Path path;
    path.depart = depart;
    path.arrive = tree.arrival[dest];
    for (NodeIndex n = dest; n != origin;) {
        const auto l = tree.pred_link[n];
        path.links.push_back(l);
        n = net.link(l).from;
    }
    std::reverse(path.links.begin(), path.links.end());
    return path;
}

/// Least-arrival-time path between two zones for departures at the start of
/// interval @p depart_interval (0-based).
inline Path time_dependent_shortest_path(const Network& net, const LinkTimes& times, ZoneIndex origin,
                                         ZoneIndex dest, int depart_interval) {
    if (origin == dest) throw DataError("origin and destination zones must differ");
    if (depart_interval < 0 || depart_interval >= times.grid().num_intervals) {
        throw DataError("departure interval out of range");
    }
    times.validate_positive();
    const double depart = times.grid().interval_begin(depart_interval);
    const auto o = net.zones().at(origin).node;
    const auto d = net.zones().at(dest).node;
    const auto tree = earliest_arrival_tree(net, times, o, depart);
    return extract_path(net, tree, o, d, depart);
}

}  // namespace tripcast

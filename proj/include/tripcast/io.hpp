/// @file  io.hpp
/// @brief CSV readers and writers for demand, counts, flows and reports.
///
/// Intervals are 1-based in every file.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "forecast.hpp"
#include "incident.hpp"
#include "network.hpp"
#include "simulator.hpp"

namespace tripcast::io {

/// "HH:MM" or "HH:MM:SS" to seconds after midnight.
inline double parse_clock(const std::string& text) {
    int h = 0, m = 0, s = 0;
    char extra = 0;
    const int n = std::sscanf(text.c_str(), "%d:%d:%d%c", &h, &m, &s, &extra);
    if ((n != 2 && n != 3) || h < 0 || h > 47 || m < 0 || m > 59 || s < 0 || s > 59) {
        throw ConfigError("bad clock time '" + text + "', expected HH:MM");
    }
    if (n == 2 && text.find(':') != text.rfind(':')) throw ConfigError("bad clock time '" + text + "'");
    return h * 3600.0 + m * 60.0 + s;
}

inline std::string format_clock(double seconds) {
    const auto total = static_cast<long long>(std::llround(seconds));
    char buf[64];
    if (total % 60 == 0) {
        std::snprintf(buf, sizeof buf, "%02lld:%02lld", total / 3600, (total / 60) % 60);
    } else {
        std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", total / 3600, (total / 60) % 60, total % 60);
    }
    return buf;
}

/// One row of a demand file, zone ids as written.
struct DemandRecord {
    long long origin{};
    long long dest{};
    int interval{};  // 1-based
    double trips{};
};

inline std::vector<DemandRecord> read_demand_records(const std::filesystem::path& path,
                                                     const std::string& value_column = "trips") {
    const auto table = csv::read_file(path, {"origin_zone", "dest_zone", "interval", value_column});
    std::vector<DemandRecord> out;
    for (const auto& row : table.rows) {
        DemandRecord r{csv::to_int(row, 0, table.source), csv::to_int(row, 1, table.source),
                       static_cast<int>(csv::to_int(row, 2, table.source)), csv::to_double(row, 3, table.source)};
        if (r.interval < 1) throw ParseError(table.source, row.line, "interval must be >= 1");
        if (!(r.trips >= 0.0) || !std::isfinite(r.trips)) throw ParseError(table.source, row.line, "trips must be >= 0");
        out.push_back(r);
    }
    if (out.empty()) throw DataError(table.source + ": no demand rows");
    return out;
}

inline int max_interval(const std::vector<DemandRecord>& records) {
    int t = 0;
    for (const auto& r : records) t = std::max(t, r.interval);
    return t;
}

/// Demand on a network. @p grid.num_intervals <= 0 means "infer from the file".
inline ODMatrixSeries read_demand(const std::filesystem::path& path, const Network& net, TimeGrid grid) {
    const auto records = read_demand_records(path);
    if (grid.num_intervals <= 0) grid.num_intervals = max_interval(records);
    grid.validate();
    std::set<OdPair> pairs;
    for (const auto& r : records) {
        const auto o = net.find_zone(r.origin);
        const auto d = net.find_zone(r.dest);
        if (!o || !d) {
            throw DataError(path.string() + ": unknown zone " + std::to_string(!o ? r.origin : r.dest));
        }
        if (r.interval > grid.num_intervals) throw DataError(path.string() + ": interval beyond the time grid");
        pairs.insert({*o, *d});
    }
    ODMatrixSeries m(grid, {pairs.begin(), pairs.end()});
    std::vector<char> seen(m.num_columns(), 0);
    for (const auto& r : records) {
        const auto i = *m.find_pair({*net.find_zone(r.origin), *net.find_zone(r.dest)});
        const auto c = m.column(i, r.interval - 1);
        if (seen[c]) throw DataError(path.string() + ": duplicate demand row");
        seen[c] = 1;
        m.set(i, r.interval - 1, r.trips);
    }
    return m;
}

inline csv::Writer demand_writer(const ODMatrixSeries& m, std::span<const long long> zone_ids,
                                 const std::string& value_column = "trips", int interval_offset = 0) {
    csv::Writer w({"origin_zone", "dest_zone", "interval", value_column});
    for (std::size_t i = 0; i < m.num_pairs(); ++i) {
        for (int t = 0; t < m.num_intervals(); ++t) {
            w.row(zone_ids[m.pairs()[i].origin], zone_ids[m.pairs()[i].dest], t + 1 + interval_offset, m.at(i, t));
        }
    }
    return w;
}

inline std::vector<long long> zone_ids(const Network& net) {
    std::vector<long long> ids;
    for (const auto& z : net.zones()) ids.push_back(z.id);
    return ids;
}

inline LinkCountSeries read_counts(const std::filesystem::path& path, const Network& net, const TimeGrid& grid) {
    const auto table = csv::read_file(path, {"link_id", "interval", "count_veh"});
    std::vector<LinkCount> entries;
    for (const auto& row : table.rows) {
        const auto id = csv::to_int(row, 0, table.source);
        const auto l = net.find_link(id);
        if (!l) throw ParseError(table.source, row.line, "unknown link id " + std::to_string(id));
        const auto h = csv::to_int(row, 1, table.source);
        if (h < 1 || h > grid.num_intervals) throw ParseError(table.source, row.line, "interval out of range");
        entries.push_back({*l, static_cast<int>(h - 1), csv::to_double(row, 2, table.source)});
    }
    return LinkCountSeries(std::move(entries));
}

inline csv::Writer counts_writer(const LinkCountSeries& counts, const Network& net) {
    csv::Writer w({"link_id", "interval", "count_veh"});
    for (const auto& e : counts.entries()) w.row(net.link(e.link).id, e.interval + 1, e.count);
    return w;
}

inline csv::Writer flows_writer(const SimulationResult& sim, const Network& net) {
    csv::Writer w({"link_id", "interval", "flow_veh"});
    for (LinkIndex l = 0; l < net.num_links(); ++l) {
        for (int h = 0; h < sim.grid.num_intervals; ++h) w.row(net.link(l).id, h + 1, sim.flow(l, h));
    }
    return w;
}

inline csv::Writer proportions_writer(const SimulationResult& sim, const ODMatrixSeries& demand, const Network& net) {
    csv::Writer w({"link_id", "od_origin", "od_dest", "interval_h", "interval_t", "proportion"});
    for (const auto& e : sim.proportions.entries()) {
        const auto od = demand.pairs()[demand.pair_of(e.column)];
        w.row(net.link(e.link).id, net.zones()[od.origin].id, net.zones()[od.dest].id, e.crossing + 1,
              demand.interval_of(e.column) + 1, e.value);
    }
    return w;
}

inline csv::Writer trace_writer(const EstimationResult& est) {
    csv::Writer w({"iteration", "objective", "r_squared"});
    for (const auto& r : est.trace) w.row(r.iteration, r.objective, r.r_squared);
    return w;
}

/// Observed versus simulated counts before (prior) and after estimation.
inline csv::Writer scatter_writer(const EstimationResult& est, const LinkCountSeries& counts, const Network& net) {
    csv::Writer w({"link_id", "interval", "observed", "simulated_before", "simulated_after"});
    for (const auto& e : counts.entries()) {
        w.row(net.link(e.link).id, e.interval + 1, e.count, est.initial_simulation.flow(e.link, e.interval),
              est.final_simulation.flow(e.link, e.interval));
    }
    return w;
}

inline csv::Writer selection_writer(const forecast::SelectionReport& report) {
    csv::Writer w({"spec", "nrmse", "r_squared"});
    for (const auto& r : report.rows) w.row(r.label, r.nrmse, r.r_squared);
    return w;
}

inline csv::Writer incident_writer(std::span<const incident::ComparisonRow> rows) {
    csv::Writer w({"scenario", "duration_s", "capacity_factor", "avg_delay_s", "delay_ratio_vs_baseline",
                   "min_throughput_vph"});
    for (const auto& r : rows) {
        w.row(r.scenario, r.duration_s, r.capacity_factor, r.avg_delay_s, r.delay_ratio_vs_baseline,
              r.min_throughput_vph);
    }
    return w;
}

inline void write_network(const Network& net, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    csv::Writer nodes({"node_id", "x", "y"});
    for (const auto& n : net.nodes()) nodes.row(n.id, n.x, n.y);
    nodes.save(dir / "nodes.csv");
    csv::Writer links({"link_id", "from_node", "to_node", "free_flow_time_s", "capacity_vph", "lanes"});
    for (const auto& l : net.links()) {
        links.row(l.id, net.nodes()[l.from].id, net.nodes()[l.to].id, l.free_flow_time, l.capacity, l.lanes);
    }
    links.save(dir / "links.csv");
    csv::Writer zones({"zone_id", "node_id"});
    for (const auto& z : net.zones()) zones.row(z.id, net.nodes()[z.node].id);
    zones.save(dir / "zones.csv");
}

/// Flat "key = value" text; '#' starts a comment.
inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("file not found: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = csv::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find_first_of("=:");
        // "start_time = 09:57" contains ':' after '='; split on the first '=' when present
        const auto split = body.find('=') != std::string_view::npos ? body.find('=') : eq;
        if (split == std::string_view::npos) throw ParseError(path.string(), lineno, "expected key = value");
        kv[std::string(csv::trim(body.substr(0, split)))] = std::string(csv::trim(body.substr(split + 1)));
    }
    return kv;
}

inline std::vector<long long> parse_id_list(const std::string& text) {
    std::vector<long long> ids;
    std::string token;
    for (char ch : text + ",") {
        if (ch == ',' || ch == ';' || ch == ' ') {
            if (!token.empty()) {
                try {
                    std::size_t used = 0;
                    ids.push_back(std::stoll(token, &used));
                    if (used != token.size()) throw std::invalid_argument(token);
                } catch (const std::exception&) {
                    throw ConfigError("bad id '" + token + "'");
                }
                token.clear();
            }
        } else {
            token += ch;
        }
    }
    return ids;
}

/// Scenario file keys: link_ids, start_time (HH:MM), duration_s, capacity_factor, lanes_blocked.
inline incident::IncidentScenario read_scenario(const std::filesystem::path& path) {
    const auto kv = read_key_values(path);
    auto need = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(path.string() + ": missing key '" + key + "'");
        return it->second;
    };
    incident::IncidentScenario s;
    s.name = path.stem().string();
    s.link_ids = parse_id_list(need("link_ids"));
    s.start_time = parse_clock(need("start_time"));
    try {
        s.duration = std::stod(need("duration_s"));
        s.capacity_factor = kv.count("capacity_factor") ? std::stod(kv.at("capacity_factor")) : 1.0;
        s.lanes_blocked = kv.count("lanes_blocked") ? std::stoi(kv.at("lanes_blocked")) : 0;
    } catch (const std::invalid_argument&) {
        throw ConfigError(path.string() + ": non-numeric scenario value");
    }
    return s;
}

/// Groups demand records into one series per OD pair, zone ids mapped onto
/// sorted dense indices. Missing intervals are zero.
struct Fleet {
    std::vector<long long> zone_ids;
    std::vector<forecast::DemandSeries> series;
    int num_intervals{0};
};

inline Fleet fleet_from_records(const std::vector<DemandRecord>& records, double interval_length) {
    Fleet f;
    std::set<long long> zones;
    for (const auto& r : records) {
        zones.insert(r.origin);
        zones.insert(r.dest);
    }
    f.zone_ids.assign(zones.begin(), zones.end());
    auto index = [&](long long id) {
        return static_cast<ZoneIndex>(std::lower_bound(f.zone_ids.begin(), f.zone_ids.end(), id) - f.zone_ids.begin());
    };
    f.num_intervals = max_interval(records);
    std::map<OdPair, std::size_t> slot;
    for (const auto& r : records) {
        const OdPair od{index(r.origin), index(r.dest)};
        auto [it, fresh] = slot.emplace(od, 0);
        if (fresh) {
            it->second = f.series.size();
            f.series.push_back({od, std::vector<double>(static_cast<std::size_t>(f.num_intervals), 0.0), interval_length});
        }
    }
    // series in OD order
    std::vector<forecast::DemandSeries> ordered;
    for (auto& [od, k] : slot) {
        ordered.push_back(std::move(f.series[k]));
        k = ordered.size() - 1;
    }
    f.series = std::move(ordered);
    for (const auto& r : records) {
        f.series[slot.at({index(r.origin), index(r.dest)})].values[static_cast<std::size_t>(r.interval - 1)] = r.trips;
    }
    return f;
}

inline Fleet fleet_from_demand(const ODMatrixSeries& m, const Network& net) {
    Fleet f;
    f.zone_ids = zone_ids(net);
    f.num_intervals = m.num_intervals();
    for (std::size_t i = 0; i < m.num_pairs(); ++i) {
        f.series.push_back({m.pairs()[i], m.series(i), m.grid().interval_length});
    }
    return f;
}

}  // namespace tripcast::io

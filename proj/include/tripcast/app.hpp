/// @file  app.hpp
/// @brief The `tripcast` command-line driver: simulate, estimate, forecast,
///        incident, synth and pipeline subcommands.
///
/// Every option may also be given in a flat `key = value` file passed with
/// `--config`; flags on the command line win over file values.

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "forecast.hpp"
#include "incident.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "simulator.hpp"
#include "synth.hpp"

namespace tripcast::app {

inline constexpr const char* kVersion = "tripcast 0.1.0";

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string out{"out"};

    std::string network_dir{"."};
    std::string nodes, links, zones;

    std::string start{"06:00"};
    double interval_s{900.0};
    int intervals{0};  // 0: infer from the demand file

    int max_iterations{50};
    double gap_tolerance{1e-3};
    double time_step{5.0};
    double clearance{0.0};

    std::string demand;
    bool dump_proportions{false};

    std::string prior;
    std::string counts;
    double omega{0.9};
    int max_outer{20};
    double r2_tolerance{1e-3};
    int max_gradient_steps{1000};
    double step_tolerance{1e-6};

    std::string spec{"1,0,0"};
    int steps{2};
    bool select{false};
    std::string candidates{"1,0,0;1,1,0;0,0,1;0,1,1"};
    int validation{2};

    std::string scenario;
    std::string incident_links;
    std::string incident_start;  // empty: start of the demand grid
    double duration_s{600.0};
    double capacity_factor{1.0 / 3.0};
    int lanes_blocked{0};
    std::string durations_min;  // sweep, e.g. "3,5,7,10"
    long long watched_link{0};  // 0: first incident link
    double incident_clearance{3600.0};

    unsigned long long seed{42};
    double noise{0.3};
    int od_pairs{3000};
    int fleet_length{16};
};

/// Remembers registered options so the report can echo the effective config.
class Registry {
public:
    explicit Registry(CLI::App* sub) : sub_(sub) {}

    template <class T>
    void add(const std::string& name, T& var, const std::string& help) {
        auto* o = sub_->add_option("--" + name, var, help);
        o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        echo_.emplace_back(name, [&var] { return show(var); });
    }

    void flag(const std::string& name, bool& var, const std::string& help) {
        sub_->add_flag("--" + name, var, help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        echo_.emplace_back(name, [&var] { return show(var); });
    }

    [[nodiscard]] std::string echo() const {
        std::string s;
        for (const auto& [k, f] : echo_) s += k + " = " + f() + "\n";
        return s;
    }

private:
    static std::string show(const std::string& v) { return v; }
    static std::string show(bool v) { return v ? "true" : "false"; }
    static std::string show(double v) { return csv::fmt(v); }
    template <class I>
    static std::string show(I v) { return std::to_string(v); }

    CLI::App* sub_;
    std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

/// Streams and the report under construction for one run.
struct Context {
    std::ostream& out;
    std::ostream& err;
    const Options& opt;
    std::string command;
    std::string config_echo;
    std::ostringstream report;

    void timing(const std::string& stage, std::chrono::steady_clock::time_point since) const {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - since;
        err << "timing " << stage << " " << csv::fmt(dt.count()) << " s\n";
    }

    [[nodiscard]] fs::path out_dir() const {
        fs::create_directories(opt.out);
        return opt.out;
    }

    void save_report() {
        std::ofstream f(out_dir() / "report.txt", std::ios::binary);
        f << kVersion << "\ncommand: " << command << "\n\n[config]\n" << config_echo << "\n" << report.str();
        if (!f) throw DataError("cannot write report.txt");
    }
};

inline Network load_net(const Options& o) {
    const fs::path dir(o.network_dir);
    return load_network(o.nodes.empty() ? dir / "nodes.csv" : fs::path(o.nodes),
                        o.links.empty() ? dir / "links.csv" : fs::path(o.links),
                        o.zones.empty() ? dir / "zones.csv" : fs::path(o.zones));
}

inline TimeGrid grid_of(const Options& o) {
    TimeGrid g{io::parse_clock(o.start), o.interval_s, o.intervals};
    if (!(g.interval_length > 0.0)) throw ConfigError("interval-s must be positive");
    if (g.num_intervals < 0) throw ConfigError("intervals must be >= 0");
    return g;
}

inline SimulationConfig sim_config(const Options& o, double clearance) {
    SimulationConfig c;
    c.max_iterations = o.max_iterations;
    c.gap_tolerance = o.gap_tolerance;
    c.time_step = o.time_step;
    c.clearance = clearance;
    return c;
}

inline EstimationConfig est_config(const Options& o) {
    EstimationConfig c;
    c.omega = o.omega;
    c.max_outer_iterations = o.max_outer;
    c.r2_variation_tolerance = o.r2_tolerance;
    c.inner.max_gradient_steps = o.max_gradient_steps;
    c.inner.step_tolerance = o.step_tolerance;
    c.simulation = sim_config(o, o.clearance);
    c.validate();
    return c;
}

inline std::string need(const std::string& value, const std::string& name) {
    if (value.empty()) throw ConfigError("missing required option --" + name);
    return value;
}

inline void report_fit(std::ostream& r, const std::string& label, const metrics::FitReport& f) {
    r << label << ": r_squared = " << csv::fmt(f.r_squared) << ", nrmse = " << csv::fmt(f.nrmse)
      << ", rmse = " << csv::fmt(f.rmse) << ", points = " << f.n_points << "\n";
}

inline void report_simulation(std::ostream& r, const SimulationResult& sim) {
    r << "msa_iterations = " << sim.iterations << "\nrelative_gap = " << csv::fmt(sim.relative_gap)
      << "\nvehicles_entered = " << csv::fmt(sim.vehicles_entered)
      << "\nvehicles_unfinished = " << csv::fmt(sim.vehicles_unfinished)
      << "\ntotal_travel_time_veh_s = " << csv::fmt(sim.total_travel_time)
      << "\ntotal_delay_veh_s = " << csv::fmt(sim.total_delay)
      << "\naverage_delay_s = " << csv::fmt(sim.average_delay()) << "\n";
}

// ---------------------------------------------------------------- stages

inline EstimationResult run_estimation(Context& ctx, const Network& net, const ODMatrixSeries& prior,
                                       const LinkCountSeries& counts) {
    const auto cfg = est_config(ctx.opt);
    const auto t0 = std::chrono::steady_clock::now();
    auto est = bilevel_estimate(net, prior, counts, cfg);
    ctx.timing("estimate", t0);

    const auto dir = ctx.out_dir();
    io::demand_writer(est.estimated_demand, io::zone_ids(net)).save(dir / "estimated_demand.csv");
    io::trace_writer(est).save(dir / "convergence_trace.csv");
    io::scatter_writer(est, counts, net).save(dir / "scatter.csv");

    auto& r = ctx.report;
    r << "[estimation]\nouter_iterations = " << est.trace.size() << "\nbest_iteration = " << est.best_iteration
      << "\nfirst_objective = " << csv::fmt(est.trace.front().objective)
      << "\nfinal_objective = " << csv::fmt(est.final_objective)
      << "\ngridlock = " << (est.gridlock ? "true" : "false")
      << "\nnon_unique = " << (est.non_unique ? "true" : "false") << "\n";
    const auto observed = counts.observed();
    report_fit(r, "fit_before", metrics::fit_report(observed, counts.simulated(est.initial_simulation)));
    report_fit(r, "fit_after", metrics::fit_report(observed, counts.simulated(est.final_simulation)));
    r << "trace (iteration, objective, r_squared):\n";
    for (const auto& t : est.trace) {
        r << "  " << t.iteration << " " << csv::fmt(t.objective) << " " << csv::fmt(t.r_squared) << "\n";
    }
    r << "\n";
    if (est.gridlock) ctx.err << "warning: gridlock flagged during estimation\n";
    return est;
}

inline std::vector<forecast::ArimaSpec> parse_candidates(const std::string& text) {
    std::vector<forecast::ArimaSpec> out;
    std::string token;
    for (char ch : text + ";") {
        if (ch == ';') {
            const auto t = csv::trim(token);
            if (!t.empty()) out.push_back(forecast::ArimaSpec::parse(std::string(t)));
            token.clear();
        } else {
            token += ch;
        }
    }
    if (out.empty()) throw ConfigError("no candidate specifications given");
    return out;
}

/// Writes forecast.csv (and selection_report.csv with --select); returns the
/// predictions per series.
inline std::vector<std::vector<double>> run_forecast(Context& ctx, const io::Fleet& fleet) {
    const auto& o = ctx.opt;
    if (o.steps < 1) throw ConfigError("steps must be >= 1");
    const auto dir = ctx.out_dir();
    const auto t0 = std::chrono::steady_clock::now();
    auto& r = ctx.report;
    r << "[forecast]\nseries = " << fleet.series.size() << "\nhistory_intervals = " << fleet.num_intervals << "\n";

    std::optional<forecast::ArimaSpec> chosen = forecast::ArimaSpec::parse(o.spec);
    if (o.select) {
        const auto candidates = parse_candidates(o.candidates);
        const auto report = forecast::select_model(fleet.series, candidates, o.validation);
        io::selection_writer(report).save(dir / "selection_report.csv");
        r << "selection (spec, nrmse, r_squared, fallbacks):\n";
        for (const auto& row : report.rows) {
            r << "  " << row.label << " " << csv::fmt(row.nrmse) << " " << csv::fmt(row.r_squared) << " "
              << row.fallbacks << "\n";
        }
        r << "winner = " << report.best().label << "\nimproves_on_naive = "
          << (report.improves_on_naive ? "true" : "false") << "\n";
        chosen = report.improves_on_naive ? report.best().spec : std::nullopt;
    }
    r << "forecast_model = " << (chosen ? chosen->to_string() : std::string("naive")) << "\nsteps = " << o.steps
      << "\n";

    std::vector<std::vector<double>> predictions;
    std::size_t fallbacks = 0;
    if (chosen) {
        const auto fits = forecast::fit_fleet(fleet.series, *chosen);
        for (std::size_t k = 0; k < fits.size(); ++k) {
            fallbacks += !fits[k].model.has_value();
            predictions.push_back(forecast::forecast_or_naive(fits[k], fleet.series[k].values, o.steps));
        }
    } else {
        for (const auto& s : fleet.series) predictions.push_back(forecast::naive_forecast(s.values, o.steps));
    }
    r << "naive_fallbacks = " << fallbacks << "\n\n";

    csv::Writer w({"origin_zone", "dest_zone", "interval", "predicted_trips"});
    for (std::size_t k = 0; k < fleet.series.size(); ++k) {
        const auto od = fleet.series[k].od;
        for (int s = 0; s < o.steps; ++s) {
            w.row(fleet.zone_ids[od.origin], fleet.zone_ids[od.dest], fleet.num_intervals + s + 1,
                  predictions[k][static_cast<std::size_t>(s)]);
        }
    }
    w.save(dir / "forecast.csv");
    ctx.timing("forecast", t0);
    return predictions;
}

inline std::vector<double> parse_durations_min(const std::string& text) {
    std::vector<double> out;
    std::string token;
    for (char ch : text + ",") {
        if (ch == ',' || ch == ';') {
            const auto t = csv::trim(token);
            if (!t.empty()) {
                try {
                    std::size_t used = 0;
                    out.push_back(std::stod(std::string(t), &used) * 60.0);
                    if (used != t.size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    throw ConfigError("bad duration '" + std::string(t) + "'");
                }
            }
            token.clear();
        } else {
            token += ch;
        }
    }
    return out;
}

inline incident::IncidentScenario scenario_of(const Options& o, const TimeGrid& grid) {
    if (!o.scenario.empty()) return io::read_scenario(o.scenario);
    incident::IncidentScenario s;
    s.name = "incident";
    s.link_ids = io::parse_id_list(need(o.incident_links, "incident-links"));
    s.start_time = o.incident_start.empty() ? grid.start : io::parse_clock(o.incident_start);
    s.duration = o.duration_s;
    s.capacity_factor = o.capacity_factor;
    s.lanes_blocked = o.lanes_blocked;
    return s;
}

inline void run_incident(Context& ctx, const Network& net, const ODMatrixSeries& demand, double clearance) {
    const auto& o = ctx.opt;
    const auto scenario = scenario_of(o, demand.grid());
    const long long watched = o.watched_link != 0 ? o.watched_link : scenario.link_ids.front();
    const auto cfg = sim_config(o, clearance);
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<incident::ComparisonRow> rows;
    if (!o.durations_min.empty()) {
        const auto durations = parse_durations_min(o.durations_min);
        rows = incident::duration_sweep(net, demand, scenario, durations, watched, cfg);
    } else {
        const std::vector<incident::IncidentScenario> one{scenario};
        const auto outcomes = incident::run_incident_analysis(net, demand, one, watched, cfg);
        rows = incident::comparison_table(outcomes);
    }
    ctx.timing("incident", t0);
    io::incident_writer(rows).save(ctx.out_dir() / "incident_report.csv");

    auto& r = ctx.report;
    r << "[incident]\nlinks =";
    for (auto id : scenario.link_ids) r << " " << id;
    r << "\nstart = " << io::format_clock(scenario.start_time) << "\nwatched_link = " << watched
      << "\nclearance_s = " << csv::fmt(clearance) << "\n"
      << "table (scenario, duration_s, capacity_factor, avg_delay_s, delay_ratio, min_throughput_vph, gridlocked):\n";
    for (const auto& row : rows) {
        r << "  " << row.scenario << " " << csv::fmt(row.duration_s) << " " << csv::fmt(row.capacity_factor) << " "
          << csv::fmt(row.avg_delay_s) << " " << csv::fmt(row.delay_ratio_vs_baseline) << " "
          << csv::fmt(row.min_throughput_vph) << " " << (row.gridlocked ? "true" : "false") << "\n";
        if (row.gridlocked) ctx.err << "warning: scenario " << row.scenario << " is gridlocked\n";
    }
    r << "\n";
}

// ---------------------------------------------------------------- commands

inline void cmd_simulate(Context& ctx) {
    const auto& o = ctx.opt;
    const auto net = load_net(o);
    const auto demand = io::read_demand(need(o.demand, "demand"), net, grid_of(o));
    const auto t0 = std::chrono::steady_clock::now();
    const auto sim = assign(net, demand, sim_config(o, o.clearance));
    ctx.timing("simulate", t0);
    const auto dir = ctx.out_dir();
    io::flows_writer(sim, net).save(dir / "flows.csv");
    if (o.dump_proportions) io::proportions_writer(sim, demand, net).save(dir / "proportions.csv");
    ctx.report << "[simulation]\n";
    report_simulation(ctx.report, sim);
    ctx.report << "\n";
    if (sim.horizon_overflow()) ctx.err << "warning: vehicles still in the network at the end of the horizon\n";
}

inline void cmd_estimate(Context& ctx) {
    const auto& o = ctx.opt;
    const auto net = load_net(o);
    const auto prior = io::read_demand(need(o.prior, "prior"), net, grid_of(o));
    const auto counts = io::read_counts(need(o.counts, "counts"), net, prior.grid());
    run_estimation(ctx, net, prior, counts);
}

inline void cmd_forecast(Context& ctx) {
    const auto records = io::read_demand_records(need(ctx.opt.demand, "demand"));
    run_forecast(ctx, io::fleet_from_records(records, ctx.opt.interval_s));
}

inline void cmd_incident(Context& ctx) {
    const auto& o = ctx.opt;
    const auto net = load_net(o);
    const auto demand = io::read_demand(need(o.demand, "demand"), net, grid_of(o));
    run_incident(ctx, net, demand, o.incident_clearance);
}

inline void cmd_pipeline(Context& ctx) {
    const auto& o = ctx.opt;
    const auto net = load_net(o);
    const auto prior = io::read_demand(need(o.prior, "prior"), net, grid_of(o));
    const auto counts = io::read_counts(need(o.counts, "counts"), net, prior.grid());
    const auto est = run_estimation(ctx, net, prior, counts);

    const auto fleet = io::fleet_from_demand(est.estimated_demand, net);
    const auto predictions = run_forecast(ctx, fleet);

    const TimeGrid next{prior.grid().end(), prior.grid().interval_length, o.steps};
    ODMatrixSeries future(next, est.estimated_demand.pairs());
    for (std::size_t i = 0; i < future.num_pairs(); ++i) {
        for (int t = 0; t < o.steps; ++t) future.set(i, t, predictions[i][static_cast<std::size_t>(t)]);
    }
    run_incident(ctx, net, future, o.incident_clearance);
}

inline void cmd_synth(Context& ctx) {
    const auto& o = ctx.opt;
    if (o.od_pairs < 1) throw ConfigError("od-pairs must be >= 1");
    if (o.fleet_length < 2) throw ConfigError("fleet-length must be >= 2");
    const auto dir = ctx.out_dir();
    TimeGrid grid = grid_of(o);
    if (grid.num_intervals == 0) grid.num_intervals = 16;
    const auto t0 = std::chrono::steady_clock::now();

    const auto fx = synth::recovery_fixture(o.seed, o.noise, grid, sim_config(o, o.clearance));
    io::write_network(fx.network, dir);
    const auto zones = io::zone_ids(fx.network);
    io::demand_writer(fx.truth, zones).save(dir / "truth_demand.csv");
    io::demand_writer(fx.prior, zones).save(dir / "prior_demand.csv");
    io::counts_writer(fx.counts, fx.network).save(dir / "counts.csv");

    const auto fleet = synth::ar1_fleet(static_cast<std::size_t>(o.od_pairs), static_cast<std::size_t>(o.fleet_length),
                                        o.seed, {}, grid.interval_length);
    csv::Writer fw({"origin_zone", "dest_zone", "interval", "trips"});
    for (const auto& s : fleet) {
        for (std::size_t t = 0; t < s.values.size(); ++t) fw.row(s.od.origin + 1, s.od.dest + 1, t + 1, s.values[t]);
    }
    fw.save(dir / "fleet.csv");

    const auto bn = synth::bottleneck_fixture();
    const auto bdir = dir / "bottleneck";
    fs::create_directories(bdir);
    io::write_network(bn.network, bdir);
    io::demand_writer(bn.demand, io::zone_ids(bn.network)).save(bdir / "demand.csv");
    {
        std::ofstream s(bdir / "scenario.txt", std::ios::binary);
        s << "link_ids = 2\nstart_time = " << io::format_clock(bn.scenario.start_time)
          << "\nduration_s = " << csv::fmt(bn.scenario.duration)
          << "\ncapacity_factor = " << csv::fmt(bn.scenario.capacity_factor)
          << "\nlanes_blocked = " << bn.scenario.lanes_blocked << "\n";
    }
    // the incident goes on the link busiest in the last observed interval
    long long busiest = fx.network.link(0).id;
    double most = -1.0;
    for (const auto& e : fx.counts.entries()) {
        if (e.interval == grid.num_intervals - 1 && e.count > most) {
            most = e.count;
            busiest = fx.network.link(e.link).id;
        }
    }
    {
        // ready-made config for `tripcast pipeline --config <dir>/pipeline.cfg`
        std::ofstream c(dir / "pipeline.cfg", std::ios::binary);
        const auto abs = fs::absolute(dir).lexically_normal().string();
        c << "network-dir = " << abs << "\nprior = " << abs << "/prior_demand.csv\ncounts = " << abs
          << "/counts.csv\nstart = " << o.start << "\ninterval-s = " << csv::fmt(grid.interval_length)
          << "\nincident-links = " << busiest << "\nwatched-link = " << busiest << "\ndurations-min = 3,5,7,10\n";
    }
    ctx.timing("synth", t0);
    ctx.report << "[synth]\nlinks = " << fx.network.num_links() << "\nod_pairs = " << fx.truth.num_pairs()
               << "\nintervals = " << grid.num_intervals << "\ncounts = " << fx.counts.size()
               << "\nfleet_series = " << fleet.size() << "\n\n";
}

// ---------------------------------------------------------------- entry point

/// Reads `--config FILE` (or `--config=FILE`) from @p args.
inline std::string find_config(const std::vector<std::string>& args) {
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
    }
    return {};
}

inline int exit_code_for(const std::exception& ex) {
    if (dynamic_cast<const ConfigError*>(&ex)) return 1;
    if (dynamic_cast<const DataError*>(&ex)) return 2;
    if (dynamic_cast<const NumericalError*>(&ex)) return 3;
    return 2;
}

/// Runs the tool on @p args (without the program name).
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Options o;
    CLI::App app{"Dynamic OD estimation, demand forecasting and incident analysis", "tripcast"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    struct Sub {
        CLI::App* app;
        Registry reg;
        void (*fn)(Context&);
    };
    std::vector<Sub> subs;
    subs.reserve(8);
    auto make = [&](const std::string& name, const std::string& help, void (*fn)(Context&)) -> Sub& {
        auto* s = app.add_subcommand(name, help);
        s->add_option("--config", o.config, "flat key = value file; flags override it");
        subs.push_back({s, Registry(s), fn});
        auto& sub = subs.back();
        sub.app->add_option("--out", o.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        return sub;
    };
    auto network = [&](Registry& r) {
        r.add("network-dir", o.network_dir, "directory holding nodes.csv, links.csv, zones.csv");
        r.add("nodes", o.nodes, "nodes file");
        r.add("links", o.links, "links file");
        r.add("zones", o.zones, "zones file");
        r.add("start", o.start, "start of the first interval, HH:MM");
        r.add("interval-s", o.interval_s, "interval length in seconds");
        r.add("intervals", o.intervals, "number of intervals (0: from the demand file)");
    };
    auto simulation = [&](Registry& r) {
        r.add("max-iterations", o.max_iterations, "MSA iteration cap");
        r.add("gap-tolerance", o.gap_tolerance, "relative-gap convergence tolerance");
        r.add("time-step", o.time_step, "loading time step in seconds");
        r.add("clearance", o.clearance, "seconds simulated past the last interval");
    };
    auto estimation = [&](Registry& r) {
        r.add("prior", o.prior, "prior demand CSV");
        r.add("counts", o.counts, "link counts CSV");
        r.add("omega", o.omega, "weight on the prior term, in [0, 1]");
        r.add("max-outer", o.max_outer, "outer iteration cap");
        r.add("r2-tolerance", o.r2_tolerance, "stop when R2 changes by less than this");
        r.add("max-gradient-steps", o.max_gradient_steps, "upper-level gradient step cap");
        r.add("step-tolerance", o.step_tolerance, "upper-level projected step tolerance");
    };
    auto forecasting = [&](Registry& r) {
        r.add("spec", o.spec, "ARIMA order p,d,q");
        r.add("steps", o.steps, "intervals to forecast");
        r.flag("select", o.select, "compare candidates against naive and forecast with the winner");
        r.add("candidates", o.candidates, "candidate specs separated by ';'");
        r.add("validation", o.validation, "validation intervals for --select");
    };
    auto incidents = [&](Registry& r) {
        r.add("scenario", o.scenario, "scenario file (link_ids, start_time, duration_s, ...)");
        r.add("incident-links", o.incident_links, "affected link ids, comma separated");
        r.add("incident-start", o.incident_start, "incident start, HH:MM");
        r.add("duration-s", o.duration_s, "incident duration in seconds");
        r.add("capacity-factor", o.capacity_factor, "remaining capacity share during the incident");
        r.add("lanes-blocked", o.lanes_blocked, "lanes blocked (informational)");
        r.add("durations-min", o.durations_min, "duration sweep in minutes, e.g. 3,5,7,10");
        r.add("watched-link", o.watched_link, "link whose throughput is reported");
        r.add("incident-clearance", o.incident_clearance, "seconds simulated past the last interval");
    };

    {
        auto& s = make("simulate", "assign demand and write link flows", cmd_simulate);
        network(s.reg);
        simulation(s.reg);
        s.reg.add("demand", o.demand, "demand CSV");
        s.reg.flag("dump-proportions", o.dump_proportions, "also write proportions.csv");
    }
    {
        auto& s = make("estimate", "estimate dynamic OD demand from link counts", cmd_estimate);
        network(s.reg);
        simulation(s.reg);
        estimation(s.reg);
    }
    {
        auto& s = make("forecast", "forecast OD demand series", cmd_forecast);
        s.reg.add("demand", o.demand, "demand history CSV");
        s.reg.add("interval-s", o.interval_s, "interval length in seconds");
        forecasting(s.reg);
    }
    {
        auto& s = make("incident", "compare incident scenarios against a baseline", cmd_incident);
        network(s.reg);
        simulation(s.reg);
        s.reg.add("demand", o.demand, "demand CSV");
        incidents(s.reg);
    }
    {
        auto& s = make("synth", "generate the synthetic fixtures", cmd_synth);
        s.reg.add("seed", o.seed, "random seed");
        s.reg.add("noise", o.noise, "multiplicative prior noise");
        s.reg.add("od-pairs", o.od_pairs, "AR(1) fleet size");
        s.reg.add("fleet-length", o.fleet_length, "AR(1) series length");
        s.reg.add("start", o.start, "start of the first interval, HH:MM");
        s.reg.add("interval-s", o.interval_s, "interval length in seconds");
        s.reg.add("intervals", o.intervals, "number of intervals (0: 16)");
        simulation(s.reg);
    }
    {
        auto& s = make("pipeline", "estimate, forecast and run the incident sweep", cmd_pipeline);
        network(s.reg);
        simulation(s.reg);
        estimation(s.reg);
        forecasting(s.reg);
        incidents(s.reg);
    }

    try {
        // config values go first so that explicit flags, parsed later, win
        if (const auto cfg = find_config(args); !cfg.empty() && !args.empty()) {
            std::vector<std::string> injected;
            for (const auto& [k, v] : io::read_key_values(cfg)) injected.push_back("--" + k + "=" + v);
            args.insert(args.begin() + 1, injected.begin(), injected.end());
        }
        std::vector<const char*> argv{"tripcast"};
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::Success& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << "\n";
            return 1;
        }
        for (auto& s : subs) {
            if (!s.app->parsed()) continue;
            Context ctx{out, err, o, s.app->get_name(), s.reg.echo(), {}};
            s.fn(ctx);
            ctx.save_report();
            out << "wrote " << o.out << "\n";
        }
        return 0;
    } catch (const ParseError& ex) {
        err << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return exit_code_for(ex);
    }
}

}  // namespace tripcast::app

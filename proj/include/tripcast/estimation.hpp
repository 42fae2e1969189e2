/// @file  estimation.hpp
/// @brief Bi-level OD demand estimation from link counts.
///
/// Upper level: for fixed assignment proportions P,
///
///     min_x  w * ||x - x_prior||^2 + (1 - w) * ||P x - y_obs||^2   s.t. x >= 0,
///
/// solved by projected gradient with Armijo backtracking. Lower level: the
/// simulator maps x to link flows and a fresh P. The outer loop alternates the
/// two until the link-flow R-squared stops changing.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "simulator.hpp"

namespace tripcast {

struct LinkCount {
    LinkIndex link{};
    int interval{};  // h, 0-based
    double count{};

    friend bool operator==(const LinkCount&, const LinkCount&) = default;
};

/// Observed link counts; only the (link, interval) entries present are observed.
class LinkCountSeries {
public:
    LinkCountSeries() = default;

    explicit LinkCountSeries(std::vector<LinkCount> entries) : entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(), [](const LinkCount& a, const LinkCount& b) {
            return std::tie(a.link, a.interval) < std::tie(b.link, b.interval);
        });
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            const auto& e = entries_[k];
            if (!(e.count >= 0.0) || !std::isfinite(e.count)) throw DataError("link counts must be finite and >= 0");
            if (e.interval < 0) throw DataError("count interval out of range");
            if (k > 0 && entries_[k - 1].link == e.link && entries_[k - 1].interval == e.interval) {
                throw DataError("duplicate count for one link and interval");
            }
        }
    }

    [[nodiscard]] std::span<const LinkCount> entries() const { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

    /// Number of distinct observed links (N).
    [[nodiscard]] std::size_t num_observed_links() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < entries_.size(); ++k) n += (k == 0 || entries_[k].link != entries_[k - 1].link);
        return n;
    }

    [[nodiscard]] std::vector<double> observed() const {
        std::vector<double> v;
        v.reserve(entries_.size());
        for (const auto& e : entries_) v.push_back(e.count);
        return v;
    }

    /// Simulated flows at the observed entries.
    [[nodiscard]] std::vector<double> simulated(const SimulationResult& sim) const {
        std::vector<double> v;
        v.reserve(entries_.size());
        for (const auto& e : entries_) v.push_back(sim.flow(e.link, e.interval));
        return v;
    }

    void validate(const Network& net, const TimeGrid& grid) const {
        for (const auto& e : entries_) {
            if (e.link >= net.num_links()) throw DataError("count references a link outside the network");
            if (e.interval >= grid.num_intervals) throw DataError("count interval beyond the time grid");
        }
    }

    friend bool operator==(const LinkCountSeries&, const LinkCountSeries&) = default;

private:
    std::vector<LinkCount> entries_;
};

struct UpperLevelConfig {
    int max_gradient_steps{1000};
    double step_tolerance{1e-6};  // on the 2-norm of the projected gradient step
};

struct EstimationConfig {
    double omega{0.9};
    int max_outer_iterations{20};
    double r2_variation_tolerance{1e-3};
    UpperLevelConfig inner{};
    SimulationConfig simulation{};
    metrics::R2Mean r2_mode{metrics::R2Mean::Simulated};
    double gridlock_share{0.10};

    void validate() const {
        if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("omega must lie in [0, 1]");
        if (max_outer_iterations < 1) throw ConfigError("max_outer_iterations must be >= 1");
        if (!(r2_variation_tolerance > 0.0)) throw ConfigError("r2_variation_tolerance must be > 0");
        if (inner.max_gradient_steps < 0) throw ConfigError("max_gradient_steps must be >= 0");
        if (!(inner.step_tolerance >= 0.0)) throw ConfigError("step_tolerance must be >= 0");
    }
};

namespace detail {

inline void check_dimensions(std::span<const double> x, std::span<const double> prior, const AssignmentProportions& p,
                             const LinkCountSeries& counts) {
    if (x.size() != prior.size()) throw DataError("estimate and prior have different sizes");
    if (x.size() != p.num_columns()) throw DataError("demand size does not match the proportions");
    for (const auto& e : counts.entries()) {
        if (e.link >= p.num_links() || e.interval >= p.num_intervals()) {
            throw DataError("count entry outside the proportion tensor");
        }
    }
}

/// Residuals P x - y_obs at the observed entries.
inline std::vector<double> count_residuals(std::span<const double> x, const AssignmentProportions& p,
                                           const LinkCountSeries& counts) {
    std::vector<double> r;
    r.reserve(counts.size());
    for (const auto& e : counts.entries()) r.push_back(p.apply_row(e.link, e.interval, x) - e.count);
    return r;
}

inline double objective_unchecked(std::span<const double> x, std::span<const double> prior,
                                  const AssignmentProportions& p, const LinkCountSeries& counts, double omega) {
    double demand_term = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) demand_term += (x[c] - prior[c]) * (x[c] - prior[c]);
    double count_term = 0.0;
    for (double r : count_residuals(x, p, counts)) count_term += r * r;
    return omega * demand_term + (1.0 - omega) * count_term;
}

inline std::vector<double> gradient_unchecked(std::span<const double> x, std::span<const double> prior,
                                              const AssignmentProportions& p, const LinkCountSeries& counts,
                                              double omega) {
    std::vector<double> g(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) g[c] = 2.0 * omega * (x[c] - prior[c]);
    const auto r = count_residuals(x, p, counts);
    const auto entries = counts.entries();
    for (std::size_t k = 0; k < entries.size(); ++k) {
        for (const auto& e : p.row(entries[k].link, entries[k].interval)) {
            g[e.column] += 2.0 * (1.0 - omega) * e.value * r[k];
        }
    }
    return g;
}

}  // namespace detail

/// Weighted sum of squares: demand deviation from the prior plus count misfit.
inline double objective_value(std::span<const double> x, std::span<const double> prior,
                              const AssignmentProportions& p, const LinkCountSeries& counts, double omega) {
    detail::check_dimensions(x, prior, p, counts);
    return detail::objective_unchecked(x, prior, p, counts, omega);
}

/// 2w (x - x_prior) + 2(1 - w) P^T (P x - y_obs).
inline std::vector<double> objective_gradient(std::span<const double> x, std::span<const double> prior,
                                              const AssignmentProportions& p, const LinkCountSeries& counts,
                                              double omega) {
    detail::check_dimensions(x, prior, p, counts);
    return detail::gradient_unchecked(x, prior, p, counts, omega);
}

struct UpperLevelResult {
    std::vector<double> x;
    int steps{0};
    double projected_gradient_norm{0.0};
    bool converged{false};
    bool non_unique{false};  // w == 0 and P^T P singular: x is the solution closest to the prior
    std::vector<double> objective_trace;  // value before the first step and after each accepted step
};

namespace detail {

inline double projected_step_norm(std::span<const double> x, std::span<const double> g) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double d = x[c] - std::max(0.0, x[c] - g[c]);
        s += d * d;
    }
    return std::sqrt(s);
}

inline bool gram_rank_deficient(const AssignmentProportions& p, const LinkCountSeries& counts) {
    const auto n = p.num_columns();
    if (counts.size() < n) return true;
    if (n > 4000) return false;  // dense check too costly; no evidence of deficiency
    linalg::Matrix gram(n, n);
    for (const auto& e : counts.entries()) {
        const auto row = p.row(e.link, e.interval);
        for (const auto& a : row) {
            for (const auto& b : row) gram(a.column, b.column) += a.value * b.value;
        }
    }
    return linalg::psd_rank(gram) < n;
}

}  // namespace detail

/// Projected gradient descent from the prior on the bound-constrained quadratic.
/// Step sizes start at 1 and halve until f(x+) <= f(x) + 1e-4 g.(x+ - x).
inline UpperLevelResult upper_level_solve(const AssignmentProportions& p, std::span<const double> prior,
                                          const LinkCountSeries& counts, double omega,
                                          const UpperLevelConfig& config = {}) {
    if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("omega must lie in [0, 1]");
    detail::check_dimensions(prior, prior, p, counts);
    constexpr double kSufficientDecrease = 1e-4;

    UpperLevelResult out;
    out.x.assign(prior.begin(), prior.end());
    for (double& v : out.x) v = std::max(0.0, v);
    auto& x = out.x;
    double f = detail::objective_unchecked(x, prior, p, counts, omega);
    out.objective_trace.push_back(f);
    std::vector<double> trial(x.size());
    while (true) {
        const auto g = detail::gradient_unchecked(x, prior, p, counts, omega);
        out.projected_gradient_norm = detail::projected_step_norm(x, g);
        if (out.projected_gradient_norm <= config.step_tolerance) {
            out.converged = true;
            break;
        }
        if (out.steps >= config.max_gradient_steps) break;
        double alpha = 1.0;
        bool accepted = false;
        double f_trial = f;
        while (alpha > 1e-30) {
            double slope = 0.0;
            for (std::size_t c = 0; c < x.size(); ++c) {
                trial[c] = std::max(0.0, x[c] - alpha * g[c]);
                slope += g[c] * (trial[c] - x[c]);
            }
            f_trial = detail::objective_unchecked(trial, prior, p, counts, omega);
            if (f_trial <= f + kSufficientDecrease * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted || f_trial > f) break;  // stalled at machine precision
        x.swap(trial);
        f = f_trial;
        ++out.steps;
        out.objective_trace.push_back(f);
    }
    if (omega == 0.0) out.non_unique = detail::gram_rank_deficient(p, counts);
    return out;
}

/// Convenience overload on demand tables.
inline ODMatrixSeries upper_level_solve(const AssignmentProportions& p, const ODMatrixSeries& prior,
                                        const LinkCountSeries& counts, const EstimationConfig& config) {
    config.validate();
    auto r = upper_level_solve(p, prior.values(), counts, config.omega, config.inner);
    return ODMatrixSeries::from_flat(prior.grid(), prior.pairs(), std::move(r.x));
}

struct IterationRecord {
    int iteration{};
    double objective{};
    double r_squared{};
    int upper_steps{};  // gradient steps that produced this iterate (0 for the prior)
    double unfinished_share{};
};

struct EstimationResult {
    ODMatrixSeries estimated_demand;
    std::vector<IterationRecord> trace;
    SimulationResult initial_simulation;  // simulation of the prior
    SimulationResult final_simulation;    // simulation of the returned demand
    int best_iteration{1};
    double final_objective{};
    bool gridlock{false};
    bool non_unique{false};
};

/// Alternates simulation and upper-level solves; returns the best-R2 iterate.
inline EstimationResult bilevel_estimate(const Network& net, const ODMatrixSeries& prior, const LinkCountSeries& counts,
                                         const EstimationConfig& config = {}) {
    config.validate();
    counts.validate(net, prior.grid());
    if (counts.size() < 2) throw DataError("at least two link counts are required");
    const auto observed = counts.observed();

    EstimationResult result;
    ODMatrixSeries x = prior;
    int upper_steps = 0;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (int k = 1; k <= config.max_outer_iterations; ++k) {
        auto sim = assign(net, x, config.simulation);
        const double unfinished_share = x.total() > 0.0 ? sim.vehicles_unfinished / x.total() : 0.0;
        if (x.total() > 0.0 && sim.vehicles_unfinished > config.gridlock_share * x.total()) result.gridlock = true;
        const double r2 = metrics::r_squared(observed, counts.simulated(sim), config.r2_mode);
        const double obj = objective_value(x.values(), prior.values(), sim.proportions, counts, config.omega);
        result.trace.push_back({k, obj, r2, upper_steps, unfinished_share});
        if (k == 1) result.initial_simulation = sim;
        AssignmentProportions proportions = sim.proportions;
        if (r2 > best_r2) {
            best_r2 = r2;
            result.best_iteration = k;
            result.estimated_demand = x;
            result.final_objective = obj;
            result.final_simulation = std::move(sim);
        }
        const bool stable = k > 1 && std::abs(r2 - result.trace[k - 2].r_squared) < config.r2_variation_tolerance;
        const bool saturated = 1.0 - r2 < config.r2_variation_tolerance;
        if (stable || saturated || k == config.max_outer_iterations) break;

        auto solved = upper_level_solve(proportions, prior.values(), counts, config.omega, config.inner);
        result.non_unique = result.non_unique || solved.non_unique;
        upper_steps = solved.steps;
        x = ODMatrixSeries::from_flat(prior.grid(), prior.pairs(), std::move(solved.x));
    }
    return result;
}

}  // namespace tripcast

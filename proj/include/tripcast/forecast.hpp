/// @file  forecast.hpp
/// @brief ARIMA(p,d,q) demand forecasting with conditional least squares.
///
/// The fitted model on the d-times differenced series w is
///
///     w_t = c + sum_l phi_l w_{t-l} + sum_l theta_l e_{t-l} + e_t
///
/// with presample innovations set to zero. AR-only specs are fitted by ordinary
/// least squares; specs with an MA part use the two-stage Hannan-Rissanen
/// estimate followed by one Gauss-Newton pass on the conditional sum of squares.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "metrics.hpp"
#include "simulator.hpp"

namespace tripcast::forecast {

inline constexpr double kZeroVariance = 1e-12;

struct ArimaSpec {
    int p{0};
    int d{0};
    int q{0};

    [[nodiscard]] bool is_mean_model() const { return p == 0 && d == 0 && q == 0; }

    void validate() const {
        if (p < 0 || d < 0 || q < 0) throw ConfigError("ARIMA orders must be >= 0");
        if (p + q == 0 && d != 0) throw ConfigError("ARIMA(0,d,0) with d > 0 has no parameters; use 0,0,0");
    }

    /// Smallest series length a fit accepts.
    [[nodiscard]] std::size_t min_length() const {
        return static_cast<std::size_t>(p + q + d + std::max(p, q) + 5);
    }

    [[nodiscard]] std::string to_string() const {
        return std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q);
    }

    /// Parses "p,d,q".
    static ArimaSpec parse(const std::string& text) {
        ArimaSpec s;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> s.p >> c1 >> s.d >> c2 >> s.q) || c1 != ',' || c2 != ',' || !(in >> std::ws).eof()) {
            throw ConfigError("bad ARIMA spec '" + text + "', expected p,d,q");
        }
        s.validate();
        return s;
    }

    friend bool operator==(const ArimaSpec&, const ArimaSpec&) = default;
};

struct ArimaModel {
    ArimaSpec spec;
    std::vector<double> phi;
    std::vector<double> theta;
    double c{0.0};
    std::vector<double> residuals;  // on the differenced scale, presample entries 0
    double sigma2{0.0};
    bool degenerate{false};  // constant input series: forecasts are c

    /// Stationarity of the AR part (reported only; |phi| < 1 for p = 1).
    [[nodiscard]] bool ar_stationary() const {
        double s = 0.0;
        for (double v : phi) s += std::abs(v);
        return phi.size() <= 1 ? (phi.empty() || std::abs(phi[0]) < 1.0) : s < 1.0;
    }
};

struct DemandSeries {
    OdPair od;
    std::vector<double> values;
    double interval_length{900.0};
};

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Applies first differences @p d times.
inline std::vector<double> difference(std::span<const double> series, int d) {
    if (d < 0) throw DataError("differencing order must be >= 0");
    if (series.size() <= static_cast<std::size_t>(d)) throw DataError("series too short to difference");
    std::vector<double> out(series.begin(), series.end());
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

/// First element of the series at each differencing level 0..d-1; the initial
/// values integrate() needs.
inline std::vector<double> difference_heads(std::span<const double> series, int d) {
    std::vector<double> heads;
    std::vector<double> level(series.begin(), series.end());
    for (int k = 0; k < d; ++k) {
        if (level.empty()) throw DataError("series too short to difference");
        heads.push_back(level.front());
        level = difference(level, 1);
    }
    return heads;
}

/// Inverse of difference(): rebuilds the series from its d-th differences and the
/// first value at each level (heads[k] belongs to level k).
inline std::vector<double> integrate(std::span<const double> differenced, std::span<const double> heads) {
    std::vector<double> level(differenced.begin(), differenced.end());
    for (std::size_t k = heads.size(); k-- > 0;) {
        std::vector<double> up;
        up.reserve(level.size() + 1);
        up.push_back(heads[k]);
        for (double v : level) up.push_back(up.back() + v);
        level = std::move(up);
    }
    return level;
}

/// Sample autocorrelation for lags 0..max_lag with the divide-by-n covariance.
inline std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
    const auto n = series.size();
    if (n <= max_lag) throw DataError("series must be longer than max_lag");
    const double m = mean(series);
    double c0 = 0.0;
    for (double x : series) c0 += (x - m) * (x - m);
    if (c0 / static_cast<double>(n) < kZeroVariance) throw DataError("acf of a zero-variance series");
    std::vector<double> r(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) ck += (series[t] - m) * (series[t + k] - m);
        r[k] = ck / c0;
    }
    return r;
}

/// Partial autocorrelation for lags 0..max_lag (entry 0 is 1) by Durbin-Levinson.
inline std::vector<double> pacf(std::span<const double> series, std::size_t max_lag) {
    const auto r = acf(series, max_lag);
    std::vector<double> out(max_lag + 1, 0.0);
    out[0] = 1.0;
    std::vector<double> prev;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = r[k];
        double den = 1.0;
        for (std::size_t j = 1; j < k; ++j) {
            num -= prev[j - 1] * r[k - j];
            den -= prev[j - 1] * r[j];
        }
        const double kk = den != 0.0 ? num / den : 0.0;
        std::vector<double> cur(k);
        for (std::size_t j = 1; j < k; ++j) cur[j - 1] = prev[j - 1] - kk * prev[k - j - 1];
        cur[k - 1] = kk;
        out[k] = kk;
        prev = std::move(cur);
    }
    return out;
}

namespace detail {

/// Innovations e_t for t >= p given parameters; presample and t < p are 0.
inline std::vector<double> css_residuals(std::span<const double> w, double c, std::span<const double> phi,
                                         std::span<const double> theta) {
    const auto p = phi.size();
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t t = p; t < w.size(); ++t) {
        double pred = c;
        for (std::size_t l = 1; l <= p; ++l) pred += phi[l - 1] * w[t - l];
        for (std::size_t l = 1; l <= theta.size() && l <= t; ++l) pred += theta[l - 1] * e[t - l];
        e[t] = w[t] - pred;
    }
    return e;
}

inline double sum_sq(std::span<const double> v, std::size_t from) {
    double s = 0.0;
    for (std::size_t t = from; t < v.size(); ++t) s += v[t] * v[t];
    return s;
}

/// OLS of w_t on an intercept, @p p lags of w and @p q lags of @p proxy, over rows t >= start.
inline std::vector<double> lagged_regression(std::span<const double> w, std::span<const double> proxy, int p, int q,
                                             std::size_t start) {
    const std::size_t cols = 1 + static_cast<std::size_t>(p + q);
    if (w.size() <= start || w.size() - start < cols) throw NumericalError("too few observations for the regression");
    linalg::Matrix a(w.size() - start, cols);
    std::vector<double> y(w.size() - start);
    for (std::size_t t = start; t < w.size(); ++t) {
        const auto r = t - start;
        a(r, 0) = 1.0;
        for (int l = 1; l <= p; ++l) a(r, static_cast<std::size_t>(l)) = w[t - l];
        for (int l = 1; l <= q; ++l) a(r, static_cast<std::size_t>(p + l)) = proxy[t - l];
        y[r] = w[t];
    }
    return linalg::least_squares(std::move(a), std::move(y));
}

inline void unpack(const std::vector<double>& beta, int p, int q, ArimaModel& m) {
    m.c = beta[0];
    m.phi.assign(beta.begin() + 1, beta.begin() + 1 + p);
    m.theta.assign(beta.begin() + 1 + p, beta.begin() + 1 + p + q);
}

/// One Gauss-Newton step on the conditional sum of squares, with step halving.
inline void gauss_newton_pass(std::span<const double> w, ArimaModel& m) {
    const int p = m.spec.p;
    const int q = m.spec.q;
    const std::size_t k = 1 + static_cast<std::size_t>(p + q);
    const auto n = w.size();
    const auto start = static_cast<std::size_t>(p);
    const auto e = css_residuals(w, m.c, m.phi, m.theta);
    // de_t/dbeta = -z_t - sum_l theta_l de_{t-l}/dbeta
    std::vector<std::vector<double>> de(n, std::vector<double>(k, 0.0));
    for (std::size_t t = start; t < n; ++t) {
        auto& row = de[t];
        row[0] = -1.0;
        for (int l = 1; l <= p; ++l) row[static_cast<std::size_t>(l)] = -w[t - l];
        for (int l = 1; l <= q; ++l) {
            if (static_cast<std::size_t>(l) <= t) row[static_cast<std::size_t>(p + l)] = -e[t - l];
        }
        for (int l = 1; l <= q && static_cast<std::size_t>(l) <= t; ++l) {
            for (std::size_t j = 0; j < k; ++j) row[j] -= m.theta[l - 1] * de[t - l][j];
        }
    }
    if (n - start < k) return;
    linalg::Matrix jac(n - start, k);
    std::vector<double> rhs(n - start);
    for (std::size_t t = start; t < n; ++t) {
        for (std::size_t j = 0; j < k; ++j) jac(t - start, j) = de[t][j];
        rhs[t - start] = -e[t];
    }
    std::vector<double> delta;
    try {
        delta = linalg::least_squares(std::move(jac), std::move(rhs));
    } catch (const NumericalError&) {
        return;
    }
    std::vector<double> beta{m.c};
    beta.insert(beta.end(), m.phi.begin(), m.phi.end());
    beta.insert(beta.end(), m.theta.begin(), m.theta.end());
    const double base = sum_sq(e, start);
    double step = 1.0;
    for (int attempt = 0; attempt < 10; ++attempt, step *= 0.5) {
        auto trial = beta;
        for (std::size_t j = 0; j < k; ++j) trial[j] += step * delta[j];
        ArimaModel cand = m;
        unpack(trial, p, q, cand);
        const auto e2 = css_residuals(w, cand.c, cand.phi, cand.theta);
        const double s2 = sum_sq(e2, start);
        if (std::isfinite(s2) && s2 < base) {
            m = std::move(cand);
            return;
        }
    }
}

inline void finish(std::span<const double> w, ArimaModel& m) {
    m.residuals = css_residuals(w, m.c, m.phi, m.theta);
    const auto start = static_cast<std::size_t>(m.spec.p);
    const auto count = w.size() > start ? w.size() - start : 0;
    m.sigma2 = count > 0 ? sum_sq(m.residuals, start) / static_cast<double>(count) : 0.0;
}

}  // namespace detail

/// Conditional least-squares ARIMA fit.
inline ArimaModel fit_arima(std::span<const double> series, const ArimaSpec& spec) {
    spec.validate();
    for (double v : series) {
        if (!std::isfinite(v)) throw DataError("series contains non-finite values");
    }
    if (series.size() < spec.min_length()) {
        throw DataError("series too short: " + std::to_string(series.size()) + " < " +
                        std::to_string(spec.min_length()) + " for ARIMA(" + spec.to_string() + ")");
    }
    ArimaModel m;
    m.spec = spec;
    m.phi.assign(static_cast<std::size_t>(spec.p), 0.0);
    m.theta.assign(static_cast<std::size_t>(spec.q), 0.0);
    if (variance(series) < kZeroVariance) {
        m.degenerate = true;
        m.c = mean(series);
        m.residuals.assign(series.size() - static_cast<std::size_t>(spec.d), 0.0);
        return m;
    }
    const auto w = difference(series, spec.d);
    if (variance(w) < kZeroVariance || (spec.p == 0 && spec.q == 0)) {
        m.c = mean(w);
        detail::finish(w, m);
        return m;
    }
    if (spec.q == 0) {
        detail::unpack(detail::lagged_regression(w, w, spec.p, 0, static_cast<std::size_t>(spec.p)), spec.p, 0, m);
        detail::finish(w, m);
        return m;
    }
    // Hannan-Rissanen: long autoregression for proxy innovations
    const int long_order = std::max(1, std::min<int>(10, static_cast<int>(w.size() / 4)));
    ArimaModel ar;
    ar.spec = {long_order, 0, 0};
    detail::unpack(detail::lagged_regression(w, w, long_order, 0, static_cast<std::size_t>(long_order)), long_order, 0,
                   ar);
    const auto proxy = detail::css_residuals(w, ar.c, ar.phi, {});
    const auto start = static_cast<std::size_t>(std::max(spec.p, long_order + spec.q));
    detail::unpack(detail::lagged_regression(w, proxy, spec.p, spec.q, start), spec.p, spec.q, m);
    detail::gauss_newton_pass(w, m);
    detail::finish(w, m);
    return m;
}

/// Recursive multi-step forecast continuing @p history; predictions are clamped at 0.
inline std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, int steps) {
    if (steps < 1) throw DataError("forecast steps must be >= 1");
    if (model.degenerate) return std::vector<double>(static_cast<std::size_t>(steps), std::max(0.0, model.c));
    const auto p = static_cast<std::size_t>(model.spec.p);
    const int d = model.spec.d;
    if (history.size() < p + static_cast<std::size_t>(d) || history.size() <= static_cast<std::size_t>(d)) {
        throw DataError("insufficient history for forecasting");
    }
    auto w = difference(history, d);
    auto e = detail::css_residuals(w, model.c, model.phi, model.theta);
    const auto n = w.size();
    for (int s = 0; s < steps; ++s) {
        const auto t = w.size();
        double pred = model.c;
        for (std::size_t l = 1; l <= p; ++l) pred += model.phi[l - 1] * w[t - l];
        for (std::size_t l = 1; l <= model.theta.size() && l <= t; ++l) pred += model.theta[l - 1] * e[t - l];
        w.push_back(pred);
        e.push_back(0.0);
    }
    // integrate back using the last value at each differencing level
    std::vector<double> out(w.begin() + static_cast<std::ptrdiff_t>(n), w.end());
    std::vector<double> last;
    {
        std::vector<double> level(history.begin(), history.end());
        for (int k = 0; k < d; ++k) {
            last.push_back(level.back());
            level = difference(level, 1);
        }
    }
    for (int k = d; k-- > 0;) {
        double prev = last[static_cast<std::size_t>(k)];
        for (double& v : out) {
            v += prev;
            prev = v;
        }
    }
    for (double& v : out) v = std::max(0.0, v);
    return out;
}

/// Repeats the last observed value.
inline std::vector<double> naive_forecast(std::span<const double> history, int steps) {
    if (history.empty()) throw DataError("naive forecast needs a nonempty history");
    if (steps < 1) throw DataError("forecast steps must be >= 1");
    return std::vector<double>(static_cast<std::size_t>(steps), history.back());
}

struct FleetFit {
    OdPair od;
    std::optional<ArimaModel> model;  // empty when the fit failed; forecasts fall back to naive
    std::string flag;
};

/// Fits one model per series, all sharing @p spec. Failures are flagged, not thrown.
inline std::vector<FleetFit> fit_fleet(std::span<const DemandSeries> fleet, const ArimaSpec& spec) {
    spec.validate();
    std::vector<FleetFit> out;
    out.reserve(fleet.size());
    for (const auto& s : fleet) {
        FleetFit f{s.od, std::nullopt, {}};
        try {
            f.model = fit_arima(s.values, spec);
        } catch (const std::exception& ex) {
            f.flag = ex.what();
        }
        out.push_back(std::move(f));
    }
    return out;
}

/// Forecast from a fleet fit, falling back to naive for flagged series.
inline std::vector<double> forecast_or_naive(const FleetFit& fit, std::span<const double> history, int steps) {
    if (fit.model) {
        try {
            return forecast(*fit.model, history, steps);
        } catch (const DataError&) {
        }
    }
    return naive_forecast(history, steps);
}

struct CandidateScore {
    std::string label;                // "naive" or "p,d,q"
    std::optional<ArimaSpec> spec;    // empty for naive
    double nrmse{};
    double r_squared{};               // textbook R2 on the pooled validation window; NaN if undefined
    std::size_t fallbacks{0};         // series that fell back to naive
};

struct SelectionReport {
    std::vector<CandidateScore> rows;  // naive first, then candidates in input order
    std::size_t winner{0};             // index into rows
    bool improves_on_naive{false};

    [[nodiscard]] const CandidateScore& best() const { return rows.at(winner); }
};

/// Fits each candidate on every series' training prefix and scores the pooled
/// forecasts over the last @p validation_intervals values.
inline SelectionReport select_model(std::span<const DemandSeries> fleet, std::span<const ArimaSpec> candidates,
                                    int validation_intervals) {
    if (validation_intervals < 1) throw ConfigError("validation_intervals must be >= 1");
    if (fleet.empty()) throw DataError("empty demand fleet");
    const auto v = static_cast<std::size_t>(validation_intervals);
    std::vector<double> actual;
    for (const auto& s : fleet) {
        if (s.values.size() <= v) throw DataError("series shorter than the validation window");
        actual.insert(actual.end(), s.values.end() - static_cast<std::ptrdiff_t>(v), s.values.end());
    }
    auto score = [&](CandidateScore row, const std::vector<double>& predicted) {
        row.nrmse = metrics::nrmse(actual, predicted);
        try {
            row.r_squared = metrics::r_squared(actual, predicted, metrics::R2Mean::Observed);
        } catch (const std::exception&) {
            row.r_squared = std::nan("");
        }
        return row;
    };

    SelectionReport report;
    auto safe_nrmse_row = [&](CandidateScore row, const std::vector<double>& predicted) {
        try {
            return score(std::move(row), predicted);
        } catch (const NumericalError&) {
            // both pooled series identically zero: a perfect forecast
            row.nrmse = 0.0;
            row.r_squared = std::nan("");
            return row;
        }
    };

    {
        std::vector<double> predicted;
        for (const auto& s : fleet) {
            const std::span<const double> train(s.values.data(), s.values.size() - v);
            const auto f = naive_forecast(train, validation_intervals);
            predicted.insert(predicted.end(), f.begin(), f.end());
        }
        report.rows.push_back(safe_nrmse_row({"naive", std::nullopt, 0, 0, 0}, predicted));
    }
    for (const auto& spec : candidates) {
        spec.validate();
        std::vector<double> predicted;
        std::size_t fallbacks = 0;
        for (const auto& s : fleet) {
            const std::span<const double> train(s.values.data(), s.values.size() - v);
            std::vector<double> f;
            try {
                f = forecast(fit_arima(train, spec), train, validation_intervals);
            } catch (const std::exception&) {
                f = naive_forecast(train, validation_intervals);
                ++fallbacks;
            }
            predicted.insert(predicted.end(), f.begin(), f.end());
        }
        report.rows.push_back(safe_nrmse_row({spec.to_string(), spec, 0, 0, fallbacks}, predicted));
    }
    if (report.rows.size() > 1) {
        report.winner = 1;
        for (std::size_t r = 2; r < report.rows.size(); ++r) {
            if (report.rows[r].nrmse < report.rows[report.winner].nrmse) report.winner = r;
        }
        report.improves_on_naive = report.rows[report.winner].nrmse < report.rows[0].nrmse;
    }
    return report;
}

/// Candidate specifications compared in the validation study: AR(1), ARI(1,1),
/// MA(1) and IMA(1,1); naive is always added by select_model.
inline std::vector<ArimaSpec> default_candidates() { return {{1, 0, 0}, {1, 1, 0}, {0, 0, 1}, {0, 1, 1}}; }

}  // namespace tripcast::forecast

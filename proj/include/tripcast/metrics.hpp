/// @file  metrics.hpp
/// @brief Goodness-of-fit measures: R-squared, NRMSE and RMSE.

#pragma once

#include <cmath>
#include <span>

#include "error.hpp"

namespace tripcast::metrics {

/// Which mean the R-squared denominator is centred on.
enum class R2Mean {
    Simulated,  ///< grand mean of the simulated values (the calibration convention, default)
    Observed,   ///< textbook R-squared
};

inline void check_aligned(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("series lengths differ");
}

/// R2 = 1 - sum (obs - sim)^2 / sum (obs - mean)^2.
inline double r_squared(std::span<const double> observed, std::span<const double> simulated,
                        R2Mean mode = R2Mean::Simulated) {
    check_aligned(observed, simulated);
    if (observed.size() < 2) throw DataError("r_squared needs at least 2 points");
    const auto& centre_on = mode == R2Mean::Simulated ? simulated : observed;
    double mean = 0.0;
    for (double v : centre_on) mean += v;
    mean /= static_cast<double>(centre_on.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        num += (observed[k] - simulated[k]) * (observed[k] - simulated[k]);
        den += (observed[k] - mean) * (observed[k] - mean);
    }
    if (den == 0.0) throw NumericalError("r_squared: degenerate denominator");
    return 1.0 - num / den;
}

/// sqrt( sum (x - xhat)^2 / sum (x + xhat)^2 ).
inline double nrmse(std::span<const double> actual, std::span<const double> predicted) {
    check_aligned(actual, predicted);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < actual.size(); ++k) {
        num += (actual[k] - predicted[k]) * (actual[k] - predicted[k]);
        den += (actual[k] + predicted[k]) * (actual[k] + predicted[k]);
    }
    if (den == 0.0) throw NumericalError("nrmse: both series are identically zero");
    return std::sqrt(num / den);
}

inline double rmse(std::span<const double> actual, std::span<const double> predicted) {
    check_aligned(actual, predicted);
    if (actual.empty()) throw DataError("rmse of an empty series");
    double s = 0.0;
    for (std::size_t k = 0; k < actual.size(); ++k) s += (actual[k] - predicted[k]) * (actual[k] - predicted[k]);
    return std::sqrt(s / static_cast<double>(actual.size()));
}

struct FitReport {
    double r_squared{};
    double nrmse{};
    double rmse{};
    std::size_t n_points{};
};

/// All three measures; R2 or NRMSE that are undefined come back as NaN.
inline FitReport fit_report(std::span<const double> observed, std::span<const double> simulated,
                            R2Mean mode = R2Mean::Simulated) {
    FitReport r;
    r.n_points = observed.size();
    r.rmse = rmse(observed, simulated);
    try {
        r.r_squared = r_squared(observed, simulated, mode);
    } catch (const std::exception&) {
        r.r_squared = std::nan("");
    }
    try {
        r.nrmse = nrmse(observed, simulated);
    } catch (const NumericalError&) {
        r.nrmse = std::nan("");
    }
    return r;
}

}  // namespace tripcast::metrics

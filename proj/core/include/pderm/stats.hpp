#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pderm::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> x);
/// Population variance (n denominator).
double variance(std::span<const double> x);

/// Type-7 (linear interpolation) quantile, p in [0, 1].
double quantile(std::vector<double> x, double p);
double median(std::vector<double> x);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares of y on (1, x).
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// Sample autocorrelations at lags 1..max_lag (index 0 holds lag 1).
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

/// E|x|^order estimated by the sample average.
double abs_moment(std::span<const double> x, int order);

}  // namespace pderm::stats

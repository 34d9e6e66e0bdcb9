#include "pderm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pderm::stats {

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double n = static_cast<double>(x.size());
    return std::sqrt(variance(x) * n / (n - 1.0));
}

double quantile(std::vector<double> x, double p) {
    if (x.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    std::sort(x.begin(), x.end());
    const double pos = p * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return x[lo] + frac * (x[hi] - x[lo]);
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

LinearFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("ols: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("ols: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("ols: regressor has no variation");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        rss += e * e;
    }
    f.slope_se = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    f.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
    return f;
}

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
    std::vector<double> out(max_lag, 0.0);
    if (x.size() <= max_lag) throw std::invalid_argument("autocorrelation: series shorter than max_lag");
    const double m = mean(x);
    double c0 = 0.0;
    for (double v : x) c0 += (v - m) * (v - m);
    if (!(c0 > 0.0)) return out;
    for (std::size_t l = 1; l <= max_lag; ++l) {
        double c = 0.0;
        for (std::size_t t = l; t < x.size(); ++t) c += (x[t] - m) * (x[t - l] - m);
        out[l - 1] = c / c0;
    }
    return out;
}

double abs_moment(std::span<const double> x, int order) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += std::pow(std::fabs(v), order);
    return s / static_cast<double>(x.size());
}

}  // namespace pderm::stats

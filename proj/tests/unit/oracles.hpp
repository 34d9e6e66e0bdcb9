#pragma once

// Reference implementations written from the defining formulas, used to
// cross-check the library code paths.

#include "pderm/loss.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline double xlogx(double x) { return x == 0.0 ? 0.0 : x * std::log(x); }

inline double psi(pderm::LossKind k, double u) {
    using pderm::LossKind;
    switch (k) {
        case LossKind::square: return u * u;
        case LossKind::nef_ghs: return u * std::atan(u) - 0.5 * std::log(1.0 + u * u);
        case LossKind::gamma_qlike: return -std::log(u);
        case LossKind::poisson: return xlogx(u) - u;
        case LossKind::negbin: return xlogx(u) - xlogx(1.0 + u);
    }
    return 0.0;
}

inline double dpsi(pderm::LossKind k, double v) {
    using pderm::LossKind;
    switch (k) {
        case LossKind::square: return 2.0 * v;
        case LossKind::nef_ghs: return std::atan(v);
        case LossKind::gamma_qlike: return -1.0 / v;
        case LossKind::poisson: return std::log(v);
        case LossKind::negbin: return std::log(v) - std::log(1.0 + v);
    }
    return 0.0;
}

inline double d2psi(pderm::LossKind k, double v) {
    using pderm::LossKind;
    switch (k) {
        case LossKind::square: return 2.0;
        case LossKind::nef_ghs: return 1.0 / (1.0 + v * v);
        case LossKind::gamma_qlike: return 1.0 / (v * v);
        case LossKind::poisson: return 1.0 / v;
        case LossKind::negbin: return 1.0 / (v * (1.0 + v));
    }
    return 0.0;
}

/// psi(u) - psi(v) - psi'(v)(u - v) straight from the definition.
inline double bregman(pderm::LossKind k, double u, double v) {
    return psi(k, u) - psi(k, v) - dpsi(k, v) * (u - v);
}

/// Regime index by linear scan over left-closed intervals.
inline std::size_t regime(const std::vector<double>& breaks, double y) {
    std::size_t r = 0;
    for (double b : breaks)
        if (y >= b) ++r;
    return r;
}

/// f[0] = f0, f[t] = a0[k] + a1[k] y[t-1] + b1[k] f[t-1], flat theta = (a0[K], a1[K], b1[K]).
inline std::vector<double> forecasts(const std::vector<double>& theta, const std::vector<double>& breaks,
                                     const std::vector<double>& y, double f0) {
    const std::size_t K = breaks.size() + 1;
    std::vector<double> f(y.size());
    if (f.empty()) return f;
    f[0] = f0;
    for (std::size_t t = 1; t < y.size(); ++t) {
        const std::size_t k = regime(breaks, y[t - 1]);
        f[t] = theta[k] + theta[K + k] * y[t - 1] + theta[2 * K + k] * f[t - 1];
    }
    return f;
}

/// (1/T) sum_{t=1..T} L(y[t], f[t]) with the loss built from psi.
inline double risk(pderm::LossKind k, const std::vector<double>& theta, const std::vector<double>& breaks,
                   const std::vector<double>& y, double f0) {
    const auto f = forecasts(theta, breaks, y, f0);
    double s = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) s += bregman(k, y[t], f[t]);
    return s / static_cast<double>(y.size() - 1);
}

struct Kalman {
    double P, gain, a0, a1, b1;
};

/// Positive root of the steady-state Riccati quadratic
/// P^2 + (sy2 (1 - rho^2) - sh2) P - sh2 sy2 = 0.
inline Kalman kalman(double rho, double mu, double sh, double sy) {
    const double sh2 = sh * sh, sy2 = sy * sy;
    const double b = sy2 * (1.0 - rho * rho) - sh2;
    const double P = 0.5 * (-b + std::sqrt(b * b + 4.0 * sh2 * sy2));
    const double g = P / (P + sy2);
    return {P, g, mu * (1.0 - rho), rho * g, rho * (1.0 - g)};
}

}  // namespace oracle

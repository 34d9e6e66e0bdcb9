#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pderm {

using Objective = std::function<double(std::span<const double>)>;
using Gradient = std::function<double(std::span<const double>, std::span<double>)>;

/// Clamp x into [lo, hi] coordinate-wise.
void project_to_box(std::span<double> x, std::span<const double> lo, std::span<const double> hi) noexcept;

struct NelderMeadOptions {
    /// Edge length of the initial simplex as a fraction of each box width.
    double initial_step = 0.1;
    /// Stop when max vertex distance to the best vertex < tol * (1 + |x_best|).
    double tol = 1e-8;
    std::size_t max_evals = 20000;
    /// Fresh simplexes built around the converged point while they still improve.
    int max_restarts = 6;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t evals = 0;
    std::size_t iterations = 0;
    int restarts = 0;
    bool converged = false;
};

/**
 * Nelder-Mead simplex search with every trial point projected onto the box.
 * The best vertex never gets worse, so the result is no worse than f(x0).
 */
NelderMeadResult nelder_mead_box(const Objective& f, std::vector<double> x0, std::span<const double> lo,
                                 std::span<const double> hi, const NelderMeadOptions& opt = {});

struct QuasiNewtonOptions {
    /// Stop when the projected-gradient step max |P(x - g) - x| < pg_tol.
    double pg_tol = 1e-10;
    std::size_t max_iter = 2000;
};

struct QuasiNewtonResult {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/**
 * Projected BFGS for smooth objectives on a box. `fg` returns f(x) and writes
 * the gradient. Coordinates pinned at a bound with an outward gradient are held
 * fixed; the remaining ones take a quasi-Newton step with projected Armijo
 * backtracking.
 */
QuasiNewtonResult quasi_newton_box(const Gradient& fg, std::vector<double> x0, std::span<const double> lo,
                                   std::span<const double> hi, const QuasiNewtonOptions& opt = {});

/// Cartesian grid with `points` evenly spaced values (endpoints included) per coordinate.
std::vector<std::vector<double>> box_grid(std::span<const double> lo, std::span<const double> hi,
                                          std::size_t points);

/// Minimise a unimodal scalar function on [a, b] (Brent's method); returns the argmin.
double minimize_scalar(const std::function<double(double)>& f, double a, double b);

}  // namespace pderm

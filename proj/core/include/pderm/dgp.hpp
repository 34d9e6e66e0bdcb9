#pragma once

#include "pderm/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pderm {

/// Value space of the observed series: the real line or the nonnegative half-line.
enum class YSpace { real, nonneg };

/// Support of an innovation law.
enum class Support { whole_line, positive_line };

std::string to_string(YSpace space);

// ---------------------------------------------------------------------------
// Innovation laws
// ---------------------------------------------------------------------------

struct Gaussian {
    double mean = 0.0;
    double stddev = 1.0;
};

struct LogNormal {
    double mu = 0.0;
    double sigma = 1.0;
};

struct Gamma {
    double shape = 1.0;
    double scale = 1.0;
    bool shifted_to_unit_mean = false;
};

/// Square of a standard Gaussian draw.
struct ChiSq1 {};

/**
 * Distribution of one innovation sequence.
 *
 * A zero scale (stddev or sigma equal to 0) is accepted and yields a point
 * mass; validation flags it as not absolutely continuous.
 */
class InnovationLaw {
public:
    using Family = std::variant<Gaussian, LogNormal, Gamma, ChiSq1>;

    static InnovationLaw gaussian(double mean, double stddev);
    static InnovationLaw lognormal(double mu, double sigma);
    static InnovationLaw gamma(double shape, double scale);
    /// Gamma with scale 1/shape, hence mean exactly 1.
    static InnovationLaw unit_mean_gamma(double shape);
    static InnovationLaw chisq1();

    const Family& family() const noexcept { return family_; }
    Support support() const noexcept;
    bool degenerate() const noexcept;
    double mean() const noexcept;
    std::string describe() const;

    /// Analytic check that E|eps|^order is finite (and, for positive laws,
    /// E|log eps|^order); all implemented families qualify when non-degenerate.
    bool has_finite_moment(int order) const noexcept;

private:
    explicit InnovationLaw(Family f) : family_(f) {}
    Family family_;
};

/// Sampler for one innovation law; keeps per-stream distribution state.
class InnovationSampler {
public:
    explicit InnovationSampler(const InnovationLaw& law);
    double operator()(Rng& rng);

private:
    InnovationLaw law_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::gamma_distribution<double> gamma_{1.0, 1.0};
};

// ---------------------------------------------------------------------------
// g-functions
// ---------------------------------------------------------------------------

/**
 * Named parametric form used for g_h1, g_h2, g_y1, g_y2.
 *
 *  - constant:   c0
 *  - affine:     c0 + c1 * h
 *  - abs_affine: c0 + c1 * |h|
 *  - log_ar:     exp(c0 * (1 - c1)) * h^c1, the log-AR(1) recursion
 *                log h' = c0 + c1 (log h - c0) written multiplicatively
 *                (defined for h > 0).
 */
struct GFunction {
    enum class Form { constant, affine, abs_affine, log_ar };

    Form form = Form::constant;
    double c0 = 0.0;
    double c1 = 0.0;

    static GFunction constant(double c) { return {Form::constant, c, 0.0}; }
    static GFunction affine(double c0, double c1) { return {Form::affine, c0, c1}; }
    static GFunction abs_affine(double c0, double c1) { return {Form::abs_affine, c0, c1}; }
    static GFunction log_ar(double mu, double rho) { return {Form::log_ar, mu, rho}; }

    double operator()(double h) const noexcept;

    /// Smallest a such that |g(h)| <= a |h| + o(|h|) as |h| -> infinity.
    double asymptotic_slope() const noexcept;

    std::string describe() const;
};

/// Asymptotic linear growth bounds (a_h, b_h) for (g_h1, g_h2).
struct LinearGrowth {
    double a_h = 0.0;
    double b_h = 0.0;
};

/// Parameter-driven process definition. Immutable once built; safe to share.
struct DgpSpec {
    std::string id;
    YSpace y_space = YSpace::real;
    GFunction g_h1, g_h2, g_y1, g_y2;
    InnovationLaw eps_h = InnovationLaw::gaussian(0.0, 1.0);
    InnovationLaw eps_y = InnovationLaw::gaussian(0.0, 1.0);
    double h0 = 0.0;
    double y0 = 0.0;
    int r_m = 6;
    LinearGrowth growth;
    std::size_t burn_in = 1000;
    /// Long-run mean of the hidden chain (used for h0 and reporting).
    double h_mean = 0.0;
};

/// Observed and hidden paths plus the provenance needed to regenerate them.
struct SimPath {
    std::vector<double> y;
    std::vector<double> h;
    std::uint64_t seed = 0;
    std::string spec_id;

    std::size_t size() const noexcept { return y.size(); }
};

/// Non-finite state encountered while simulating.
class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(std::size_t t, double h, double y);
    std::size_t t;
    double h;
    double y;
};

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// One transition of the hidden/observed pair given the two innovation draws.
struct DgpState {
    double h = 0.0;
    double y = 0.0;
};
DgpState advance(const DgpSpec& spec, double h_prev, double eps_h, double eps_y) noexcept;

/**
 * Stream of innovation pairs for one path. Each step draws eps_H first and
 * eps_Y second, so every consumer of a given seed sees the same draws.
 */
class InnovationStream {
public:
    InnovationStream(const DgpSpec& spec, std::uint64_t seed);
    struct Draw {
        double eps_h;
        double eps_y;
    };
    Draw next();

private:
    Rng rng_;
    InnovationSampler h_;
    InnovationSampler y_;
};

/// Path of length t_total starting at (spec.h0, spec.y0); no burn-in.
SimPath simulate(const DgpSpec& spec, std::size_t t_total, std::uint64_t seed);

/// Path of length eps_h.size() + 1 from `init` driven by explicit innovations.
SimPath simulate_innovations(const DgpSpec& spec, DgpState init,
                             std::span<const double> eps_h,
                             std::span<const double> eps_y);

/// Path of length t_total after discarding spec.burn_in leading steps.
SimPath simulate_stationary(const DgpSpec& spec, std::size_t t_total, std::uint64_t seed);

/// Continuation of length horizon + 1 whose first element is `from`.
SimPath continue_path(const DgpSpec& spec, DgpState from, std::size_t horizon,
                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Largest regime count K with K < (r_m - 2) / 3; 0 when none is admissible.
int max_regimes(int r_m) noexcept;

/// Throws std::invalid_argument when k violates K < (r_m - 2) / 3.
void check_regime_count(int k, int r_m);

struct ValidationReport {
    // E(a_h + b_h |eps_H|)^{2 r_m}
    double stability_estimate = 0.0;
    double stability_std_error = 0.0;
    double stability_upper99 = 0.0;
    bool stability_closed_form = false;
    bool stability_ok = false;

    bool moments_ok = false;
    bool positivity_ok = false;
    bool support_ok = false;
    bool growth_ok = false;
    bool continuity_ok = false;
    int max_regimes = 0;
    std::size_t mc_draws = 0;

    std::vector<std::string> failures;

    bool passed() const noexcept { return failures.empty(); }
};

ValidationReport validate_assumption1(const DgpSpec& spec, std::size_t mc_draws,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

using ParamMap = std::map<std::string, double>;

/// Parameter names accepted by a preset, with their defaults.
ParamMap preset_defaults(const std::string& name);

/**
 * Build one of the three application processes.
 *
 *  - ar1_noise:       Y = H + sigma_y e_Y, H = mu_h + rho (H - mu_h) + sigma_h e_H
 *  - sv_returns:      Y = r^2 = H z^2, log H = mu_h + rho (log H - mu_h) + sigma_h eta
 *  - sv_realized_vol: Y = RV = H e_RV with unit-mean gamma e_RV of variance sigma_y^2,
 *                     H = (1 - rho) mu_h - sigma_h + rho H + sigma_h e_H with
 *                     unit-mean exponential e_H
 *
 * Optional keys `r_m` and `burn_in` are accepted by all presets.
 * Throws std::invalid_argument for unknown names, unknown keys or
 * out-of-range values.
 */
DgpSpec preset(const std::string& name, const ParamMap& params = {});

}  // namespace pderm

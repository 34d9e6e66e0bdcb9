#pragma once

#include "pderm/dgp.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace pderm {

/**
 * Known partition of the y-space into K regimes
 * {(r_1, r_2), [r_2, r_3), ..., [r_K, inf)}, with r_1 = -inf on the real line
 * and r_1 = 0 on the nonnegative half-line. Intervals are left-closed.
 */
class Partition {
public:
    /// Single-regime partition.
    explicit Partition(YSpace space = YSpace::real) : space_(space) {}

    /// Validates ordering, the y-space and K < (r_m - 2)/3.
    static Partition create(std::vector<double> breakpoints, YSpace space, int r_m);

    std::size_t regimes() const noexcept { return breakpoints_.size() + 1; }
    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    YSpace space() const noexcept { return space_; }

    /// Zero-based regime index of y.
    std::size_t regime_of(double y) const noexcept;

    bool operator==(const Partition&) const = default;

private:
    YSpace space_;
    std::vector<double> breakpoints_;
};

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Bounds&) const = default;
};

/**
 * Box of admissible prediction rules:
 * alpha0 in [lo, hi]^K, alpha1 in [lo, hi]^K with lo > 0, beta1 in [0, beta1_upper]^K
 * with beta1_upper < 1. On the nonnegative half-line alpha0.lo must be > 0.
 */
class RuleSpace {
public:
    static std::shared_ptr<const RuleSpace> create(Bounds alpha0, Bounds alpha1, double beta1_upper,
                                                   Partition partition);

    const Bounds& alpha0() const noexcept { return alpha0_; }
    const Bounds& alpha1() const noexcept { return alpha1_; }
    double beta1_upper() const noexcept { return beta1_upper_; }
    const Partition& partition() const noexcept { return partition_; }
    YSpace space() const noexcept { return partition_.space(); }
    std::size_t regimes() const noexcept { return partition_.regimes(); }
    /// Parameter dimension p = 3K.
    std::size_t dimension() const noexcept { return 3 * regimes(); }

    /// Per-coordinate box in the flat (alpha0[K], alpha1[K], beta1[K]) order.
    std::vector<double> lower() const;
    std::vector<double> upper() const;

    /// Fixed, rule-independent initial forecast: alpha0.lo on the nonnegative
    /// half-line, 0 on the real line.
    double default_f0() const noexcept;
    static constexpr double default_d0() noexcept { return 1.0; }

private:
    RuleSpace(Bounds a0, Bounds a1, double b1, Partition p)
        : alpha0_(a0), alpha1_(a1), beta1_upper_(b1), partition_(std::move(p)) {}
    Bounds alpha0_;
    Bounds alpha1_;
    double beta1_upper_;
    Partition partition_;
};

/// Prediction rule theta = (alpha0[1..K], alpha1[1..K], beta1[1..K]) within a RuleSpace.
class PredictionRule {
public:
    PredictionRule(std::shared_ptr<const RuleSpace> space, std::vector<double> alpha0,
                   std::vector<double> alpha1, std::vector<double> beta1);

    /// Build from the flat parameter vector of length 3K.
    static PredictionRule from_vector(std::shared_ptr<const RuleSpace> space,
                                      std::span<const double> theta);

    std::vector<double> to_vector() const;

    const std::vector<double>& alpha0() const noexcept { return alpha0_; }
    const std::vector<double>& alpha1() const noexcept { return alpha1_; }
    const std::vector<double>& beta1() const noexcept { return beta1_; }
    const RuleSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const RuleSpace>& space_ptr() const noexcept { return space_; }

    /// True when every coordinate lies in the RuleSpace box.
    bool feasible() const noexcept;

private:
    std::shared_ptr<const RuleSpace> space_;
    std::vector<double> alpha0_, alpha1_, beta1_;
};

/// Forecast path f and dominating path d (index 0 holds the initial values).
struct ForecastTrace {
    std::vector<double> f;
    std::vector<double> d;
    double f0 = 0.0;
    double d0 = 1.0;
};

/// Joint path of the companion chain together with the observations.
struct CompanionTrace {
    std::vector<double> h;
    std::vector<double> y;
    std::vector<double> f;
    std::vector<double> d;
};

/// One forecast update: the regime of y_prev selects (alpha0, alpha1, beta1).
double step(const PredictionRule& rule, double y_prev, double f_prev) noexcept;

/// Dominating-process update d' = 1 + |y_prev| + |f_prev| + beta1_upper * d_prev.
inline double dominating_step(double beta1_upper, double y_prev, double f_prev,
                              double d_prev) noexcept {
    return 1.0 + (y_prev < 0 ? -y_prev : y_prev) + (f_prev < 0 ? -f_prev : f_prev) +
           beta1_upper * d_prev;
}

/**
 * Run the forecaster over y. f[0] = f0, d[0] = d0 and, for t >= 1,
 * f[t] = step(y[t-1], f[t-1]). Throws std::invalid_argument on non-finite
 * input or d0 < 1.
 */
ForecastTrace run(const PredictionRule& rule, std::span<const double> y, double f0, double d0);

/**
 * Simulate the companion chain (H_t, f_t, d_t) jointly with Y_t from
 * (spec.h0, spec.y0, f0 = space default, d0 = 1). Uses the same innovation
 * stream as simulate(spec, t_total, seed), so the result coincides with
 * simulate() followed by run().
 */
CompanionTrace companion_state(const DgpSpec& spec, const PredictionRule& rule,
                               std::size_t t_total, std::uint64_t seed);

/// Breakpoints at the empirical j/K quantiles of the pilot observations.
Partition default_partition(const SimPath& pilot, int k, int r_m, YSpace space);

}  // namespace pderm

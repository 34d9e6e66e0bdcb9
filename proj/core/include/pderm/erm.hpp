#pragma once

#include "pderm/dgp.hpp"
#include "pderm/forecaster.hpp"
#include "pderm/loss.hpp"
#include "pderm/optimize.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pderm {

/**
 * In-sample ERM problem. `path.y[0]` is the fixed pre-sample observation Y_0;
 * the in-sample observations are y[1..T]. The out-of-sample horizon is
 * M = ceil(gamma * T).
 */
class ErmProblem {
public:
    /// Checks the loss/space pairing; f0 defaults to the rule-space default.
    static ErmProblem create(SimPath in_sample, std::shared_ptr<const RuleSpace> space, BregmanLoss loss,
                             double gamma, std::optional<double> f0 = std::nullopt,
                             double d0 = RuleSpace::default_d0());

    const SimPath& path() const noexcept { return path_; }
    const RuleSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const RuleSpace>& space_ptr() const noexcept { return space_; }
    const BregmanLoss& loss() const noexcept { return loss_; }
    double f0() const noexcept { return f0_; }
    double d0() const noexcept { return d0_; }
    double gamma() const noexcept { return gamma_; }
    std::size_t T() const noexcept { return path_.y.size() - 1; }
    std::size_t m() const noexcept;
    /// Regime index of y[t] for t = 0..T.
    const std::vector<std::uint32_t>& regimes() const noexcept { return regimes_; }

private:
    ErmProblem() = default;
    SimPath path_;
    std::shared_ptr<const RuleSpace> space_;
    BregmanLoss loss_;
    double f0_ = 0.0;
    double d0_ = 1.0;
    double gamma_ = 0.0;
    std::vector<std::uint32_t> regimes_;
};

/// Sum of losses of a forecast recursion over y[1..n] started from (y[0], f_start).
struct RecursionSum {
    double loss_sum = 0.0;
    /// Forecast for the step after the last observation, i.e. f_{n+1}.
    double f_next = 0.0;
    /// f_n, the forecast used for y[n].
    double f_last = 0.0;
};

/**
 * Shared kernel for every risk computation: for t = 1..n,
 * f_t = alpha0[k] + alpha1[k] y[t-1] + beta1[k] f_{t-1} with k = regime[t-1],
 * accumulating L(target[t], f_t). `target` defaults to y.
 */
RecursionSum recursion_sum(const BregmanLoss& loss, std::span<const double> theta, std::size_t k,
                           std::span<const double> y, std::span<const std::uint32_t> regime, double f_start,
                           std::span<const double> target = {});

/// (1/T) sum_{t=1..T} L(y_t, f_theta,t).
double empirical_risk(const ErmProblem& problem, const PredictionRule& rule);
double empirical_risk(const ErmProblem& problem, std::span<const double> theta);

/// Forecast f_T at the end of the in-sample segment.
double in_sample_final_forecast(const ErmProblem& problem, std::span<const double> theta);

struct OptimizerConfig {
    std::size_t starts = 20;
    std::size_t grid_points = 5;
    /// Best coarse-grid points used as extra starts.
    std::size_t grid_seeds = 3;
    /// Above this many cells the coarse grid is replaced by as many uniform draws.
    std::size_t max_grid = 50000;
    NelderMeadOptions nm{};
    std::uint64_t seed = 1;
};

enum class FitStatus { converged, max_iter, boundary };
std::string to_string(FitStatus s);

struct OptimizerTrace {
    std::size_t starts = 0;
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    double grid_best = 0.0;
    std::vector<double> best_per_start;
};

struct FitResult {
    PredictionRule theta_hat;
    double objective = 0.0;
    OptimizerTrace trace;
    FitStatus status = FitStatus::converged;
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, OptimizerTrace trace);
    OptimizerTrace trace;
};

/**
 * Multi-start box-projected Nelder-Mead minimisation of the empirical risk,
 * seeded by the best points of a coarse grid. Ties keep the first rule found
 * in scan order (grid seeds, then uniform starts).
 */
FitResult fit(const ErmProblem& problem, const OptimizerConfig& cfg = {});

// ---------------------------------------------------------------------------
// Out-of-sample risk
// ---------------------------------------------------------------------------

enum class RiskKind { realized_oos, latent_conditioned_mc };
std::string to_string(RiskKind k);

struct RiskEstimate {
    double value = 0.0;
    double std_error = 0.0;
    RiskKind kind = RiskKind::realized_oos;
    std::size_t n_mc = 1;
};

/**
 * (1/m) sum_{t=T+1..T+m} L(y_t, f_t) on the realised continuation
 * `oos` = (y_{T+1}, ..., y_{T+m}), with the forecaster carried over from the
 * in-sample run. The standard error is the sample standard deviation over
 * sqrt(m) and ignores serial dependence.
 */
RiskEstimate oos_risk_realized(const ErmProblem& problem, const PredictionRule& rule, const SimPath& oos);

/// State of the generating simulation at the end of the in-sample segment.
struct LatentState {
    double h = 0.0;
    double y = 0.0;
    double f = 0.0;
    double d = 1.0;
};

/// Which series the continuation losses are scored against.
enum class Target { observed, hidden };

/**
 * n_mc simulated continuations of length m from a latent state. Continuation j
 * uses seed derive_seed(seed, j), so every rule scored on one set sees the same
 * futures (common random numbers).
 */
class ContinuationSet {
public:
    ContinuationSet(const DgpSpec& spec, DgpState from, std::size_t n_mc, std::size_t horizon,
                    std::uint64_t seed, const Partition& partition);

    std::size_t size() const noexcept { return n_mc_; }
    std::size_t horizon() const noexcept { return horizon_; }
    /// Row j holds (y_T, y_{T+1}, ..., y_{T+m}) of continuation j.
    std::span<const double> y(std::size_t j) const;
    std::span<const double> h(std::size_t j) const;

    /// Average loss (1/m) sum L(target, f) per continuation, forecaster started at f_T.
    std::vector<double> per_path(const BregmanLoss& loss, std::span<const double> theta, double f_T,
                                 Target target = Target::observed) const;

    RiskEstimate risk(const BregmanLoss& loss, std::span<const double> theta, double f_T,
                      Target target = Target::observed) const;

private:
    std::size_t n_mc_, horizon_, k_;
    std::vector<double> y_, h_;
    std::vector<std::uint32_t> regime_;
};

/// Mean and standard error (sd / sqrt(n)) of a sample.
RiskEstimate summarize(std::span<const double> values, RiskKind kind);

/**
 * Latent-state-conditioned Monte Carlo estimate of the out-of-sample risk:
 * the average of (1/m) sum L(Y, f) over n_mc simulated continuations of length
 * m from (latent.h, latent.y), with the forecaster started at latent.f.
 */
RiskEstimate oos_risk_mc(const ErmProblem& problem, const DgpSpec& spec, const PredictionRule& rule,
                         const LatentState& latent, std::size_t n_mc, std::size_t horizon,
                         std::uint64_t seed);

struct ExcessRiskConfig {
    std::size_t n_mc = 50;
    std::size_t fine_grid_points = 7;
    std::size_t max_grid = 50000;
    /// Reference minimisations of the Monte Carlo risk: from theta_hat and from
    /// the best `ref_starts - 1` fine-grid rules.
    std::size_t ref_starts = 3;
    NelderMeadOptions nm{};
    std::uint64_t seed = 7;
};

struct ExcessRisk {
    double excess = 0.0;
    double risk_hat = 0.0;
    double risk_ref = 0.0;
    /// Standard error of the paired difference across continuations.
    double std_error = 0.0;
    std::vector<double> reference_theta;
    std::size_t reference_size = 0;
};

/**
 * R(theta_hat) - min over a reference set of R(theta), both estimated on one
 * ContinuationSet drawn from `latent`. The reference set contains theta_hat,
 * a fine grid and Nelder-Mead minimisers of the Monte Carlo risk, so the
 * returned excess is >= 0 by construction.
 */
ExcessRisk excess_risk(const ErmProblem& problem, const DgpSpec& spec, const PredictionRule& theta_hat,
                       const DgpState& latent, const ExcessRiskConfig& cfg = {});

}  // namespace pderm

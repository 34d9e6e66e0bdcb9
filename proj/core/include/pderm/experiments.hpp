#pragma once

#include "pderm/dgp.hpp"
#include "pderm/erm.hpp"
#include "pderm/forecaster.hpp"
#include "pderm/loss.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pderm {

// ---------------------------------------------------------------------------
// Rule spaces from configuration
// ---------------------------------------------------------------------------

/// Rule-space settings; unset bounds fall back to y-space defaults.
struct RuleSpaceConfig {
    int k = 1;
    std::optional<Bounds> alpha0;
    std::optional<Bounds> alpha1;
    std::optional<double> beta1_upper;
    /// Explicit breakpoints; when empty and k > 1 they come from a pilot path.
    std::vector<double> breakpoints;
    std::size_t pilot_length = 5000;
};

/// Copy of `cfg` with every unset bound filled in for the given process.
RuleSpaceConfig resolve_rule_config(const DgpSpec& spec, RuleSpaceConfig cfg);

/// Builds the partition (from a stationary pilot path if needed) and the box.
std::shared_ptr<const RuleSpace> build_rule_space(const DgpSpec& spec, const RuleSpaceConfig& cfg,
                                                  std::uint64_t pilot_seed);

// ---------------------------------------------------------------------------
// Rate study
// ---------------------------------------------------------------------------

struct RateStudyConfig {
    std::vector<std::size_t> t_grid{250, 500, 1000, 2000, 4000};
    std::size_t replications = 200;
    std::string preset = "ar1_noise";
    ParamMap params;
    LossKind loss = LossKind::square;
    RuleSpaceConfig rule;
    double gamma = 0.25;
    std::size_t n_mc = 50;
    /// Per-unit seeds are derived from master_seed; the seed fields of these
    /// two configs are ignored.
    OptimizerConfig optimizer;
    ExcessRiskConfig excess;
    std::uint64_t master_seed = 1;
    std::size_t threads = 0;
    /// Allows grids shorter than 3 levels and fewer than 50 replications.
    bool smoke = false;

    /// Throws std::invalid_argument when the grid or replication count is unusable.
    void validate() const;
};

struct RateStudyRow {
    std::size_t T = 0;
    std::size_t replication = 0;
    bool ok = false;
    std::string error;
    double excess = 0.0;
    double excess_se = 0.0;
    double risk_hat = 0.0;
    double risk_ref = 0.0;
    double objective = 0.0;
    /// Standard deviation of the in-sample losses under theta_hat.
    double loss_sd = 0.0;
    std::vector<double> theta_hat;
    FitStatus status = FitStatus::converged;
};

struct RateStudyLevel {
    std::size_t T = 0;
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::size_t n_boundary = 0;
};

struct RateStudyReport {
    std::vector<RateStudyRow> rows;
    std::vector<RateStudyLevel> levels;
    /// True when some median excess is not positive, so no log-log fit exists.
    bool degenerate = false;
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
    /// Adjacent grid levels where the median excess increases.
    std::size_t inversions = 0;
    /// Median over replications at the largest T of the in-sample loss sd.
    double sigma_hat = 0.0;
    double runtime_seconds = 0.0;
};

class StudyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * For every T and replication: simulate a stationary path, fit the ERM on
 * y[0..T], and estimate the excess risk from the latent state at T with common
 * random numbers. Medians per T are regressed on log T. Throws StudyError when
 * more than 5% of the units fail.
 */
RateStudyReport run_rate_study(const RateStudyConfig& cfg);

// ---------------------------------------------------------------------------
// Applications
// ---------------------------------------------------------------------------

enum class ApplicationKind { ar1_kalman, sv_qmle, rv_latent };
std::string to_string(ApplicationKind kind);
ApplicationKind parse_application_kind(const std::string& name);

struct ApplicationConfig {
    ApplicationKind kind = ApplicationKind::ar1_kalman;
    ParamMap params;
    LossKind loss = LossKind::square;
    RuleSpaceConfig rule;
    std::size_t t = 4000;
    std::size_t replications = 50;
    double gamma = 0.25;
    std::size_t n_mc = 100;
    /// Size of the theta-grid used by the affinity and risk-shift probes.
    std::size_t grid_points = 20;
    OptimizerConfig optimizer;
    std::uint64_t master_seed = 1;
    std::size_t threads = 0;
};

/// Defaults used by the acceptance suite for each application.
ApplicationConfig default_application_config(ApplicationKind kind);

/// Name of the process preset an application runs on.
std::string application_preset(ApplicationKind kind);

struct KalmanRule {
    double prior_variance = 0.0;
    double gain = 0.0;
    /// (alpha0, alpha1, beta1) of the equivalent forecaster.
    std::array<double, 3> theta{};
    std::size_t iterations = 0;
};

/**
 * Steady-state Kalman predictor of H_{t+1} for the AR(1)-plus-noise model,
 * from the scalar Riccati iteration P <- rho^2 P sigma_y^2 / (P + sigma_y^2) + sigma_h^2.
 */
KalmanRule steady_state_kalman(double rho, double mu_h, double sigma_h, double sigma_y);

struct Ar1KalmanRep {
    std::vector<double> theta_hat;
    FitStatus status = FitStatus::converged;
    double risk_hat = 0.0;
    double risk_kalman = 0.0;
    double abs_diff = 0.0;
    /// Risk of the Kalman rule with alpha1 raised by 0.2.
    double risk_perturbed = 0.0;
};

struct Ar1KalmanReport {
    KalmanRule kalman;
    double var_y = 0.0;
    double threshold = 0.0;
    std::vector<Ar1KalmanRep> reps;
    double median_abs_diff = 0.0;
    /// Median over replications of |theta_hat - theta_kalman| per coordinate.
    std::array<double, 3> median_coord_diff{};
    double perturbed_worse_fraction = 0.0;
    /// Largest (R_kalman - R_grid) / se over the coarse grid on replication 0.
    double grid_max_advantage_z = 0.0;
    std::size_t grid_size = 0;
    bool risk_ok = false;
    bool coords_ok = false;
    bool grid_ok = false;
};

struct SvQmleRep {
    std::vector<double> theta_erm;
    std::vector<double> theta_qmle;
    double sup_diff = 0.0;
    double erm_objective = 0.0;
    /// Gaussian negative log-likelihood of the returns divided by T.
    double qmle_objective = 0.0;
    bool qmle_converged = false;
    double affinity_mean = 0.0;
    double affinity_variance = 0.0;
};

struct SvQmleReport {
    std::vector<SvQmleRep> reps;
    double agree_fraction = 0.0;
    /// Largest affinity_variance / affinity_mean^2 over replications.
    double max_affinity_ratio = 0.0;
    bool affinity_ok = false;
    bool argmin_ok = false;
};

/// GARCH(1,1) Gaussian negative log-likelihood of the returns, divided by T,
/// with its gradient in (omega, alpha, beta). sigma2_0 is fixed at f0.
double garch_nll(std::span<const double> returns, double f0, std::span<const double> theta,
                 std::span<double> grad);

struct RvLatentReport {
    std::vector<std::vector<double>> grid;
    /// Mean of R_Vol(theta) - R(theta) per grid rule and its standard error.
    std::vector<double> shift_mean;
    std::vector<double> shift_se;
    double slope_mean = 0.0;
    double slope_se = 0.0;
    double t_ratio = 0.0;
    std::vector<double> theta_hat;
    FitStatus status = FitStatus::converged;
    double risk_hat = 0.0;
    double risk_vol_hat = 0.0;
    double excess = 0.0;
    double excess_vol = 0.0;
    bool shift_ok = false;
};

using ApplicationReport = std::variant<Ar1KalmanReport, SvQmleReport, RvLatentReport>;

/// Throws PairingError when the loss does not suit the application.
ApplicationReport run_application(const ApplicationConfig& cfg);

// ---------------------------------------------------------------------------
// Tracking-error view of the forecaster
// ---------------------------------------------------------------------------

struct TrackingCheck {
    std::array<double, 3> w{};
    double f_bar = 0.0;
    std::size_t steps = 0;
    /// max_t |closed form - numeric argmin of Q_t|.
    double residual = 0.0;
    /// max_t variance over an f-grid of Q_t(f) - w2 * kernel_t(f); NaN when w2 = 0.
    double kernel_variance = 0.0;
    std::vector<double> forecasts;
};

/**
 * For t = 1..n, minimise Q_t(f) = w1 L(f_bar, f) + w2 L(y[t-1], f) + w3 L(f_{t-1}, f)
 * numerically and compare with w1 f_bar + w2 y[t-1] + w3 f_{t-1}. With
 * f_0 = f_bar, also compares Q_t with the exponential-kernel sum
 * sum_i k((x_t - x_{t-i}) / h) L(y[t-i-1], f) + lambda L(f_bar, f),
 * k(u) = exp(u) 1{u <= 0}, h = 1 / ln w3, lambda = 1/w2 - sum_{i=1..t} w3^{i-1}.
 */
TrackingCheck check_tracking_equivalence(LossKind kind, std::array<double, 3> w, double f_bar,
                                         std::span<const double> y, std::size_t f_grid_points = 25);

// ---------------------------------------------------------------------------
// Diagnostics of the companion chain
// ---------------------------------------------------------------------------

struct DiagnosticsConfig {
    std::size_t t_total = 100000;
    std::size_t lags = 50;
    /// Points per coordinate of the interior grid for the lag-10 probe.
    std::size_t theta_grid_points = 3;
    LossKind loss = LossKind::square;
    std::uint64_t seed = 1;
};

struct MomentRow {
    std::string series;
    int order = 0;
    double seed_a = 0.0;
    double seed_b = 0.0;
    double ratio = 0.0;
};

struct AcfSummary {
    std::vector<double> acf;
    /// Least-squares slope of log |acf| on the lag.
    double decay_slope = 0.0;
    /// Envelope C rho^l with rho = exp(decay_slope) and the smallest C covering every lag.
    double envelope_c = 0.0;
    double envelope_rho = 0.0;
};

struct DiagnosticsReport {
    std::size_t t_total = 0;
    std::vector<MomentRow> moments;
    AcfSummary loss_acf;
    AcfSummary f_acf;
    AcfSummary d_acf;
    double band = 0.0;
    std::size_t lags_outside_band = 0;
    double max_lag10_acf = 0.0;
    std::size_t grid_rules = 0;
    bool moments_ok = false;
    bool decay_ok = false;
    std::vector<std::string> failures;
    std::string note;
};

/**
 * Moments of |Y|, |H|, |f| and d up to order 2 r_m on two seeds, loss-process
 * autocorrelations with a log-linear decay fit, and the largest lag-10 loss
 * autocorrelation over a grid of rules.
 */
DiagnosticsReport run_diagnostics(const DgpSpec& spec, const PredictionRule& rule, const DiagnosticsConfig& cfg);

}  // namespace pderm

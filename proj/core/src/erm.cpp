#include "pderm/erm.hpp"

#include "pderm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pderm {

std::string to_string(FitStatus s) {
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iter: return "max-iter";
        case FitStatus::boundary: return "boundary";
    }
    return "?";
}

std::string to_string(RiskKind k) {
    return k == RiskKind::realized_oos ? "realized_oos" : "latent_conditioned_mc";
}

FitError::FitError(const std::string& what, OptimizerTrace trace_)
    : std::runtime_error(what), trace(std::move(trace_)) {}

namespace {

std::vector<std::uint32_t> regimes_of(const Partition& p, std::span<const double> y) {
    std::vector<std::uint32_t> r(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) r[t] = static_cast<std::uint32_t>(p.regime_of(y[t]));
    return r;
}

}  // namespace

ErmProblem ErmProblem::create(SimPath in_sample, std::shared_ptr<const RuleSpace> space, BregmanLoss loss,
                              double gamma, std::optional<double> f0, double d0) {
    if (!space) throw std::invalid_argument("ErmProblem needs a rule space");
    if (in_sample.y.size() < 2) throw std::invalid_argument("ErmProblem needs T >= 1 in-sample observations");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be > 0");
    if (!(d0 >= 1.0)) throw std::invalid_argument("d0 must be >= 1");
    check_pairing(loss, space->space(), *space);
    for (std::size_t t = 0; t < in_sample.y.size(); ++t) {
        const double v = in_sample.y[t];
        if (!std::isfinite(v)) throw std::invalid_argument("in-sample path has a non-finite value");
        if (t > 0 && !loss.in_domain(v))
            throw DomainError("y[" + std::to_string(t) + "]", v, "is outside the loss domain");
    }
    ErmProblem p;
    p.f0_ = f0.value_or(space->default_f0());
    p.d0_ = d0;
    p.gamma_ = gamma;
    p.regimes_ = regimes_of(space->partition(), in_sample.y);
    p.path_ = std::move(in_sample);
    p.space_ = std::move(space);
    p.loss_ = loss;
    return p;
}

std::size_t ErmProblem::m() const noexcept {
    return static_cast<std::size_t>(std::ceil(gamma_ * static_cast<double>(T())));
}

RecursionSum recursion_sum(const BregmanLoss& loss, std::span<const double> theta, std::size_t k,
                           std::span<const double> y, std::span<const std::uint32_t> regime, double f_start,
                           std::span<const double> target) {
    const double* a0 = theta.data();
    const double* a1 = a0 + k;
    const double* b1 = a0 + 2 * k;
    const double* tg = target.empty() ? y.data() : target.data();
    const std::uint32_t* rg = regime.data();
    const std::size_t n = y.empty() ? 0 : y.size() - 1;
    return dispatch_loss(loss.kind(), [&](auto kind) {
        constexpr LossKind K = decltype(kind)::value;
        RecursionSum out;
        double f = f_start;
        double sum = 0.0;
        for (std::size_t t = 1; t <= n; ++t) {
            const std::uint32_t r = rg[t - 1];
            f = a0[r] + a1[r] * y[t - 1] + b1[r] * f;
            sum += loss_detail::value<K>(tg[t], f);
        }
        out.loss_sum = sum;
        out.f_last = f;
        if (!y.empty()) {
            const std::uint32_t r = rg[n];
            out.f_next = a0[r] + a1[r] * y[n] + b1[r] * f;
        }
        return out;
    });
}

double empirical_risk(const ErmProblem& problem, std::span<const double> theta) {
    const auto s = recursion_sum(problem.loss(), theta, problem.space().regimes(), problem.path().y,
                                 problem.regimes(), problem.f0());
    return s.loss_sum / static_cast<double>(problem.T());
}

double empirical_risk(const ErmProblem& problem, const PredictionRule& rule) {
    const auto theta = rule.to_vector();
    return empirical_risk(problem, theta);
}

double in_sample_final_forecast(const ErmProblem& problem, std::span<const double> theta) {
    return recursion_sum(problem.loss(), theta, problem.space().regimes(), problem.path().y, problem.regimes(),
                         problem.f0())
        .f_last;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> candidate_grid(std::span<const double> lo, std::span<const double> hi,
                                                std::size_t points, std::size_t max_grid, std::uint64_t seed) {
    double cells = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) cells *= static_cast<double>(points);
    if (cells <= static_cast<double>(max_grid)) return box_grid(lo, hi, points);
    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<std::vector<double>> pts(max_grid, std::vector<double>(lo.size()));
    for (auto& x : pts)
        for (std::size_t i = 0; i < lo.size(); ++i) x[i] = lo[i] + u01(rng) * (hi[i] - lo[i]);
    return pts;
}

bool near_boundary(std::span<const double> x, std::span<const double> lo, std::span<const double> hi) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] - lo[i] < 1e-6 || hi[i] - x[i] < 1e-6) return true;
    return false;
}

/// Indices of the `count` smallest values, ties resolved by index.
std::vector<std::size_t> best_indices(const std::vector<double>& values, std::size_t count) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return values[a] < values[b] || (values[a] == values[b] && a < b);
                      });
    idx.resize(count);
    return idx;
}

}  // namespace

FitResult fit(const ErmProblem& problem, const OptimizerConfig& cfg) {
    const auto lo = problem.space().lower();
    const auto hi = problem.space().upper();
    OptimizerTrace trace;

    Objective objective = [&](std::span<const double> theta) { return empirical_risk(problem, theta); };

    const auto grid = candidate_grid(lo, hi, std::max<std::size_t>(cfg.grid_points, 2), cfg.max_grid,
                                     derive_seed(cfg.seed, 0));
    std::vector<double> grid_values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) grid_values[i] = objective(grid[i]);
    trace.evaluations += grid.size();
    const auto seeds = best_indices(grid_values, cfg.grid_seeds);
    trace.grid_best = seeds.empty() ? std::numeric_limits<double>::infinity() : grid_values[seeds.front()];

    std::vector<std::vector<double>> starts;
    for (std::size_t i : seeds) starts.push_back(grid[i]);
    Rng rng(derive_seed(cfg.seed, 1));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t s = 0; s < cfg.starts; ++s) {
        std::vector<double> x(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) x[i] = lo[i] + u01(rng) * (hi[i] - lo[i]);
        starts.push_back(std::move(x));
    }

    std::vector<double> best_x;
    double best_f = std::numeric_limits<double>::infinity();
    bool best_converged = false;
    for (const auto& x0 : starts) {
        const auto r = nelder_mead_box(objective, x0, lo, hi, cfg.nm);
        trace.evaluations += r.evals;
        trace.iterations += r.iterations;
        trace.best_per_start.push_back(r.fx);
        if (r.fx < best_f) {
            best_f = r.fx;
            best_x = r.x;
            best_converged = r.converged;
        }
    }
    trace.starts = starts.size();
    // never lose to the coarse grid
    if (!seeds.empty() && grid_values[seeds.front()] < best_f) {
        best_f = grid_values[seeds.front()];
        best_x = grid[seeds.front()];
    }
    if (best_x.empty() || !std::isfinite(best_f))
        throw FitError("ERM optimisation failed: no finite objective after all starts", trace);

    FitResult res{PredictionRule::from_vector(problem.space_ptr(), best_x), objective(best_x), std::move(trace),
                  FitStatus::converged};
    if (near_boundary(best_x, lo, hi)) res.status = FitStatus::boundary;
    else if (!best_converged) res.status = FitStatus::max_iter;
    return res;
}

// ---------------------------------------------------------------------------

RiskEstimate summarize(std::span<const double> values, RiskKind kind) {
    RiskEstimate r;
    r.kind = kind;
    r.n_mc = values.size();
    if (values.empty()) return r;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    r.value = mean;
    r.std_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return r;
}

RiskEstimate oos_risk_realized(const ErmProblem& problem, const PredictionRule& rule, const SimPath& oos) {
    if (oos.y.size() != problem.m())
        throw std::invalid_argument("oos segment length " + std::to_string(oos.y.size()) +
                                    " does not match M=" + std::to_string(problem.m()));
    const auto theta = rule.to_vector();
    double f = in_sample_final_forecast(problem, theta);
    double y_prev = problem.path().y.back();
    std::vector<double> losses;
    losses.reserve(oos.y.size());
    for (double y : oos.y) {
        f = step(rule, y_prev, f);
        losses.push_back(problem.loss().eval(y, f));
        y_prev = y;
    }
    auto r = summarize(losses, RiskKind::realized_oos);
    r.n_mc = 1;
    return r;
}

ContinuationSet::ContinuationSet(const DgpSpec& spec, DgpState from, std::size_t n_mc, std::size_t horizon,
                                 std::uint64_t seed, const Partition& partition)
    : n_mc_(n_mc), horizon_(horizon), k_(partition.regimes()) {
    if (n_mc == 0) throw std::invalid_argument("ContinuationSet needs n_mc >= 1");
    if (horizon == 0) throw std::invalid_argument("ContinuationSet needs horizon >= 1");
    const std::size_t row = horizon + 1;
    y_.reserve(n_mc * row);
    h_.reserve(n_mc * row);
    regime_.reserve(n_mc * row);
    for (std::size_t j = 0; j < n_mc; ++j) {
        const auto path = continue_path(spec, from, horizon, derive_seed(seed, j));
        y_.insert(y_.end(), path.y.begin(), path.y.end());
        h_.insert(h_.end(), path.h.begin(), path.h.end());
        for (double v : path.y) regime_.push_back(static_cast<std::uint32_t>(partition.regime_of(v)));
    }
}

std::span<const double> ContinuationSet::y(std::size_t j) const {
    return {y_.data() + j * (horizon_ + 1), horizon_ + 1};
}

std::span<const double> ContinuationSet::h(std::size_t j) const {
    return {h_.data() + j * (horizon_ + 1), horizon_ + 1};
}

std::vector<double> ContinuationSet::per_path(const BregmanLoss& loss, std::span<const double> theta, double f_T,
                                              Target target) const {
    if (theta.size() != 3 * k_) throw std::invalid_argument("ContinuationSet: parameter dimension mismatch");
    std::vector<double> out(n_mc_);
    const std::size_t row = horizon_ + 1;
    for (std::size_t j = 0; j < n_mc_; ++j) {
        const std::span<const std::uint32_t> rg(regime_.data() + j * row, row);
        const auto s = recursion_sum(loss, theta, k_, y(j), rg, f_T,
                                     target == Target::hidden ? h(j) : std::span<const double>{});
        out[j] = s.loss_sum / static_cast<double>(horizon_);
    }
    return out;
}

RiskEstimate ContinuationSet::risk(const BregmanLoss& loss, std::span<const double> theta, double f_T,
                                   Target target) const {
    const auto v = per_path(loss, theta, f_T, target);
    return summarize(v, RiskKind::latent_conditioned_mc);
}

RiskEstimate oos_risk_mc(const ErmProblem& problem, const DgpSpec& spec, const PredictionRule& rule,
                         const LatentState& latent, std::size_t n_mc, std::size_t horizon, std::uint64_t seed) {
    const ContinuationSet cs(spec, {latent.h, latent.y}, n_mc, horizon, seed, problem.space().partition());
    const auto theta = rule.to_vector();
    return cs.risk(problem.loss(), theta, latent.f);
}

ExcessRisk excess_risk(const ErmProblem& problem, const DgpSpec& spec, const PredictionRule& theta_hat,
                       const DgpState& latent, const ExcessRiskConfig& cfg) {
    const ContinuationSet cs(spec, latent, cfg.n_mc, problem.m(), cfg.seed, problem.space().partition());
    const auto lo = problem.space().lower();
    const auto hi = problem.space().upper();

    Objective mc_risk = [&](std::span<const double> theta) {
        const double f_T = in_sample_final_forecast(problem, theta);
        const auto v = cs.per_path(problem.loss(), theta, f_T);
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };

    const auto hat = theta_hat.to_vector();
    const double r_hat = mc_risk(hat);
    std::vector<double> best = hat;
    double best_r = r_hat;
    std::size_t ref_size = 1;

    const auto grid = candidate_grid(lo, hi, std::max<std::size_t>(cfg.fine_grid_points, 2), cfg.max_grid,
                                     derive_seed(cfg.seed, 1u << 20));
    std::vector<double> grid_r(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid_r[i] = mc_risk(grid[i]);
        if (grid_r[i] < best_r) {
            best_r = grid_r[i];
            best = grid[i];
        }
    }
    ref_size += grid.size();

    std::vector<std::vector<double>> starts{hat};
    if (cfg.ref_starts > 1)
        for (std::size_t i : best_indices(grid_r, cfg.ref_starts - 1)) starts.push_back(grid[i]);
    for (const auto& x0 : starts) {
        const auto r = nelder_mead_box(mc_risk, x0, lo, hi, cfg.nm);
        ++ref_size;
        if (r.fx < best_r) {
            best_r = r.fx;
            best = r.x;
        }
    }

    ExcessRisk out;
    out.risk_hat = r_hat;
    out.risk_ref = best_r;
    out.excess = r_hat - best_r;
    out.reference_theta = best;
    out.reference_size = ref_size;
    const auto a = cs.per_path(problem.loss(), hat, in_sample_final_forecast(problem, hat));
    const auto b = cs.per_path(problem.loss(), best, in_sample_final_forecast(problem, best));
    std::vector<double> diff(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) diff[j] = a[j] - b[j];
    out.std_error = summarize(diff, RiskKind::latent_conditioned_mc).std_error;
    return out;
}

}  // namespace pderm

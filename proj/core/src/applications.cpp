#include "pderm/experiments.hpp"

#include "pderm/parallel.hpp"
#include "pderm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pderm {

std::string to_string(ApplicationKind kind) {
    switch (kind) {
        case ApplicationKind::ar1_kalman: return "ar1_kalman";
        case ApplicationKind::sv_qmle: return "sv_qmle";
        case ApplicationKind::rv_latent: return "rv_latent";
    }
    return "?";
}

ApplicationKind parse_application_kind(const std::string& name) {
    for (auto k : {ApplicationKind::ar1_kalman, ApplicationKind::sv_qmle, ApplicationKind::rv_latent})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown application '" + name + "'");
}

std::string application_preset(ApplicationKind kind) {
    switch (kind) {
        case ApplicationKind::ar1_kalman: return "ar1_noise";
        case ApplicationKind::sv_qmle: return "sv_returns";
        case ApplicationKind::rv_latent: return "sv_realized_vol";
    }
    return "?";
}

ApplicationConfig default_application_config(ApplicationKind kind) {
    ApplicationConfig c;
    c.kind = kind;
    switch (kind) {
        case ApplicationKind::ar1_kalman:
            c.loss = LossKind::square;
            c.t = 4000;
            c.replications = 50;
            c.n_mc = 100;
            break;
        case ApplicationKind::sv_qmle:
            c.loss = LossKind::gamma_qlike;
            c.t = 4000;
            c.replications = 20;
            c.grid_points = 20;
            break;
        case ApplicationKind::rv_latent:
            c.loss = LossKind::gamma_qlike;
            c.t = 2000;
            c.replications = 1;
            c.n_mc = 500;
            c.grid_points = 10;
            break;
    }
    return c;
}

KalmanRule steady_state_kalman(double rho, double mu_h, double sigma_h, double sigma_y) {
    if (!(rho >= 0.0 && rho < 1.0) || !(sigma_h >= 0.0) || !(sigma_y >= 0.0))
        throw std::invalid_argument("steady_state_kalman: parameters out of range");
    KalmanRule k;
    const double qy = sigma_y * sigma_y, qh = sigma_h * sigma_h;
    double p = qh + rho * rho * qh;
    if (qy == 0.0) {
        p = qh;
    } else {
        for (k.iterations = 1; k.iterations <= 100000; ++k.iterations) {
            const double next = rho * rho * p * qy / (p + qy) + qh;
            const bool done = std::fabs(next - p) <= 1e-15 * (1.0 + p);
            p = next;
            if (done) break;
        }
    }
    k.prior_variance = p;
    k.gain = p + qy > 0.0 ? p / (p + qy) : 1.0;
    k.theta = {mu_h * (1.0 - rho), rho * k.gain, rho * (1.0 - k.gain)};
    return k;
}

namespace {

std::vector<double> replicate_theta(const std::array<double, 3>& theta, std::size_t k) {
    std::vector<double> v;
    for (double c : theta) v.insert(v.end(), k, c);
    return v;
}

double mean_of(const std::vector<double>& v) { return stats::mean(v); }

std::vector<double> paired(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

double se_of(const std::vector<double>& v) {
    return v.size() > 1 ? stats::stddev(v) / std::sqrt(static_cast<double>(v.size())) : 0.0;
}

// ---------------------------------------------------------------------------

Ar1KalmanReport run_ar1_kalman(const ApplicationConfig& cfg) {
    if (cfg.loss != LossKind::square)
        throw PairingError("ar1_kalman compares mean-square forecasts and needs the square loss");
    ParamMap defaults = preset_defaults("ar1_noise");
    for (const auto& [k, v] : cfg.params) defaults[k] = v;
    const auto spec = preset("ar1_noise", cfg.params);
    const BregmanLoss loss(cfg.loss);
    const auto space = build_rule_space(spec, cfg.rule, derive_seed(cfg.master_seed, 0));
    check_pairing(loss, spec.y_space, *space);

    const double rho = defaults.at("rho"), sh = defaults.at("sigma_h"), sy = defaults.at("sigma_y");
    Ar1KalmanReport rep;
    rep.kalman = steady_state_kalman(rho, defaults.at("mu_h"), sh, sy);
    rep.var_y = sh * sh / (1.0 - rho * rho) + sy * sy;
    rep.threshold = 0.05 * rep.var_y;
    const auto theta_k = replicate_theta(rep.kalman.theta, space->regimes());
    auto theta_p = theta_k;
    for (std::size_t i = 0; i < space->regimes(); ++i) theta_p[space->regimes() + i] += 0.2;

    rep.reps.resize(cfg.replications);
    std::vector<double> grid_adv(1, -std::numeric_limits<double>::infinity());
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
        const std::uint64_t u = derive_seed(cfg.master_seed, r + 1);
        auto path = simulate_stationary(spec, cfg.t + 1, derive_seed(u, 0));
        const DgpState latent{path.h[cfg.t], path.y[cfg.t]};
        const auto problem = ErmProblem::create(std::move(path), space, loss, cfg.gamma);
        auto opt = cfg.optimizer;
        opt.seed = derive_seed(u, 1);
        const auto res = fit(problem, opt);
        const ContinuationSet cs(spec, latent, cfg.n_mc, problem.m(), derive_seed(u, 2), space->partition());

        auto per_path = [&](const std::vector<double>& th) {
            return cs.per_path(loss, th, in_sample_final_forecast(problem, th));
        };
        const auto hat = res.theta_hat.to_vector();
        const auto a = per_path(hat), b = per_path(theta_k), c = per_path(theta_p);
        auto& out = rep.reps[r];
        out.theta_hat = hat;
        out.status = res.status;
        out.risk_hat = mean_of(a);
        out.risk_kalman = mean_of(b);
        out.risk_perturbed = mean_of(c);
        out.abs_diff = std::fabs(out.risk_hat - out.risk_kalman);

        if (r == 0) {
            const auto grid = box_grid(space->lower(), space->upper(), std::max<std::size_t>(cfg.optimizer.grid_points, 2));
            const double se_k = se_of(b);
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& g : grid) {
                const auto v = per_path(g);
                const double combined = std::sqrt(se_k * se_k + se_of(v) * se_of(v));
                const double adv = out.risk_kalman - mean_of(v);
                best = std::max(best, combined > 0.0 ? adv / combined
                                                     : (adv > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
            }
            grid_adv[0] = best;
            rep.grid_size = grid.size();
        }
    });

    std::vector<double> diffs;
    std::array<std::vector<double>, 3> coord;
    std::size_t worse = 0;
    for (const auto& r : rep.reps) {
        diffs.push_back(r.abs_diff);
        for (std::size_t c = 0; c < 3; ++c)
            coord[c].push_back(std::fabs(r.theta_hat[c * space->regimes()] - rep.kalman.theta[c]));
        worse += r.risk_kalman <= r.risk_perturbed ? 1 : 0;
    }
    rep.median_abs_diff = stats::median(diffs);
    for (std::size_t c = 0; c < 3; ++c) rep.median_coord_diff[c] = stats::median(coord[c]);
    rep.perturbed_worse_fraction = static_cast<double>(worse) / static_cast<double>(rep.reps.size());
    rep.grid_max_advantage_z = grid_adv[0];
    rep.risk_ok = rep.median_abs_diff <= rep.threshold;
    rep.coords_ok = rep.median_coord_diff[1] <= 0.1 && rep.median_coord_diff[2] <= 0.1;
    rep.grid_ok = rep.grid_max_advantage_z <= 3.0;
    return rep;
}

// ---------------------------------------------------------------------------

}  // namespace

double garch_nll(std::span<const double> r, double f0, std::span<const double> theta, std::span<double> grad) {
    if (r.size() < 2) throw std::invalid_argument("garch_nll: need at least one in-sample return");
    const double w = theta[0], a = theta[1], b = theta[2];
    const std::size_t T = r.size() - 1;
    double s2 = f0, dw = 0.0, da = 0.0, db = 0.0;
    double nll = 0.0, gw = 0.0, ga = 0.0, gb = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
        const double r2 = r[t - 1] * r[t - 1];
        // derivatives use the previous variance, so update them first
        dw = 1.0 + b * dw;
        da = r2 + b * da;
        db = s2 + b * db;
        s2 = w + a * r2 + b * s2;
        const double x2 = r[t] * r[t];
        nll += std::log(2.0 * std::numbers::pi) + std::log(s2) + x2 / s2;
        const double k = 1.0 / s2 - x2 / (s2 * s2);
        gw += k * dw;
        ga += k * da;
        gb += k * db;
    }
    const double scale = 0.5 / static_cast<double>(T);
    if (!grad.empty()) {
        grad[0] = gw * scale;
        grad[1] = ga * scale;
        grad[2] = gb * scale;
    }
    return nll * scale;
}

namespace {

SvQmleReport run_sv_qmle(const ApplicationConfig& cfg) {
    if (cfg.loss != LossKind::gamma_qlike)
        throw PairingError("sv_qmle needs the gamma_qlike loss on squared returns");
    const auto spec = preset("sv_returns", cfg.params);
    const BregmanLoss loss(cfg.loss);
    const auto space = build_rule_space(spec, cfg.rule, derive_seed(cfg.master_seed, 0));
    if (space->regimes() != 1) throw std::invalid_argument("sv_qmle compares with GARCH(1,1) and needs k=1");
    check_pairing(loss, spec.y_space, *space);
    const auto lo = space->lower(), hi = space->upper();

    SvQmleReport rep;
    rep.reps.resize(cfg.replications);
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t i) {
        const std::uint64_t u = derive_seed(cfg.master_seed, i + 1);
        auto path = simulate_stationary(spec, cfg.t + 1, derive_seed(u, 0));

        // returns r_t = +-sqrt(Y_t) with independent signs
        std::vector<double> returns(path.y.size());
        Rng sign_rng(derive_seed(u, 3));
        std::bernoulli_distribution coin(0.5);
        for (std::size_t t = 0; t < returns.size(); ++t)
            returns[t] = (coin(sign_rng) ? 1.0 : -1.0) * std::sqrt(path.y[t]);

        const auto problem = ErmProblem::create(std::move(path), space, loss, cfg.gamma);
        auto opt = cfg.optimizer;
        opt.seed = derive_seed(u, 1);
        const auto res = fit(problem, opt);

        Gradient nll = [&](std::span<const double> th, std::span<double> g) {
            return garch_nll(returns, problem.f0(), th, g);
        };
        QuasiNewtonResult best;
        best.fx = std::numeric_limits<double>::infinity();
        for (double frac : {0.5, 0.25, 0.75}) {
            std::vector<double> x0(3);
            for (std::size_t c = 0; c < 3; ++c) x0[c] = lo[c] + frac * (hi[c] - lo[c]);
            auto q = quasi_newton_box(nll, x0, lo, hi, {.pg_tol = 1e-9, .max_iter = 2000});
            if (q.fx < best.fx) best = std::move(q);
        }

        auto& out = rep.reps[i];
        out.theta_erm = res.theta_hat.to_vector();
        out.theta_qmle = best.x;
        out.erm_objective = res.objective;
        out.qmle_objective = best.fx;
        out.qmle_converged = best.converged;
        for (std::size_t c = 0; c < 3; ++c)
            out.sup_diff = std::max(out.sup_diff, std::fabs(out.theta_erm[c] - out.theta_qmle[c]));

        Rng grid_rng(derive_seed(u, 4));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::vector<double> diffs;
        for (std::size_t g = 0; g < cfg.grid_points; ++g) {
            std::vector<double> th(3);
            for (std::size_t c = 0; c < 3; ++c) th[c] = lo[c] + u01(grid_rng) * (hi[c] - lo[c]);
            diffs.push_back(empirical_risk(problem, th) - 2.0 * garch_nll(returns, problem.f0(), th, {}));
        }
        out.affinity_mean = stats::mean(diffs);
        out.affinity_variance = stats::variance(diffs);
    });

    std::size_t agree = 0;
    for (const auto& r : rep.reps) {
        agree += r.sup_diff < 1e-4 ? 1 : 0;
        const double ratio = r.affinity_variance / (r.affinity_mean * r.affinity_mean);
        rep.max_affinity_ratio = std::max(rep.max_affinity_ratio, ratio);
    }
    rep.agree_fraction = static_cast<double>(agree) / static_cast<double>(rep.reps.size());
    rep.affinity_ok = rep.max_affinity_ratio < 1e-10;
    rep.argmin_ok = rep.agree_fraction >= 0.95;
    return rep;
}

// ---------------------------------------------------------------------------

RvLatentReport run_rv_latent(const ApplicationConfig& cfg) {
    if (cfg.loss != LossKind::gamma_qlike && cfg.loss != LossKind::square)
        throw PairingError("rv_latent needs the gamma_qlike or square loss");
    if (cfg.grid_points < 3) throw std::invalid_argument("rv_latent needs at least 3 grid rules");
    const auto spec = preset("sv_realized_vol", cfg.params);
    const BregmanLoss loss(cfg.loss);
    const auto space = build_rule_space(spec, cfg.rule, derive_seed(cfg.master_seed, 0));
    check_pairing(loss, spec.y_space, *space);
    const auto lo = space->lower(), hi = space->upper();

    const std::uint64_t u = derive_seed(cfg.master_seed, 1);
    auto path = simulate_stationary(spec, cfg.t + 1, derive_seed(u, 0));
    const DgpState latent{path.h[cfg.t], path.y[cfg.t]};
    const auto problem = ErmProblem::create(std::move(path), space, loss, cfg.gamma);
    auto opt = cfg.optimizer;
    opt.seed = derive_seed(u, 1);
    const auto res = fit(problem, opt);
    const ContinuationSet cs(spec, latent, cfg.n_mc, problem.m(), derive_seed(u, 2), space->partition());

    RvLatentReport rep;
    const std::size_t G = cfg.grid_points;
    for (std::size_t g = 0; g < G; ++g) {
        const double s = 0.2 + 0.6 * static_cast<double>(g) / static_cast<double>(G - 1);
        std::vector<double> th(lo.size());
        for (std::size_t c = 0; c < lo.size(); ++c) th[c] = lo[c] + s * (hi[c] - lo[c]);
        rep.grid.push_back(std::move(th));
    }

    // D[g][j] = R_Vol - R on continuation j
    std::vector<std::vector<double>> D(G);
    for (std::size_t g = 0; g < G; ++g) {
        const double fT = in_sample_final_forecast(problem, rep.grid[g]);
        D[g] = paired(cs.per_path(loss, rep.grid[g], fT, Target::hidden), cs.per_path(loss, rep.grid[g], fT));
        rep.shift_mean.push_back(stats::mean(D[g]));
        rep.shift_se.push_back(se_of(D[g]));
    }
    std::vector<double> index(G), slopes(cfg.n_mc), col(G);
    for (std::size_t g = 0; g < G; ++g) index[g] = static_cast<double>(g);
    for (std::size_t j = 0; j < cfg.n_mc; ++j) {
        for (std::size_t g = 0; g < G; ++g) col[g] = D[g][j];
        slopes[j] = stats::ols(index, col).slope;
    }
    rep.slope_mean = stats::mean(slopes);
    rep.slope_se = se_of(slopes);
    rep.t_ratio = rep.slope_se > 0.0 ? rep.slope_mean / rep.slope_se : 0.0;
    rep.shift_ok = std::fabs(rep.t_ratio) < 3.0;

    // latent-risk optimality of theta_hat
    rep.theta_hat = res.theta_hat.to_vector();
    rep.status = res.status;
    auto risk_of = [&](Target target) {
        return Objective([&, target](std::span<const double> th) {
            return stats::mean(cs.per_path(loss, th, in_sample_final_forecast(problem, th), target));
        });
    };
    for (Target target : {Target::observed, Target::hidden}) {
        const auto f = risk_of(target);
        const double at_hat = f(rep.theta_hat);
        double best = at_hat;
        for (const auto& g : rep.grid) best = std::min(best, f(g));
        best = std::min(best, nelder_mead_box(f, rep.theta_hat, lo, hi, opt.nm).fx);
        if (target == Target::observed) {
            rep.risk_hat = at_hat;
            rep.excess = at_hat - best;
        } else {
            rep.risk_vol_hat = at_hat;
            rep.excess_vol = at_hat - best;
        }
    }
    return rep;
}

}  // namespace

ApplicationReport run_application(const ApplicationConfig& cfg) {
    switch (cfg.kind) {
        case ApplicationKind::ar1_kalman: return run_ar1_kalman(cfg);
        case ApplicationKind::sv_qmle: return run_sv_qmle(cfg);
        case ApplicationKind::rv_latent: return run_rv_latent(cfg);
    }
    throw std::invalid_argument("unknown application");
}

// ---------------------------------------------------------------------------

TrackingCheck check_tracking_equivalence(LossKind kind, std::array<double, 3> w, double f_bar,
                                         std::span<const double> y, std::size_t f_grid_points) {
    const double wsum = w[0] + w[1] + w[2];
    if (w[0] < 0.0 || w[1] < 0.0 || w[2] < 0.0 || std::fabs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("tracking weights must lie in the simplex");
    if (y.empty()) throw std::invalid_argument("tracking check needs a path prefix");
    const BregmanLoss loss(kind);
    if (!loss.in_interior(f_bar)) throw DomainError("f_bar", f_bar, "is outside int(S)");
    for (double v : y)
        if (!loss.in_interior(v)) throw DomainError("y", v, "is outside int(S)");

    TrackingCheck out;
    out.w = w;
    out.f_bar = f_bar;
    out.steps = y.size();
    out.forecasts.assign(y.size() + 1, f_bar);
    const bool kernel = w[1] > 0.0;
    out.kernel_variance = kernel ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    const double log_w3 = std::log(w[2]);  // -inf when w3 = 0

    double lo_all = f_bar, hi_all = f_bar;
    for (double v : y) {
        lo_all = std::min(lo_all, v);
        hi_all = std::max(hi_all, v);
    }
    std::vector<double> f_grid(std::max<std::size_t>(f_grid_points, 2));
    for (std::size_t g = 0; g < f_grid.size(); ++g)
        f_grid[g] = lo_all + (hi_all - lo_all) * static_cast<double>(g) / static_cast<double>(f_grid.size() - 1);

    std::vector<double> diff(f_grid.size());
    for (std::size_t t = 1; t <= y.size(); ++t) {
        const double yp = y[t - 1], fp = out.forecasts[t - 1];
        auto Q = [&](double f) {
            return w[0] * loss.eval(f_bar, f) + w[1] * loss.eval(yp, f) + w[2] * loss.eval(fp, f);
        };
        const double closed = w[0] * f_bar + w[1] * yp + w[2] * fp;
        double a = std::min({f_bar, yp, fp}), b = std::max({f_bar, yp, fp});
        double numeric = a;
        if (b > a) {
            const double pad = 0.05 * (b - a);
            a = kind == LossKind::square || kind == LossKind::nef_ghs ? a - pad : std::max(a - pad, 0.5 * a);
            numeric = minimize_scalar(Q, a, b + pad);
        }
        out.residual = std::max(out.residual, std::fabs(numeric - closed));
        out.forecasts[t] = closed;

        if (kernel) {
            double lambda = 1.0 / w[1];
            double geometric = 1.0;
            for (std::size_t i = 1; i <= t; ++i) {
                lambda -= geometric;
                geometric *= w[2];
            }
            for (std::size_t g = 0; g < f_grid.size(); ++g) {
                const double f = f_grid[g];
                double k_sum = 0.0;
                for (std::size_t i = 0; i < t; ++i) {
                    // k((x_t - x_{t-i}) / h) with h = 1 / ln w3
                    const double u = i == 0 ? 0.0 : static_cast<double>(i) * log_w3;
                    k_sum += std::exp(u) * loss.eval(y[t - i - 1], f);
                }
                diff[g] = Q(f) - w[1] * (k_sum + lambda * loss.eval(f_bar, f));
            }
            out.kernel_variance = std::max(out.kernel_variance, stats::variance(diff));
        }
    }
    return out;
}

}  // namespace pderm

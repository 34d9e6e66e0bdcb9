#include "pderm/experiments.hpp"

#include "pderm/parallel.hpp"
#include "pderm/stats.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace pderm {

RuleSpaceConfig resolve_rule_config(const DgpSpec& spec, RuleSpaceConfig cfg) {
    if (spec.y_space == YSpace::real) {
        if (!cfg.alpha0) cfg.alpha0 = Bounds{-2.0, 2.0};
        if (!cfg.alpha1) cfg.alpha1 = Bounds{0.01, 1.0};
        if (!cfg.beta1_upper) cfg.beta1_upper = 0.95;
    } else {
        if (!cfg.alpha0) cfg.alpha0 = Bounds{0.01, 2.0};
        if (!cfg.alpha1) cfg.alpha1 = Bounds{0.01, 1.0};
        if (!cfg.beta1_upper) cfg.beta1_upper = 0.99;
    }
    return cfg;
}

std::shared_ptr<const RuleSpace> build_rule_space(const DgpSpec& spec, const RuleSpaceConfig& raw,
                                                  std::uint64_t pilot_seed) {
    const auto cfg = resolve_rule_config(spec, raw);
    check_regime_count(cfg.k, spec.r_m);
    Partition partition(spec.y_space);
    if (!cfg.breakpoints.empty()) {
        if (cfg.breakpoints.size() + 1 != static_cast<std::size_t>(cfg.k))
            throw std::invalid_argument("rule: " + std::to_string(cfg.breakpoints.size()) +
                                        " breakpoints do not give k=" + std::to_string(cfg.k) + " regimes");
        partition = Partition::create(cfg.breakpoints, spec.y_space, spec.r_m);
    } else if (cfg.k > 1) {
        const auto pilot = simulate_stationary(spec, cfg.pilot_length, pilot_seed);
        partition = default_partition(pilot, cfg.k, spec.r_m, spec.y_space);
    }
    return RuleSpace::create(*cfg.alpha0, *cfg.alpha1, *cfg.beta1_upper, partition);
}

// ---------------------------------------------------------------------------

void RateStudyConfig::validate() const {
    const std::size_t min_levels = smoke ? 2 : 3;
    const std::size_t min_reps = smoke ? 1 : 50;
    if (t_grid.size() < min_levels)
        throw std::invalid_argument("study: t_grid needs at least " + std::to_string(min_levels) + " levels");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 2) throw std::invalid_argument("study: every T must be >= 2");
        if (i > 0 && t_grid[i] <= t_grid[i - 1]) throw std::invalid_argument("study: t_grid must be strictly increasing");
    }
    if (replications < min_reps)
        throw std::invalid_argument("study: replications must be >= " + std::to_string(min_reps));
    if (!(gamma > 0.0)) throw std::invalid_argument("study: gamma must be > 0");
    if (n_mc == 0) throw std::invalid_argument("study: n_mc must be >= 1");
}

namespace {

RateStudyRow rate_unit(const DgpSpec& spec, const std::shared_ptr<const RuleSpace>& space, const BregmanLoss& loss,
                       const RateStudyConfig& cfg, std::size_t T, std::size_t rep, std::uint64_t unit_seed) {
    RateStudyRow row;
    row.T = T;
    row.replication = rep;
    try {
        auto path = simulate_stationary(spec, T + 1, derive_seed(unit_seed, 0));
        const DgpState latent{path.h[T], path.y[T]};
        const auto problem = ErmProblem::create(std::move(path), space, loss, cfg.gamma);

        auto opt = cfg.optimizer;
        opt.seed = derive_seed(unit_seed, 1);
        const auto res = fit(problem, opt);

        auto ex_cfg = cfg.excess;
        ex_cfg.n_mc = cfg.n_mc;
        ex_cfg.seed = derive_seed(unit_seed, 2);
        const auto ex = excess_risk(problem, spec, res.theta_hat, latent, ex_cfg);

        const auto tr = run(res.theta_hat, problem.path().y, problem.f0(), problem.d0());
        std::vector<double> losses(T);
        for (std::size_t t = 1; t <= T; ++t) losses[t - 1] = loss.eval(problem.path().y[t], tr.f[t]);

        row.theta_hat = res.theta_hat.to_vector();
        row.status = res.status;
        row.objective = res.objective;
        row.excess = ex.excess;
        row.excess_se = ex.std_error;
        row.risk_hat = ex.risk_hat;
        row.risk_ref = ex.risk_ref;
        row.loss_sd = stats::stddev(losses);
        row.ok = std::isfinite(row.excess);
        if (!row.ok) row.error = "non-finite excess risk";
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    return row;
}

}  // namespace

RateStudyReport run_rate_study(const RateStudyConfig& cfg) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    const auto spec = preset(cfg.preset, cfg.params);
    const BregmanLoss loss(cfg.loss);
    const auto space = build_rule_space(spec, cfg.rule, derive_seed(cfg.master_seed, 0));
    check_pairing(loss, spec.y_space, *space);

    const std::size_t reps = cfg.replications;
    const std::size_t units = cfg.t_grid.size() * reps;
    RateStudyReport rep;
    rep.rows.resize(units);
    parallel_for(units, cfg.threads, [&](std::size_t u) {
        const std::size_t ti = u / reps, r = u % reps;
        const std::uint64_t unit_seed = derive_seed(derive_seed(cfg.master_seed, ti + 1), r);
        rep.rows[u] = rate_unit(spec, space, loss, cfg, cfg.t_grid[ti], r, unit_seed);
    });

    std::size_t failed = 0;
    for (const auto& row : rep.rows) failed += row.ok ? 0 : 1;
    if (static_cast<double>(failed) > 0.05 * static_cast<double>(units)) {
        std::string first;
        for (const auto& row : rep.rows)
            if (!row.ok) {
                first = row.error;
                break;
            }
        throw StudyError("rate study: " + std::to_string(failed) + " of " + std::to_string(units) +
                         " units failed (first: " + first + ")");
    }

    std::vector<double> log_t, log_med;
    for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
        RateStudyLevel lv;
        lv.T = cfg.t_grid[ti];
        std::vector<double> ex;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& row = rep.rows[ti * reps + r];
            if (!row.ok) {
                ++lv.n_failed;
                continue;
            }
            ++lv.n_ok;
            if (row.status == FitStatus::boundary) ++lv.n_boundary;
            ex.push_back(row.excess);
        }
        if (!ex.empty()) {
            lv.q25 = stats::quantile(ex, 0.25);
            lv.q50 = stats::quantile(ex, 0.50);
            lv.q75 = stats::quantile(ex, 0.75);
        }
        if (!(lv.q50 > 0.0) || !std::isfinite(lv.q50)) rep.degenerate = true;
        log_t.push_back(std::log(static_cast<double>(lv.T)));
        log_med.push_back(lv.q50 > 0.0 ? std::log(lv.q50) : 0.0);
        rep.levels.push_back(lv);
    }
    for (std::size_t i = 1; i < rep.levels.size(); ++i)
        if (rep.levels[i].q50 > rep.levels[i - 1].q50) ++rep.inversions;

    if (rep.degenerate) {
        rep.slope = rep.slope_se = rep.intercept = std::numeric_limits<double>::quiet_NaN();
    } else {
        const auto f = stats::ols(log_t, log_med);
        rep.slope = f.slope;
        rep.slope_se = f.slope_se;
        rep.intercept = f.intercept;
    }

    std::vector<double> sds;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto& row = rep.rows[(cfg.t_grid.size() - 1) * reps + r];
        if (row.ok) sds.push_back(row.loss_sd);
    }
    rep.sigma_hat = sds.empty() ? 0.0 : stats::median(sds);
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rep;
}

}  // namespace pderm

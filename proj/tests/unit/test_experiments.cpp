#include "doctest.h"
#include "oracles.hpp"

#include "pderm/experiments.hpp"
#include "pderm/stats.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace pderm;

TEST_SUITE("experiments") {

TEST_CASE("tracking: closed form one step") {
    const std::vector<double> y{2.0, 1.5, 0.7};
    for (auto k : {LossKind::square, LossKind::gamma_qlike}) {
        const auto tc = check_tracking_equivalence(k, {0.2, 0.3, 0.5}, 1.0, y);
        REQUIRE(tc.forecasts.size() == 4);
        CHECK(tc.forecasts[1] == doctest::Approx(1.3).epsilon(1e-15));
        CHECK(tc.residual < 1e-6);
    }
}

TEST_CASE("tracking: all weight on the anchor") {
    std::vector<double> y(50);
    std::mt19937_64 g(2);
    for (auto& v : y) v = std::uniform_real_distribution<double>(0.2, 3.0)(g);
    const auto tc = check_tracking_equivalence(LossKind::gamma_qlike, {1.0, 0.0, 0.0}, 1.7, y);
    for (double f : tc.forecasts) CHECK(f == 1.7);
    CHECK(std::isnan(tc.kernel_variance));
}

TEST_CASE("tracking: kernel and recursive objectives differ by a constant") {
    std::vector<double> y(300);
    std::mt19937_64 g(3);
    for (auto& v : y) v = std::exp(std::normal_distribution<double>(0.0, 0.5)(g));
    for (auto k : {LossKind::square, LossKind::gamma_qlike}) {
        const auto tc = check_tracking_equivalence(k, {0.1, 0.25, 0.65}, 1.0, y);
        CHECK(tc.residual < 1e-6);
        CHECK(tc.kernel_variance < 1e-10);
    }
}

TEST_CASE("tracking: input validation") {
    const std::vector<double> y{1.0};
    CHECK_THROWS(check_tracking_equivalence(LossKind::square, {0.5, 0.5, 0.5}, 1.0, y));
    CHECK_THROWS(check_tracking_equivalence(LossKind::square, {-0.1, 0.6, 0.5}, 1.0, y));
    const std::vector<double> neg{-1.0};
    CHECK_THROWS_AS(check_tracking_equivalence(LossKind::gamma_qlike, {0.2, 0.3, 0.5}, 1.0, neg), DomainError);
}

TEST_CASE("steady-state Kalman rule against the Riccati quadratic") {
    const auto k = steady_state_kalman(0.5, 0.0, 1.0, 1.0);
    CHECK(k.prior_variance == doctest::Approx(1.13278).epsilon(1e-5));
    CHECK(k.gain == doctest::Approx(0.531129).epsilon(1e-5));
    CHECK(k.theta[0] == doctest::Approx(0.0));
    CHECK(k.theta[1] == doctest::Approx(0.265564).epsilon(1e-5));
    CHECK(k.theta[2] == doctest::Approx(0.234436).epsilon(1e-5));

    for (auto [rho, mu, sh, sy] : {std::array{0.5, 0.0, 1.0, 1.0}, std::array{0.9, 1.0, 0.5, 2.0},
                                   std::array{0.0, -1.0, 1.0, 0.3}}) {
        const auto o = oracle::kalman(rho, mu, sh, sy);
        const auto r = steady_state_kalman(rho, mu, sh, sy);
        CHECK(r.prior_variance == doctest::Approx(o.P).epsilon(1e-12));
        CHECK(r.theta[0] == doctest::Approx(o.a0).epsilon(1e-12));
        CHECK(r.theta[1] == doctest::Approx(o.a1).epsilon(1e-12));
        CHECK(r.theta[2] == doctest::Approx(o.b1).epsilon(1e-12));
    }
}

TEST_CASE("GARCH likelihood gradient and its affinity with QLIKE") {
    const auto spec = preset("sv_returns");
    const auto path = simulate_stationary(spec, 1001, 4);
    std::vector<double> r(path.size());
    std::mt19937_64 g(5);
    for (std::size_t t = 0; t < r.size(); ++t) r[t] = (g() & 1 ? 1.0 : -1.0) * std::sqrt(path.y[t]);

    const auto space = RuleSpace::create({0.01, 2.0}, {0.01, 1.0}, 0.99, Partition(YSpace::nonneg));
    const auto prob = ErmProblem::create(path, space, BregmanLoss(LossKind::gamma_qlike), 0.25);
    const double f0 = prob.f0();

    std::vector<double> aff;
    std::uniform_real_distribution<double> u01;
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> th{0.01 + 1.99 * u01(g), 0.01 + 0.99 * u01(g), 0.99 * u01(g)};
        std::vector<double> grad(3);
        const double nll = garch_nll(r, f0, th, grad);
        aff.push_back(empirical_risk(prob, th) - 2.0 * nll);
        for (int c = 0; c < 3; ++c) {
            auto hi = th, lo = th;
            const double h = 1e-6;
            hi[c] += h;
            lo[c] -= h;
            const double fd = (garch_nll(r, f0, hi, {}) - garch_nll(r, f0, lo, {})) / (2 * h);
            CHECK(grad[c] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        }
    }
    const double m = stats::mean(aff);
    CHECK(stats::variance(aff) < 1e-10 * m * m);
}

TEST_CASE("rule-space defaults follow the y-space") {
    const auto r = resolve_rule_config(preset("ar1_noise"), {});
    CHECK(r.alpha0->lo == -2.0);
    CHECK(r.alpha1->lo > 0.0);
    CHECK(*r.beta1_upper < 1.0);
    const auto n = resolve_rule_config(preset("sv_returns"), {});
    CHECK(n.alpha0->lo > 0.0);

    RuleSpaceConfig two;
    two.k = 2;
    auto spec = preset("ar1_noise", {{"r_m", 12}});
    const auto s = build_rule_space(spec, two, 3);
    CHECK(s->regimes() == 2);
    CHECK(build_rule_space(spec, two, 3)->partition() == s->partition());
    CHECK_THROWS(build_rule_space(preset("ar1_noise"), two, 3));
}

TEST_CASE("rate study configuration") {
    RateStudyConfig c;
    CHECK_NOTHROW(c.validate());
    c.t_grid = {250, 500};
    CHECK_THROWS(c.validate());
    c.smoke = true;
    CHECK_NOTHROW(c.validate());
    c.t_grid = {500, 250};
    CHECK_THROWS(c.validate());
    c = RateStudyConfig{};
    c.replications = 10;
    CHECK_THROWS(c.validate());
}

TEST_CASE("rate study: zero noise is degenerate") {
    RateStudyConfig c;
    c.params = {{"sigma_h", 0.0}, {"sigma_y", 0.0}};
    c.t_grid = {40, 80, 160};
    c.replications = 3;
    c.smoke = true;
    c.n_mc = 4;
    c.threads = 1;
    const auto rep = run_rate_study(c);
    CHECK(rep.degenerate);
    CHECK(std::isnan(rep.slope));
    for (const auto& row : rep.rows) {
        CHECK(row.ok);
        CHECK(row.excess == 0.0);
    }
}

TEST_CASE("rate study is deterministic and thread-independent") {
    RateStudyConfig c;
    c.t_grid = {60, 120};
    c.replications = 4;
    c.smoke = true;
    c.n_mc = 8;
    c.optimizer.starts = 4;
    c.master_seed = 9;
    c.threads = 1;
    const auto a = run_rate_study(c);
    c.threads = 3;
    const auto b = run_rate_study(c);
    REQUIRE(a.rows.size() == 8);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].excess == b.rows[i].excess);
        CHECK(a.rows[i].theta_hat == b.rows[i].theta_hat);
        CHECK(a.rows[i].excess >= 0.0);
    }
    for (const auto& lv : a.levels) {
        CHECK(lv.q25 <= lv.q50);
        CHECK(lv.q50 <= lv.q75);
    }
    CHECK(a.slope == b.slope);
}

TEST_CASE("applications refuse wrong losses") {
    auto c = default_application_config(ApplicationKind::ar1_kalman);
    c.loss = LossKind::nef_ghs;
    CHECK_THROWS_AS(run_application(c), PairingError);
    auto s = default_application_config(ApplicationKind::sv_qmle);
    s.loss = LossKind::square;
    CHECK_THROWS_AS(run_application(s), PairingError);
    for (auto k : {ApplicationKind::ar1_kalman, ApplicationKind::sv_qmle, ApplicationKind::rv_latent})
        CHECK(parse_application_kind(to_string(k)) == k);
}

TEST_CASE("ar1 application on a few replications") {
    auto c = default_application_config(ApplicationKind::ar1_kalman);
    c.replications = 4;
    c.t = 1000;
    c.n_mc = 40;
    const auto rep = std::get<Ar1KalmanReport>(run_application(c));
    CHECK(rep.var_y == doctest::Approx(1.0 / 0.75 + 1.0));
    CHECK(rep.threshold == doctest::Approx(0.05 * rep.var_y));
    CHECK(rep.reps.size() == 4);
    CHECK(rep.risk_ok);
}

TEST_CASE("diagnostics: iid process") {
    const auto spec = preset("ar1_noise", {{"rho", 0.0}});
    const auto s = RuleSpace::create({-2, 2}, {0.01, 1}, 0.95, Partition(YSpace::real));
    DiagnosticsConfig c;
    c.seed = 3;
    const auto rep = run_diagnostics(spec, PredictionRule(s, {0.0}, {0.01}, {0.0}), c);
    CHECK(rep.band == doctest::Approx(3.0 / std::sqrt(100000.0)));
    CHECK(rep.lags_outside_band == 0);
    for (double a : rep.loss_acf.acf) CHECK(std::fabs(a) < rep.band);
}

TEST_CASE("diagnostics: persistent process") {
    const auto spec = preset("ar1_noise", {{"rho", 0.9}});
    const auto s = RuleSpace::create({-2, 2}, {0.01, 1}, 0.95, Partition(YSpace::real));
    DiagnosticsConfig c;
    c.seed = 4;
    const auto rep = run_diagnostics(spec, PredictionRule(s, {0.0}, {0.2}, {0.0}), c);
    CHECK(rep.loss_acf.decay_slope < 0.0);
    CHECK(std::fabs(rep.loss_acf.acf.back()) < std::fabs(rep.loss_acf.acf.front()));
    CHECK(rep.decay_ok);
    CHECK(rep.moments_ok);
    for (const auto& m : rep.moments)
        if (m.order == 2) CHECK((m.ratio >= 0.9 && m.ratio <= 1.1));
    CHECK(rep.grid_rules == 27);
}

}

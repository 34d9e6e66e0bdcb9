#include "doctest.h"
#include "oracles.hpp"

#include "pderm/dgp.hpp"
#include "pderm/loss.hpp"
#include "pderm/stats.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace pderm;

namespace {

constexpr std::array kAll{LossKind::square, LossKind::nef_ghs, LossKind::gamma_qlike, LossKind::poisson,
                          LossKind::negbin};

// target in S, forecast in int(S)
double draw_point(LossKind k, std::mt19937_64& g, bool interior) {
    std::uniform_real_distribution<double> wide(-5.0, 5.0);
    std::uniform_real_distribution<double> pos(0.05, 8.0);
    if (k == LossKind::square || k == LossKind::nef_ghs) return wide(g);
    if (!interior && (k == LossKind::poisson || k == LossKind::negbin) && g() % 20 == 0) return 0.0;
    return pos(g);
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("closed-form values") {
    CHECK(BregmanLoss(LossKind::square).eval(2, 1) == 1.0);
    CHECK(BregmanLoss(LossKind::gamma_qlike).eval(3, 3) == 0.0);
    CHECK(BregmanLoss(LossKind::gamma_qlike).eval(2, 1) == doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-15));
    CHECK(BregmanLoss(LossKind::gamma_qlike).eval(2, 1) == doctest::Approx(0.306853).epsilon(1e-6));
    CHECK(BregmanLoss(LossKind::nef_ghs).eval(1, 0) ==
          doctest::Approx(std::numbers::pi / 4.0 - 0.5 * std::log(2.0)).epsilon(1e-15));
    CHECK(BregmanLoss(LossKind::nef_ghs).eval(1, 0) == doctest::Approx(0.438825).epsilon(1e-6));
    CHECK(BregmanLoss(LossKind::poisson).eval(2, 1) == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-15));
    CHECK(BregmanLoss(LossKind::poisson).eval(2, 1) == doctest::Approx(0.386294).epsilon(1e-6));
    CHECK(BregmanLoss(LossKind::negbin).eval(2, 1) ==
          doctest::Approx(2.0 * std::log(2.0) + 3.0 * std::log(2.0 / 3.0)).epsilon(1e-14));
    CHECK(BregmanLoss(LossKind::negbin).eval(2, 1) == doctest::Approx(0.169899).epsilon(1e-5));
}

TEST_CASE("zero target uses 0 log 0 = 0") {
    CHECK(BregmanLoss(LossKind::poisson).eval(0, 2.5) == doctest::Approx(2.5));
    CHECK(BregmanLoss(LossKind::negbin).eval(0, 2.5) == doctest::Approx(std::log(3.5)));
    for (auto k : {LossKind::poisson, LossKind::negbin})
        CHECK(BregmanLoss(k).eval(0, 1.7) == doctest::Approx(oracle::bregman(k, 0, 1.7)).epsilon(1e-13));
}

TEST_CASE("closed forms agree with the psi definition") {
    std::mt19937_64 g(10);
    for (auto k : kAll) {
        CAPTURE(to_string(k));
        const BregmanLoss L(k);
        for (int i = 0; i < 20000; ++i) {
            const double u = draw_point(k, g, false), v = draw_point(k, g, true);
            const double want = oracle::bregman(k, u, v);
            // the definition cancels large terms, so scale the tolerance by them
            const double mag = 1.0 + std::fabs(oracle::psi(k, u)) + std::fabs(oracle::psi(k, v)) +
                               std::fabs(oracle::dpsi(k, v) * (u - v));
            REQUIRE(std::fabs(L.eval(u, v) - want) <= 1e-13 * mag);
        }
    }
}

TEST_CASE("gradient examples and diagonal") {
    CHECK(BregmanLoss(LossKind::square).grad_v(2, 1) == -2.0);
    CHECK(BregmanLoss(LossKind::gamma_qlike).grad_v(2, 1) == -1.0);
    for (auto k : kAll) CHECK(BregmanLoss(k).grad_v(1.3, 1.3) == 0.0);
}

TEST_CASE("gradient against central differences") {
    std::mt19937_64 g(11);
    for (auto k : kAll) {
        CAPTURE(to_string(k));
        const BregmanLoss L(k);
        for (int i = 0; i < 20000; ++i) {
            const double u = draw_point(k, g, false), v = draw_point(k, g, true);
            const double h = 1e-5 * std::max(1.0, std::fabs(v));
            const double fd = (L.eval(u, v + h) - L.eval(u, v - h)) / (2.0 * h);
            const double an = L.grad_v(u, v);
            REQUIRE(std::fabs(fd - an) <= 1e-6 * std::max(std::fabs(an), 1.0));
            REQUIRE(an == doctest::Approx(-oracle::d2psi(k, v) * (u - v)).epsilon(1e-12));
        }
    }
}

TEST_CASE("nonnegativity and identity of indiscernibles") {
    std::mt19937_64 g(12);
    for (auto k : kAll) {
        const BregmanLoss L(k);
        for (int i = 0; i < 100000; ++i) {
            const double u = draw_point(k, g, false), v = draw_point(k, g, true);
            const double l = L.eval(u, v);
            REQUIRE(l >= 0.0);
            if (u != v) REQUIRE(l > 0.0);
            REQUIRE(L.eval(v, v) == 0.0);
        }
    }
}

TEST_CASE("triangle equality") {
    const auto sq = BregmanLoss(LossKind::square).triangle(3, 2, 1);
    CHECK(sq.lhs == 4.0);
    CHECK(sq.rhs == 4.0);

    const auto q = BregmanLoss(LossKind::gamma_qlike).triangle(2, 1.5, 1);
    CHECK(std::fabs(q.lhs - q.rhs) < 1e-10);

    std::mt19937_64 g(13);
    for (auto k : kAll) {
        const BregmanLoss L(k);
        const auto same = L.triangle(2.0, 0.7, 0.7);
        CHECK(same.lhs == L.eval(2.0, 0.7));
        CHECK(same.rhs == L.eval(2.0, 0.7));
        for (int i = 0; i < 100000; ++i) {
            const double u = draw_point(k, g, false), v = draw_point(k, g, true), w = draw_point(k, g, true);
            const auto t = L.triangle(u, v, w);
            REQUIRE(std::fabs(t.lhs - t.rhs) < 1e-10 * (1.0 + std::fabs(t.lhs)));
        }
    }
}

TEST_CASE("domain errors name the argument") {
    const BregmanLoss q(LossKind::gamma_qlike);
    CHECK_THROWS_AS(q.eval(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(q.eval(-1.0, 1.0), DomainError);
    try {
        q.eval(1.0, -2.0);
    } catch (const DomainError& e) {
        CHECK(e.argument == "v");
        CHECK(e.value == -2.0);
    }
    CHECK_THROWS_AS(BregmanLoss(LossKind::poisson).eval(-0.5, 1.0), DomainError);
    CHECK_NOTHROW(BregmanLoss(LossKind::poisson).eval(0.0, 1.0));
    CHECK_THROWS_AS(BregmanLoss(LossKind::negbin).eval(1.0, 0.0), DomainError);
    CHECK_NOTHROW(BregmanLoss(LossKind::square).eval(-3.0, -7.0));
}

TEST_CASE("strict convexity of psi on a grid") {
    for (auto k : kAll) {
        const BregmanLoss L(k);
        const double lo = L.domain().lo;
        const double a = std::isfinite(lo) ? lo + 0.01 : -10.0;
        for (int i = 0; i < 1000; ++i) {
            const double x = a + 0.01 * i, h = 1e-3;
            REQUIRE(L.psi(x + h) - 2.0 * L.psi(x) + L.psi(x - h) > 0.0);
        }
    }
}

TEST_CASE("qlike differs from u/v + log v by a v-free constant") {
    const BregmanLoss q(LossKind::gamma_qlike);
    for (double u : {0.3, 1.0, 4.5}) {
        std::vector<double> diff;
        for (int i = 1; i <= 200; ++i) {
            const double v = 0.05 * i;
            diff.push_back(q.eval(u, v) - (u / v + std::log(v)));
        }
        CHECK(stats::variance(diff) < 1e-24);
        CHECK(diff[0] == doctest::Approx(-std::log(u) - 1.0).epsilon(1e-12));
    }
}

TEST_CASE("curvature constants and the quadratic bound") {
    const auto real = RuleSpace::create({-2, 2}, {0.01, 1}, 0.9, Partition(YSpace::real));
    const auto half = RuleSpace::create({0.1, 2}, {0.01, 1}, 0.9, Partition(YSpace::nonneg));
    CHECK(curvature_bound(BregmanLoss(LossKind::square), *real) == 1.0);
    CHECK(curvature_bound(BregmanLoss(LossKind::nef_ghs), *real) == 1.0);
    CHECK(curvature_bound(BregmanLoss(LossKind::gamma_qlike), *half).value() == doctest::Approx(100.0));
    CHECK(curvature_bound(BregmanLoss(LossKind::poisson), *half).value() == doctest::Approx(10.0));
    CHECK_FALSE(curvature_bound(BregmanLoss(LossKind::poisson), *real).has_value());

    std::mt19937_64 g(14);
    std::uniform_real_distribution<double> line(-20, 20), ray(0.1, 20);
    for (auto k : kAll) {
        const bool on_real = k == LossKind::square || k == LossKind::nef_ghs;
        const auto& space = on_real ? *real : *half;
        const double c = curvature_bound(BregmanLoss(k), space).value();
        for (int i = 0; i < 100000; ++i) {
            const double v1 = on_real ? line(g) : ray(g), v2 = on_real ? line(g) : ray(g);
            REQUIRE(BregmanLoss(k).eval(v1, v2) <= c * (v1 - v2) * (v1 - v2) * (1 + 1e-12) + 1e-300);
        }
    }
}

TEST_CASE("condition 1 certification") {
    const auto ar = preset("ar1_noise");
    const auto real = RuleSpace::create({-2, 2}, {0.01, 1}, 0.95, Partition(YSpace::real));
    const auto sq = certify_condition1(BregmanLoss(LossKind::square), *real, ar);
    CHECK(sq.support_ok);
    CHECK(sq.c_psi.value() == 1.0);
    CHECK(sq.moments_ok);
    CHECK(sq.passed());

    const auto sv = preset("sv_returns");
    const auto half = RuleSpace::create({0.1, 2}, {0.01, 1}, 0.99, Partition(YSpace::nonneg));
    const auto q = certify_condition1(BregmanLoss(LossKind::gamma_qlike), *half, sv);
    CHECK(q.c_psi.value() == doctest::Approx(100.0));
    CHECK(q.passed());

    CHECK_THROWS_AS(certify_condition1(BregmanLoss(LossKind::gamma_qlike), *real, ar), PairingError);
    CHECK_THROWS_AS(check_pairing(BregmanLoss(LossKind::poisson), YSpace::real, *real), PairingError);
    CHECK_NOTHROW(check_pairing(BregmanLoss(LossKind::nef_ghs), YSpace::real, *real));
}

TEST_CASE("loss names round-trip") {
    for (auto k : kAll) CHECK(parse_loss_kind(to_string(k)) == k);
    CHECK_THROWS(parse_loss_kind("huber"));
}

}

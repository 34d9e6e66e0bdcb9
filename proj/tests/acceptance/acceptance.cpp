// Acceptance suite: one PASS/FAIL line per criterion.
//
//   pderm_acceptance [--threads N] [--only 1,4,9]
//
// Exit status is 0 only when every selected criterion passes.

#include "pderm/dgp.hpp"
#include "pderm/erm.hpp"
#include "pderm/experiments.hpp"
#include "pderm/forecaster.hpp"
#include "pderm/loss.hpp"
#include "pderm/stats.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using namespace pderm;

namespace {

// pinned tolerances and budgets
constexpr std::size_t kLossPairs = 100000;
constexpr double kGradTol = 1e-6;
constexpr double kTriangleTol = 1e-10;
constexpr double kLossBudget = 10.0;

constexpr std::size_t kDomPairs = 1000;
constexpr std::size_t kDomLength = 10000;
constexpr double kDomTol = 1e-12;
constexpr double kDomBudget = 60.0;

constexpr std::size_t kTrackSteps = 1000;
constexpr double kTrackTol = 1e-6;
constexpr double kKernelTol = 1e-10;

constexpr double kSvBudget = 300.0;
constexpr double kKalmanBudget = 600.0;
constexpr double kKalmanFraction = 0.05;

constexpr std::size_t kMaxInversions = 1;
constexpr double kSlopeLo = -0.8;
constexpr double kSlopeHi = -0.3;
constexpr double kRateBudget = 1800.0;

constexpr double kRvT = 3.0;
constexpr double kRvBudget = 300.0;

constexpr double kMomentLo = 0.9;
constexpr double kMomentHi = 1.1;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::size_t g_threads = 0;

// ---------------------------------------------------------------------------

Outcome bregman_suite() {
    const std::array kinds{LossKind::square, LossKind::nef_ghs, LossKind::gamma_qlike, LossKind::poisson,
                           LossKind::negbin};
    std::mt19937_64 g(101);
    std::uniform_real_distribution<double> line(-10.0, 10.0), ray(0.02, 10.0);
    std::size_t bad_sign = 0, bad_zero = 0, bad_grad = 0, bad_tri = 0, rel_only = 0;
    double worst_grad = 0.0, worst_tri = 0.0;
    for (auto k : kinds) {
        const BregmanLoss L(k);
        const bool real = k == LossKind::square || k == LossKind::nef_ghs;
        const bool zero_ok = k == LossKind::poisson || k == LossKind::negbin;
        for (std::size_t i = 0; i < kLossPairs; ++i) {
            double u = real ? line(g) : ray(g);
            if (zero_ok && i % 50 == 0) u = 0.0;
            const double v = real ? line(g) : ray(g);
            const double w = real ? line(g) : ray(g);

            const double l = L.eval(u, v);
            if (!(l >= 0.0)) ++bad_sign;
            if ((l == 0.0) != (u == v) || L.eval(v, v) != 0.0) ++bad_zero;

            const double h = 1e-5 * std::max(1.0, std::fabs(v));
            const double fd = (L.eval(u, v + h) - L.eval(u, v - h)) / (2.0 * h);
            const double an = L.grad_v(u, v);
            const double err = std::fabs(fd - an) / std::max(std::fabs(an), 1.0);
            worst_grad = std::max(worst_grad, err);
            if (err >= kGradTol) ++bad_grad;
            if (std::fabs(fd - an) >= kGradTol * std::fabs(an)) ++rel_only;

            const auto t = L.triangle(u, v, w);
            const double r = std::fabs(t.lhs - t.rhs) / (1.0 + std::fabs(t.lhs));
            worst_tri = std::max(worst_tri, r);
            if (r >= kTriangleTol) ++bad_tri;
        }
    }
    return {bad_sign + bad_zero + bad_grad + bad_tri == 0,
            fmt("5 losses x %zu pairs: sign %zu, zero %zu, grad %zu (worst %.2e; pure-relative misses %zu), "
                "triangle %zu (worst %.2e)",
                kLossPairs, bad_sign, bad_zero, bad_grad, worst_grad, rel_only, bad_tri, worst_tri)};
}

Outcome domination() {
    std::mt19937_64 g(202);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u01;
    std::size_t violations = 0;
    double worst = -INFINITY;
    for (YSpace ys : {YSpace::real, YSpace::nonneg}) {
        const auto spec = ys == YSpace::real ? preset("ar1_noise", {{"rho", 0.8}, {"r_m", 12}})
                                             : preset("sv_returns", {{"r_m", 12}});
        for (std::size_t i = 0; i < kDomPairs / 2; ++i) {
            const std::vector<double> breaks =
                i % 2 == 0 ? std::vector<double>{} : std::vector<double>{ys == YSpace::real ? 0.0 : 0.6};
            const Bounds a0 = ys == YSpace::real ? Bounds{-2.0, 2.0} : Bounds{0.01, 2.0};
            const auto space = RuleSpace::create(a0, {0.01, 1.0}, 0.95, Partition::create(breaks, ys, 12));
            const auto path = simulate_stationary(spec, kDomLength, derive_seed(303, i));
            const auto lo = space->lower(), hi = space->upper();
            std::vector<double> a(lo.size()), b(lo.size()), dir(lo.size());
            for (std::size_t c = 0; c < a.size(); ++c) a[c] = lo[c] + (hi[c] - lo[c]) * u01(g);
            double n2 = 0.0;
            for (auto& d : dir) {
                d = z(g);
                n2 += d * d;
            }
            const double delta = u01(g);
            double dist = 0.0;
            for (std::size_t c = 0; c < a.size(); ++c) {
                b[c] = std::clamp(a[c] + delta * dir[c] / std::sqrt(n2), lo[c], hi[c]);
                dist += (a[c] - b[c]) * (a[c] - b[c]);
            }
            dist = std::sqrt(dist);
            const double f0 = space->default_f0();
            const auto ta = run(PredictionRule::from_vector(space, a), path.y, f0, 1.0);
            const auto tb = run(PredictionRule::from_vector(space, b), path.y, f0, 1.0);
            for (std::size_t t = 0; t < path.size(); ++t) {
                const double gap = std::fabs(ta.f[t] - tb.f[t]) - dist * tb.d[t];
                worst = std::max(worst, gap);
                if (gap > kDomTol) ++violations;
            }
        }
    }
    return {violations == 0, fmt("%zu pairs x %zu steps, both spaces: %zu violations, max(|df| - delta d) = %.3e",
                                 kDomPairs, kDomLength, violations, worst)};
}

Outcome tracking() {
    const auto ar = simulate_stationary(preset("ar1_noise"), kTrackSteps, 404);
    const auto sv = simulate_stationary(preset("sv_returns"), kTrackSteps, 405);
    const std::array<double, 3> w{0.1, 0.3, 0.6};
    const auto sq = check_tracking_equivalence(LossKind::square, w, 0.0, ar.y);
    const auto ql = check_tracking_equivalence(LossKind::gamma_qlike, w, stats::mean(sv.y), sv.y);
    const bool ok = sq.steps == kTrackSteps && ql.steps == kTrackSteps && sq.residual < kTrackTol &&
                    ql.residual < kTrackTol && sq.kernel_variance < kKernelTol && ql.kernel_variance < kKernelTol;
    return {ok, fmt("%zu steps: argmin residual square %.2e, gamma_qlike %.2e; kernel-vs-recursive variance "
                    "square %.2e, gamma_qlike %.2e",
                    kTrackSteps, sq.residual, ql.residual, sq.kernel_variance, ql.kernel_variance)};
}

Outcome sv_qmle() {
    auto c = default_application_config(ApplicationKind::sv_qmle);
    c.threads = g_threads;
    const auto r = std::get<SvQmleReport>(run_application(c));
    return {r.affinity_ok && r.argmin_ok,
            fmt("T=%zu, %zu reps: ||theta_erm - theta_qmle||_inf < 1e-4 in %.0f%% (need 95%%); "
                "max affinity var/mean^2 = %.2e (need < 1e-10)",
                c.t, r.reps.size(), 100.0 * r.agree_fraction, r.max_affinity_ratio)};
}

Outcome ar1_kalman() {
    auto c = default_application_config(ApplicationKind::ar1_kalman);
    c.threads = g_threads;
    const auto r = std::get<Ar1KalmanReport>(run_application(c));
    const bool ok = r.median_abs_diff <= kKalmanFraction * r.var_y;
    return {ok, fmt("T=%zu, %zu reps: median |R(hat) - R(kalman)| = %.5f vs %.4f (0.05 Var Y); theta_kalman = "
                    "(%.4f, %.4f, %.4f); median coord gaps (%.3f, %.3f, %.3f); perturbed worse in %.0f%%; "
                    "grid max z = %.2f",
                    c.t, r.reps.size(), r.median_abs_diff, kKalmanFraction * r.var_y, r.kalman.theta[0],
                    r.kalman.theta[1], r.kalman.theta[2], r.median_coord_diff[0], r.median_coord_diff[1],
                    r.median_coord_diff[2], 100.0 * r.perturbed_worse_fraction, r.grid_max_advantage_z)};
}

Outcome rate_study() {
    RateStudyConfig c;
    c.threads = g_threads;
    c.master_seed = 20240601;
    const auto r = run_rate_study(c);
    std::string med;
    for (const auto& lv : r.levels) med += fmt(" %zu:%.3e", lv.T, lv.q50);
    const bool slope_ok = std::isfinite(r.slope) && r.slope >= kSlopeLo && r.slope <= kSlopeHi;
    const bool ok = !r.degenerate && r.inversions <= kMaxInversions && slope_ok;
    return {ok, fmt("%zu reps, medians%s; inversions %zu (max %zu); slope %.3f +- %.3f (need [%.1f, %.1f]); "
                    "sigma_hat %.3f",
                    c.replications, med.c_str(), r.inversions, kMaxInversions, r.slope, r.slope_se, kSlopeLo,
                    kSlopeHi, r.sigma_hat)};
}

Outcome rv_shift() {
    auto c = default_application_config(ApplicationKind::rv_latent);
    c.threads = g_threads;
    const auto r = std::get<RvLatentReport>(run_application(c));
    return {std::fabs(r.t_ratio) < kRvT,
            fmt("%zu-rule grid, n_mc=%zu: slope of R_Vol - R = %.3e +- %.3e, t = %.3f (need |t| < %.0f)",
                r.grid.size(), c.n_mc, r.slope_mean, r.slope_se, r.t_ratio, kRvT)};
}

Outcome diagnostics() {
    const auto spec = preset("ar1_noise", {{"rho", 0.9}});
    const auto space = RuleSpace::create({-2.0, 2.0}, {0.01, 1.0}, 0.95, Partition(YSpace::real));
    DiagnosticsConfig c;
    c.seed = 808;
    const auto r = run_diagnostics(spec, PredictionRule(space, {0.0}, {0.2}, {0.0}), c);
    const double r1 = std::fabs(r.loss_acf.acf.front()), r50 = std::fabs(r.loss_acf.acf.back());
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& m : r.moments)
        if (m.order == 2) {
            lo = std::min(lo, m.ratio);
            hi = std::max(hi, m.ratio);
        }
    const bool ok = r.loss_acf.decay_slope < 0.0 && r50 < r1 && lo >= kMomentLo && hi <= kMomentHi;
    return {ok, fmt("ar1 rho=0.9, rule (0, 0.2, 0), t=%zu: decay slope %.4f, |rho1| = %.4f, |rho50| = %.4f; "
                    "order-2 seed ratios in [%.4f, %.4f]",
                    r.t_total, r.loss_acf.decay_slope, r1, r50, lo, hi)};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / ("pderm_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string base = "[dgp]\npreset = ar1_noise\nt_total = 100000\n[erm]\nloss = square\nt = 500\nseed = 11\n";
    const std::vector<std::pair<std::string, std::string>> runs{
        {"simulate", base},
        {"check", base},
        {"fit", base},
        {"evaluate", base},
        {"study", base + "[study]\nkind = rate\nt_grid = 100,200\nreplications = 3\nsmoke = true\n"},
        {"study", "[dgp]\npreset = sv_realized_vol\n[erm]\nloss = gamma_qlike\nt = 300\nn_mc = 20\n"
                  "[study]\nkind = rv_latent\ngrid_points = 4\n"},
        {"diagnose", base + "[rule]\nalpha0 = 0\nalpha1 = 0.2\nbeta1 = 0\n"},
    };
    std::size_t files = 0, mismatched = 0, failed = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto dir = root / std::to_string(i);
        fs::create_directories(dir);
        std::ofstream(dir / "run.ini") << runs[i].second;
        for (const char* rep : {"1", "2"}) {
            const std::string cmd = std::string(PDERM_TOOL) + " " + runs[i].first + " --config " +
                                    (dir / "run.ini").string() + " --threads " + rep + " --out " +
                                    (dir / "out").string() + " 2> " + (dir / "log.txt").string();
            const int st = std::system(cmd.c_str());
            if (!WIFEXITED(st) || (WEXITSTATUS(st) != 0 && runs[i].first != "check")) ++failed;
            // same --out both times: the output dir is part of the echoed config
            if (fs::exists(dir / "out")) fs::rename(dir / "out", dir / rep);
        }
        for (const auto& e : fs::directory_iterator(dir / "1")) {
            ++files;
            const auto twin = dir / "2" / e.path().filename();
            if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) ++mismatched;
        }
    }
    fs::remove_all(root);
    return {failed == 0 && mismatched == 0 && files > runs.size(),
            fmt("%zu command runs twice (1 vs 2 threads): %zu output files compared, %zu differ, %zu runs failed",
                runs.size(), files, mismatched, failed)};
}

struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds, <= 0 for none
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--threads" && i + 1 < argc) {
            g_threads = std::stoul(argv[++i]);
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string item;
            while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
        } else {
            std::fprintf(stderr, "usage: %s [--threads N] [--only 1,2,...]\n", argv[0]);
            return 2;
        }
    }

    const std::vector<Criterion> all{
        {1, "bregman suite", kLossBudget, bregman_suite},
        {2, "domination", kDomBudget, domination},
        {3, "tracking equivalence", 0.0, tracking},
        {4, "erm = qmle (sv)", kSvBudget, sv_qmle},
        {5, "ar1 vs steady-state kalman", kKalmanBudget, ar1_kalman},
        {6, "oracle rate", kRateBudget, rate_study},
        {7, "rv risk shift", kRvBudget, rv_shift},
        {8, "diagnostics", 0.0, diagnostics},
        {9, "determinism", 0.0, determinism},
    };

    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string budget;
        if (c.budget > 0.0) {
            budget = fmt(", budget %.0f s", c.budget);
            if (secs >= c.budget) {
                o.pass = false;
                budget += " EXCEEDED";
            }
        }
        if (!o.pass) ++failures;
        std::printf("[%s] %d %s: %s (%.1f s%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    budget.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

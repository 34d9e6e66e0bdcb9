#include "pderm/optimize.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pderm {

void project_to_box(std::span<double> x, std::span<const double> lo, std::span<const double> hi) noexcept {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

namespace {

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double safe_eval(const Objective& f, std::span<const double> x) {
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

struct Simplex {
    std::vector<std::vector<double>> x;
    std::vector<double> fx;
};

Simplex make_simplex(const Objective& f, const std::vector<double>& x0, std::span<const double> lo,
                     std::span<const double> hi, double step_frac, std::size_t& evals) {
    const std::size_t n = x0.size();
    Simplex s;
    s.x.push_back(x0);
    s.fx.push_back(safe_eval(f, x0));
    ++evals;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v = x0;
        const double width = hi[i] - lo[i];
        double step = step_frac * width;
        if (step == 0.0) step = step_frac;
        // step inward when the forward vertex would leave the box
        if (v[i] + step > hi[i]) step = -step;
        v[i] = std::clamp(v[i] + step, lo[i], hi[i]);
        s.fx.push_back(safe_eval(f, v));
        s.x.push_back(std::move(v));
        ++evals;
    }
    return s;
}

void sort_simplex(Simplex& s) {
    std::vector<std::size_t> idx(s.x.size());
    std::iota(idx.begin(), idx.end(), 0);
    // stable: ties keep their construction order
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.fx[a] < s.fx[b]; });
    Simplex out;
    for (std::size_t i : idx) {
        out.x.push_back(std::move(s.x[i]));
        out.fx.push_back(s.fx[i]);
    }
    s = std::move(out);
}

double diameter(const Simplex& s) {
    double d = 0.0;
    for (std::size_t i = 1; i < s.x.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s.x[0].size(); ++j) {
            const double e = s.x[i][j] - s.x[0][j];
            acc += e * e;
        }
        d = std::max(d, std::sqrt(acc));
    }
    return d;
}

}  // namespace

NelderMeadResult nelder_mead_box(const Objective& f, std::vector<double> x0, std::span<const double> lo,
                                 std::span<const double> hi, const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    if (lo.size() != n || hi.size() != n) throw std::invalid_argument("nelder_mead_box: dimension mismatch");
    project_to_box(x0, lo, hi);

    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;

    NelderMeadResult res;
    double step = opt.initial_step;
    std::vector<double> best = x0;
    double best_f = std::numeric_limits<double>::infinity();

    for (int round = 0; round <= opt.max_restarts; ++round) {
        Simplex s = make_simplex(f, best, lo, hi, step, res.evals);
        sort_simplex(s);
        bool converged = false;
        std::vector<double> centroid(n), trial(n), trial2(n);
        while (res.evals < opt.max_evals) {
            if (diameter(s) < opt.tol * (1.0 + norm2(s.x[0]))) {
                converged = true;
                break;
            }
            ++res.iterations;
            std::fill(centroid.begin(), centroid.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) centroid[j] += s.x[i][j];
            for (double& c : centroid) c /= static_cast<double>(n);

            const auto& worst = s.x[n];
            for (std::size_t j = 0; j < n; ++j) trial[j] = centroid[j] + kReflect * (centroid[j] - worst[j]);
            project_to_box(trial, lo, hi);
            const double fr = safe_eval(f, trial);
            ++res.evals;

            if (fr < s.fx[0]) {
                for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + kExpand * (centroid[j] - worst[j]);
                project_to_box(trial2, lo, hi);
                const double fe = safe_eval(f, trial2);
                ++res.evals;
                if (fe < fr) {
                    s.x[n] = trial2;
                    s.fx[n] = fe;
                } else {
                    s.x[n] = trial;
                    s.fx[n] = fr;
                }
            } else if (fr < s.fx[n - 1]) {
                s.x[n] = trial;
                s.fx[n] = fr;
            } else {
                const bool outside = fr < s.fx[n];
                for (std::size_t j = 0; j < n; ++j)
                    trial2[j] = outside ? centroid[j] + kContract * (trial[j] - centroid[j])
                                        : centroid[j] + kContract * (worst[j] - centroid[j]);
                project_to_box(trial2, lo, hi);
                const double fc = safe_eval(f, trial2);
                ++res.evals;
                if (fc < (outside ? fr : s.fx[n])) {
                    s.x[n] = trial2;
                    s.fx[n] = fc;
                } else {
                    for (std::size_t i = 1; i <= n; ++i) {
                        for (std::size_t j = 0; j < n; ++j)
                            s.x[i][j] = s.x[0][j] + kShrink * (s.x[i][j] - s.x[0][j]);
                        s.fx[i] = safe_eval(f, s.x[i]);
                        ++res.evals;
                    }
                }
            }
            sort_simplex(s);
        }

        const double improvement = best_f - s.fx[0];
        const bool first = round == 0;
        if (s.fx[0] <= best_f) {
            best = s.x[0];
            best_f = s.fx[0];
        }
        res.converged = converged;
        res.restarts = round;
        if (!converged) break;
        if (!first && !(improvement > 1e-13 * (1.0 + std::fabs(best_f)))) break;
        // restart with a smaller simplex around the current best
        step = std::max(opt.initial_step * 0.1 / (round + 1), 1e-4);
    }
    res.x = std::move(best);
    res.fx = best_f;
    return res;
}

// ---------------------------------------------------------------------------

QuasiNewtonResult quasi_newton_box(const Gradient& fg, std::vector<double> x0, std::span<const double> lo,
                                   std::span<const double> hi, const QuasiNewtonOptions& opt) {
    const std::size_t n = x0.size();
    project_to_box(x0, lo, hi);
    std::vector<double> x = std::move(x0), g(n), x_new(n), g_new(n), d(n);
    double fx = fg(x, g);

    // inverse Hessian approximation, row-major
    std::vector<double> H(n * n, 0.0);
    auto reset = [&] {
        std::fill(H.begin(), H.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
    };
    reset();

    QuasiNewtonResult res;
    for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
        double pg = 0.0;
        std::vector<bool> active(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            const double moved = std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i];
            pg = std::max(pg, std::fabs(moved));
            active[i] = (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0);
        }
        if (pg < opt.pg_tol) {
            res.converged = true;
            break;
        }

        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = 0.0;
            if (active[i]) continue;
            for (std::size_t j = 0; j < n; ++j)
                if (!active[j]) d[i] -= H[i * n + j] * g[j];
            slope += d[i] * g[i];
        }
        if (!(slope < 0.0)) {
            reset();
            slope = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = active[i] ? 0.0 : -g[i];
                slope += d[i] * g[i];
            }
            if (!(slope < 0.0)) {
                res.converged = true;
                break;
            }
        }

        double alpha = 1.0;
        double f_new = fx;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + alpha * d[i];
            project_to_box(x_new, lo, hi);
            double decrease = 0.0;
            for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - x[i]);
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * decrease) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // no progress along the quasi-Newton direction; retry once from steepest descent
            bool was_identity = true;
            for (std::size_t i = 0; i < n && was_identity; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (H[i * n + j] != (i == j ? 1.0 : 0.0)) was_identity = false;
            if (was_identity) {
                res.converged = pg < 1e3 * opt.pg_tol;
                break;
            }
            reset();
            continue;
        }

        std::vector<double> s(n), yv(n);
        double sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x[i];
            yv[i] = g_new[i] - g[i];
            sy += s[i] * yv[i];
        }
        if (sy > 1e-16) {
            std::vector<double> Hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i * n + j] * yv[j];
            double yHy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yHy += yv[i] * Hy[i];
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    H[i * n + j] += (1.0 + yHy * rho) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
        }
        x = x_new;
        g = g_new;
        fx = f_new;
    }
    res.x = std::move(x);
    res.fx = fx;
    return res;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> box_grid(std::span<const double> lo, std::span<const double> hi,
                                          std::size_t points) {
    const std::size_t n = lo.size();
    if (points < 2) throw std::invalid_argument("box_grid: need at least 2 points per coordinate");
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= points;
    std::vector<std::vector<double>> grid;
    grid.reserve(total);
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t c = 0; c < total; ++c) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i)
            x[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx[i]) / static_cast<double>(points - 1);
        grid.push_back(std::move(x));
        for (std::size_t i = n; i-- > 0;) {
            if (++idx[i] < points) break;
            idx[i] = 0;
        }
    }
    return grid;
}

double minimize_scalar(const std::function<double(double)>& f, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("minimize_scalar: empty bracket");
    const auto r = boost::math::tools::brent_find_minima(f, a, b, std::numeric_limits<double>::digits / 2);
    return r.first;
}

}  // namespace pderm

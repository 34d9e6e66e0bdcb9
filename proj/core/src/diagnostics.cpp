#include "pderm/experiments.hpp"

#include "pderm/stats.hpp"

#include <algorithm>
#include <cmath>

namespace pderm {

namespace {

AcfSummary summarize_acf(std::span<const double> x, std::size_t lags) {
    AcfSummary s;
    s.acf = stats::autocorrelation(x, lags);
    std::vector<double> lag(lags), log_abs(lags);
    for (std::size_t l = 0; l < lags; ++l) {
        lag[l] = static_cast<double>(l + 1);
        log_abs[l] = std::log(std::max(std::fabs(s.acf[l]), 1e-300));
    }
    s.decay_slope = lags >= 2 ? stats::ols(lag, log_abs).slope : 0.0;
    s.envelope_rho = std::exp(s.decay_slope);
    for (std::size_t l = 0; l < lags; ++l)
        s.envelope_c = std::max(s.envelope_c, std::fabs(s.acf[l]) / std::pow(s.envelope_rho, lag[l]));
    return s;
}

double lag_acf(std::span<const double> x, std::size_t lag) {
    return stats::autocorrelation(x, lag).back();
}

std::vector<double> tail(const std::vector<double>& v, std::size_t skip) {
    return {v.begin() + static_cast<std::ptrdiff_t>(skip), v.end()};
}

}  // namespace

DiagnosticsReport run_diagnostics(const DgpSpec& spec, const PredictionRule& rule, const DiagnosticsConfig& cfg) {
    if (cfg.lags < 10) throw std::invalid_argument("diagnostics: lags must be >= 10");
    if (cfg.t_total <= cfg.lags) throw std::invalid_argument("diagnostics: t_total too short for the lag window");
    const BregmanLoss loss(cfg.loss);
    check_pairing(loss, spec.y_space, rule.space());

    DiagnosticsReport rep;
    rep.t_total = cfg.t_total;
    rep.note = "autocorrelation decay is a necessary condition for geometric mixing, not a mixing estimate";
    const std::size_t burn = spec.burn_in;
    const auto a = companion_state(spec, rule, cfg.t_total + burn, derive_seed(cfg.seed, 0));
    const auto b = companion_state(spec, rule, cfg.t_total + burn, derive_seed(cfg.seed, 1));

    struct Series {
        const char* name;
        std::vector<double> a, b;
    };
    std::vector<Series> series{{"abs_y", tail(a.y, burn), tail(b.y, burn)},
                               {"abs_h", tail(a.h, burn), tail(b.h, burn)},
                               {"abs_f", tail(a.f, burn), tail(b.f, burn)},
                               {"d", tail(a.d, burn), tail(b.d, burn)}};
    rep.moments_ok = true;
    for (const auto& s : series) {
        for (int order = 1; order <= 2 * spec.r_m; ++order) {
            MomentRow m;
            m.series = s.name;
            m.order = order;
            m.seed_a = stats::abs_moment(s.a, order);
            m.seed_b = stats::abs_moment(s.b, order);
            m.ratio = m.seed_a / m.seed_b;
            if (!std::isfinite(m.seed_a) || !std::isfinite(m.seed_b)) {
                rep.moments_ok = false;
                rep.failures.push_back(std::string("moment of ") + s.name + " of order " + std::to_string(order) +
                                       " is not finite");
            }
            if (order == 2 && !(m.ratio >= 0.9 && m.ratio <= 1.1)) {
                rep.moments_ok = false;
                rep.failures.push_back(std::string("order-2 moment of ") + s.name + " differs across seeds");
            }
            rep.moments.push_back(m);
        }
    }

    // loss process L(Y_t, f_t) after burn-in
    std::vector<double> losses;
    losses.reserve(cfg.t_total);
    for (std::size_t t = burn + 1; t < a.y.size(); ++t) losses.push_back(loss.eval(a.y[t], a.f[t]));
    rep.loss_acf = summarize_acf(losses, cfg.lags);
    rep.f_acf = summarize_acf(series[2].a, cfg.lags);
    rep.d_acf = summarize_acf(series[3].a, cfg.lags);
    rep.band = 3.0 / std::sqrt(static_cast<double>(losses.size()));
    for (double r : rep.loss_acf.acf) rep.lags_outside_band += std::fabs(r) > rep.band ? 1 : 0;
    rep.decay_ok = rep.loss_acf.decay_slope < 0.0 &&
                   std::fabs(rep.loss_acf.acf.back()) < std::fabs(rep.loss_acf.acf.front());
    if (!rep.decay_ok) rep.failures.push_back("loss autocorrelations do not decay");

    // lag-10 probe over an interior grid of rules
    const auto lo = rule.space().lower(), hi = rule.space().upper();
    const std::size_t P = std::max<std::size_t>(cfg.theta_grid_points, 1);
    std::vector<double> lo_in(lo.size()), hi_in(hi.size());
    for (std::size_t c = 0; c < lo.size(); ++c) {
        lo_in[c] = lo[c] + (hi[c] - lo[c]) / static_cast<double>(P + 1);
        hi_in[c] = hi[c] - (hi[c] - lo[c]) / static_cast<double>(P + 1);
    }
    std::vector<std::vector<double>> grid;
    if (P == 1) {
        grid.emplace_back(lo.size());
        for (std::size_t c = 0; c < lo.size(); ++c) grid[0][c] = 0.5 * (lo[c] + hi[c]);
    } else {
        grid = box_grid(lo_in, hi_in, P);
    }
    const std::span<const double> y(a.y.data() + burn, a.y.size() - burn);
    for (const auto& th : grid) {
        const auto g_rule = PredictionRule::from_vector(rule.space_ptr(), th);
        const auto tr = run(g_rule, y, rule.space().default_f0(), RuleSpace::default_d0());
        std::vector<double> l;
        l.reserve(y.size() - 1);
        for (std::size_t t = 1; t < y.size(); ++t) l.push_back(loss.eval(y[t], tr.f[t]));
        rep.max_lag10_acf = std::max(rep.max_lag10_acf, std::fabs(lag_acf(l, 10)));
    }
    rep.grid_rules = grid.size();
    return rep;
}

}  // namespace pderm

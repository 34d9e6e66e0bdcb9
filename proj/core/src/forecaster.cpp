#include "pderm/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pderm {

Partition Partition::create(std::vector<double> breakpoints, YSpace space, int r_m) {
    check_regime_count(static_cast<int>(breakpoints.size()) + 1, r_m);
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (!std::isfinite(breakpoints[i]))
            throw std::invalid_argument("partition breakpoints must be finite");
        if (i > 0 && !(breakpoints[i] > breakpoints[i - 1]))
            throw std::invalid_argument("partition breakpoints must be strictly increasing");
    }
    if (space == YSpace::nonneg && !breakpoints.empty() && !(breakpoints.front() > 0.0))
        throw std::invalid_argument("breakpoints on the nonnegative half-line must be > 0");
    Partition p(space);
    p.breakpoints_ = std::move(breakpoints);
    return p;
}

std::size_t Partition::regime_of(double y) const noexcept {
    // number of breakpoints r_j <= y, i.e. left-closed intervals
    return static_cast<std::size_t>(
        std::upper_bound(breakpoints_.begin(), breakpoints_.end(), y) - breakpoints_.begin());
}

// ---------------------------------------------------------------------------

std::shared_ptr<const RuleSpace> RuleSpace::create(Bounds alpha0, Bounds alpha1, double beta1_upper,
                                                   Partition partition) {
    auto finite = [](const Bounds& b) { return std::isfinite(b.lo) && std::isfinite(b.hi); };
    if (!finite(alpha0) || !(alpha0.lo < alpha0.hi))
        throw std::invalid_argument("alpha0 bounds must be finite with lo < hi");
    if (!finite(alpha1) || !(alpha1.lo < alpha1.hi))
        throw std::invalid_argument("alpha1 bounds must be finite with lo < hi");
    if (!(alpha1.lo > 0.0)) throw std::invalid_argument("alpha1 lower bound must be > 0");
    if (!(beta1_upper >= 0.0 && beta1_upper < 1.0))
        throw std::invalid_argument("beta1 upper bound must lie in [0, 1)");
    if (partition.space() == YSpace::nonneg && !(alpha0.lo > 0.0))
        throw std::invalid_argument("alpha0 lower bound must be > 0 on the nonnegative half-line");
    return std::shared_ptr<const RuleSpace>(
        new RuleSpace(alpha0, alpha1, beta1_upper, std::move(partition)));
}

std::vector<double> RuleSpace::lower() const {
    const std::size_t k = regimes();
    std::vector<double> lo(3 * k);
    std::fill_n(lo.begin(), k, alpha0_.lo);
    std::fill_n(lo.begin() + k, k, alpha1_.lo);
    std::fill_n(lo.begin() + 2 * k, k, 0.0);
    return lo;
}

std::vector<double> RuleSpace::upper() const {
    const std::size_t k = regimes();
    std::vector<double> hi(3 * k);
    std::fill_n(hi.begin(), k, alpha0_.hi);
    std::fill_n(hi.begin() + k, k, alpha1_.hi);
    std::fill_n(hi.begin() + 2 * k, k, beta1_upper_);
    return hi;
}

double RuleSpace::default_f0() const noexcept {
    return space() == YSpace::nonneg ? alpha0_.lo : 0.0;
}

// ---------------------------------------------------------------------------

PredictionRule::PredictionRule(std::shared_ptr<const RuleSpace> space, std::vector<double> alpha0,
                               std::vector<double> alpha1, std::vector<double> beta1)
    : space_(std::move(space)), alpha0_(std::move(alpha0)), alpha1_(std::move(alpha1)),
      beta1_(std::move(beta1)) {
    if (!space_) throw std::invalid_argument("prediction rule needs a rule space");
    const std::size_t k = space_->regimes();
    if (alpha0_.size() != k || alpha1_.size() != k || beta1_.size() != k)
        throw std::invalid_argument("prediction rule needs K=" + std::to_string(k) +
                                    " coefficients per block");
}

PredictionRule PredictionRule::from_vector(std::shared_ptr<const RuleSpace> space,
                                           std::span<const double> theta) {
    if (!space) throw std::invalid_argument("prediction rule needs a rule space");
    const std::size_t k = space->regimes();
    if (theta.size() != 3 * k)
        throw std::invalid_argument("parameter vector must have length 3K=" + std::to_string(3 * k));
    return PredictionRule(std::move(space), {theta.begin(), theta.begin() + k},
                          {theta.begin() + k, theta.begin() + 2 * k},
                          {theta.begin() + 2 * k, theta.end()});
}

std::vector<double> PredictionRule::to_vector() const {
    std::vector<double> theta;
    theta.reserve(3 * alpha0_.size());
    theta.insert(theta.end(), alpha0_.begin(), alpha0_.end());
    theta.insert(theta.end(), alpha1_.begin(), alpha1_.end());
    theta.insert(theta.end(), beta1_.begin(), beta1_.end());
    return theta;
}

bool PredictionRule::feasible() const noexcept {
    const auto theta = to_vector();
    const auto lo = space_->lower();
    const auto hi = space_->upper();
    for (std::size_t i = 0; i < theta.size(); ++i)
        if (!(theta[i] >= lo[i] && theta[i] <= hi[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------

double step(const PredictionRule& rule, double y_prev, double f_prev) noexcept {
    const std::size_t k = rule.space().partition().regime_of(y_prev);
    return rule.alpha0()[k] + rule.alpha1()[k] * y_prev + rule.beta1()[k] * f_prev;
}

ForecastTrace run(const PredictionRule& rule, std::span<const double> y, double f0, double d0) {
    if (!std::isfinite(f0) || !std::isfinite(d0) || d0 < 1.0)
        throw std::invalid_argument("run: need finite f0 and d0 >= 1");
    ForecastTrace tr;
    tr.f0 = f0;
    tr.d0 = d0;
    if (y.empty()) return tr;
    tr.f.resize(y.size());
    tr.d.resize(y.size());
    tr.f[0] = f0;
    tr.d[0] = d0;
    const double b_up = rule.space().beta1_upper();
    for (std::size_t t = 1; t < y.size(); ++t) {
        const double yp = y[t - 1];
        if (!std::isfinite(yp))
            throw std::invalid_argument("run: non-finite observation at t=" + std::to_string(t - 1));
        tr.f[t] = step(rule, yp, tr.f[t - 1]);
        tr.d[t] = dominating_step(b_up, yp, tr.f[t - 1], tr.d[t - 1]);
    }
    if (!std::isfinite(y.back()))
        throw std::invalid_argument("run: non-finite observation at t=" + std::to_string(y.size() - 1));
    return tr;
}

CompanionTrace companion_state(const DgpSpec& spec, const PredictionRule& rule,
                               std::size_t t_total, std::uint64_t seed) {
    CompanionTrace tr;
    if (t_total == 0) return tr;
    tr.h.reserve(t_total);
    tr.y.reserve(t_total);
    tr.f.reserve(t_total);
    tr.d.reserve(t_total);

    InnovationStream stream(spec, seed);
    const double b_up = rule.space().beta1_upper();
    double h = spec.h0, y = spec.y0;
    double f = rule.space().default_f0(), d = RuleSpace::default_d0();
    tr.h.push_back(h);
    tr.y.push_back(y);
    tr.f.push_back(f);
    tr.d.push_back(d);
    for (std::size_t t = 1; t < t_total; ++t) {
        const double f_next = step(rule, y, f);
        const double d_next = dominating_step(b_up, y, f, d);
        const auto eps = stream.next();
        const DgpState s = advance(spec, h, eps.eps_h, eps.eps_y);
        if (!std::isfinite(s.h) || !std::isfinite(s.y)) throw SimulationDiverged(t, s.h, s.y);
        h = s.h;
        y = s.y;
        f = f_next;
        d = d_next;
        tr.h.push_back(h);
        tr.y.push_back(y);
        tr.f.push_back(f);
        tr.d.push_back(d);
    }
    return tr;
}

Partition default_partition(const SimPath& pilot, int k, int r_m, YSpace space) {
    check_regime_count(k, r_m);
    if (pilot.y.size() < 1000) throw std::invalid_argument("pilot path must have length >= 1000");
    if (k == 1) return Partition::create({}, space, r_m);
    std::vector<double> sorted = pilot.y;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> breaks;
    const double n1 = static_cast<double>(sorted.size() - 1);
    for (int j = 1; j < k; ++j) {
        // linear interpolation between order statistics
        const double pos = n1 * static_cast<double>(j) / static_cast<double>(k);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        breaks.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
    }
    return Partition::create(std::move(breaks), space, r_m);
}

}  // namespace pderm

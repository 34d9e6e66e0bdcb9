#include "pderm/loss.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace pderm {

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::square: return "square";
        case LossKind::nef_ghs: return "nef_ghs";
        case LossKind::gamma_qlike: return "gamma_qlike";
        case LossKind::poisson: return "poisson";
        case LossKind::negbin: return "negbin";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& name) {
    for (LossKind k : {LossKind::square, LossKind::nef_ghs, LossKind::gamma_qlike, LossKind::poisson,
                       LossKind::negbin})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown loss '" + name + "'");
}

namespace {
std::string describe_value(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}
}  // namespace

DomainError::DomainError(const std::string& argument_, double value_, const std::string& why)
    : std::domain_error("loss domain violation: " + argument_ + "=" + describe_value(value_) + " " + why),
      argument(argument_), value(value_) {}

LossDomain BregmanLoss::domain() const noexcept {
    switch (kind_) {
        case LossKind::square:
        case LossKind::nef_ghs: return {-std::numeric_limits<double>::infinity(), false};
        case LossKind::gamma_qlike: return {0.0, false};
        case LossKind::poisson:
        case LossKind::negbin: return {0.0, true};
    }
    return {0.0, false};
}

bool BregmanLoss::in_domain(double u) const noexcept {
    if (!std::isfinite(u)) return false;
    const auto d = domain();
    return u > d.lo || (d.lo_closed && u == d.lo);
}

bool BregmanLoss::in_interior(double v) const noexcept {
    return std::isfinite(v) && v > domain().lo;
}

void BregmanLoss::check(double u, double v) const {
    if (!in_domain(u)) throw DomainError("u", u, "is outside S for " + to_string(kind_));
    if (!in_interior(v)) throw DomainError("v", v, "is outside int(S) for " + to_string(kind_));
}

double BregmanLoss::psi(double u) const {
    if (!in_domain(u)) throw DomainError("u", u, "is outside S for " + to_string(kind_));
    switch (kind_) {
        case LossKind::square: return u * u;
        case LossKind::nef_ghs: return u * std::atan(u) - 0.5 * std::log1p(u * u);
        case LossKind::gamma_qlike: return -std::log(u);
        case LossKind::poisson: return u == 0.0 ? 0.0 : u * std::log(u) - u;
        case LossKind::negbin:
            return (u == 0.0 ? 0.0 : u * std::log(u / (1.0 + u))) - std::log1p(u);
    }
    return 0.0;
}

double BregmanLoss::grad_psi(double v) const {
    if (!in_interior(v)) throw DomainError("v", v, "is outside int(S) for " + to_string(kind_));
    switch (kind_) {
        case LossKind::square: return 2.0 * v;
        case LossKind::nef_ghs: return std::atan(v);
        case LossKind::gamma_qlike: return -1.0 / v;
        case LossKind::poisson: return std::log(v);
        case LossKind::negbin: return std::log(v / (1.0 + v));
    }
    return 0.0;
}

double BregmanLoss::hess_psi(double v) const {
    if (!in_interior(v)) throw DomainError("v", v, "is outside int(S) for " + to_string(kind_));
    switch (kind_) {
        case LossKind::square: return 2.0;
        case LossKind::nef_ghs: return 1.0 / (1.0 + v * v);
        case LossKind::gamma_qlike: return 1.0 / (v * v);
        case LossKind::poisson: return 1.0 / v;
        case LossKind::negbin: return 1.0 / (v * (1.0 + v));
    }
    return 0.0;
}

double BregmanLoss::eval(double u, double v) const {
    check(u, v);
    return eval_unchecked(u, v);
}

double BregmanLoss::grad_v(double u, double v) const {
    check(u, v);
    return -hess_psi(v) * (u - v);
}

BregmanLoss::Triangle BregmanLoss::triangle(double u, double v, double w) const {
    check(u, v);
    if (!in_interior(w)) throw DomainError("w", w, "is outside int(S) for " + to_string(kind_));
    Triangle t;
    t.lhs = eval_unchecked(u, w);
    t.rhs = eval_unchecked(u, v) + eval_unchecked(v, w) - (u - v) * (grad_psi(w) - grad_psi(v));
    return t;
}

// ---------------------------------------------------------------------------

void check_pairing(const BregmanLoss& loss, YSpace y_space, const RuleSpace& space) {
    if (space.space() != y_space)
        throw PairingError("rule space partition is defined on the " + to_string(space.space()) +
                           " y-space but the process lives on the " + to_string(y_space) + " y-space");
    const bool real_ok = loss.kind() == LossKind::square || loss.kind() == LossKind::nef_ghs;
    if (y_space == YSpace::real && !real_ok)
        throw PairingError("loss " + to_string(loss.kind()) +
                           " is not admissible on the real line (only square and nef_ghs are)");
    // forecasts live in [alpha0.lo, inf) on the half-line
    if (y_space == YSpace::nonneg && !loss.in_interior(space.alpha0().lo))
        throw PairingError("forecast lower bound alpha0.lo is outside int(S) for " + to_string(loss.kind()));
}

std::optional<double> curvature_bound(const BregmanLoss& loss, const RuleSpace& space) {
    const double lo = space.space() == YSpace::nonneg ? space.alpha0().lo
                                                       : -std::numeric_limits<double>::infinity();
    switch (loss.kind()) {
        case LossKind::square: return 1.0;  // L(v1, v2) = (v1 - v2)^2
        case LossKind::nef_ghs: return 1.0;  // sup 1/(1 + v^2)
        case LossKind::gamma_qlike:
            if (!(lo > 0.0)) return std::nullopt;
            return 1.0 / (lo * lo);
        case LossKind::poisson:
            if (!(lo > 0.0)) return std::nullopt;
            return 1.0 / lo;
        case LossKind::negbin:
            if (!(lo > 0.0)) return std::nullopt;
            return 1.0 / (lo * (1.0 + lo));
    }
    return std::nullopt;
}

namespace {

std::vector<PredictionRule> probe_rules(const std::shared_ptr<const RuleSpace>& space,
                                        std::size_t n_random, std::uint64_t seed) {
    const auto lo = space->lower();
    const auto hi = space->upper();
    std::vector<double> mid(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) mid[i] = 0.5 * (lo[i] + hi[i]);
    std::vector<PredictionRule> rules;
    rules.push_back(PredictionRule::from_vector(space, lo));
    rules.push_back(PredictionRule::from_vector(space, hi));
    rules.push_back(PredictionRule::from_vector(space, mid));
    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t r = 0; r < n_random; ++r) {
        std::vector<double> theta(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) theta[i] = lo[i] + u01(rng) * (hi[i] - lo[i]);
        rules.push_back(PredictionRule::from_vector(space, theta));
    }
    return rules;
}

double sup_moment(const BregmanLoss& loss, const std::vector<PredictionRule>& rules,
                  const SimPath& path, int order) {
    double sup = 0.0;
    for (const auto& rule : rules) {
        const auto tr = run(rule, path.y, rule.space().default_f0(), RuleSpace::default_d0());
        double acc = 0.0;
        for (std::size_t t = 1; t < path.y.size(); ++t)
            acc += std::pow(loss.eval(path.y[t], tr.f[t]), order);
        sup = std::max(sup, acc / static_cast<double>(path.y.size() - 1));
    }
    return sup;
}

}  // namespace

Condition1Report certify_condition1(const BregmanLoss& loss, const RuleSpace& space,
                                    const DgpSpec& spec, const Condition1Options& opt) {
    check_pairing(loss, spec.y_space, space);
    Condition1Report rep;
    auto fail = [&](std::string msg) { rep.failures.push_back(std::move(msg)); };

    // (i) the observations stay in S: on the half-line Y = g_y1 + g_y2 eps_Y > 0 a.s.
    rep.support_ok = spec.y_space == YSpace::real ? loss.domain().lo == -std::numeric_limits<double>::infinity()
                                                  : spec.eps_y.support() == Support::positive_line;
    if (!rep.support_ok) fail("Y-support is not contained in the loss domain");

    // (ii) sup_theta E L^{r_m} on two independent stationary paths
    auto shared = std::make_shared<const RuleSpace>(space);
    const auto rules = probe_rules(shared, opt.random_rules, derive_seed(opt.seed, 2));
    rep.probed_rules = rules.size();
    rep.path_length = opt.path_length;
    try {
        const auto path_a = simulate_stationary(spec, opt.path_length, derive_seed(opt.seed, 0));
        const auto path_b = simulate_stationary(spec, opt.path_length, derive_seed(opt.seed, 1));
        rep.moment_sup_seed_a = sup_moment(loss, rules, path_a, spec.r_m);
        rep.moment_sup_seed_b = sup_moment(loss, rules, path_b, spec.r_m);
        // compare L_{r_m} norms: raw high moments are ruled by the largest draw
        const double lo = std::min(rep.moment_sup_seed_a, rep.moment_sup_seed_b);
        const double hi = std::max(rep.moment_sup_seed_a, rep.moment_sup_seed_b);
        rep.moments_ok = std::isfinite(hi) && lo > 0.0 && std::pow(hi / lo, 1.0 / spec.r_m) <= 2.0;
    } catch (const std::exception& e) {
        fail(std::string("moment probe failed: ") + e.what());
    }
    if (!rep.moments_ok && rep.failures.empty())
        fail("sup_theta E L^r_m is not stable across two independent paths");

    // (iii)
    rep.c_psi = curvature_bound(loss, space);
    if (!rep.c_psi) {
        rep.refusal = "forecast space touches a curvature singularity of psi";
        fail(rep.refusal);
    }
    return rep;
}

}  // namespace pderm

#include "pderm/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pderm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// one-sided 99% normal quantile
constexpr double kZ99 = 2.3263478740408408;

}  // namespace

std::string to_string(YSpace space) {
    return space == YSpace::real ? "real" : "nonneg";
}

// ---------------------------------------------------------------------------

InnovationLaw InnovationLaw::gaussian(double mean, double stddev) {
    if (!std::isfinite(mean) || !std::isfinite(stddev) || stddev < 0.0)
        throw std::invalid_argument("gaussian innovation: need finite mean and stddev >= 0");
    return InnovationLaw(Gaussian{mean, stddev});
}

InnovationLaw InnovationLaw::lognormal(double mu, double sigma) {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma < 0.0)
        throw std::invalid_argument("lognormal innovation: need finite mu and sigma >= 0");
    return InnovationLaw(LogNormal{mu, sigma});
}

InnovationLaw InnovationLaw::gamma(double shape, double scale) {
    if (!positive_finite(shape) || !positive_finite(scale))
        throw std::invalid_argument("gamma innovation: shape and scale must be positive");
    return InnovationLaw(Gamma{shape, scale, false});
}

InnovationLaw InnovationLaw::unit_mean_gamma(double shape) {
    if (!positive_finite(shape))
        throw std::invalid_argument("gamma innovation: shape must be positive");
    return InnovationLaw(Gamma{shape, 1.0 / shape, true});
}

InnovationLaw InnovationLaw::chisq1() { return InnovationLaw(ChiSq1{}); }

Support InnovationLaw::support() const noexcept {
    return std::holds_alternative<Gaussian>(family_) ? Support::whole_line
                                                     : Support::positive_line;
}

bool InnovationLaw::degenerate() const noexcept {
    return std::visit(overloaded{
                          [](const Gaussian& g) { return g.stddev == 0.0; },
                          [](const LogNormal& l) { return l.sigma == 0.0; },
                          [](const Gamma&) { return false; },
                          [](const ChiSq1&) { return false; },
                      },
                      family_);
}

double InnovationLaw::mean() const noexcept {
    return std::visit(overloaded{
                          [](const Gaussian& g) { return g.mean; },
                          [](const LogNormal& l) { return std::exp(l.mu + 0.5 * l.sigma * l.sigma); },
                          [](const Gamma& g) { return g.shape * g.scale; },
                          [](const ChiSq1&) { return 1.0; },
                      },
                      family_);
}

std::string InnovationLaw::describe() const {
    return std::visit(
        overloaded{
            [](const Gaussian& g) {
                return "gaussian(" + fmt_double(g.mean) + "," + fmt_double(g.stddev) + ")";
            },
            [](const LogNormal& l) {
                return "lognormal(" + fmt_double(l.mu) + "," + fmt_double(l.sigma) + ")";
            },
            [](const Gamma& g) {
                return std::string(g.shifted_to_unit_mean ? "unit_mean_gamma(" : "gamma(") +
                       fmt_double(g.shape) + "," + fmt_double(g.scale) + ")";
            },
            [](const ChiSq1&) { return std::string("chisq1"); },
        },
        family_);
}

bool InnovationLaw::has_finite_moment(int order) const noexcept {
    if (order < 0) return false;
    // Gaussian, lognormal, gamma and chi-square(1) have finite moments of every
    // order, and for the positive families so does log(eps).
    return std::visit(overloaded{
                          [](const Gaussian& g) { return std::isfinite(g.stddev); },
                          [](const LogNormal& l) { return std::isfinite(l.sigma); },
                          [](const Gamma& g) { return positive_finite(g.shape) && positive_finite(g.scale); },
                          [](const ChiSq1&) { return true; },
                      },
                      family_);
}

InnovationSampler::InnovationSampler(const InnovationLaw& law) : law_(law) {
    if (const auto* g = std::get_if<Gamma>(&law_.family()))
        gamma_ = std::gamma_distribution<double>(g->shape, g->scale);
}

double InnovationSampler::operator()(Rng& rng) {
    return std::visit(overloaded{
                          [&](const Gaussian& g) { return g.mean + g.stddev * normal_(rng); },
                          [&](const LogNormal& l) { return std::exp(l.mu + l.sigma * normal_(rng)); },
                          [&](const Gamma&) { return gamma_(rng); },
                          [&](const ChiSq1&) {
                              const double z = normal_(rng);
                              return z * z;
                          },
                      },
                      law_.family());
}

// ---------------------------------------------------------------------------

double GFunction::operator()(double h) const noexcept {
    switch (form) {
        case Form::constant: return c0;
        case Form::affine: return c0 + c1 * h;
        case Form::abs_affine: return c0 + c1 * std::fabs(h);
        case Form::log_ar: return std::exp(c0 * (1.0 - c1)) * std::pow(h, c1);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double GFunction::asymptotic_slope() const noexcept {
    switch (form) {
        case Form::constant: return 0.0;
        case Form::affine:
        case Form::abs_affine: return std::fabs(c1);
        case Form::log_ar:
            if (c1 < 1.0) return 0.0;
            if (c1 == 1.0) return 1.0;
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

std::string GFunction::describe() const {
    switch (form) {
        case Form::constant: return "constant(" + fmt_double(c0) + ")";
        case Form::affine: return "affine(" + fmt_double(c0) + "," + fmt_double(c1) + ")";
        case Form::abs_affine: return "abs_affine(" + fmt_double(c0) + "," + fmt_double(c1) + ")";
        case Form::log_ar: return "log_ar(" + fmt_double(c0) + "," + fmt_double(c1) + ")";
    }
    return "?";
}

// ---------------------------------------------------------------------------

SimulationDiverged::SimulationDiverged(std::size_t t_, double h_, double y_)
    : std::runtime_error("simulation diverged at t=" + std::to_string(t_) +
                         " (h=" + fmt_double(h_) + ", y=" + fmt_double(y_) + ")"),
      t(t_), h(h_), y(y_) {}

DgpState advance(const DgpSpec& spec, double h_prev, double eps_h, double eps_y) noexcept {
    DgpState s;
    s.h = spec.g_h1(h_prev) + spec.g_h2(h_prev) * eps_h;
    s.y = spec.g_y1(s.h) + spec.g_y2(s.h) * eps_y;
    return s;
}

InnovationStream::InnovationStream(const DgpSpec& spec, std::uint64_t seed)
    : rng_(seed), h_(spec.eps_h), y_(spec.eps_y) {}

InnovationStream::Draw InnovationStream::next() {
    Draw d;
    d.eps_h = h_(rng_);
    d.eps_y = y_(rng_);
    return d;
}

namespace {

SimPath run_stream(const DgpSpec& spec, DgpState init, std::size_t length,
                   std::uint64_t seed, std::size_t discard) {
    SimPath path;
    path.seed = seed;
    path.spec_id = spec.id;
    if (length == 0) return path;
    path.y.reserve(length);
    path.h.reserve(length);
    InnovationStream stream(spec, seed);
    DgpState s = init;
    const std::size_t total = discard + length;
    for (std::size_t t = 0; t < total; ++t) {
        if (t > 0) {
            const auto d = stream.next();
            s = advance(spec, s.h, d.eps_h, d.eps_y);
            if (!std::isfinite(s.h) || !std::isfinite(s.y)) throw SimulationDiverged(t, s.h, s.y);
        }
        if (t >= discard) {
            path.h.push_back(s.h);
            path.y.push_back(s.y);
        }
    }
    return path;
}

}  // namespace

SimPath simulate(const DgpSpec& spec, std::size_t t_total, std::uint64_t seed) {
    return run_stream(spec, {spec.h0, spec.y0}, t_total, seed, 0);
}

SimPath simulate_stationary(const DgpSpec& spec, std::size_t t_total, std::uint64_t seed) {
    return run_stream(spec, {spec.h0, spec.y0}, t_total, seed, spec.burn_in);
}

SimPath continue_path(const DgpSpec& spec, DgpState from, std::size_t horizon,
                      std::uint64_t seed) {
    return run_stream(spec, from, horizon + 1, seed, 0);
}

SimPath simulate_innovations(const DgpSpec& spec, DgpState init,
                             std::span<const double> eps_h,
                             std::span<const double> eps_y) {
    if (eps_h.size() != eps_y.size())
        throw std::invalid_argument("simulate_innovations: innovation sequences differ in length");
    SimPath path;
    path.spec_id = spec.id;
    path.h.reserve(eps_h.size() + 1);
    path.y.reserve(eps_h.size() + 1);
    path.h.push_back(init.h);
    path.y.push_back(init.y);
    DgpState s = init;
    for (std::size_t i = 0; i < eps_h.size(); ++i) {
        s = advance(spec, s.h, eps_h[i], eps_y[i]);
        if (!std::isfinite(s.h) || !std::isfinite(s.y)) throw SimulationDiverged(i + 1, s.h, s.y);
        path.h.push_back(s.h);
        path.y.push_back(s.y);
    }
    return path;
}

// ---------------------------------------------------------------------------

int max_regimes(int r_m) noexcept {
    // K < (r_m - 2) / 3  <=>  3K < r_m - 2
    int k = 0;
    while (3 * (k + 1) < r_m - 2) ++k;
    return k;
}

void check_regime_count(int k, int r_m) {
    if (k < 1) throw std::invalid_argument("number of regimes must be at least 1");
    if (3 * k >= r_m - 2)
        throw std::invalid_argument("K=" + std::to_string(k) + " violates K < (r_m - 2)/3 for r_m=" +
                                    std::to_string(r_m));
}

namespace {

std::vector<double> hidden_grid(YSpace space) {
    std::vector<double> grid;
    if (space == YSpace::real) {
        for (int i = 0; i <= 200; ++i) grid.push_back(-50.0 + 0.5 * i);
    } else {
        for (int i = 0; i <= 180; ++i) grid.push_back(std::pow(10.0, -6.0 + 0.05 * i));
    }
    return grid;
}

}  // namespace

ValidationReport validate_assumption1(const DgpSpec& spec, std::size_t mc_draws,
                                      std::uint64_t seed) {
    ValidationReport rep;
    rep.mc_draws = mc_draws;
    rep.max_regimes = max_regimes(spec.r_m);
    auto fail = [&](std::string msg) { rep.failures.push_back(std::move(msg)); };

    if (spec.r_m < 6) fail("r_m must be at least 6");
    if (rep.max_regimes < 1) fail("no regime count K satisfies K < (r_m - 2)/3");

    // (iii) supports and moments
    const Support want = spec.y_space == YSpace::real ? Support::whole_line : Support::positive_line;
    rep.support_ok = spec.eps_h.support() == want && spec.eps_y.support() == want;
    if (!rep.support_ok) fail("innovation support does not match the y-space");

    rep.continuity_ok = !spec.eps_h.degenerate() && !spec.eps_y.degenerate();
    if (!rep.continuity_ok) fail("degenerate innovation law (not absolutely continuous)");

    rep.moments_ok = spec.eps_h.has_finite_moment(2 * spec.r_m) &&
                     spec.eps_y.has_finite_moment(2 * spec.r_m);
    if (!rep.moments_ok) fail("innovation moment of order 2 r_m is not finite");

    // (i), (ii) positivity on a sampled grid of the hidden space
    rep.positivity_ok = true;
    for (double h : hidden_grid(spec.y_space)) {
        const double gh2 = spec.g_h2(h);
        const double gy2 = spec.g_y2(h);
        if (!(gh2 > 0.0) || !(gy2 > 0.0)) rep.positivity_ok = false;
        if (spec.y_space == YSpace::nonneg && !(spec.g_y1(h) >= 0.0)) rep.positivity_ok = false;
    }
    if (!rep.positivity_ok) fail("g_h2 or g_y2 not strictly positive (or g_y1 negative) on the grid");

    rep.growth_ok = spec.growth.a_h >= 0.0 && spec.growth.b_h >= 0.0 &&
                    spec.growth.a_h >= spec.g_h1.asymptotic_slope() &&
                    spec.growth.b_h >= spec.g_h2.asymptotic_slope();
    if (!rep.growth_ok) fail("(a_h, b_h) are not valid growth bounds for (g_h1, g_h2)");

    // (iv) E(a_h + b_h |eps_H|)^{2 r_m} < 1
    const double power = 2.0 * spec.r_m;
    if (spec.growth.b_h == 0.0) {
        rep.stability_closed_form = true;
        rep.stability_estimate = std::pow(spec.growth.a_h, power);
        rep.stability_upper99 = rep.stability_estimate;
    } else {
        if (mc_draws < 100000) fail("mc_draws must be at least 1e5");
        Rng rng(seed);
        InnovationSampler draw(spec.eps_h);
        double mean = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < mc_draws; ++i) {
            const double v = std::pow(spec.growth.a_h + spec.growth.b_h * std::fabs(draw(rng)), power);
            const double delta = v - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (v - mean);
        }
        const double var = mc_draws > 1 ? m2 / static_cast<double>(mc_draws - 1) : 0.0;
        rep.stability_estimate = mean;
        rep.stability_std_error = std::sqrt(var / static_cast<double>(mc_draws));
        rep.stability_upper99 = mean + kZ99 * rep.stability_std_error;
    }
    rep.stability_ok = std::isfinite(rep.stability_upper99) && rep.stability_upper99 < 1.0;
    if (!rep.stability_ok) fail("stability condition E(a_h + b_h|eps_H|)^(2 r_m) < 1 not certified");

    return rep;
}

// ---------------------------------------------------------------------------

ParamMap preset_defaults(const std::string& name) {
    if (name == "ar1_noise")
        return {{"rho", 0.5}, {"mu_h", 0.0}, {"sigma_h", 1.0}, {"sigma_y", 1.0}, {"r_m", 6}, {"burn_in", 1000}};
    if (name == "sv_returns")
        return {{"rho", 0.9}, {"mu_h", 0.0}, {"sigma_h", 0.3}, {"r_m", 6}, {"burn_in", 1000}};
    if (name == "sv_realized_vol")
        return {{"rho", 0.9}, {"mu_h", 1.0}, {"sigma_h", 0.08}, {"sigma_y", 0.5}, {"r_m", 6}, {"burn_in", 1000}};
    throw std::invalid_argument("unknown preset '" + name + "'");
}

DgpSpec preset(const std::string& name, const ParamMap& params) {
    ParamMap p = preset_defaults(name);
    for (const auto& [key, value] : params) {
        if (!p.contains(key))
            throw std::invalid_argument("preset '" + name + "' does not accept parameter '" + key + "'");
        if (!std::isfinite(value))
            throw std::invalid_argument("parameter '" + key + "' must be finite");
        p[key] = value;
    }
    const double rho = p.at("rho");
    const double mu = p.at("mu_h");
    const double sigma_h = p.at("sigma_h");
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw std::invalid_argument(msg);
    };
    require(sigma_h >= 0.0, "sigma_h must be >= 0");
    const double r_m = p.at("r_m");
    require(r_m >= 6 && std::floor(r_m) == r_m && r_m <= 64, "r_m must be an integer in [6, 64]");
    const double burn = p.at("burn_in");
    require(burn >= 0 && std::floor(burn) == burn && burn <= 1e9, "burn_in must be a nonnegative integer");

    DgpSpec s;
    s.id = name;
    s.r_m = static_cast<int>(r_m);
    s.burn_in = static_cast<std::size_t>(burn);

    if (name == "ar1_noise") {
        require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1) for ar1_noise");
        const double sigma_y = p.at("sigma_y");
        require(sigma_y >= 0.0, "sigma_y must be >= 0");
        s.y_space = YSpace::real;
        s.g_h1 = GFunction::affine(mu * (1.0 - rho), rho);
        s.g_h2 = GFunction::constant(sigma_h);
        s.g_y1 = GFunction::affine(0.0, 1.0);
        s.g_y2 = GFunction::constant(sigma_y);
        s.eps_h = InnovationLaw::gaussian(0.0, 1.0);
        s.eps_y = InnovationLaw::gaussian(0.0, 1.0);
        s.h_mean = mu;
        s.growth = {rho, 0.0};
    } else if (name == "sv_returns") {
        require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1) for sv_returns");
        s.y_space = YSpace::nonneg;
        s.g_h1 = GFunction::constant(0.0);
        s.g_h2 = GFunction::log_ar(mu, rho);
        s.g_y1 = GFunction::constant(0.0);
        s.g_y2 = GFunction::affine(0.0, 1.0);
        s.eps_h = InnovationLaw::lognormal(0.0, sigma_h);  // exp(eta)
        s.eps_y = InnovationLaw::chisq1();                 // z^2
        s.h_mean = std::exp(mu + 0.5 * sigma_h * sigma_h / (1.0 - rho * rho));
        s.growth = {rho, 0.0};
    } else {  // sv_realized_vol
        require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1) for sv_realized_vol");
        require(mu > 0.0, "mu_h must be > 0 for sv_realized_vol");
        const double sigma_y = p.at("sigma_y");
        require(sigma_y > 0.0, "sigma_y must be > 0 for sv_realized_vol");
        const double omega = (1.0 - rho) * mu - sigma_h;
        require(omega >= 0.0, "sv_realized_vol needs sigma_h <= (1 - rho) mu_h");
        s.y_space = YSpace::nonneg;
        s.g_h1 = GFunction::affine(omega, rho);
        s.g_h2 = GFunction::constant(sigma_h);
        s.g_y1 = GFunction::constant(0.0);
        s.g_y2 = GFunction::affine(0.0, 1.0);
        s.eps_h = InnovationLaw::unit_mean_gamma(1.0);
        s.eps_y = InnovationLaw::unit_mean_gamma(1.0 / (sigma_y * sigma_y));
        s.h_mean = mu;
        s.growth = {rho, 0.0};
    }
    s.h0 = s.h_mean;
    s.y0 = s.g_y1(s.h0);
    return s;
}

}  // namespace pderm

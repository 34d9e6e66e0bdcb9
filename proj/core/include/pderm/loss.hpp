#pragma once

#include "pderm/dgp.hpp"
#include "pderm/forecaster.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace pderm {

enum class LossKind { square, nef_ghs, gamma_qlike, poisson, negbin };

std::string to_string(LossKind kind);
/// Parses square|nef_ghs|gamma_qlike|poisson|negbin.
LossKind parse_loss_kind(const std::string& name);

/// Argument outside the loss domain.
class DomainError : public std::domain_error {
public:
    DomainError(const std::string& argument, double value, const std::string& why);
    std::string argument;
    double value;
};

/// Loss incompatible with the y-space or the forecast space.
class PairingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Convex domain S of psi.
struct LossDomain {
    double lo;
    bool lo_closed;  // lo belongs to S (only meaningful for finite lo)
};

namespace loss_detail {

// Closed forms of L(u, v) = psi(u) - psi(v) - psi'(v)(u - v). No domain checks.

inline double square(double u, double v) noexcept {
    const double e = u - v;
    return e * e;
}

inline double nef_ghs(double u, double v) noexcept {
    return u * (std::atan(u) - std::atan(v)) + 0.5 * std::log((1.0 + v * v) / (1.0 + u * u));
}

inline double gamma_qlike(double u, double v) noexcept {
    const double x = u / v - 1.0;
    return x - std::log1p(x);
}

inline double poisson(double u, double v) noexcept {
    if (u == 0.0) return v;  // 0 log 0 = 0
    return u * std::log(u / v) - (u - v);
}

inline double negbin(double u, double v) noexcept {
    const double tail = (1.0 + u) * std::log1p((v - u) / (1.0 + u));
    if (u == 0.0) return tail;
    return u * std::log(u / v) + tail;
}

template <LossKind K>
inline double value(double u, double v) noexcept {
    if constexpr (K == LossKind::square) return square(u, v);
    else if constexpr (K == LossKind::nef_ghs) return nef_ghs(u, v);
    else if constexpr (K == LossKind::gamma_qlike) return gamma_qlike(u, v);
    else if constexpr (K == LossKind::poisson) return poisson(u, v);
    else return negbin(u, v);
}

}  // namespace loss_detail

/// Call `fn(std::integral_constant<LossKind, K>{})` for the runtime kind.
template <class Fn>
decltype(auto) dispatch_loss(LossKind kind, Fn&& fn) {
    switch (kind) {
        case LossKind::square: return fn(std::integral_constant<LossKind, LossKind::square>{});
        case LossKind::nef_ghs: return fn(std::integral_constant<LossKind, LossKind::nef_ghs>{});
        case LossKind::gamma_qlike: return fn(std::integral_constant<LossKind, LossKind::gamma_qlike>{});
        case LossKind::poisson: return fn(std::integral_constant<LossKind, LossKind::poisson>{});
        case LossKind::negbin: break;
    }
    return fn(std::integral_constant<LossKind, LossKind::negbin>{});
}

/**
 * Bregman loss L(u, v) = psi(u) - psi(v) - psi'(v)(u - v) for the five regular
 * losses (square, NEF-GHS, gamma/QLIKE, Poisson, negative binomial with unit
 * known parameters).
 *
 * u is the target and must lie in S; v is the forecast and must lie in int(S).
 */
class BregmanLoss {
public:
    explicit BregmanLoss(LossKind kind = LossKind::square) : kind_(kind) {}

    LossKind kind() const noexcept { return kind_; }
    LossDomain domain() const noexcept;
    bool in_domain(double u) const noexcept;
    bool in_interior(double v) const noexcept;

    double psi(double u) const;
    double grad_psi(double v) const;
    double hess_psi(double v) const;

    /// Closed-form L(u, v) with domain checks.
    double eval(double u, double v) const;
    double operator()(double u, double v) const { return eval(u, v); }

    /// Closed-form L(u, v) without checks, for inner loops over certified pairs.
    double eval_unchecked(double u, double v) const noexcept {
        return dispatch_loss(kind_, [&](auto k) { return loss_detail::value<decltype(k)::value>(u, v); });
    }

    /// dL/dv = -psi''(v)(u - v).
    double grad_v(double u, double v) const;

    struct Triangle {
        double lhs;  // L(u, w)
        double rhs;  // L(u, v) + L(v, w) - (u - v)(psi'(w) - psi'(v))
    };
    Triangle triangle(double u, double v, double w) const;

private:
    void check(double u, double v) const;
    LossKind kind_;
};

struct Condition1Report {
    /// (i) Y-support contained in S.
    bool support_ok = false;
    /// (ii) sup over probed rules of E L^{r_m}, estimated on two independent paths.
    double moment_sup_seed_a = 0.0;
    double moment_sup_seed_b = 0.0;
    std::size_t probed_rules = 0;
    std::size_t path_length = 0;
    bool moments_ok = false;
    /// (iii) C_psi with L(v1, v2) <= C_psi (v1 - v2)^2 over the forecast space.
    std::optional<double> c_psi;
    std::string refusal;

    std::vector<std::string> failures;
    bool passed() const noexcept { return failures.empty(); }
};

/**
 * Throws PairingError when the loss cannot be used with the y-space or the
 * forecast space (e.g. gamma_qlike on the real line).
 */
void check_pairing(const BregmanLoss& loss, YSpace y_space, const RuleSpace& space);

/// Curvature constant for the forecast space, or nullopt when psi'' is unbounded there.
std::optional<double> curvature_bound(const BregmanLoss& loss, const RuleSpace& space);

struct Condition1Options {
    std::size_t path_length = 20000;
    std::size_t random_rules = 16;
    std::uint64_t seed = 20240501;
};

Condition1Report certify_condition1(const BregmanLoss& loss, const RuleSpace& space,
                                    const DgpSpec& spec, const Condition1Options& opt = {});

}  // namespace pderm

#include "icbandit/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "icbandit/regret.hpp"

namespace icbandit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ratio that is +inf whenever the denominator is not strictly positive.
double guarded_ratio(double numerator, double denominator, bool& infinite) {
    infinite = !(denominator > 0.0) || !std::isfinite(numerator);
    return infinite ? kInf : numerator / denominator;
}

void finish(BoundReport& r, const BoundInputs& in) {
    double eps = std::min({r.eta_psi, r.eta_phi, 1.0});
    r.epsilon_clamped = eps == 1.0 && std::min(r.eta_psi, r.eta_phi) >= 1.0;
    if (eps < 0.0) {
        eps = 0.0;
        r.epsilon_floored = true;
    }
    r.epsilon = eps;
    BoundInputs plain = in;
    plain.beta.reset();
    const auto probs = prob_lower_bounds(plain);
    r.prob_lower_bound_psi = probs.psi;
    r.prob_lower_bound_phi = probs.phi;
}

}  // namespace

BoundInputs& BoundInputs::with_belief(const TemporalBelief& belief) {
    psi_max = belief.psi_max();
    phi = belief.phi();
    w2 = belief.w2();
    return *this;
}

void BoundInputs::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    require(alpha > 0.0 && alpha <= 1.0, "bound inputs: alpha must lie in (0, 1]");
    require(Delta > 0.0 && Delta <= 1.0, "bound inputs: Delta must lie in (0, 1]");
    require(rho >= 0.0 && std::isfinite(rho), "bound inputs: rho must be non-negative");
    require(regret >= 0.0 && std::isfinite(regret), "bound inputs: regret must be non-negative");
    require(psi_max >= 0.0 && phi >= 0.0 && w2 >= 0.0, "bound inputs: dispersion terms must be non-negative");
    require(arms >= 1, "bound inputs: K must be positive");
    require(!beta || *beta >= 0.0, "bound inputs: beta must be non-negative");
}

BoundReport epsilon_swap(const BoundInputs& in) {
    in.validate();
    if (in.regret_kind != RegretKind::swap) throw std::invalid_argument("epsilon_swap: regret must be flagged as swap");
    BoundReport r;
    const double R = in.regret;
    r.effective_regret = R;
    r.c_term = azuma_transfer_bound(in.w2, in.arms, in.delta);
    r.delta_tilde = in.Delta - 2.0 * in.rho * in.psi_max;
    r.delta_tilde_nonpositive = !(r.delta_tilde > 0.0);
    r.eta_psi = guarded_ratio(R * r.delta_tilde, in.alpha * (r.delta_tilde - R - r.c_term), r.eta_psi_infinite);
    r.eta_phi = guarded_ratio(R * in.Delta, in.alpha * (in.Delta - (R + r.c_term + 2.0 * in.rho * in.phi)),
                              r.eta_phi_infinite);
    finish(r, in);
    return r;
}

BoundReport epsilon_external(const BoundInputs& in) {
    in.validate();
    BoundReport r;
    const double R = in.regret;
    r.effective_regret = R;
    r.c_term = azuma_transfer_bound(in.w2, in.arms, in.delta);
    r.delta_tilde = in.Delta - 2.0 * in.rho * in.psi_max;
    r.delta_tilde_nonpositive = !(r.delta_tilde > 0.0);
    const double error = R + 2.0 * in.rho * in.phi + r.c_term;
    r.eta_psi = guarded_ratio(error * r.delta_tilde, in.alpha * (r.delta_tilde - R - r.c_term), r.eta_psi_infinite);
    r.eta_phi = guarded_ratio(error * in.Delta, in.alpha * (in.Delta - 2.0 * in.rho * in.phi - R - r.c_term),
                              r.eta_phi_infinite);
    finish(r, in);
    return r;
}

ProbabilityBounds prob_lower_bounds(const BoundInputs& in) {
    in.validate();
    ProbabilityBounds p;
    const double c = azuma_transfer_bound(in.w2, in.arms, in.delta);
    const double R = in.regret + (in.beta ? 2.0 * *in.beta : 0.0);
    const double delta_tilde = in.Delta - 2.0 * in.rho * in.psi_max;
    if (delta_tilde > 0.0) {
        p.psi = std::clamp(in.alpha * (1.0 - (R + c) / delta_tilde), 0.0, 1.0);
    } else {
        p.psi = 0.0;
        p.delta_tilde_nonpositive = true;
    }
    p.phi = std::clamp(in.alpha * (1.0 - (R + c + 2.0 * in.rho * in.phi) / in.Delta), 0.0, 1.0);
    return p;
}

BoundReport uniform_window_epsilon(std::size_t horizon, std::size_t window, std::size_t arms, double alpha,
                                   double Delta, double rho, double regret_constant, WindowRegretRate rate) {
    if (window < 1 || window > horizon) throw std::invalid_argument("uniform_window_epsilon: need 1 <= L <= T");
    if (!(regret_constant >= 0.0)) throw std::invalid_argument("uniform_window_epsilon: regret constant must be >= 0");
    const double L = static_cast<double>(window);
    const double K = static_cast<double>(arms);
    const double scale = rate == WindowRegretRate::horizon_tuned ? static_cast<double>(horizon) : L;
    BoundInputs in;
    in.alpha = alpha;
    in.Delta = Delta;
    in.rho = rho;
    in.arms = arms;
    in.regret = regret_constant * std::sqrt(scale * K * std::log(scale * K)) / L;
    in.psi_max = (L - 1.0) / 2.0;
    in.phi = (L * L - 1.0) / (3.0 * L);
    in.w2 = 1.0 / L;
    return epsilon_external(in);
}

double tv_transfer(double regret_bound, double beta) {
    if (!(beta >= 0.0)) throw std::invalid_argument("tv_transfer: beta must be non-negative");
    return regret_bound + 2.0 * beta;
}

BoundReport epsilon_with_tv(const BoundInputs& inputs) {
    if (!inputs.beta) throw std::invalid_argument("epsilon_with_tv: beta is required");
    BoundInputs shifted = inputs;
    shifted.regret = tv_transfer(inputs.regret, *inputs.beta);
    shifted.regret_kind = RegretKind::external;
    shifted.beta.reset();
    return epsilon_external(shifted);
}

double mixture_epsilon(std::span<const BoundReport> components) {
    if (components.empty()) throw std::invalid_argument("mixture_epsilon: no components");
    double worst = 0.0;
    for (const auto& c : components) worst = std::max(worst, c.epsilon);
    return worst;
}

namespace {
nlohmann::json finite_or_inf(double x) {
    if (std::isinf(x)) return x > 0 ? "+inf" : "-inf";
    return x;
}
}  // namespace

void to_json(nlohmann::json& j, const BoundReport& r) {
    j = nlohmann::json{{"delta_tilde", r.delta_tilde},
                       {"c_term", r.c_term},
                       {"eta_psi", finite_or_inf(r.eta_psi)},
                       {"eta_phi", finite_or_inf(r.eta_phi)},
                       {"epsilon", r.epsilon},
                       {"prob_lower_bound_psi", r.prob_lower_bound_psi},
                       {"prob_lower_bound_phi", r.prob_lower_bound_phi},
                       {"effective_regret", r.effective_regret},
                       {"flags",
                        {{"eta_psi_infinite", r.eta_psi_infinite},
                         {"eta_phi_infinite", r.eta_phi_infinite},
                         {"delta_tilde_nonpositive", r.delta_tilde_nonpositive},
                         {"epsilon_clamped", r.epsilon_clamped},
                         {"epsilon_floored", r.epsilon_floored}}}};
}

void to_json(nlohmann::json& j, const BoundInputs& in) {
    j = nlohmann::json{{"alpha", in.alpha},   {"Delta", in.Delta}, {"rho", in.rho},
                       {"regret", in.regret}, {"regret_kind", in.regret_kind == RegretKind::swap ? "swap" : "external"},
                       {"psi_max", in.psi_max}, {"phi", in.phi}, {"w2", in.w2},
                       {"K", in.arms}};
    if (in.beta) j["beta"] = *in.beta;
    if (in.delta) j["delta"] = *in.delta;
}

}  // namespace icbandit

#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <json.hpp>

#include "icbandit/temporal.hpp"

namespace icbandit {

enum class RegretKind { external, swap };

/// Everything a regret-to-incentive bound needs about one agent.
struct BoundInputs {
    double alpha = 1.0;   // explorability probability
    double Delta = 1.0;   // explorability margin
    double rho = 0.0;     // per-round drift bound
    double regret = 0.0;  // expected D-weighted regret guarantee
    RegretKind regret_kind = RegretKind::external;
    double psi_max = 0.0;
    double phi = 0.0;
    double w2 = 1.0;
    std::size_t arms = 2;
    std::optional<double> beta;   // TV radius to the analysed class
    std::optional<double> delta;  // confidence level; absent = expectation form of the concentration term

    /// Fill psi_max, phi and w2 from a belief.
    BoundInputs& with_belief(const TemporalBelief& belief);
    /// Throws std::invalid_argument unless alpha, Delta in (0, 1], rho, regret, beta >= 0.
    void validate() const;
};

struct BoundReport {
    double delta_tilde = 0.0;  // Delta - 2 rho psi_max
    double c_term = 0.0;       // 2 sqrt(2 W2 ln(2K))
    double eta_psi = 0.0;      // +inf when its denominator is not positive
    double eta_phi = 0.0;
    double epsilon = 1.0;      // min(eta_psi, eta_phi, 1), floored at 0
    double prob_lower_bound_psi = 0.0;
    double prob_lower_bound_phi = 0.0;
    double effective_regret = 0.0;  // regret + 2 beta when a TV radius is given

    bool eta_psi_infinite = false;
    bool eta_phi_infinite = false;
    bool delta_tilde_nonpositive = false;
    bool epsilon_clamped = false;  // epsilon came from the cap at 1
    bool epsilon_floored = false;  // a negative eta was replaced by 0
    bool vacuous() const noexcept { return epsilon >= 1.0; }
};

BoundReport epsilon_swap(const BoundInputs& inputs);
BoundReport epsilon_external(const BoundInputs& inputs);

struct ProbabilityBounds {
    double psi = 0.0;
    double phi = 0.0;
    bool delta_tilde_nonpositive = false;
};

/// Lower bounds on P(recommendation = a) under compliant play.
ProbabilityBounds prob_lower_bounds(const BoundInputs& inputs);

enum class WindowRegretRate {
    horizon_tuned,  // parameter T: C sqrt(T K ln(TK)) / L
    window_tuned,   // parameter L: C sqrt(L K ln(LK)) / L
};

/// epsilon_external for an agent uniform over a window of length L, with the
/// closed-form dispersion of a uniform window and the interval-regret rate of
/// the chosen tuning.
BoundReport uniform_window_epsilon(std::size_t horizon, std::size_t window, std::size_t arms, double alpha,
                                   double Delta, double rho, double regret_constant = 1.0,
                                   WindowRegretRate rate = WindowRegretRate::horizon_tuned);

/// Regret against a belief within TV distance beta of the analysed class.
double tv_transfer(double regret_bound, double beta);
/// epsilon_external with regret replaced by regret + 2 beta (beta must be set).
BoundReport epsilon_with_tv(const BoundInputs& inputs);

/// A mixture of beliefs inherits the worst component guarantee.
double mixture_epsilon(std::span<const BoundReport> components);

void to_json(nlohmann::json& j, const BoundReport& report);
void to_json(nlohmann::json& j, const BoundInputs& inputs);

}  // namespace icbandit

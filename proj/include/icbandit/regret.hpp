#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "icbandit/rewards.hpp"
#include "icbandit/temporal.hpp"

namespace icbandit {

/// Per-round record of a play: recommendation, played action, full realised
/// reward vector, and the observed reward (the played entry).
class Transcript {
public:
    Transcript(std::size_t arms, std::size_t reserve_rounds = 0);

    void append(std::size_t recommended, std::size_t played, std::span<const double> rewards);

    std::size_t horizon() const noexcept { return recommended_.size(); }
    std::size_t arms() const noexcept { return arms_; }

    std::size_t recommended(std::size_t t) const noexcept { return recommended_[t]; }
    std::size_t played(std::size_t t) const noexcept { return played_[t]; }
    double reward(std::size_t t, std::size_t a) const noexcept { return rewards_[t * arms_ + a]; }
    std::span<const double> rewards(std::size_t t) const noexcept { return {rewards_.data() + t * arms_, arms_}; }
    double observed(std::size_t t) const noexcept { return rewards_[t * arms_ + played_[t]]; }

    std::span<const std::size_t> recommendations() const noexcept { return recommended_; }
    std::span<const std::size_t> plays() const noexcept { return played_; }

    friend bool operator==(const Transcript&, const Transcript&) = default;

private:
    std::size_t arms_;
    std::vector<std::size_t> recommended_;
    std::vector<std::size_t> played_;
    std::vector<double> rewards_;
};

enum class RegretTarget { recommended, played };

/// max_a sum_t D(t) (u_{t,a} - u_{t,I_t}); may be negative.
double weighted_external_regret(const Transcript& tr, const TemporalBelief& belief,
                                RegretTarget on = RegretTarget::recommended);

/// max over swap functions phi of sum_t D(t) (u_{t,phi(I_t)} - u_{t,I_t}).
/// Computed per recommended action in O(TK + K^2); never negative.
double weighted_swap_regret(const Transcript& tr, const TemporalBelief& belief);

/// Brute force over all K^K swap functions. Rejects K > 6.
double weighted_swap_regret_oracle(const Transcript& tr, const TemporalBelief& belief);

/// External and swap regret evaluated on the means of `mu` instead of realised rewards.
double weighted_pseudo_regret(const Transcript& tr, const TemporalBelief& belief, const RewardInstance& mu);
double weighted_pseudo_swap_regret(const Transcript& tr, const TemporalBelief& belief, const RewardInstance& mu);

/// 2 sqrt(2 W2 ln(2K / delta)); without delta, the expectation form 2 sqrt(2 W2 ln(2K)).
double azuma_transfer_bound(double w2, std::size_t arms, std::optional<double> delta = std::nullopt);
double azuma_transfer_bound(const TemporalBelief& belief, std::size_t arms, std::optional<double> delta = std::nullopt);

/// CSV with header `t,I_t,a_t,u_1..u_K,observed`; rounds and actions are 1-based.
void write_transcript_csv(std::ostream& os, const Transcript& tr);
Transcript read_transcript_csv(std::istream& is);

}  // namespace icbandit

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icbandit/learners.hpp"
#include "icbandit/regret.hpp"
#include "icbandit/rewards.hpp"
#include "icbandit/temporal.hpp"

namespace icbandit {

/// Recommendation-to-action map, 0-based; identity means compliant.
using Strategy = std::vector<std::size_t>;

Strategy identity_strategy(std::size_t arms);
/// Plays `to` whenever `from` is recommended, follows every other recommendation.
Strategy swap_strategy(std::size_t arms, std::size_t from, std::size_t to);

struct AgentSpec {
    RewardEnsemble reward_belief;
    TemporalBelief temporal_belief;
    Strategy strategy;

    /// Throws unless the strategy is a total map on the ensemble's arms and the horizons agree.
    void validate() const;
};

/// Every agent follows its recommendation. The learner and the reward noise
/// draw from separate child streams of `seed`.
Transcript run_compliant(const PolicyFactory& factory, const RewardInstance& mu, std::uint64_t seed);

struct DeviationRun {
    Transcript transcript;
    std::size_t deviating_round = 1;  // 1-based
};

/// Compliant play except at one round tau ~ belief, where the agent plays
/// strategy(I_tau). Shares the learner and reward streams of run_compliant, so
/// the identity strategy reproduces the compliant transcript exactly.
DeviationRun run_with_deviation(const PolicyFactory& factory, const RewardInstance& mu,
                                const TemporalBelief& deviating_round_belief, const Strategy& strategy,
                                std::uint64_t seed);

enum class GainMethod {
    rao_blackwell,  // exact D-weighted sums over rounds
    sampled_round,  // one tau ~ D per transcript
};

struct GainEstimateOptions {
    std::size_t n_outer = 200;  // instance draws
    std::size_t n_inner = 5;    // transcripts per instance
    std::uint64_t seed = 0;
    std::size_t min_count = 100;
    std::size_t jobs = 1;
    GainMethod method = GainMethod::rao_blackwell;
};

/// Monte-Carlo estimates of the conditional quantities in the incentive
/// constraint, for one agent belief under compliant play.
///
/// With N_a = sum_t D(t) 1[I_t = a] and X_ab = sum_t D(t) 1[I_t = a] (mu_tb - mu_ta)
/// per transcript, gain(a, b) = E[X_ab] / E[N_a] and P(I_tau = a) = E[N_a].
/// Finite ensembles are stratified: instance k receives max(1, round(n_outer p_k))
/// draws of n_inner transcripts and is weighted by p_k, so deterministic
/// instances are evaluated exactly. Generative ensembles use n_outer instance
/// draws, each averaged over its n_inner transcripts. Half-widths are 95%
/// normal intervals; the gain interval uses the delta method for the ratio.
struct ConditionalGainReport {
    std::size_t arms = 0;
    GainMethod method = GainMethod::rao_blackwell;
    std::size_t transcripts = 0;
    std::size_t min_count = 0;

    std::vector<double> probability;  // P(I_tau = a)
    std::vector<double> probability_ci;
    std::vector<std::size_t> count;   // transcripts that recommend a with positive weight (or at tau)

    std::vector<std::vector<double>> gain;     // [a][b]
    std::vector<std::vector<double>> gain_ci;  // [a][b]
    /// False when count[a] < min_count; the estimate is then reported but not trusted.
    std::vector<std::vector<bool>> defined;

    // Realised D-weighted regrets of the compliant transcripts.
    double external_regret_mean = 0.0;
    double external_regret_ci = 0.0;
    double external_regret_worst_instance = 0.0;  // max over finite-support instances; the mean for generators
    double swap_regret_mean = 0.0;
    double swap_regret_worst_instance = 0.0;
    double pseudo_regret_mean = 0.0;

    /// Largest defined off-diagonal gain; -inf when none is defined.
    double max_defined_gain() const;
};

ConditionalGainReport estimate_conditional_gain(const PolicyFactory& factory, const AgentSpec& agent,
                                                const GainEstimateOptions& options);

/// One pass of compliant transcripts scored against several beliefs at once
/// (all beliefs share the ensemble's horizon).
std::vector<ConditionalGainReport> estimate_conditional_gain(const PolicyFactory& factory,
                                                             const RewardEnsemble& reward_belief,
                                                             std::span<const TemporalBelief> beliefs,
                                                             const GainEstimateOptions& options);

struct RecommendationProbabilities {
    std::vector<double> probability;
    std::vector<double> ci;
};

RecommendationProbabilities estimate_recommendation_prob(const PolicyFactory& factory, const AgentSpec& agent,
                                                         const GainEstimateOptions& options);

enum class CheckStatus { pass, fail, inconclusive, no_guarantee };
std::string to_string(CheckStatus status);

struct IcCheckRow {
    std::size_t from = 0;  // recommended action, 0-based
    std::size_t to = 0;    // deviation, 0-based
    double estimate = 0.0;
    double ci = 0.0;
    std::size_t count = 0;
    double bound = 1.0;
    CheckStatus status = CheckStatus::inconclusive;
};

/// Compares every off-diagonal gain with epsilon: inconclusive below the
/// minimum count, no_guarantee when epsilon >= 1, otherwise pass iff
/// estimate <= epsilon + 2 ci.
std::vector<IcCheckRow> ic_check(const ConditionalGainReport& report, double epsilon);

nlohmann::json to_json(const ConditionalGainReport& report);
nlohmann::json to_json(const std::vector<IcCheckRow>& rows);
/// Header `a,b,estimate,ci,n,bound,status`; actions 1-based.
void write_ic_check_csv(std::ostream& os, std::span<const IcCheckRow> rows);

}  // namespace icbandit

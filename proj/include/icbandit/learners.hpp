#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icbandit/rewards.hpp"
#include "icbandit/rng.hpp"

namespace icbandit {

struct Recommendation {
    std::size_t action = 0;
    std::vector<double> distribution;
};

/// A bandit recommendation policy. Each round: recommend(), then update() with
/// the played action and its reward. update() importance-weights with the
/// distribution logged by the last recommend().
class Learner {
public:
    virtual ~Learner() = default;

    std::size_t arms() const noexcept { return arms_; }
    virtual std::string kind() const = 0;

    /// Distribution the next recommendation will be drawn from.
    virtual std::span<const double> distribution() const = 0;

    Recommendation recommend();

    /// Throws std::invalid_argument when the reward lies outside [0, 1].
    void update(std::size_t played, double reward);

    Rng& rng() noexcept { return rng_; }

protected:
    Learner(std::size_t arms, std::uint64_t seed);

    virtual void apply_update(std::size_t played, double reward, std::span<const double> logged) = 0;

private:
    std::size_t arms_;
    Rng rng_;
    std::vector<double> logged_;
    bool has_logged_ = false;
};

using LearnerPtr = std::unique_ptr<Learner>;
/// Builds a fresh learner on its own random stream.
using PolicyFactory = std::function<LearnerPtr(std::uint64_t seed)>;

struct ExpWeightsParams {
    double eta = 0.1;    // learning rate
    double gamma = 0.0;  // uniform exploration mixed into the recommendation
    double beta = 0.0;   // fixed-share mixing of the weights; 0 gives plain EXP3
};

/// Exponential weights over arms with importance-weighted bandit feedback.
///
/// The loss estimate for round t is 1 - u_hat with u_hat_i = u 1[i = a_t] / p(a_t),
/// an unbiased estimate of the loss vector 1 - u_t. After the multiplicative
/// step the weights are mixed with the uniform vector (fixed share, beta), so
/// every weight share stays >= beta / K; the recommendation is
/// (1 - gamma) w + gamma / K.
class ExpWeightsLearner final : public Learner {
public:
    ExpWeightsLearner(std::size_t arms, ExpWeightsParams params, std::uint64_t seed, std::string kind = "exp4s");

    std::string kind() const override { return kind_; }
    std::span<const double> distribution() const override { return distribution_; }
    /// Normalised weights before exploration mixing.
    std::span<const double> weights() const noexcept { return weights_; }
    const ExpWeightsParams& params() const noexcept { return params_; }

    /// Full-information step with an explicit loss vector (used by the swap wrapper).
    void update_losses(std::span<const double> losses);

private:
    void apply_update(std::size_t played, double reward, std::span<const double> logged) override;
    void renormalise();

    ExpWeightsParams params_;
    std::string kind_;
    std::vector<double> log_weights_;
    std::vector<double> weights_;
    std::vector<double> distribution_;
};

/// Defaults for Exp4.S tuned to interval length `window` on horizon T:
/// eta = sqrt(ln(KT) / (LK)), gamma = min(1, sqrt(K ln K / L)), beta = 1 / (LK).
ExpWeightsParams exp4s_defaults(std::size_t arms, std::size_t horizon, std::size_t window);
/// EXP3 defaults: eta = sqrt(2 ln K / (TK)), gamma = min(1, sqrt(K ln K / T)), no fixed share.
ExpWeightsParams exp3_defaults(std::size_t arms, std::size_t horizon);

/// Swap-regret reduction over K copies of a base exponential-weights learner.
///
/// Base learner j proposes a row q_j; the recommendation is drawn from the
/// stationary distribution p of the row-stochastic matrix Q = [q_j]. After
/// the round every base learner j receives the estimated loss vector scaled
/// by p_j. The stationary distribution is a dense linear solve for K <= 64
/// (power iteration above that, or when the solve is singular).
class SwapRegretLearner final : public Learner {
public:
    SwapRegretLearner(std::size_t arms, ExpWeightsParams base_params, std::uint64_t seed);

    std::string kind() const override { return "swap-wrapper"; }
    std::span<const double> distribution() const override { return distribution_; }
    const ExpWeightsLearner& base(std::size_t j) const { return *bases_.at(j); }
    /// True when the last stationary solve fell back to power iteration.
    bool used_power_iteration() const noexcept { return used_power_iteration_; }

private:
    void apply_update(std::size_t played, double reward, std::span<const double> logged) override;
    void refresh();

    std::vector<std::unique_ptr<ExpWeightsLearner>> bases_;
    std::vector<double> distribution_;
    bool used_power_iteration_ = false;
};

/// Stationary distribution pi = pi Q of a row-stochastic matrix (row-major K x K).
std::vector<double> stationary_distribution(std::span<const double> matrix, std::size_t k, double tol = 1e-10,
                                            bool* used_power_iteration = nullptr);

/// Recommends the arm with the best running mean; unplayed arms first, ties to the lowest index.
class GreedyLearner final : public Learner {
public:
    GreedyLearner(std::size_t arms, std::uint64_t seed);
    std::string kind() const override { return "greedy"; }
    std::span<const double> distribution() const override { return distribution_; }

private:
    void apply_update(std::size_t played, double reward, std::span<const double> logged) override;
    void refresh();

    std::vector<double> sums_;
    std::vector<std::size_t> counts_;
    std::vector<double> distribution_;
};

/// Policy given as an explicit map from history to recommendation distribution.
/// Enumerating its randomness is what makes exhaustive oracles possible.
class TabularPolicy final : public Learner {
public:
    using History = std::vector<std::pair<std::size_t, double>>;  // (played, reward) per past round
    using Table = std::function<std::vector<double>(const History&)>;

    TabularPolicy(std::size_t arms, Table table, std::uint64_t seed);
    std::string kind() const override { return "tabular"; }
    std::span<const double> distribution() const override { return distribution_; }
    const History& history() const noexcept { return history_; }

private:
    void apply_update(std::size_t played, double reward, std::span<const double> logged) override;

    Table table_;
    History history_;
    std::vector<double> distribution_;
};

/// Always recommends one arm.
TabularPolicy::Table constant_table(std::size_t arms, std::size_t action);

/// {"kind":"exp3"|"exp4s"|"swap-wrapper","K":..,"L":..,"eta":null|x,"gamma":null|x,"beta":null|x,"seed":..}
struct PolicyConfig {
    std::string kind = "exp4s";
    std::size_t arms = 2;
    std::optional<std::size_t> window;  // L; null means the horizon
    std::optional<double> eta;
    std::optional<double> gamma;
    std::optional<double> beta;
    std::uint64_t seed = 0;

    ExpWeightsParams resolve(std::size_t horizon) const;
};

PolicyConfig policy_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolicyConfig& config);

/// Factory for the configured policy on a given horizon.
PolicyFactory make_policy_factory(const PolicyConfig& config, std::size_t horizon);

enum class IntervalRegretBasis { pseudo, realized };

/// Interval-regret profile of a policy against an oblivious reward schedule.
struct AdaptiveProfile {
    std::vector<std::size_t> lengths;
    std::vector<double> max_interval_regret;  // mean over seeds of max over intervals of that length
    std::vector<double> max_interval_ci;
    std::vector<std::size_t> anchors;  // 0-based rounds where the best arm changes (round 0 included)
    /// anchored[k][i]: mean regret of [anchors[k], anchors[k] + lengths[i]); NaN past the segment end.
    std::vector<std::vector<double>> anchored;
    double slope = 0.0;                   // log-log slope of max_interval_regret vs length
    std::vector<double> anchored_slopes;  // per anchor, over lengths inside its segment
};

std::vector<std::size_t> log_spaced_lengths(std::size_t lo, std::size_t hi, std::size_t count);

/// Max regret over all intervals of each length. `values(t, a)` supplies the
/// per-round payoff, `chosen` the recommendation sequence.
std::vector<double> max_interval_regret(std::span<const std::size_t> chosen, std::size_t arms,
                                        const std::function<double(std::size_t, std::size_t)>& values,
                                        std::span<const std::size_t> lengths);

AdaptiveProfile adaptive_regret_profile(const PolicyFactory& factory, const RewardInstance& adversary,
                                        std::span<const std::size_t> lengths, std::size_t n_seeds, std::uint64_t seed,
                                        IntervalRegretBasis basis = IntervalRegretBasis::pseudo,
                                        std::size_t jobs = 1);

}  // namespace icbandit

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icbandit/rng.hpp"
#include "icbandit/temporal.hpp"

namespace icbandit {

/// How realised rewards scatter around their means.
struct NoiseFamily {
    enum class Kind { bernoulli, truncated_gaussian, deterministic };
    Kind kind = Kind::bernoulli;
    double sigma = 0.0;  // truncated_gaussian only

    static NoiseFamily bernoulli() { return {Kind::bernoulli, 0.0}; }
    static NoiseFamily deterministic() { return {Kind::deterministic, 0.0}; }
    static NoiseFamily truncated_gaussian(double sigma) { return {Kind::truncated_gaussian, sigma}; }

    friend bool operator==(const NoiseFamily&, const NoiseFamily&) = default;
};

std::string to_string(const NoiseFamily& noise);
NoiseFamily parse_noise(const std::string& text);

/// A T x K matrix of per-round mean rewards in [0, 1] plus a noise family.
class RewardInstance {
public:
    RewardInstance(std::size_t horizon, std::size_t arms, std::vector<double> means,
                   NoiseFamily noise = NoiseFamily::bernoulli());

    /// Same mean vector in every round.
    static RewardInstance stationary(std::size_t horizon, std::span<const double> arm_means,
                                     NoiseFamily noise = NoiseFamily::bernoulli());

    std::size_t horizon() const noexcept { return horizon_; }
    std::size_t arms() const noexcept { return arms_; }
    const NoiseFamily& noise() const noexcept { return noise_; }

    /// Mean of arm `a` (0-based) at round index `t` (0-based).
    double mean(std::size_t t, std::size_t a) const noexcept { return means_[t * arms_ + a]; }
    std::span<const double> round_means(std::size_t t) const noexcept { return {means_.data() + t * arms_, arms_}; }
    std::span<const double> data() const noexcept { return means_; }

    /// max_t ||mu_{t+1} - mu_t||_inf.
    double drift() const noexcept { return drift_; }

    RewardInstance with_noise(NoiseFamily noise) const;

    friend bool operator==(const RewardInstance& a, const RewardInstance& b) {
        return a.horizon_ == b.horizon_ && a.arms_ == b.arms_ && a.means_ == b.means_ && a.noise_ == b.noise_;
    }

private:
    std::size_t horizon_;
    std::size_t arms_;
    std::vector<double> means_;
    NoiseFamily noise_;
    double drift_ = 0.0;
};

/// A reward belief: either a finite list of weighted instances or a seeded
/// generator. Draw `i` of a generative ensemble is a pure function of
/// (seed, i), so every module sees the same prior sample.
class RewardEnsemble {
public:
    using Generator = std::function<RewardInstance(std::uint64_t seed)>;

    enum class Kind { finite, generative };

    static RewardEnsemble finite(std::vector<RewardInstance> instances, std::vector<double> probabilities);
    static RewardEnsemble generative(Generator generator, std::uint64_t seed, std::size_t horizon,
                                     std::size_t arms, nlohmann::json parameters = {});

    Kind kind() const noexcept { return kind_; }
    std::size_t horizon() const noexcept { return horizon_; }
    std::size_t arms() const noexcept { return arms_; }
    std::uint64_t seed() const noexcept { return seed_; }

    const std::vector<RewardInstance>& support() const noexcept { return support_; }
    const std::vector<double>& probabilities() const noexcept { return probabilities_; }
    /// Generator parameters recorded for the manifest (generative only).
    const nlohmann::json& parameters() const noexcept { return parameters_; }

    /// Deterministic i-th generator draw (generative only).
    RewardInstance draw(std::uint64_t index) const;
    /// Draw mu ~ P with the supplied randomness.
    RewardInstance sample(Rng& rng) const;

private:
    RewardEnsemble() = default;

    Kind kind_ = Kind::finite;
    std::size_t horizon_ = 0;
    std::size_t arms_ = 0;
    std::vector<RewardInstance> support_;
    std::vector<double> probabilities_;
    Generator generator_;
    std::uint64_t seed_ = 0;
    nlohmann::json parameters_;
};

/// min_{b != a} sum_t D(t) (mu_{t,a} - mu_{t,b}); `a` is 0-based.
double gap(const RewardInstance& mu, const TemporalBelief& belief, std::size_t action);

struct ExplorabilityReport {
    std::vector<double> pi;   // P(gap(a) >= Delta) per action
    double alpha_hat = 0.0;   // min over actions
    double ci_halfwidth = 0.0;  // 0 for finite ensembles (exact)
    std::size_t samples = 0;
    bool holds = false;       // alpha_hat > 0
};

inline constexpr std::size_t kDefaultExplorabilitySamples = 10'000;

ExplorabilityReport verify_explorability(const RewardEnsemble& prior, const TemporalBelief& belief, double delta,
                                         std::size_t n_samples = kDefaultExplorabilitySamples);

struct DriftReport {
    double rho_hat = 0.0;
    bool lower_estimate = false;  // true when sampled from a generator
    std::size_t instances = 0;
};

DriftReport verify_drift(const RewardEnsemble& prior, std::size_t sample_budget = 100);

/// Per-arm reflected random walks on [0, 1] with increments uniform in
/// [-rho, rho]; starting means are uniform on [0, 1].
RewardEnsemble make_drifting_ensemble(std::size_t horizon, std::size_t arms, double rho, std::uint64_t seed,
                                      NoiseFamily noise = NoiseFamily::bernoulli());

/// One reflected random walk started from the given means.
RewardInstance random_walk_instance(std::span<const double> start, std::size_t horizon, double rho, Rng& rng,
                                    NoiseFamily noise = NoiseFamily::bernoulli());

/// Equal-length stationary segments (the last absorbs the remainder); one mean
/// vector per segment.
RewardInstance piecewise_stationary(std::size_t horizon, std::span<const std::vector<double>> segment_means,
                                    NoiseFamily noise = NoiseFamily::bernoulli());

/// One realised reward for arm `a` at round index `t`. Truncated-gaussian
/// draws are clipped to [0, 1], which pulls the mean towards 1/2 near the
/// boundaries; that bias is not corrected.
double sample_reward(const RewardInstance& mu, std::size_t t, std::size_t a, Rng& rng);

/// Realised rewards for every arm at round index `t`.
void sample_reward_vector(const RewardInstance& mu, std::size_t t, Rng& rng, std::span<double> out);

// CSV: T rows, K columns, 17 significant digits, no header.
void write_instance_csv(std::ostream& os, const RewardInstance& mu);
RewardInstance read_instance_csv(std::istream& is, NoiseFamily noise = NoiseFamily::bernoulli());

nlohmann::json instance_to_json(const RewardInstance& mu);
RewardInstance instance_from_json(const nlohmann::json& j);

/// Manifest: {"kind":"finite","instances":[{"file":..,"weight":..}],...} or
/// {"kind":"generative","generator":"drifting-walk",...}. Finite instance
/// files are written next to the manifest.
void write_ensemble_manifest(const RewardEnsemble& prior, const std::filesystem::path& manifest);
RewardEnsemble read_ensemble_manifest(const std::filesystem::path& manifest);

}  // namespace icbandit

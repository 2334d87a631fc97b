#include "icbandit/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "icbandit/numeric.hpp"
#include "icbandit/parallel.hpp"

namespace icbandit {

// ---------------------------------------------------------------------------
// Learner

Learner::Learner(std::size_t arms, std::uint64_t seed) : arms_(arms), rng_(seed) {
    if (arms == 0) throw std::invalid_argument("learner: K must be positive");
}

Recommendation Learner::recommend() {
    const auto dist = distribution();
    logged_.assign(dist.begin(), dist.end());
    has_logged_ = true;
    return {rng_.categorical(logged_), logged_};
}

void Learner::update(std::size_t played, double reward) {
    if (!(reward >= 0.0 && reward <= 1.0)) throw std::invalid_argument("learner: reward outside [0, 1]");
    if (played >= arms_) throw std::out_of_range("learner: played action out of range");
    if (!has_logged_) {
        const auto dist = distribution();
        logged_.assign(dist.begin(), dist.end());
    }
    apply_update(played, reward, logged_);
    has_logged_ = false;
}

// ---------------------------------------------------------------------------
// Exponential weights

ExpWeightsLearner::ExpWeightsLearner(std::size_t arms, ExpWeightsParams params, std::uint64_t seed, std::string kind)
    : Learner(arms, seed),
      params_(params),
      kind_(std::move(kind)),
      log_weights_(arms, 0.0),
      weights_(arms),
      distribution_(arms) {
    if (!(params.eta > 0.0)) throw std::invalid_argument("exp weights: eta must be positive");
    if (!(params.gamma >= 0.0 && params.gamma <= 1.0)) throw std::invalid_argument("exp weights: gamma must lie in [0, 1]");
    if (!(params.beta >= 0.0 && params.beta <= 1.0)) throw std::invalid_argument("exp weights: beta must lie in [0, 1]");
    renormalise();
}

void ExpWeightsLearner::renormalise() {
    const std::size_t k = arms();
    const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        weights_[i] = std::exp(log_weights_[i] - top);
        total += weights_[i];
    }
    const double uniform = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
        weights_[i] /= total;
        if (params_.beta > 0.0) weights_[i] = (1.0 - params_.beta) * weights_[i] + params_.beta * uniform;
        log_weights_[i] = std::log(weights_[i]);
        distribution_[i] = (1.0 - params_.gamma) * weights_[i] + params_.gamma * uniform;
    }
}

void ExpWeightsLearner::apply_update(std::size_t played, double reward, std::span<const double> logged) {
    if (arms() == 1) return;
    // The constant part of the loss estimate 1 - u_hat cancels in normalisation,
    // so only the played arm's log-weight moves.
    log_weights_[played] += params_.eta * reward / logged[played];
    renormalise();
}

void ExpWeightsLearner::update_losses(std::span<const double> losses) {
    if (losses.size() != arms()) throw std::invalid_argument("exp weights: loss vector has wrong length");
    if (arms() == 1) return;
    for (std::size_t i = 0; i < arms(); ++i) log_weights_[i] -= params_.eta * losses[i];
    renormalise();
}

ExpWeightsParams exp4s_defaults(std::size_t arms, std::size_t horizon, std::size_t window) {
    const double k = static_cast<double>(arms);
    const double t = static_cast<double>(horizon);
    const double l = static_cast<double>(window);
    ExpWeightsParams p;
    p.eta = std::sqrt(std::max(std::log(k * t), 1e-12) / (l * k));
    p.gamma = std::min(1.0, std::sqrt(k * std::log(k) / l));
    p.beta = 1.0 / (l * k);
    return p;
}

ExpWeightsParams exp3_defaults(std::size_t arms, std::size_t horizon) {
    const double k = static_cast<double>(arms);
    const double t = static_cast<double>(horizon);
    ExpWeightsParams p;
    p.eta = std::sqrt(std::max(2.0 * std::log(k), 1e-12) / (t * k));
    p.gamma = std::min(1.0, std::sqrt(k * std::log(k) / t));
    p.beta = 0.0;
    return p;
}

// ---------------------------------------------------------------------------
// Swap-regret wrapper

namespace {

constexpr std::size_t kDenseStationaryLimit = 64;

std::vector<double> power_iteration(std::span<const double> q, std::size_t k, double tol) {
    std::vector<double> pi(k, 1.0 / static_cast<double>(k)), next(k);
    for (int iter = 0; iter < 100000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) next[j] += pi[i] * q[i * k + j];
        double total = 0.0, change = 0.0;
        for (double x : next) total += x;
        for (std::size_t j = 0; j < k; ++j) {
            next[j] /= total;
            change = std::max(change, std::fabs(next[j] - pi[j]));
        }
        pi.swap(next);
        if (change < tol) break;
    }
    return pi;
}

}  // namespace

std::vector<double> stationary_distribution(std::span<const double> q, std::size_t k, double tol,
                                            bool* used_power_iteration) {
    if (q.size() != k * k) throw std::invalid_argument("stationary_distribution: expected K*K entries");
    if (used_power_iteration) *used_power_iteration = false;
    if (k == 1) return {1.0};
    if (k <= kDenseStationaryLimit) {
        // (Q^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
        Eigen::MatrixXd a(k, k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q[j * k + i] - (i == j ? 1.0 : 0.0);
        a.row(static_cast<Eigen::Index>(k - 1)).setOnes();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        b(static_cast<Eigen::Index>(k - 1)) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        lu.setThreshold(tol);
        if (lu.isInvertible()) {
            Eigen::VectorXd x = lu.solve(b);
            std::vector<double> pi(k);
            double total = 0.0;
            bool ok = true;
            for (std::size_t i = 0; i < k; ++i) {
                pi[i] = x(static_cast<Eigen::Index>(i));
                if (!std::isfinite(pi[i]) || pi[i] < -tol) ok = false;
                pi[i] = std::max(pi[i], 0.0);
                total += pi[i];
            }
            if (ok && total > 0.0) {
                for (double& p : pi) p /= total;
                return pi;
            }
        }
    }
    if (used_power_iteration) *used_power_iteration = true;
    return power_iteration(q, k, tol);
}

SwapRegretLearner::SwapRegretLearner(std::size_t arms, ExpWeightsParams base_params, std::uint64_t seed)
    : Learner(arms, seed), distribution_(arms, 1.0 / static_cast<double>(arms)) {
    for (std::size_t j = 0; j < arms; ++j)
        bases_.push_back(std::make_unique<ExpWeightsLearner>(arms, base_params, derive_seed(seed, j + 1), "exp3"));
    refresh();
}

void SwapRegretLearner::refresh() {
    const std::size_t k = arms();
    std::vector<double> q(k * k);
    for (std::size_t j = 0; j < k; ++j) {
        const auto row = bases_[j]->distribution();
        std::copy(row.begin(), row.end(), q.begin() + static_cast<std::ptrdiff_t>(j * k));
    }
    distribution_ = stationary_distribution(q, k, 1e-10, &used_power_iteration_);
}

void SwapRegretLearner::apply_update(std::size_t played, double reward, std::span<const double> logged) {
    const std::size_t k = arms();
    if (k == 1) return;
    const double estimate = reward / logged[played];
    std::vector<double> losses(k);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < k; ++i) losses[i] = logged[j] * (1.0 - (i == played ? estimate : 0.0));
        bases_[j]->update_losses(losses);
    }
    refresh();
}

// ---------------------------------------------------------------------------
// Greedy and tabular

GreedyLearner::GreedyLearner(std::size_t arms, std::uint64_t seed)
    : Learner(arms, seed), sums_(arms, 0.0), counts_(arms, 0), distribution_(arms, 0.0) {
    refresh();
}

void GreedyLearner::refresh() {
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t a = 0; a < arms(); ++a) {
        if (counts_[a] == 0) {
            best = a;
            break;
        }
        const double m = sums_[a] / static_cast<double>(counts_[a]);
        if (m > best_mean) {
            best_mean = m;
            best = a;
        }
    }
    std::fill(distribution_.begin(), distribution_.end(), 0.0);
    distribution_[best] = 1.0;
}

void GreedyLearner::apply_update(std::size_t played, double reward, std::span<const double>) {
    sums_[played] += reward;
    ++counts_[played];
    refresh();
}

TabularPolicy::TabularPolicy(std::size_t arms, Table table, std::uint64_t seed)
    : Learner(arms, seed), table_(std::move(table)) {
    distribution_ = table_(history_);
    if (distribution_.size() != arms) throw std::invalid_argument("tabular policy: distribution has wrong length");
}

void TabularPolicy::apply_update(std::size_t played, double reward, std::span<const double>) {
    history_.emplace_back(played, reward);
    distribution_ = table_(history_);
    if (distribution_.size() != arms()) throw std::invalid_argument("tabular policy: distribution has wrong length");
}

TabularPolicy::Table constant_table(std::size_t arms, std::size_t action) {
    if (action >= arms) throw std::out_of_range("constant_table: action out of range");
    return [arms, action](const TabularPolicy::History&) {
        std::vector<double> d(arms, 0.0);
        d[action] = 1.0;
        return d;
    };
}

// ---------------------------------------------------------------------------
// Configuration

ExpWeightsParams PolicyConfig::resolve(std::size_t horizon) const {
    ExpWeightsParams p;
    if (kind == "exp3") {
        p = exp3_defaults(arms, horizon);
    } else if (kind == "exp4s" || kind == "swap-wrapper") {
        p = exp4s_defaults(arms, horizon, window.value_or(horizon));
    } else {
        throw std::invalid_argument("policy: unknown kind '" + kind + "'");
    }
    if (eta) p.eta = *eta;
    if (gamma) p.gamma = *gamma;
    if (beta) p.beta = *beta;
    return p;
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> allowed{"kind", "K", "L", "eta", "gamma", "beta", "seed"};
    if (!j.is_object()) throw std::invalid_argument("policy: expected an object");
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("policy: unknown key '" + key + "'");
    PolicyConfig c;
    c.kind = j.at("kind").get<std::string>();
    if (c.kind != "exp3" && c.kind != "exp4s" && c.kind != "swap-wrapper")
        throw std::invalid_argument("policy: kind must be exp3, exp4s or swap-wrapper");
    c.arms = j.at("K").get<std::size_t>();
    auto optional_real = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    if (j.contains("L") && !j.at("L").is_null()) c.window = j.at("L").get<std::size_t>();
    c.eta = optional_real("eta");
    c.gamma = optional_real("gamma");
    c.beta = optional_real("beta");
    c.seed = j.value("seed", std::uint64_t{0});
    return c;
}

nlohmann::json to_json(const PolicyConfig& c) {
    auto opt = [](const auto& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"kind", c.kind}, {"K", c.arms},      {"L", opt(c.window)}, {"eta", opt(c.eta)},
            {"gamma", opt(c.gamma)}, {"beta", opt(c.beta)}, {"seed", c.seed}};
}

PolicyFactory make_policy_factory(const PolicyConfig& config, std::size_t horizon) {
    const auto params = config.resolve(horizon);
    const auto arms = config.arms;
    if (config.kind == "swap-wrapper")
        return [arms, params](std::uint64_t seed) -> LearnerPtr {
            return std::make_unique<SwapRegretLearner>(arms, params, seed);
        };
    const auto kind = config.kind;
    return [arms, params, kind](std::uint64_t seed) -> LearnerPtr {
        return std::make_unique<ExpWeightsLearner>(arms, params, seed, kind);
    };
}

// ---------------------------------------------------------------------------
// Interval regret profile

std::vector<std::size_t> log_spaced_lengths(std::size_t lo, std::size_t hi, std::size_t count) {
    if (lo < 1 || hi < lo || count == 0) throw std::invalid_argument("log_spaced_lengths: need 1 <= lo <= hi");
    std::vector<std::size_t> out;
    if (count == 1 || lo == hi) return {hi};
    const double step = std::log(static_cast<double>(hi) / static_cast<double>(lo)) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(lo) * std::exp(step * static_cast<double>(i))));
        const auto clamped = std::clamp<std::size_t>(v, lo, hi);
        if (out.empty() || clamped > out.back()) out.push_back(clamped);
    }
    return out;
}

namespace {

// prefix[a][t] = sum_{s < t} value(s, a); the last row holds the chosen-action payoff.
std::vector<std::vector<long double>> prefix_sums(std::span<const std::size_t> chosen, std::size_t arms,
                                                  const std::function<double(std::size_t, std::size_t)>& values) {
    const std::size_t n = chosen.size();
    std::vector<std::vector<long double>> prefix(arms + 1, std::vector<long double>(n + 1, 0.0L));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t a = 0; a < arms; ++a) prefix[a][t + 1] = prefix[a][t] + values(t, a);
        prefix[arms][t + 1] = prefix[arms][t] + values(t, chosen[t]);
    }
    return prefix;
}

double interval_regret(const std::vector<std::vector<long double>>& prefix, std::size_t arms, std::size_t first,
                       std::size_t length) {
    const long double achieved = prefix[arms][first + length] - prefix[arms][first];
    long double best = -std::numeric_limits<long double>::infinity();
    for (std::size_t a = 0; a < arms; ++a) best = std::max(best, prefix[a][first + length] - prefix[a][first]);
    return static_cast<double>(best - achieved);
}

}  // namespace

std::vector<double> max_interval_regret(std::span<const std::size_t> chosen, std::size_t arms,
                                        const std::function<double(std::size_t, std::size_t)>& values,
                                        std::span<const std::size_t> lengths) {
    const auto prefix = prefix_sums(chosen, arms, values);
    std::vector<double> out;
    for (std::size_t len : lengths) {
        if (len == 0 || len > chosen.size()) throw std::out_of_range("max_interval_regret: bad interval length");
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s + len <= chosen.size(); ++s) best = std::max(best, interval_regret(prefix, arms, s, len));
        out.push_back(best);
    }
    return out;
}

AdaptiveProfile adaptive_regret_profile(const PolicyFactory& factory, const RewardInstance& adversary,
                                        std::span<const std::size_t> lengths, std::size_t n_seeds, std::uint64_t seed,
                                        IntervalRegretBasis basis, std::size_t jobs) {
    if (n_seeds == 0) throw std::invalid_argument("adaptive profile: need at least one seed");
    const std::size_t horizon = adversary.horizon();
    const std::size_t k = adversary.arms();
    for (std::size_t len : lengths)
        if (len == 0 || len > horizon) throw std::out_of_range("adaptive profile: interval length exceeds horizon");

    AdaptiveProfile profile;
    profile.lengths.assign(lengths.begin(), lengths.end());
    auto best_arm = [&](std::size_t t) {
        const auto m = adversary.round_means(t);
        return static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
    };
    profile.anchors.push_back(0);
    for (std::size_t t = 1; t < horizon; ++t)
        if (best_arm(t) != best_arm(t - 1)) profile.anchors.push_back(t);

    const std::size_t n_len = lengths.size();
    const std::size_t n_anchor = profile.anchors.size();
    std::vector<std::vector<double>> per_seed_max(n_seeds), per_seed_anchor(n_seeds);

    parallel_for(n_seeds, jobs, [&](std::size_t s) {
        const std::uint64_t run_seed = derive_seed(seed, s);
        auto learner = factory(derive_seed(run_seed, 1));
        Rng env(derive_seed(run_seed, 2));
        std::vector<std::size_t> chosen(horizon);
        std::vector<double> realized(basis == IntervalRegretBasis::realized ? horizon * k : 0);
        std::vector<double> u(k);
        for (std::size_t t = 0; t < horizon; ++t) {
            const auto rec = learner->recommend();
            sample_reward_vector(adversary, t, env, u);
            learner->update(rec.action, u[rec.action]);
            chosen[t] = rec.action;
            if (!realized.empty()) std::copy(u.begin(), u.end(), realized.begin() + static_cast<std::ptrdiff_t>(t * k));
        }
        std::function<double(std::size_t, std::size_t)> values;
        if (basis == IntervalRegretBasis::pseudo)
            values = [&](std::size_t t, std::size_t a) { return adversary.mean(t, a); };
        else
            values = [&](std::size_t t, std::size_t a) { return realized[t * k + a]; };
        const auto prefix = prefix_sums(chosen, k, values);
        auto& mx = per_seed_max[s];
        auto& anch = per_seed_anchor[s];
        mx.resize(n_len);
        anch.assign(n_anchor * n_len, std::nan(""));
        for (std::size_t i = 0; i < n_len; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t start = 0; start + lengths[i] <= horizon; ++start)
                best = std::max(best, interval_regret(prefix, k, start, lengths[i]));
            mx[i] = best;
            for (std::size_t c = 0; c < n_anchor; ++c)
                if (profile.anchors[c] + lengths[i] <= horizon)
                    anch[c * n_len + i] = interval_regret(prefix, k, profile.anchors[c], lengths[i]);
        }
    });

    profile.max_interval_regret.resize(n_len);
    profile.max_interval_ci.resize(n_len);
    std::vector<double> column(n_seeds);
    for (std::size_t i = 0; i < n_len; ++i) {
        for (std::size_t s = 0; s < n_seeds; ++s) column[s] = per_seed_max[s][i];
        const auto summary = summarize(column);
        profile.max_interval_regret[i] = summary.mean;
        profile.max_interval_ci[i] = summary.ci95;
    }
    std::vector<double> xs(profile.lengths.begin(), profile.lengths.end());
    profile.slope = loglog_slope(xs, profile.max_interval_regret);

    profile.anchored.assign(n_anchor, std::vector<double>(n_len, std::nan("")));
    for (std::size_t c = 0; c < n_anchor; ++c) {
        const std::size_t segment_end = c + 1 < n_anchor ? profile.anchors[c + 1] : horizon;
        std::vector<double> fx, fy;
        for (std::size_t i = 0; i < n_len; ++i) {
            if (profile.anchors[c] + lengths[i] > segment_end) continue;
            for (std::size_t s = 0; s < n_seeds; ++s) column[s] = per_seed_anchor[s][c * n_len + i];
            profile.anchored[c][i] = summarize(column).mean;
            fx.push_back(static_cast<double>(lengths[i]));
            fy.push_back(profile.anchored[c][i]);
        }
        profile.anchored_slopes.push_back(loglog_slope(fx, fy));
    }
    return profile;
}

}  // namespace icbandit

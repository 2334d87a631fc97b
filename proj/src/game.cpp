#include "icbandit/game.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "icbandit/numeric.hpp"
#include "icbandit/parallel.hpp"

namespace icbandit {

Strategy identity_strategy(std::size_t arms) {
    Strategy s(arms);
    for (std::size_t a = 0; a < arms; ++a) s[a] = a;
    return s;
}

Strategy swap_strategy(std::size_t arms, std::size_t from, std::size_t to) {
    if (from >= arms || to >= arms) throw std::out_of_range("swap_strategy: action out of range");
    auto s = identity_strategy(arms);
    s[from] = to;
    return s;
}

void AgentSpec::validate() const {
    if (strategy.size() != reward_belief.arms())
        throw std::invalid_argument("agent: strategy must map every one of the K actions");
    for (std::size_t b : strategy)
        if (b >= reward_belief.arms()) throw std::out_of_range("agent: strategy maps outside the action set");
    if (temporal_belief.horizon() != reward_belief.horizon())
        throw std::invalid_argument("agent: temporal belief and reward belief disagree on T");
}

namespace {

enum : std::uint64_t { kLearnerStream = 1, kRewardStream = 2, kArrivalStream = 3 };

DeviationRun play(const PolicyFactory& factory, const RewardInstance& mu, const Strategy* strategy,
                  std::size_t deviating_round, std::uint64_t seed) {
    auto learner = factory(derive_seed(seed, kLearnerStream));
    if (!learner || learner->arms() != mu.arms())
        throw std::invalid_argument("game: policy and reward instance disagree on K");
    Rng env(derive_seed(seed, kRewardStream));
    const std::size_t k = mu.arms();
    DeviationRun run{Transcript(k, mu.horizon()), deviating_round};
    std::vector<double> u(k);
    for (std::size_t t = 0; t < mu.horizon(); ++t) {
        const auto rec = learner->recommend();
        sample_reward_vector(mu, t, env, u);
        const std::size_t played = (strategy && t + 1 == deviating_round) ? (*strategy)[rec.action] : rec.action;
        learner->update(played, u[played]);
        run.transcript.append(rec.action, played, u);
    }
    return run;
}

}  // namespace

Transcript run_compliant(const PolicyFactory& factory, const RewardInstance& mu, std::uint64_t seed) {
    return play(factory, mu, nullptr, 0, seed).transcript;
}

DeviationRun run_with_deviation(const PolicyFactory& factory, const RewardInstance& mu,
                                const TemporalBelief& deviating_round_belief, const Strategy& strategy,
                                std::uint64_t seed) {
    if (deviating_round_belief.horizon() != mu.horizon())
        throw std::invalid_argument("run_with_deviation: belief horizon differs from T");
    if (strategy.size() != mu.arms()) throw std::invalid_argument("run_with_deviation: strategy must cover K actions");
    for (std::size_t b : strategy)
        if (b >= mu.arms()) throw std::out_of_range("run_with_deviation: strategy maps outside the action set");
    Rng arrival(derive_seed(seed, kArrivalStream));
    const std::size_t tau = arrival.categorical(deviating_round_belief.pmf()) + 1;
    return play(factory, mu, &strategy, tau, seed);
}

// ---------------------------------------------------------------------------
// Conditional-gain estimation

namespace {

// Per-transcript statistics for one belief, laid out as
// [N_0..N_{K-1}, X_00..X_{K-1,K-1}, ext regret, swap regret, pseudo regret].
struct StatLayout {
    std::size_t k;
    std::size_t size() const { return k + k * k + 3; }
    std::size_t n(std::size_t a) const { return a; }
    std::size_t x(std::size_t a, std::size_t b) const { return k + a * k + b; }
    std::size_t ext() const { return k + k * k; }
    std::size_t swap() const { return k + k * k + 1; }
    std::size_t pseudo() const { return k + k * k + 2; }
};

void score_transcript(const Transcript& tr, const RewardInstance& mu, const TemporalBelief& belief, GainMethod method,
                      std::uint64_t arrival_seed, const StatLayout& L, std::span<double> out) {
    const std::size_t k = L.k;
    std::fill(out.begin(), out.end(), 0.0);
    if (method == GainMethod::rao_blackwell) {
        std::vector<CompensatedSum> n(k), s(k * k);
        const auto pmf = belief.pmf();
        const auto support = belief.support_interval();
        for (std::size_t t = support.first - 1; t < support.last; ++t) {
            const double w = pmf[t];
            if (w == 0.0) continue;
            const std::size_t a = tr.recommended(t);
            n[a] += w;
            for (std::size_t b = 0; b < k; ++b) s[a * k + b] += w * mu.mean(t, b);
        }
        for (std::size_t a = 0; a < k; ++a) {
            out[L.n(a)] = n[a].value();
            const double own = s[a * k + a].value();
            for (std::size_t b = 0; b < k; ++b) out[L.x(a, b)] = s[a * k + b].value() - own;
        }
    } else {
        Rng arrival(arrival_seed);
        const std::size_t t = arrival.categorical(belief.pmf());
        const std::size_t a = tr.recommended(t);
        out[L.n(a)] = 1.0;
        for (std::size_t b = 0; b < k; ++b) out[L.x(a, b)] = mu.mean(t, b) - mu.mean(t, a);
    }
    out[L.ext()] = weighted_external_regret(tr, belief);
    out[L.swap()] = weighted_swap_regret(tr, belief);
    out[L.pseudo()] = weighted_pseudo_regret(tr, belief, mu);
}

// One sampling unit of the stratified estimator.
struct Unit {
    std::size_t stratum = 0;
    std::vector<double> stats;  // averaged over the unit's transcripts
};

struct Stratum {
    double weight = 0.0;
    std::vector<const Unit*> units;
};

double stratified_mean(const std::vector<Stratum>& strata, const std::function<double(const Unit&)>& f) {
    CompensatedSum total;
    for (const auto& s : strata) {
        CompensatedSum acc;
        for (const Unit* u : s.units) acc += f(*u);
        total += s.weight * acc.value() / static_cast<double>(s.units.size());
    }
    return total.value();
}

// Variance of the stratified mean; strata with a single unit contribute nothing.
double stratified_variance(const std::vector<Stratum>& strata, const std::function<double(const Unit&)>& f) {
    double var = 0.0;
    for (const auto& s : strata) {
        const std::size_t m = s.units.size();
        if (m < 2) continue;
        double mean = 0.0;
        for (const Unit* u : s.units) mean += f(*u);
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (const Unit* u : s.units) ss += (f(*u) - mean) * (f(*u) - mean);
        var += s.weight * s.weight * ss / static_cast<double>(m - 1) / static_cast<double>(m);
    }
    return var;
}

}  // namespace

double ConditionalGainReport::max_defined_gain() const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < arms; ++a)
        for (std::size_t b = 0; b < arms; ++b)
            if (a != b && defined[a][b]) best = std::max(best, gain[a][b]);
    return best;
}

std::vector<ConditionalGainReport> estimate_conditional_gain(const PolicyFactory& factory,
                                                             const RewardEnsemble& reward_belief,
                                                             std::span<const TemporalBelief> beliefs,
                                                             const GainEstimateOptions& options) {
    if (options.n_outer == 0 || options.n_inner == 0)
        throw std::invalid_argument("estimate_conditional_gain: replication counts must be positive");
    if (beliefs.empty()) throw std::invalid_argument("estimate_conditional_gain: no beliefs given");
    for (const auto& b : beliefs)
        if (b.horizon() != reward_belief.horizon())
            throw std::invalid_argument("estimate_conditional_gain: belief horizon differs from T");

    const std::size_t k = reward_belief.arms();
    const StatLayout layout{k};
    const std::size_t nb = beliefs.size();
    const bool finite = reward_belief.kind() == RewardEnsemble::Kind::finite;

    // Jobs: one per instance draw, each running n_inner transcripts.
    struct Job {
        std::size_t stratum;
        std::size_t draw;
    };
    std::vector<Job> jobs;
    std::vector<double> stratum_weight;
    if (finite) {
        const auto& probs = reward_belief.probabilities();
        for (std::size_t s = 0; s < probs.size(); ++s) {
            stratum_weight.push_back(probs[s]);
            if (probs[s] <= 0.0) continue;
            const auto draws = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(static_cast<double>(options.n_outer) * probs[s])));
            for (std::size_t d = 0; d < draws; ++d) jobs.push_back({s, d});
        }
    } else {
        stratum_weight.push_back(1.0);
        for (std::size_t d = 0; d < options.n_outer; ++d) jobs.push_back({0, d});
    }

    // stats[job][inner][belief] flattened.
    const std::size_t per_job = options.n_inner * nb * layout.size();
    std::vector<double> stats(jobs.size() * per_job);
    parallel_for(jobs.size(), options.jobs, [&](std::size_t j) {
        const Job& job = jobs[j];
        const RewardInstance mu = finite ? reward_belief.support()[job.stratum]
                                         : reward_belief.draw(derive_seed(options.seed, 0, job.draw));
        for (std::size_t i = 0; i < options.n_inner; ++i) {
            const std::uint64_t tseed = derive_seed(options.seed, job.stratum + 1, job.draw, i);
            const Transcript tr = run_compliant(factory, mu, tseed);
            for (std::size_t b = 0; b < nb; ++b) {
                std::span<double> out(stats.data() + j * per_job + (i * nb + b) * layout.size(), layout.size());
                score_transcript(tr, mu, beliefs[b], options.method, derive_seed(tseed, kArrivalStream, b), layout, out);
            }
        }
    });

    std::vector<ConditionalGainReport> reports;
    for (std::size_t b = 0; b < nb; ++b) {
        // Finite ensembles: each transcript is a unit. Generators: each instance draw is a unit.
        std::vector<Unit> units;
        std::vector<std::size_t> count(k, 0);
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            std::vector<double> avg(layout.size(), 0.0);
            for (std::size_t i = 0; i < options.n_inner; ++i) {
                const double* row = stats.data() + j * per_job + (i * nb + b) * layout.size();
                for (std::size_t a = 0; a < k; ++a)
                    if (row[layout.n(a)] > 0.0) ++count[a];
                if (finite) {
                    units.push_back({jobs[j].stratum, std::vector<double>(row, row + layout.size())});
                } else {
                    for (std::size_t s = 0; s < layout.size(); ++s) avg[s] += row[s] / static_cast<double>(options.n_inner);
                }
            }
            if (!finite) units.push_back({0, std::move(avg)});
        }
        std::vector<Stratum> strata(stratum_weight.size());
        for (std::size_t s = 0; s < strata.size(); ++s) strata[s].weight = stratum_weight[s];
        for (const auto& u : units) strata[u.stratum].units.push_back(&u);
        std::erase_if(strata, [](const Stratum& s) { return s.units.empty(); });

        ConditionalGainReport r;
        r.arms = k;
        r.method = options.method;
        r.transcripts = jobs.size() * options.n_inner;
        r.min_count = options.min_count;
        r.count = count;
        r.probability.resize(k);
        r.probability_ci.resize(k);
        r.gain.assign(k, std::vector<double>(k, 0.0));
        r.gain_ci.assign(k, std::vector<double>(k, 0.0));
        r.defined.assign(k, std::vector<bool>(k, false));
        for (std::size_t a = 0; a < k; ++a) {
            const auto n_of = [&](const Unit& u) { return u.stats[layout.n(a)]; };
            const double n_mean = stratified_mean(strata, n_of);
            r.probability[a] = n_mean;
            r.probability_ci[a] = kZ95 * std::sqrt(stratified_variance(strata, n_of));
            for (std::size_t c = 0; c < k; ++c) {
                r.defined[a][c] = count[a] >= options.min_count && n_mean > 0.0;
                if (a == c || n_mean <= 0.0) continue;
                const double x_mean = stratified_mean(strata, [&](const Unit& u) { return u.stats[layout.x(a, c)]; });
                const double ratio = x_mean / n_mean;
                const double z_var = stratified_variance(
                    strata, [&](const Unit& u) { return u.stats[layout.x(a, c)] - ratio * u.stats[layout.n(a)]; });
                r.gain[a][c] = ratio;
                r.gain_ci[a][c] = kZ95 * std::sqrt(z_var) / n_mean;
            }
        }
        const auto ext_of = [&](const Unit& u) { return u.stats[layout.ext()]; };
        const auto swap_of = [&](const Unit& u) { return u.stats[layout.swap()]; };
        r.external_regret_mean = stratified_mean(strata, ext_of);
        r.external_regret_ci = kZ95 * std::sqrt(stratified_variance(strata, ext_of));
        r.swap_regret_mean = stratified_mean(strata, swap_of);
        r.pseudo_regret_mean = stratified_mean(strata, [&](const Unit& u) { return u.stats[layout.pseudo()]; });
        r.external_regret_worst_instance = -std::numeric_limits<double>::infinity();
        r.swap_regret_worst_instance = -std::numeric_limits<double>::infinity();
        for (const auto& s : strata) {
            const std::vector<Stratum> alone{{1.0, s.units}};
            r.external_regret_worst_instance = std::max(r.external_regret_worst_instance, stratified_mean(alone, ext_of));
            r.swap_regret_worst_instance = std::max(r.swap_regret_worst_instance, stratified_mean(alone, swap_of));
        }
        reports.push_back(std::move(r));
    }
    return reports;
}

ConditionalGainReport estimate_conditional_gain(const PolicyFactory& factory, const AgentSpec& agent,
                                                const GainEstimateOptions& options) {
    agent.validate();
    if (agent.strategy != identity_strategy(agent.reward_belief.arms()))
        throw std::invalid_argument("estimate_conditional_gain: gains are measured from the compliant profile");
    const TemporalBelief beliefs[] = {agent.temporal_belief};
    return std::move(estimate_conditional_gain(factory, agent.reward_belief, beliefs, options).front());
}

RecommendationProbabilities estimate_recommendation_prob(const PolicyFactory& factory, const AgentSpec& agent,
                                                         const GainEstimateOptions& options) {
    const auto report = estimate_conditional_gain(factory, agent, options);
    return {report.probability, report.probability_ci};
}

// ---------------------------------------------------------------------------
// Reporting

std::string to_string(CheckStatus status) {
    switch (status) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "fail";
        case CheckStatus::inconclusive: return "inconclusive";
        case CheckStatus::no_guarantee: return "no guarantee";
    }
    return "?";
}

std::vector<IcCheckRow> ic_check(const ConditionalGainReport& report, double epsilon) {
    std::vector<IcCheckRow> rows;
    for (std::size_t a = 0; a < report.arms; ++a) {
        for (std::size_t b = 0; b < report.arms; ++b) {
            if (a == b) continue;
            IcCheckRow row{a, b, report.gain[a][b], report.gain_ci[a][b], report.count[a], epsilon,
                           CheckStatus::inconclusive};
            if (!report.defined[a][b])
                row.status = CheckStatus::inconclusive;
            else if (epsilon >= 1.0)
                row.status = CheckStatus::no_guarantee;
            else
                row.status = row.estimate <= epsilon + 2.0 * row.ci ? CheckStatus::pass : CheckStatus::fail;
            rows.push_back(row);
        }
    }
    return rows;
}

nlohmann::json to_json(const ConditionalGainReport& r) {
    nlohmann::json j;
    j["K"] = r.arms;
    j["method"] = r.method == GainMethod::rao_blackwell ? "rao-blackwell" : "sampled-round";
    j["transcripts"] = r.transcripts;
    j["min_count"] = r.min_count;
    j["probability"] = r.probability;
    j["probability_ci"] = r.probability_ci;
    j["count"] = r.count;
    j["gain"] = r.gain;
    j["gain_ci"] = r.gain_ci;
    nlohmann::json defined = nlohmann::json::array();
    for (const auto& row : r.defined) defined.push_back(std::vector<bool>(row.begin(), row.end()));
    j["defined"] = defined;
    j["external_regret_mean"] = r.external_regret_mean;
    j["external_regret_ci"] = r.external_regret_ci;
    j["external_regret_worst_instance"] = r.external_regret_worst_instance;
    j["swap_regret_mean"] = r.swap_regret_mean;
    j["swap_regret_worst_instance"] = r.swap_regret_worst_instance;
    j["pseudo_regret_mean"] = r.pseudo_regret_mean;
    return j;
}

nlohmann::json to_json(const std::vector<IcCheckRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows)
        out.push_back({{"a", row.from + 1},
                       {"b", row.to + 1},
                       {"estimate", row.estimate},
                       {"ci", row.ci},
                       {"n", row.count},
                       {"bound", row.bound},
                       {"status", to_string(row.status)}});
    return out;
}

void write_ic_check_csv(std::ostream& os, std::span<const IcCheckRow> rows) {
    os << "a,b,estimate,ci,n,bound,status\n" << std::setprecision(17);
    for (const auto& row : rows)
        os << row.from + 1 << ',' << row.to + 1 << ',' << row.estimate << ',' << row.ci << ',' << row.count << ','
           << row.bound << ',' << to_string(row.status) << '\n';
}

}  // namespace icbandit

#include "icbandit/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "icbandit/numeric.hpp"

namespace icbandit {

std::string to_string(const NoiseFamily& noise) {
    switch (noise.kind) {
        case NoiseFamily::Kind::bernoulli: return "bernoulli";
        case NoiseFamily::Kind::deterministic: return "deterministic";
        case NoiseFamily::Kind::truncated_gaussian: {
            std::ostringstream os;
            os << std::setprecision(17) << "truncated-gaussian(" << noise.sigma << ")";
            return os.str();
        }
    }
    return "bernoulli";
}

NoiseFamily parse_noise(const std::string& text) {
    if (text == "bernoulli") return NoiseFamily::bernoulli();
    if (text == "deterministic") return NoiseFamily::deterministic();
    const std::string prefix = "truncated-gaussian(";
    if (text.rfind(prefix, 0) == 0 && text.back() == ')') {
        const double sigma = std::stod(text.substr(prefix.size(), text.size() - prefix.size() - 1));
        if (!(sigma >= 0.0)) throw std::invalid_argument("noise: sigma must be non-negative");
        return NoiseFamily::truncated_gaussian(sigma);
    }
    throw std::invalid_argument("unknown noise family '" + text + "'");
}

RewardInstance::RewardInstance(std::size_t horizon, std::size_t arms, std::vector<double> means, NoiseFamily noise)
    : horizon_(horizon), arms_(arms), means_(std::move(means)), noise_(noise) {
    if (horizon_ == 0 || arms_ == 0) throw std::invalid_argument("reward instance: empty dimensions");
    if (means_.size() != horizon_ * arms_) throw std::invalid_argument("reward instance: expected T*K means");
    for (double m : means_)
        if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("reward instance: mean outside [0, 1]");
    for (std::size_t t = 0; t + 1 < horizon_; ++t)
        for (std::size_t a = 0; a < arms_; ++a)
            drift_ = std::max(drift_, std::fabs(mean(t + 1, a) - mean(t, a)));
}

RewardInstance RewardInstance::stationary(std::size_t horizon, std::span<const double> arm_means, NoiseFamily noise) {
    std::vector<double> means;
    means.reserve(horizon * arm_means.size());
    for (std::size_t t = 0; t < horizon; ++t) means.insert(means.end(), arm_means.begin(), arm_means.end());
    return RewardInstance(horizon, arm_means.size(), std::move(means), noise);
}

RewardInstance RewardInstance::with_noise(NoiseFamily noise) const {
    RewardInstance copy = *this;
    copy.noise_ = noise;
    return copy;
}

RewardEnsemble RewardEnsemble::finite(std::vector<RewardInstance> instances, std::vector<double> probabilities) {
    if (instances.empty()) throw std::invalid_argument("ensemble: empty support");
    if (instances.size() != probabilities.size()) throw std::invalid_argument("ensemble: probability count mismatch");
    CompensatedSum total;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].horizon() != instances[0].horizon() || instances[i].arms() != instances[0].arms())
            throw std::invalid_argument("ensemble: instances disagree on dimensions");
        if (!(probabilities[i] >= 0.0)) throw std::invalid_argument("ensemble: negative probability");
        total += probabilities[i];
    }
    if (std::fabs(total.value() - 1.0) > 1e-9) throw std::invalid_argument("ensemble: probabilities must sum to 1");
    RewardEnsemble e;
    e.kind_ = Kind::finite;
    e.horizon_ = instances[0].horizon();
    e.arms_ = instances[0].arms();
    e.support_ = std::move(instances);
    e.probabilities_ = std::move(probabilities);
    return e;
}

RewardEnsemble RewardEnsemble::generative(Generator generator, std::uint64_t seed, std::size_t horizon,
                                          std::size_t arms, nlohmann::json parameters) {
    if (!generator) throw std::invalid_argument("ensemble: missing generator");
    RewardEnsemble e;
    e.kind_ = Kind::generative;
    e.horizon_ = horizon;
    e.arms_ = arms;
    e.generator_ = std::move(generator);
    e.seed_ = seed;
    e.parameters_ = std::move(parameters);
    return e;
}

RewardInstance RewardEnsemble::draw(std::uint64_t index) const {
    if (kind_ != Kind::generative) throw std::logic_error("ensemble: draw() needs a generative ensemble");
    return generator_(derive_seed(seed_, index));
}

RewardInstance RewardEnsemble::sample(Rng& rng) const {
    if (kind_ == Kind::generative) return draw(rng.next_u64());
    return support_[rng.categorical(probabilities_)];
}

double gap(const RewardInstance& mu, const TemporalBelief& belief, std::size_t action) {
    if (mu.arms() < 2) throw std::invalid_argument("gap: needs at least two actions");
    if (mu.horizon() != belief.horizon()) throw std::invalid_argument("gap: horizon mismatch");
    if (action >= mu.arms()) throw std::out_of_range("gap: action out of range");
    const auto support = belief.support_interval();
    std::vector<CompensatedSum> expected(mu.arms());
    for (std::size_t r = support.first; r <= support.last; ++r) {
        const double w = belief.mass(r);
        if (w == 0.0) continue;
        for (std::size_t b = 0; b < mu.arms(); ++b) expected[b] += w * mu.mean(r - 1, b);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < mu.arms(); ++b)
        if (b != action) best = std::min(best, expected[action].value() - expected[b].value());
    return best;
}

ExplorabilityReport verify_explorability(const RewardEnsemble& prior, const TemporalBelief& belief, double delta,
                                         std::size_t n_samples) {
    if (!(delta > 0.0)) throw std::invalid_argument("verify_explorability: Delta must be positive");
    const std::size_t k = prior.arms();
    ExplorabilityReport report;
    report.pi.assign(k, 0.0);
    if (prior.kind() == RewardEnsemble::Kind::finite) {
        std::vector<CompensatedSum> pi(k);
        for (std::size_t i = 0; i < prior.support().size(); ++i)
            for (std::size_t a = 0; a < k; ++a)
                if (gap(prior.support()[i], belief, a) >= delta) pi[a] += prior.probabilities()[i];
        for (std::size_t a = 0; a < k; ++a) report.pi[a] = pi[a].value();
        report.samples = prior.support().size();
    } else {
        if (n_samples == 0) throw std::invalid_argument("verify_explorability: n_samples must be positive");
        std::vector<std::size_t> hits(k, 0);
        for (std::size_t i = 0; i < n_samples; ++i) {
            const auto mu = prior.draw(i);
            for (std::size_t a = 0; a < k; ++a)
                if (gap(mu, belief, a) >= delta) ++hits[a];
        }
        const double n = static_cast<double>(n_samples);
        for (std::size_t a = 0; a < k; ++a) {
            report.pi[a] = static_cast<double>(hits[a]) / n;
            report.ci_halfwidth =
                std::max(report.ci_halfwidth, kZ95 * std::sqrt(report.pi[a] * (1.0 - report.pi[a]) / n));
        }
        report.samples = n_samples;
    }
    report.alpha_hat = *std::min_element(report.pi.begin(), report.pi.end());
    report.holds = report.alpha_hat > 0.0;
    return report;
}

DriftReport verify_drift(const RewardEnsemble& prior, std::size_t sample_budget) {
    DriftReport report;
    if (prior.kind() == RewardEnsemble::Kind::finite) {
        for (const auto& mu : prior.support()) report.rho_hat = std::max(report.rho_hat, mu.drift());
        report.instances = prior.support().size();
    } else {
        if (sample_budget == 0) throw std::invalid_argument("verify_drift: generative ensembles need a sample budget");
        for (std::size_t i = 0; i < sample_budget; ++i) report.rho_hat = std::max(report.rho_hat, prior.draw(i).drift());
        report.instances = sample_budget;
        report.lower_estimate = true;
    }
    return report;
}

RewardInstance random_walk_instance(std::span<const double> start, std::size_t horizon, double rho, Rng& rng,
                                    NoiseFamily noise) {
    if (!(rho >= 0.0)) throw std::invalid_argument("random walk: rho must be non-negative");
    const std::size_t k = start.size();
    std::vector<double> means(horizon * k);
    for (std::size_t a = 0; a < k; ++a) means[a] = start[a];
    for (std::size_t t = 1; t < horizon; ++t) {
        for (std::size_t a = 0; a < k; ++a) {
            double x = means[(t - 1) * k + a];
            if (rho > 0.0) {
                x += rng.uniform(-rho, rho);
                // Reflection never lengthens a step, so |x_t - x_{t-1}| <= rho survives.
                if (x > 1.0) x = 2.0 - x;
                if (x < 0.0) x = -x;
                x = std::clamp(x, 0.0, 1.0);
            }
            means[t * k + a] = x;
        }
    }
    return RewardInstance(horizon, k, std::move(means), noise);
}

RewardEnsemble make_drifting_ensemble(std::size_t horizon, std::size_t arms, double rho, std::uint64_t seed,
                                      NoiseFamily noise) {
    if (!(rho >= 0.0)) throw std::invalid_argument("make_drifting_ensemble: rho must be non-negative");
    auto generator = [horizon, arms, rho, noise](std::uint64_t draw_seed) {
        Rng rng(draw_seed);
        std::vector<double> start(arms);
        for (double& s : start) s = rng.uniform();
        return random_walk_instance(start, horizon, rho, rng, noise);
    };
    nlohmann::json params{{"generator", "drifting-walk"}, {"T", horizon}, {"K", arms}, {"rho", rho},
                          {"noise", to_string(noise)}};
    return RewardEnsemble::generative(generator, seed, horizon, arms, std::move(params));
}

RewardInstance piecewise_stationary(std::size_t horizon, std::span<const std::vector<double>> segment_means,
                                    NoiseFamily noise) {
    if (segment_means.empty() || segment_means.size() > horizon)
        throw std::invalid_argument("piecewise_stationary: need between 1 and T segments");
    const std::size_t k = segment_means.front().size();
    const std::size_t segment = horizon / segment_means.size();
    std::vector<double> means;
    means.reserve(horizon * k);
    for (std::size_t t = 0; t < horizon; ++t) {
        const auto& m = segment_means[std::min(t / segment, segment_means.size() - 1)];
        if (m.size() != k) throw std::invalid_argument("piecewise_stationary: segments disagree on K");
        means.insert(means.end(), m.begin(), m.end());
    }
    return RewardInstance(horizon, k, std::move(means), noise);
}

double sample_reward(const RewardInstance& mu, std::size_t t, std::size_t a, Rng& rng) {
    const double m = mu.mean(t, a);
    switch (mu.noise().kind) {
        case NoiseFamily::Kind::deterministic: return m;
        case NoiseFamily::Kind::bernoulli: return rng.bernoulli(m) ? 1.0 : 0.0;
        case NoiseFamily::Kind::truncated_gaussian: return std::clamp(m + mu.noise().sigma * rng.normal(), 0.0, 1.0);
    }
    return m;
}

void sample_reward_vector(const RewardInstance& mu, std::size_t t, Rng& rng, std::span<double> out) {
    for (std::size_t a = 0; a < mu.arms(); ++a) out[a] = sample_reward(mu, t, a, rng);
}

void write_instance_csv(std::ostream& os, const RewardInstance& mu) {
    os << std::setprecision(17);
    for (std::size_t t = 0; t < mu.horizon(); ++t) {
        for (std::size_t a = 0; a < mu.arms(); ++a) os << (a ? "," : "") << mu.mean(t, a);
        os << '\n';
    }
}

RewardInstance read_instance_csv(std::istream& is, NoiseFamily noise) {
    std::vector<double> means;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            means.push_back(std::stod(cell));
            ++c;
        }
        if (rows == 0) cols = c;
        if (c != cols) throw std::invalid_argument("instance csv: ragged row " + std::to_string(rows + 1));
        ++rows;
    }
    return RewardInstance(rows, cols, std::move(means), noise);
}

nlohmann::json instance_to_json(const RewardInstance& mu) {
    return {{"T", mu.horizon()},
            {"K", mu.arms()},
            {"noise", to_string(mu.noise())},
            {"mu", std::vector<double>(mu.data().begin(), mu.data().end())}};
}

RewardInstance instance_from_json(const nlohmann::json& j) {
    return RewardInstance(j.at("T").get<std::size_t>(), j.at("K").get<std::size_t>(),
                          j.at("mu").get<std::vector<double>>(),
                          parse_noise(j.value("noise", std::string("bernoulli"))));
}

void write_ensemble_manifest(const RewardEnsemble& prior, const std::filesystem::path& manifest) {
    nlohmann::json j;
    if (prior.kind() == RewardEnsemble::Kind::finite) {
        j["kind"] = "finite";
        j["instances"] = nlohmann::json::array();
        const auto stem = manifest.stem().string();
        for (std::size_t i = 0; i < prior.support().size(); ++i) {
            const auto file = stem + "_instance_" + std::to_string(i) + ".csv";
            std::ofstream os(manifest.parent_path() / file);
            if (!os) throw std::runtime_error("cannot write " + file);
            write_instance_csv(os, prior.support()[i]);
            j["instances"].push_back({{"file", file},
                                      {"weight", prior.probabilities()[i]},
                                      {"noise", to_string(prior.support()[i].noise())}});
        }
    } else {
        j = prior.parameters();
        j["kind"] = "generative";
        j["seed"] = prior.seed();
    }
    std::ofstream os(manifest);
    if (!os) throw std::runtime_error("cannot write " + manifest.string());
    os << j.dump(2) << '\n';
}

RewardEnsemble read_ensemble_manifest(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw std::runtime_error("cannot read " + manifest.string());
    const auto j = nlohmann::json::parse(is);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "finite") {
        std::vector<RewardInstance> instances;
        std::vector<double> weights;
        for (const auto& entry : j.at("instances")) {
            std::ifstream in(manifest.parent_path() / entry.at("file").get<std::string>());
            if (!in) throw std::runtime_error("cannot read instance " + entry.at("file").get<std::string>());
            instances.push_back(read_instance_csv(in, parse_noise(entry.value("noise", std::string("bernoulli")))));
            weights.push_back(entry.at("weight").get<double>());
        }
        return RewardEnsemble::finite(std::move(instances), std::move(weights));
    }
    if (kind == "generative" && j.value("generator", std::string()) == "drifting-walk")
        return make_drifting_ensemble(j.at("T").get<std::size_t>(), j.at("K").get<std::size_t>(),
                                      j.at("rho").get<double>(), j.at("seed").get<std::uint64_t>(),
                                      parse_noise(j.value("noise", std::string("bernoulli"))));
    throw std::invalid_argument("ensemble manifest: unsupported kind/generator");
}

}  // namespace icbandit

#include "icbandit/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "icbandit/numeric.hpp"

namespace icbandit {

namespace {

constexpr double kClampTolerance = 1e-12;
constexpr double kMassTolerance = 1e-9;

RoundInterval find_support(std::span<const double> pmf) {
    std::size_t lo = pmf.size(), hi = 0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        if (pmf[i] > 0.0) {
            lo = std::min(lo, i);
            hi = i;
        }
    }
    return {lo + 1, hi + 1};
}

// psi(t) for every t in [1, T], from prefix sums of p(s) and s * p(s).
std::vector<long double> one_sided_dispersion(std::span<const double> pmf) {
    const std::size_t n = pmf.size();
    long double total_first = 0.0L;
    for (std::size_t i = 0; i < n; ++i) total_first += static_cast<long double>(i + 1) * pmf[i];
    std::vector<long double> psi(n);
    long double cdf = 0.0L, first_moment = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double t = static_cast<long double>(i + 1);
        cdf += pmf[i];
        first_moment += t * pmf[i];
        // sum_{s<=t} p(s)(t-s) + sum_{s>t} p(s)(s-t)
        psi[i] = (t * cdf - first_moment) + ((total_first - first_moment) - t * (1.0L - cdf));
        if (psi[i] < 0.0L) psi[i] = 0.0L;
    }
    return psi;
}

}  // namespace

TemporalBelief TemporalBelief::from_pmf(std::vector<double> pmf) { return TemporalBelief(std::move(pmf)); }

TemporalBelief::TemporalBelief(std::vector<double> pmf) : pmf_(std::move(pmf)) {
    if (pmf_.empty()) throw std::invalid_argument("temporal belief: horizon must be positive");
    bool clamped = false;
    for (double& p : pmf_) {
        if (!std::isfinite(p)) throw std::invalid_argument("temporal belief: non-finite mass");
        if (p < 0.0) {
            if (p < -kClampTolerance)
                throw std::invalid_argument("temporal belief: negative mass " + std::to_string(p));
            p = 0.0;
            clamped = true;
        }
    }
    const double total = compensated_sum(pmf_);
    if (std::fabs(total - 1.0) > kMassTolerance)
        throw std::invalid_argument("temporal belief: mass sums to " + std::to_string(total));
    if (clamped)
        for (double& p : pmf_) p /= total;

    support_ = find_support(pmf_);
    const auto psi = one_sided_dispersion(pmf_);
    long double phi = 0.0L, w2 = 0.0L, psi_max = 0.0L;
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
        phi += static_cast<long double>(pmf_[i]) * psi[i];
        w2 += static_cast<long double>(pmf_[i]) * pmf_[i];
    }
    for (std::size_t r = support_.first; r <= support_.last; ++r) psi_max = std::max(psi_max, psi[r - 1]);
    phi_ = static_cast<double>(phi);
    w2_ = static_cast<double>(w2);
    psi_max_ = static_cast<double>(psi_max);
}

TemporalBelief uniform_window(std::size_t first, std::size_t length, std::size_t horizon) {
    if (length == 0) throw std::out_of_range("uniform_window: length must be positive");
    if (first < 1 || first + length - 1 > horizon)
        throw std::out_of_range("uniform_window: window [" + std::to_string(first) + ", " +
                                std::to_string(first + length - 1) + "] exceeds horizon " +
                                std::to_string(horizon));
    std::vector<double> pmf(horizon, 0.0);
    const double p = 1.0 / static_cast<double>(length);
    std::fill(pmf.begin() + static_cast<std::ptrdiff_t>(first - 1),
              pmf.begin() + static_cast<std::ptrdiff_t>(first - 1 + length), p);
    // 1/L times L is not always exactly 1 in binary; the tolerance absorbs it.
    return TemporalBelief::from_pmf(std::move(pmf));
}

TemporalBelief point_mass(std::size_t round, std::size_t horizon) { return uniform_window(round, 1, horizon); }

TemporalBelief mixture(std::span<const TemporalBelief> components, std::span<const double> weights) {
    if (components.empty()) throw std::invalid_argument("mixture: no components");
    if (components.size() != weights.size()) throw std::invalid_argument("mixture: weight count mismatch");
    const std::size_t horizon = components.front().horizon();
    CompensatedSum wsum;
    for (std::size_t k = 0; k < components.size(); ++k) {
        if (components[k].horizon() != horizon) throw std::invalid_argument("mixture: mismatched horizons");
        if (!(weights[k] >= 0.0)) throw std::invalid_argument("mixture: negative weight");
        wsum += weights[k];
    }
    if (std::fabs(wsum.value() - 1.0) > kMassTolerance)
        throw std::invalid_argument("mixture: weights sum to " + std::to_string(wsum.value()));
    std::vector<double> pmf(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        CompensatedSum acc;
        for (std::size_t k = 0; k < components.size(); ++k) acc += weights[k] * components[k].pmf()[t];
        pmf[t] = acc.value();
    }
    return TemporalBelief::from_pmf(std::move(pmf));
}

UniformDecomposition decompose_uniform(std::size_t horizon, std::size_t target_length) {
    if (target_length < 1 || target_length > horizon)
        throw std::out_of_range("decompose_uniform: need 1 <= L <= T");
    const std::size_t blocks = horizon / target_length;
    const std::size_t base = horizon / blocks;
    const std::size_t longer = horizon % blocks;  // the last `longer` blocks get base + 1
    UniformDecomposition out;
    std::size_t first = 1;
    for (std::size_t k = 0; k < blocks; ++k) {
        const std::size_t len = base + (k >= blocks - longer ? 1 : 0);
        out.blocks.push_back(uniform_window(first, len, horizon));
        out.weights.push_back(static_cast<double>(len) / static_cast<double>(horizon));
        first += len;
    }
    return out;
}

DispersionStats dispersion_stats(const TemporalBelief& belief) {
    DispersionStats s;
    s.support = belief.support_interval();
    const auto psi = one_sided_dispersion(belief.pmf());
    s.psi.reserve(s.support.length());
    for (std::size_t r = s.support.first; r <= s.support.last; ++r) s.psi.push_back(static_cast<double>(psi[r - 1]));
    s.psi_max = belief.psi_max();
    s.phi = belief.phi();
    s.w2 = belief.w2();
    return s;
}

double tv_distance(const TemporalBelief& a, const TemporalBelief& b) {
    if (a.horizon() != b.horizon()) throw std::invalid_argument("tv_distance: horizon mismatch");
    CompensatedSum acc;
    for (std::size_t t = 0; t < a.horizon(); ++t) acc += std::fabs(a.pmf()[t] - b.pmf()[t]);
    return std::clamp(0.5 * acc.value(), 0.0, 1.0);
}

void to_json(nlohmann::json& j, const TemporalBelief& belief) {
    j = nlohmann::json{{"T", belief.horizon()},
                       {"pmf", std::vector<double>(belief.pmf().begin(), belief.pmf().end())}};
}

TemporalBelief temporal_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("T") || !j.contains("pmf"))
        throw std::invalid_argument("temporal belief json: expected {\"T\", \"pmf\"}");
    for (const auto& [key, _] : j.items())
        if (key != "T" && key != "pmf") throw std::invalid_argument("temporal belief json: unknown key " + key);
    const auto horizon = j.at("T").get<std::size_t>();
    auto pmf = j.at("pmf").get<std::vector<double>>();
    if (pmf.size() != horizon)
        throw std::invalid_argument("temporal belief json: pmf must list all " + std::to_string(horizon) + " rounds");
    return TemporalBelief::from_pmf(std::move(pmf));
}

}  // namespace icbandit

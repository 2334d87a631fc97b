#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace icbandit {

/// Closed round interval [first, last], 1-based.
struct RoundInterval {
    std::size_t first = 1;
    std::size_t last = 1;
    std::size_t length() const noexcept { return last - first + 1; }
    bool contains(std::size_t round) const noexcept { return round >= first && round <= last; }
    friend bool operator==(const RoundInterval&, const RoundInterval&) = default;
};

/// Full dispersion record of an arrival-time belief.
struct DispersionStats {
    RoundInterval support;
    std::vector<double> psi;  // psi[k] = expected |t - s| at t = support.first + k
    double psi_max = 0.0;
    double phi = 0.0;
    double w2 = 0.0;

    double psi_at(std::size_t round) const { return psi.at(round - support.first); }
};

/// Probability mass over rounds 1..T (an agent's belief about when they arrive).
///
/// The pmf is stored densely. Entries in [-1e-12, 0) are treated as float noise:
/// they are clamped to zero and the vector renormalised. Any other negative
/// entry, or a total mass off by more than 1e-9, is rejected.
///
/// The dispersion summaries (max one-sided dispersion over the support
/// interval, mean dispersion, squared L2 norm) are computed once at
/// construction, so values are immutable and can be shared across threads.
class TemporalBelief {
public:
    static TemporalBelief from_pmf(std::vector<double> pmf);

    std::size_t horizon() const noexcept { return pmf_.size(); }
    std::span<const double> pmf() const noexcept { return pmf_; }
    /// Mass on a 1-based round.
    double mass(std::size_t round) const { return pmf_.at(round - 1); }

    /// Smallest contiguous range containing every strictly positive entry.
    RoundInterval support_interval() const noexcept { return support_; }

    double psi_max() const noexcept { return psi_max_; }
    double phi() const noexcept { return phi_; }
    double w2() const noexcept { return w2_; }

    friend bool operator==(const TemporalBelief& a, const TemporalBelief& b) { return a.pmf_ == b.pmf_; }

private:
    explicit TemporalBelief(std::vector<double> pmf);

    std::vector<double> pmf_;
    RoundInterval support_;
    double psi_max_ = 0.0;
    double phi_ = 0.0;
    double w2_ = 0.0;
};

/// Uniform belief over {first, ..., first + length - 1}. Throws std::out_of_range
/// when the window does not fit in [1, horizon].
TemporalBelief uniform_window(std::size_t first, std::size_t length, std::size_t horizon);

TemporalBelief point_mass(std::size_t round, std::size_t horizon);

/// Convex combination of beliefs sharing one horizon. Dispersion is recomputed on
/// the mixed pmf; it is not the mixture of the component statistics.
TemporalBelief mixture(std::span<const TemporalBelief> components, std::span<const double> weights);

struct UniformDecomposition {
    std::vector<TemporalBelief> blocks;
    std::vector<double> weights;
};

/// Tiles [1, T] with m = floor(T / L) consecutive uniform blocks of length q or
/// q + 1, q = floor(T / m) >= L, longer blocks last. Weights are block length / T,
/// so the weighted mixture is exactly uniform over the horizon.
UniformDecomposition decompose_uniform(std::size_t horizon, std::size_t target_length);

/// Exact O(T) dispersion record (prefix sums in extended precision).
DispersionStats dispersion_stats(const TemporalBelief& belief);

/// Half the L1 distance between two beliefs on the same horizon.
double tv_distance(const TemporalBelief& a, const TemporalBelief& b);

void to_json(nlohmann::json& j, const TemporalBelief& belief);
TemporalBelief temporal_from_json(const nlohmann::json& j);

}  // namespace icbandit

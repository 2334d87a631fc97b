#pragma once

// Generators and brute-force reference implementations shared by the unit tests.
// Everything here is deliberately naive: quadratic loops, no prefix sums, so
// it checks the library rather than mirroring it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "icbandit/regret.hpp"
#include "icbandit/rng.hpp"
#include "icbandit/temporal.hpp"

namespace testing {

using icbandit::Rng;

inline std::vector<double> random_pmf(Rng& rng, std::size_t horizon, double zero_fraction = 0.3) {
    std::vector<double> p(horizon);
    double total = 0.0;
    for (auto& x : p) {
        x = rng.uniform() < zero_fraction ? 0.0 : rng.uniform();
        total += x;
    }
    if (total == 0.0) {
        p[rng.next_u64() % horizon] = 1.0;
        return p;
    }
    for (auto& x : p) x /= total;
    return p;
}

inline icbandit::TemporalBelief random_belief(Rng& rng, std::size_t horizon) {
    return icbandit::TemporalBelief::from_pmf(random_pmf(rng, horizon));
}

inline icbandit::Transcript random_transcript(Rng& rng, std::size_t horizon, std::size_t arms) {
    icbandit::Transcript tr(arms);
    std::vector<double> u(arms);
    for (std::size_t t = 0; t < horizon; ++t) {
        for (auto& x : u) x = rng.uniform();
        const std::size_t rec = rng.next_u64() % arms;
        tr.append(rec, rec, u);
    }
    return tr;
}

struct NaiveDispersion {
    double psi_max = 0.0;
    double phi = 0.0;
    double w2 = 0.0;
};

// O(T^2) evaluation straight from the definitions.
inline NaiveDispersion naive_dispersion(std::span<const double> pmf) {
    const std::size_t n = pmf.size();
    std::size_t lo = n, hi = 0;
    for (std::size_t t = 0; t < n; ++t)
        if (pmf[t] > 0.0) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    auto psi = [&](std::size_t t) {
        long double s = 0.0L;
        for (std::size_t r = 0; r < n; ++r)
            s += pmf[r] * std::fabs(static_cast<long double>(t) - static_cast<long double>(r));
        return s;
    };
    NaiveDispersion d;
    long double phi = 0.0L, w2 = 0.0L, best = 0.0L;
    for (std::size_t t = lo; t <= hi; ++t) best = std::max(best, psi(t));
    for (std::size_t t = 0; t < n; ++t) {
        if (pmf[t] > 0.0) phi += pmf[t] * psi(t);
        w2 += static_cast<long double>(pmf[t]) * pmf[t];
    }
    d.psi_max = static_cast<double>(best);
    d.phi = static_cast<double>(phi);
    d.w2 = static_cast<double>(w2);
    return d;
}

// Swap regret by enumerating all K^K maps, written independently of the library oracle.
inline double brute_swap_regret(const icbandit::Transcript& tr, std::span<const double> pmf) {
    const std::size_t k = tr.arms();
    std::vector<std::size_t> phi(k, 0);
    double best = -std::numeric_limits<double>::infinity();
    while (true) {
        long double total = 0.0L;
        for (std::size_t t = 0; t < tr.horizon(); ++t) {
            const std::size_t i = tr.recommended(t);
            total += pmf[t] * (tr.reward(t, phi[i]) - tr.reward(t, i));
        }
        best = std::max(best, static_cast<double>(total));
        std::size_t pos = 0;
        while (pos < k && ++phi[pos] == k) phi[pos++] = 0;
        if (pos == k) break;
    }
    return best;
}

inline double brute_external_regret(const icbandit::Transcript& tr, std::span<const double> pmf) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < tr.arms(); ++a) {
        long double total = 0.0L;
        for (std::size_t t = 0; t < tr.horizon(); ++t)
            total += pmf[t] * (tr.reward(t, a) - tr.reward(t, tr.recommended(t)));
        best = std::max(best, static_cast<double>(total));
    }
    return best;
}

inline bool close(double a, double b, double rel, double abs = 0.0) {
    return std::fabs(a - b) <= std::max(abs, rel * std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace testing

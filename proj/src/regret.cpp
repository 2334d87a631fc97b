#include "icbandit/regret.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "icbandit/numeric.hpp"

namespace icbandit {

Transcript::Transcript(std::size_t arms, std::size_t reserve_rounds) : arms_(arms) {
    if (arms == 0) throw std::invalid_argument("transcript: needs at least one action");
    recommended_.reserve(reserve_rounds);
    played_.reserve(reserve_rounds);
    rewards_.reserve(reserve_rounds * arms);
}

void Transcript::append(std::size_t recommended, std::size_t played, std::span<const double> rewards) {
    if (rewards.size() != arms_) throw std::invalid_argument("transcript: reward vector has wrong length");
    if (recommended >= arms_ || played >= arms_) throw std::out_of_range("transcript: action out of range");
    for (double u : rewards)
        if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("transcript: reward outside [0, 1]");
    recommended_.push_back(recommended);
    played_.push_back(played);
    rewards_.insert(rewards_.end(), rewards.begin(), rewards.end());
}

namespace {

void check_horizon(const Transcript& tr, const TemporalBelief& belief) {
    if (tr.horizon() != belief.horizon())
        throw std::invalid_argument("regret: transcript has " + std::to_string(tr.horizon()) +
                                    " rounds but belief horizon is " + std::to_string(belief.horizon()));
}

template <typename Value>
double external_regret_impl(const Transcript& tr, const TemporalBelief& belief, std::span<const std::size_t> chosen,
                            Value value) {
    const std::size_t k = tr.arms();
    std::vector<CompensatedSum> comparator(k);
    CompensatedSum achieved;
    const auto support = belief.support_interval();
    for (std::size_t r = support.first; r <= support.last; ++r) {
        const std::size_t t = r - 1;
        const double w = belief.mass(r);
        if (w == 0.0) continue;
        for (std::size_t a = 0; a < k; ++a) comparator[a] += w * value(t, a);
        achieved += w * value(t, chosen[t]);
    }
    // First maximal index wins ties.
    double best = comparator[0].value();
    for (std::size_t a = 1; a < k; ++a) best = std::max(best, comparator[a].value());
    return best - achieved.value();
}

template <typename Value>
double swap_regret_impl(const Transcript& tr, const TemporalBelief& belief, Value value) {
    const std::size_t k = tr.arms();
    // table[a * k + b] = sum over rounds recommending a of D(t) * value(t, b)
    std::vector<CompensatedSum> table(k * k);
    const auto support = belief.support_interval();
    for (std::size_t r = support.first; r <= support.last; ++r) {
        const std::size_t t = r - 1;
        const double w = belief.mass(r);
        if (w == 0.0) continue;
        const std::size_t a = tr.recommended(t);
        for (std::size_t b = 0; b < k; ++b) table[a * k + b] += w * value(t, b);
    }
    CompensatedSum total;
    for (std::size_t a = 0; a < k; ++a) {
        const double stay = table[a * k + a].value();
        double gain = 0.0;
        for (std::size_t b = 0; b < k; ++b) gain = std::max(gain, table[a * k + b].value() - stay);
        total += gain;
    }
    return total.value();
}

void check_instance(const Transcript& tr, const RewardInstance& mu) {
    if (mu.horizon() != tr.horizon() || mu.arms() != tr.arms())
        throw std::invalid_argument("pseudo regret: reward instance dimensions disagree with transcript");
}

}  // namespace

double weighted_external_regret(const Transcript& tr, const TemporalBelief& belief, RegretTarget on) {
    check_horizon(tr, belief);
    const auto chosen = on == RegretTarget::recommended ? tr.recommendations() : tr.plays();
    return external_regret_impl(tr, belief, chosen, [&](std::size_t t, std::size_t a) { return tr.reward(t, a); });
}

double weighted_swap_regret(const Transcript& tr, const TemporalBelief& belief) {
    check_horizon(tr, belief);
    return swap_regret_impl(tr, belief, [&](std::size_t t, std::size_t a) { return tr.reward(t, a); });
}

double weighted_swap_regret_oracle(const Transcript& tr, const TemporalBelief& belief) {
    check_horizon(tr, belief);
    const std::size_t k = tr.arms();
    if (k > 6) throw std::invalid_argument("swap regret oracle: K^K enumeration limited to K <= 6");
    std::size_t count = 1;
    for (std::size_t i = 0; i < k; ++i) count *= k;
    std::vector<std::size_t> phi(k, 0);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t code = 0; code < count; ++code) {
        std::size_t c = code;
        for (std::size_t a = 0; a < k; ++a) {
            phi[a] = c % k;
            c /= k;
        }
        CompensatedSum acc;
        for (std::size_t t = 0; t < tr.horizon(); ++t) {
            const double w = belief.pmf()[t];
            if (w == 0.0) continue;
            const std::size_t a = tr.recommended(t);
            acc += w * (tr.reward(t, phi[a]) - tr.reward(t, a));
        }
        best = std::max(best, acc.value());
    }
    return best;
}

double weighted_pseudo_regret(const Transcript& tr, const TemporalBelief& belief, const RewardInstance& mu) {
    check_horizon(tr, belief);
    check_instance(tr, mu);
    return external_regret_impl(tr, belief, tr.recommendations(),
                                [&](std::size_t t, std::size_t a) { return mu.mean(t, a); });
}

double weighted_pseudo_swap_regret(const Transcript& tr, const TemporalBelief& belief, const RewardInstance& mu) {
    check_horizon(tr, belief);
    check_instance(tr, mu);
    return swap_regret_impl(tr, belief, [&](std::size_t t, std::size_t a) { return mu.mean(t, a); });
}

double azuma_transfer_bound(double w2, std::size_t arms, std::optional<double> delta) {
    if (arms == 0) throw std::invalid_argument("azuma bound: K must be positive");
    if (!(w2 >= 0.0)) throw std::invalid_argument("azuma bound: W2 must be non-negative");
    const double two_k = 2.0 * static_cast<double>(arms);
    if (delta) {
        if (!(*delta > 0.0 && *delta < 1.0)) throw std::out_of_range("azuma bound: delta must lie in (0, 1)");
        return 2.0 * std::sqrt(2.0 * w2 * std::log(two_k / *delta));
    }
    return 2.0 * std::sqrt(2.0 * w2 * std::log(two_k));
}

double azuma_transfer_bound(const TemporalBelief& belief, std::size_t arms, std::optional<double> delta) {
    return azuma_transfer_bound(belief.w2(), arms, delta);
}

void write_transcript_csv(std::ostream& os, const Transcript& tr) {
    os << "t,I_t,a_t";
    for (std::size_t a = 0; a < tr.arms(); ++a) os << ",u_" << a + 1;
    os << ",observed\n" << std::setprecision(17);
    for (std::size_t t = 0; t < tr.horizon(); ++t) {
        os << t + 1 << ',' << tr.recommended(t) + 1 << ',' << tr.played(t) + 1;
        for (std::size_t a = 0; a < tr.arms(); ++a) os << ',' << tr.reward(t, a);
        os << ',' << tr.observed(t) << '\n';
    }
}

Transcript read_transcript_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("transcript csv: missing header");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 5 || header[0] != "t" || header[1] != "I_t" || header[2] != "a_t" ||
        header.back() != "observed")
        throw std::invalid_argument("transcript csv: header must be t,I_t,a_t,u_1..u_K,observed");
    const std::size_t k = header.size() - 4;
    for (std::size_t a = 0; a < k; ++a)
        if (header[3 + a] != "u_" + std::to_string(a + 1)) throw std::invalid_argument("transcript csv: bad column " + header[3 + a]);
    Transcript tr(k);
    std::vector<double> u(k);
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ++row;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != k + 4) throw std::invalid_argument("transcript csv: row " + std::to_string(row) + " has wrong width");
        if (std::stoull(cells[0]) != row) throw std::invalid_argument("transcript csv: rounds must be consecutive from 1");
        const auto rec = std::stoull(cells[1]);
        const auto played = std::stoull(cells[2]);
        if (rec < 1 || played < 1) throw std::out_of_range("transcript csv: actions are 1-based");
        for (std::size_t a = 0; a < k; ++a) u[a] = std::stod(cells[3 + a]);
        tr.append(rec - 1, played - 1, u);
        if (std::stod(cells.back()) != tr.observed(row - 1))
            throw std::invalid_argument("transcript csv: observed must equal u_{a_t} on row " + std::to_string(row));
    }
    return tr;
}

}  // namespace icbandit

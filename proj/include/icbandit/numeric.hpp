#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace icbandit {

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    CompensatedSum& operator+=(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc += x;
    return acc.value();
}

/// Mean and 95% normal-approximation half-width of a sample.
struct SampleSummary {
    double mean = 0.0;
    double stddev = 0.0;
    double ci95 = 0.0;
    std::size_t n = 0;
};

SampleSummary summarize(std::span<const double> xs);

/// Least-squares slope of log(y) against log(x); entries with non-positive x or y are skipped.
double loglog_slope(std::span<const double> x, std::span<const double> y);

inline constexpr double kZ95 = 1.959963984540054;

}  // namespace icbandit

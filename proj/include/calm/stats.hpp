#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace calm::stats {

// Neumaier compensated summation. Sums are always taken in index order so
// results do not depend on how work was scheduled.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double sum(std::span<const double> xs) noexcept {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double mean(std::span<const double> xs) noexcept {
    return xs.empty() ? 0.0 : sum(xs) / static_cast<double>(xs.size());
}

// Unbiased (n - 1) sample variance; 0 for fewer than two values.
inline double sample_variance(std::span<const double> xs) noexcept {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    CompensatedSum acc;
    for (double x : xs) acc.add((x - m) * (x - m));
    return acc.value() / static_cast<double>(xs.size() - 1);
}

inline double sample_std(std::span<const double> xs) noexcept {
    return std::sqrt(sample_variance(xs));
}

}  // namespace calm::stats

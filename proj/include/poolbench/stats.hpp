#pragma once

#include <array>
#include <span>

namespace poolbench {

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> values);

// Percentile q in [0, 100] with linear interpolation between order statistics
// (position q/100 * (n - 1) in the sorted sample).
double percentile(std::span<const double> values, double q);

inline constexpr std::array<double, 5> kBoxPercentiles{5.0, 25.0, 50.0, 75.0, 95.0};
std::array<double, 5> box_percentiles(std::span<const double> values);

}  // namespace poolbench

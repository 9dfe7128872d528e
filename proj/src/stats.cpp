#include "poolbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "poolbench/errors.hpp"

namespace poolbench {

double mean(std::span<const double> values) {
  if (values.empty()) throw ShapeError("mean of an empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw ShapeError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ParameterError("percentile must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return std::lerp(sorted[lo], sorted[hi], frac);
}

std::array<double, 5> box_percentiles(std::span<const double> values) {
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = percentile(values, kBoxPercentiles[i]);
  return out;
}

}  // namespace poolbench

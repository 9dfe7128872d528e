#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "poolbench/pool_block.hpp"

namespace poolbench {

struct OptimConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;

  // Throws ConfigError unless lr > 0, 0 <= beta < 1, eps > 0, epochs and batch_size >= 1.
  void validate() const;
};

// Adam with bias correction. Moment buffers are keyed by position in the view list, so the
// same parameter order must be passed on every call.
class Adam {
 public:
  explicit Adam(const OptimConfig& config);

  void step(const std::vector<NamedSpan>& params, const std::vector<NamedSpan>& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  OptimConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace poolbench

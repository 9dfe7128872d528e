#pragma once

// Central finite-difference oracle for the analytic gradients.

#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "poolbench/pool_grads.hpp"
#include "poolbench/pool_ops.hpp"

namespace poolbench {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FDOracleConfig {
  double step = 1e-5;
  double tolerance = 1e-5;
  // Denominator floor of the relative error.
  double floor = 1e-8;
};

struct ParamBlock {
  std::string name;
  std::vector<double> values;
};

// Evaluation point: window (or flattened tensor) entries plus named parameter blocks.
// Blocks without a matching gradient in the analytic bundle are held fixed.
struct FdPoint {
  std::vector<double> input;
  std::vector<ParamBlock> params;

  const std::vector<double>& param(std::string_view name) const;
};

struct DifferentiableOp {
  std::string name;
  std::function<double(const FdPoint&)> value;
  std::function<GradBundle(const FdPoint&)> gradient;
  // False when the point is within `step` of a non-differentiable set. Optional.
  std::function<bool(const FdPoint&, double step)> smooth_at;
  // Draws a random point where smooth_at holds. Optional.
  std::function<FdPoint(std::mt19937_64&)> sample;
};

struct FdResult {
  double max_rel_error = 0.0;
  bool excluded = false;      // point is not differentiable, nothing was compared
  std::string worst;          // coordinate with the largest error, e.g. "input[2]" or "tau[0]"
  std::size_t coordinates = 0;

  bool passed(double tolerance) const { return excluded || max_rel_error <= tolerance; }
};

// Compares the analytic bundle with (f(p + h e_k) - f(p - h e_k)) / 2h over every input
// coordinate and every parameter block the bundle differentiates. The error of coordinate k is
// |a_k - d_k| / max(|a|_inf, |d|_inf, floor), with the norms taken over the whole bundle.
// Throws OracleError if a perturbed evaluation is not finite.
FdResult fd_check(const DifferentiableOp& op, const FdPoint& point, const FDOracleConfig& config);

// Window-level operator (2x2 window, n = 4) for every method except SESMP and SEMP, which only
// exist at block level. Parameter blocks are named as in GradBundle.
DifferentiableOp window_op(Method method);

// Block-level operator: PoolBlock on a [channels, height, width] input, scalarized as
// L = sum(upstream * Y) with the fixed "upstream" block drawn by the sampler.
DifferentiableOp block_op(Method method, std::size_t channels = 4, std::size_t height = 4,
                          std::size_t width = 4, std::size_t se_ratio = 2);

}  // namespace poolbench

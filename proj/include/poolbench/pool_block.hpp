#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "poolbench/pool_ops.hpp"
#include "poolbench/tensor.hpp"

namespace poolbench {

// Forward artifacts needed by PoolBlock::backward.
struct PoolCache {
  std::vector<std::size_t> index;  // MP/SEMP: argmax position per output; OP: sort order, n per output
  std::vector<double> gate;        // GP: gate per output
  std::vector<double> tau;         // SMP/SMPF/SESMP: effective tau per channel
  std::vector<double> mu;          // SESMP/SEMP: channel means
  SeForward se;                    // SESMP/SEMP: branch activations
  std::vector<double> scale;       // SEMP: sigmoid channel scales
};

// A pooling layer: one PoolSpec, its parameters, and forward/backward over [C, H, W] tensors.
class PoolBlock {
 public:
  explicit PoolBlock(PoolSpec spec);
  PoolBlock(PoolSpec spec, PoolParams params);

  const PoolSpec& spec() const noexcept { return spec_; }
  PoolParams& params() noexcept { return params_; }
  const PoolParams& params() const noexcept { return params_; }

  Tensor forward(const Tensor& x, PoolCache* cache = nullptr) const;

  // Returns dL/dX and adds dL/dparams into `grads` (shaped like params(), see zero_like).
  Tensor backward(const Tensor& x, const Tensor& d_y, const PoolCache& cache,
                  PoolParams& grads) const;

 private:
  void check_input(const Tensor& x) const;

  PoolSpec spec_;
  PoolParams params_;
};

// Gradient accumulator with the same active fields as `params`, all zero.
PoolParams zero_like(const PoolParams& params);

struct NamedSpan {
  std::string name;
  std::span<double> values;
};

// Views of the parameters the optimizer updates for `method` (empty for MP, AP, NN, LSE, SMPF).
std::vector<NamedSpan> trainable_views(Method method, PoolParams& params);

}  // namespace poolbench

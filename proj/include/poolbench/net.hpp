#pragma once

// Tiny convolutional classifier used to compare pooling blocks end to end:
//   [conv3x3(pad 1) -> ReLU -> pool 2x2/s2] per stage, then flatten -> affine -> logits.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "poolbench/pool_block.hpp"
#include "poolbench/pool_ops.hpp"
#include "poolbench/tensor.hpp"

namespace poolbench {

struct ToyNetConfig {
  std::size_t input_channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::vector<std::size_t> stage_channels{8, 16};
  Method method = Method::MP;
  std::size_t classes = 4;
  std::size_t se_ratio = 4;
  double lse_r = 1.0;
};

// 3x3 convolution, stride 1, zero padding 1. weight is [out, in, 3, 3].
struct Conv2d {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Conv2d() = default;
  Conv2d(std::size_t in_ch, std::size_t out_ch)
      : in(in_ch), out(out_ch), weight(in_ch * out_ch * 9, 0.0), bias(out_ch, 0.0) {}
  std::size_t fan_in() const noexcept { return in * 9; }
};

// Unfolds a [C, H, W] tensor into [C*9, H*W] columns for the padded 3x3 convolution.
void im2col_3x3(const Tensor& x, std::vector<double>& cols);
Tensor conv_forward(const Conv2d& conv, const Tensor& x, std::vector<double>& cols);
// Adds weight/bias gradients into `grads`; returns dL/dx when `want_input_grad`.
Tensor conv_backward(const Conv2d& conv, const Tensor& x, std::span<const double> cols,
                     const Tensor& d_y, Conv2d& grads, bool want_input_grad);

class ToyNet {
 public:
  explicit ToyNet(ToyNetConfig config);

  const ToyNetConfig& config() const noexcept { return config_; }
  std::vector<Conv2d>& convs() noexcept { return convs_; }
  const std::vector<Conv2d>& convs() const noexcept { return convs_; }
  std::vector<PoolBlock>& pools() noexcept { return pools_; }
  const std::vector<PoolBlock>& pools() const noexcept { return pools_; }
  Affine& head() noexcept { return head_; }
  const Affine& head() const noexcept { return head_; }

  // Every trainable parameter, in a fixed order. A zeros_like() copy yields views in the
  // same order, which is how gradients are paired with parameters.
  std::vector<NamedSpan> parameters();
  std::size_t parameter_count();

  // Same structure with all trainable values (and OP weights) set to zero.
  ToyNet zeros_like() const;
  void set_zero();

  // Re-projects OP weights onto the simplex.
  void project_constraints();

  std::vector<double> logits(const Tensor& image) const;

  // Softmax cross-entropy of one sample. Adds `weight` * dLoss/dparams into `grads`.
  // Returns the loss and sets `correct` when the argmax logit equals `label`.
  double accumulate_gradient(const Tensor& image, std::size_t label, double weight,
                             ToyNet& grads, bool& correct) const;

 private:
  ToyNetConfig config_;
  std::vector<Conv2d> convs_;
  std::vector<PoolBlock> pools_;
  Affine head_;
};

// Cross-entropy of softmax(logits) against `label`, via log-sum-exp.
double cross_entropy(std::span<const double> logits, std::size_t label);

// He-normal conv weights, N(0, 0.01) head weights, He-uniform SE maps, zero biases, and the
// method-specific pooling initialization (tau ~ N(0, 1) for SMP, p = 3 for LNP, uniform OP
// weights, AP-equivalent CONV weights, zero GP gate weights).
ToyNet init_weights(const ToyNetConfig& config, std::uint64_t seed);

}  // namespace poolbench

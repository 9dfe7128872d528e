#pragma once

// Analytic gradients of the window functions in pool_ops.hpp.
//
// Each operation comes in two forms: a GradBundle-returning version for tests and the
// gradient checker, and an allocation-free "_into" version used by the pooling block on
// the training hot path. Both share one implementation.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "poolbench/pool_ops.hpp"
#include "poolbench/tensor.hpp"

namespace poolbench {

struct ParamGrad {
  std::string name;
  std::vector<double> values;
};

struct GradBundle {
  std::vector<double> d_input;
  std::vector<ParamGrad> d_params;

  // nullptr when the bundle has no gradient for `name`.
  const std::vector<double>* find(std::string_view name) const;
};

// One-hot at the first maximizer.
GradBundle grad_mp(std::span<const double> x);
GradBundle grad_ap(std::span<const double> x);
// One-hot at the first entry.
GradBundle grad_nn(std::span<const double> x);
// d_input = w, d_params["conv_w"] = x.
GradBundle grad_conv(std::span<const double> x, std::span<const double> w);

// `gate` must be the value returned by f_gp for this (x, gate_w); a stale gate throws
// ParameterError.
GradBundle grad_gp(std::span<const double> x, std::span<const double> gate_w, double gate);
// Writes d_input and d_gate_w (both length n).
void grad_gp_into(std::span<const double> x, std::span<const double> gate_w, double gate,
                  std::span<double> d_input, std::span<double> d_gate_w);

// `order` must sort x ascending (as returned by f_op); otherwise ParameterError.
GradBundle grad_op(std::span<const double> x, std::span<const double> ordinal_w,
                   std::span<const std::size_t> order);

// d_input and d/d p_tilde. Coordinates with x_i = 0 get gradient 0; an all-zero window
// has zero gradient everywhere.
GradBundle grad_lnp(std::span<const double> x, double p_tilde);
// Returns d/d p_tilde and writes d_input.
double grad_lnp_into(std::span<const double> x, double p_tilde, std::span<double> d_input);

// softmax(r x), computed with the max-shift.
GradBundle grad_lse(std::span<const double> x, double r);

// d_input_i = s_i (1 + tau (x_i - y)), d_tau = sum_i s_i (x_i - y)^2 with s = softmax(tau x)
// and y = f_smp(x, tau). The tau derivative is the variance of x under s.
GradBundle grad_smp(std::span<const double> x, double tau);
// Returns d_tau and writes d_input. `scratch` needs n entries.
double grad_smp_into(std::span<const double> x, double tau, std::span<double> d_input,
                     std::span<double> scratch);

// Gradients of L = sum_c d_out[c] * F2(ReLU(F1(mu)))[c].
struct SeBranchGrads {
  Affine d_f1;
  Affine d_f2;
  std::vector<double> d_mu;
};
SeBranchGrads grad_se_branch(std::span<const double> mu, const Affine& f1, const Affine& f2,
                             std::span<const double> d_out);
// Same, reusing the forward activations and accumulating into `d_f1`, `d_f2`.
void grad_se_branch_accumulate(const SeForward& forward, std::span<const double> mu,
                               const Affine& f1, const Affine& f2,
                               std::span<const double> d_out, Affine& d_f1, Affine& d_f2,
                               std::span<double> d_mu);

// Backward of gap_channel: d_mu[c] / (H W) at every position of channel c.
Tensor gap_backward(std::span<const double> d_mu, std::size_t height, std::size_t width);

}  // namespace poolbench

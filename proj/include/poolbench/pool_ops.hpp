#pragma once

// Forward evaluation of the pooling functions. Every window function maps the n entries
// of one window, in row-major order, to a scalar.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "poolbench/tensor.hpp"

namespace poolbench {

enum class Method {
  MP,     // max
  AP,     // average
  NN,     // nearest neighbour (first entry)
  CONV,   // shared linear weights
  GP,     // gated mix of AP and MP
  OP,     // ordinal (sorted, simplex weights)
  LNP,    // learned-norm
  LSE,    // log-sum-exp
  SMP,    // smooth maximum, trainable tau per channel
  SMPF,   // smooth maximum, fixed tau_c = log(c/C)
  SESMP,  // smooth maximum, tau from a squeeze-and-excitation branch
  SEMP,   // squeeze-and-excitation channel scaling, then max
};

std::string_view method_name(Method m) noexcept;
// Accepts the canonical names plus SMP_trainable / SMP_fixed aliases (case-insensitive).
// Throws ConfigError listing the valid names.
Method parse_method(std::string_view name);
std::span<const Method> all_methods() noexcept;
// The ten methods compared in the experiments (everything except CONV and LSE).
std::span<const Method> comparison_methods() noexcept;
std::string valid_method_names();

// y = weight * x + bias with weight stored row-major [out x in].
struct Affine {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Affine() = default;
  Affine(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  std::vector<double> apply(std::span<const double> x) const;
  bool operator==(const Affine&) const = default;
};

struct PoolSpec {
  Method method = Method::MP;
  WindowSpec window{};
  std::size_t channels = 1;
  std::size_t se_ratio = 4;  // reduction ratio of the SE branch (SESMP, SEMP)
  double lse_r = 1.0;        // fixed sharpness of LSE
};

// Trainable state of one pooling block. Only the fields used by the method are sized.
struct PoolParams {
  std::vector<double> conv_w;     // CONV, n weights shared across channels
  std::vector<double> gate_w;     // GP, n weights shared across channels
  std::vector<double> ordinal_w;  // OP, n simplex weights shared across channels
  double p_tilde = 0.0;           // LNP, p = 1 + log(1 + exp(p_tilde))
  double lse_r = 1.0;             // LSE, fixed
  std::vector<double> tau;        // SMP / SMPF, one per channel
  Affine se_f1;                   // SESMP / SEMP, C -> C/r
  Affine se_f2;                   // SESMP / SEMP, C/r -> C
  std::size_t se_ratio = 0;

  bool operator==(const PoolParams&) const = default;
};

// Zero-initialized parameters with every active field sized for `spec`. OP weights start
// uniform, LSE r is copied from the spec, SMPF tau is set by smp_fixed_init.
// Throws ConfigError if the SE ratio does not divide the channel count.
PoolParams make_params(const PoolSpec& spec);

// Throws ConfigError/ParameterError when `params` does not match `spec`.
void validate_params(const PoolSpec& spec, const PoolParams& params);

double sigmoid(double t) noexcept;

double f_mp(std::span<const double> x);
double f_min(std::span<const double> x);
double f_ap(std::span<const double> x);
double f_nn(std::span<const double> x);
double f_conv(std::span<const double> x, std::span<const double> w);

// Index of the largest entry; the first one on ties.
std::size_t argmax_first(std::span<const double> x);

struct GateResult {
  double value;
  double gate;  // sigmoid(gate_w . x), in (0, 1)
};
GateResult f_gp(std::span<const double> x, std::span<const double> gate_w);

// Stable ascending sort permutation: order[i] is the index of the i-th smallest entry.
void sort_order(std::span<const double> x, std::span<std::size_t> order);

struct OrdinalResult {
  double value;
  std::vector<std::size_t> order;
};
// Throws ParameterError unless w is on the probability simplex (within 1e-9).
OrdinalResult f_op(std::span<const double> x, std::span<const double> ordinal_w);
// sum_i w[i] * x[order[i]] without the simplex check.
double ordinal_sum(std::span<const double> x, std::span<const double> w,
                   std::span<const std::size_t> order);

// w_i <- ReLU(w_i) / sum_j ReLU(w_j). Throws ParameterError when no entry is positive.
std::vector<double> project_ordinal_weights(std::span<const double> w);
bool on_simplex(std::span<const double> w, double tolerance);

// p = 1 + softplus(p_tilde), and its inverse.
double lnp_exponent(double p_tilde) noexcept;
double lnp_p_tilde_for(double p);
double f_lnp(std::span<const double> x, double p_tilde);
// Power mean ((1/n) sum |x_i|^p)^(1/p) for an explicit exponent p >= 1.
double f_lnp_exponent(std::span<const double> x, double p);

// (1/r) log((1/n) sum exp(r x_i)), max-shifted. Throws ParameterError for r <= 0.
double f_lse(std::span<const double> x, double r);

// softmax(tau * x) with the shift d = max_i tau*x_i. Writes n weights.
void softmax_tau(std::span<const double> x, double tau, std::span<double> weights);

// sum_i x_i softmax(tau x)_i. Equals f_ap at tau = 0, tends to max (min) as tau -> +inf (-inf).
// Throws ParameterError for non-finite x or tau.
double f_smp(std::span<const double> x, double tau);

// Per-channel mean of a [C, H, W] tensor.
std::vector<double> gap_channel(const Tensor& x);

struct SeForward {
  std::vector<double> pre;     // F1(mu)
  std::vector<double> hidden;  // ReLU(F1(mu))
  std::vector<double> out;     // F2(hidden)
};
// Throws ConfigError if r does not divide C or the maps have the wrong shapes.
SeForward se_branch_forward(std::span<const double> mu, const Affine& f1, const Affine& f2,
                            std::size_t ratio);
// tau = F2(ReLU(F1(mu))).
std::vector<double> se_tau_branch(std::span<const double> mu, const Affine& f1, const Affine& f2,
                                  std::size_t ratio);

// s = sigmoid(F2(ReLU(F1(GAP(X))))), X'_c = s_c X_c, returns max pooling of X'.
Tensor se_recalibrate_then_maxpool(const Tensor& x, const Affine& f1, const Affine& f2,
                                   std::size_t ratio, const WindowSpec& window);

// tau_c = log(c / C), c = 1..C.
std::vector<double> smp_fixed_init(std::size_t channels);

}  // namespace poolbench

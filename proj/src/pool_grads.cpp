#include "poolbench/pool_grads.hpp"

#include <algorithm>
#include <cmath>

#include "poolbench/errors.hpp"
#include "poolbench/kernels.hpp"

namespace poolbench {

namespace {

GradBundle input_only(std::vector<double> d_input) { return {std::move(d_input), {}}; }

}  // namespace

const std::vector<double>* GradBundle::find(std::string_view name) const {
  for (const auto& p : d_params)
    if (p.name == name) return &p.values;
  return nullptr;
}

GradBundle grad_mp(std::span<const double> x) {
  std::vector<double> d(x.size(), 0.0);
  d[argmax_first(x)] = 1.0;
  return input_only(std::move(d));
}

GradBundle grad_ap(std::span<const double> x) {
  if (x.empty()) throw ShapeError("grad_ap: empty window");
  return input_only(std::vector<double>(x.size(), 1.0 / static_cast<double>(x.size())));
}

GradBundle grad_nn(std::span<const double> x) {
  if (x.empty()) throw ShapeError("grad_nn: empty window");
  std::vector<double> d(x.size(), 0.0);
  d[0] = 1.0;
  return input_only(std::move(d));
}

GradBundle grad_conv(std::span<const double> x, std::span<const double> w) {
  if (x.size() != w.size() || x.empty()) throw ShapeError("grad_conv: length mismatch");
  return {std::vector<double>(w.begin(), w.end()), {{"conv_w", {x.begin(), x.end()}}}};
}

void grad_gp_into(std::span<const double> x, std::span<const double> gate_w, double gate,
                  std::span<double> d_input, std::span<double> d_gate_w) {
  const std::size_t n = x.size();
  const double avg = f_ap(x);
  const std::size_t top = argmax_first(x);
  const double mix = gate * (1.0 - gate) * (avg - x[top]);
  const double share = gate / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_input[i] = share + mix * gate_w[i];
    d_gate_w[i] = mix * x[i];
  }
  d_input[top] += 1.0 - gate;
}

GradBundle grad_gp(std::span<const double> x, std::span<const double> gate_w, double gate) {
  if (x.size() != gate_w.size() || x.empty()) throw ShapeError("grad_gp: length mismatch");
  const double expected = sigmoid(f_conv(x, gate_w));
  if (std::abs(expected - gate) > 1e-12 * std::max(1.0, std::abs(expected))) {
    throw ParameterError("grad_gp: cached gate does not belong to this window");
  }
  GradBundle g{std::vector<double>(x.size()), {{"gate_w", std::vector<double>(x.size())}}};
  grad_gp_into(x, gate_w, gate, g.d_input, g.d_params[0].values);
  return g;
}

GradBundle grad_op(std::span<const double> x, std::span<const double> ordinal_w,
                   std::span<const std::size_t> order) {
  const std::size_t n = x.size();
  if (ordinal_w.size() != n || order.size() != n) throw ShapeError("grad_op: length mismatch");
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] >= n || seen[order[i]] || (i > 0 && x[order[i - 1]] > x[order[i]])) {
      throw ParameterError("grad_op: cached permutation does not sort this window");
    }
    seen[order[i]] = true;
  }
  GradBundle g{std::vector<double>(n), {{"ordinal_w", std::vector<double>(n)}}};
  for (std::size_t i = 0; i < n; ++i) {
    g.d_input[order[i]] = ordinal_w[i];
    g.d_params[0].values[i] = x[order[i]];
  }
  return g;
}

double grad_lnp_into(std::span<const double> x, double p_tilde, std::span<double> d_input) {
  const std::size_t n = x.size();
  const double p = lnp_exponent(p_tilde);
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  std::fill(d_input.begin(), d_input.end(), 0.0);
  if (scale == 0.0) return 0.0;

  // With u_i = |x_i| / max|x| and M = mean(u^p): y = max|x| * M^(1/p).
  double mean = 0.0;
  double weighted_log = 0.0;
  for (double v : x) {
    const double u = std::abs(v) / scale;
    if (u == 0.0) continue;  // 0 * log 0 = 0
    const double up = std::pow(u, p);
    mean += up;
    weighted_log += up * std::log(u);
  }
  const double sum_up = mean;
  mean /= static_cast<double>(n);
  const double y = scale * std::pow(mean, 1.0 / p);

  const double denom = static_cast<double>(n) * scale * mean;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] == 0.0) continue;
    const double u = std::abs(x[i]) / scale;
    d_input[i] = y * std::pow(u, p - 1.0) / denom * (x[i] > 0.0 ? 1.0 : -1.0);
  }
  const double dy_dp = y * (weighted_log / (sum_up * p) - std::log(mean) / (p * p));
  return dy_dp * sigmoid(p_tilde);
}

GradBundle grad_lnp(std::span<const double> x, double p_tilde) {
  if (x.empty()) throw ShapeError("grad_lnp: empty window");
  GradBundle g{std::vector<double>(x.size()), {{"p_tilde", {0.0}}}};
  g.d_params[0].values[0] = grad_lnp_into(x, p_tilde, g.d_input);
  return g;
}

GradBundle grad_lse(std::span<const double> x, double r) {
  if (x.empty()) throw ShapeError("grad_lse: empty window");
  if (!(r > 0.0)) throw ParameterError("grad_lse: r must be positive");
  std::vector<double> d(x.size());
  softmax_tau(x, r, d);
  return input_only(std::move(d));
}

double grad_smp_into(std::span<const double> x, double tau, std::span<double> d_input,
                     std::span<double> scratch) {
  const double y = f_smp(x, tau);
  softmax_tau(x, tau, scratch);
  double variance = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double centered = x[i] - y;
    d_input[i] = scratch[i] * (1.0 + tau * centered);
    variance += scratch[i] * centered * centered;
  }
  return variance;
}

GradBundle grad_smp(std::span<const double> x, double tau) {
  GradBundle g{std::vector<double>(x.size()), {{"tau", {0.0}}}};
  std::vector<double> scratch(x.size());
  g.d_params[0].values[0] = grad_smp_into(x, tau, g.d_input, scratch);
  return g;
}

void grad_se_branch_accumulate(const SeForward& fw, std::span<const double> mu, const Affine& f1,
                               const Affine& f2, std::span<const double> d_out, Affine& d_f1,
                               Affine& d_f2, std::span<double> d_mu) {
  const std::size_t c = mu.size();
  const std::size_t hidden = fw.hidden.size();
  std::vector<double> d_hidden(hidden, 0.0);
  for (std::size_t o = 0; o < c; ++o) {
    const double g = d_out[o];
    if (g == 0.0) continue;
    d_f2.bias[o] += g;
    kernels::axpy(g, fw.hidden, std::span<double>(d_f2.weight).subspan(o * hidden, hidden));
    kernels::axpy(g, std::span<const double>(f2.weight).subspan(o * hidden, hidden), d_hidden);
  }
  std::fill(d_mu.begin(), d_mu.end(), 0.0);
  for (std::size_t h = 0; h < hidden; ++h) {
    const double g = fw.pre[h] > 0.0 ? d_hidden[h] : 0.0;  // ReLU'(0) = 0
    if (g == 0.0) continue;
    d_f1.bias[h] += g;
    kernels::axpy(g, mu, std::span<double>(d_f1.weight).subspan(h * c, c));
    kernels::axpy(g, std::span<const double>(f1.weight).subspan(h * c, c), d_mu);
  }
}

SeBranchGrads grad_se_branch(std::span<const double> mu, const Affine& f1, const Affine& f2,
                             std::span<const double> d_out) {
  if (d_out.size() != mu.size()) throw ShapeError("grad_se_branch: upstream has wrong length");
  const std::size_t ratio = f1.out == 0 ? 0 : mu.size() / f1.out;
  const SeForward fw = se_branch_forward(mu, f1, f2, ratio);
  SeBranchGrads g{Affine(f1.in, f1.out), Affine(f2.in, f2.out), std::vector<double>(mu.size())};
  grad_se_branch_accumulate(fw, mu, f1, f2, d_out, g.d_f1, g.d_f2, g.d_mu);
  return g;
}

Tensor gap_backward(std::span<const double> d_mu, std::size_t height, std::size_t width) {
  Tensor d({d_mu.size(), height, width});
  const double area = static_cast<double>(height * width);
  for (std::size_t c = 0; c < d_mu.size(); ++c) {
    const double g = d_mu[c] / area;
    for (double& v : d.channel(c)) v = g;
  }
  return d;
}

}  // namespace poolbench

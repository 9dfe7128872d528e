#include "poolbench/pool_block.hpp"

#include <algorithm>
#include <cmath>

#include "poolbench/errors.hpp"
#include "poolbench/pool_grads.hpp"

namespace poolbench {

namespace {

void zero_affine(Affine& a) {
  std::fill(a.weight.begin(), a.weight.end(), 0.0);
  std::fill(a.bias.begin(), a.bias.end(), 0.0);
}

bool uses_se(Method m) { return m == Method::SESMP || m == Method::SEMP; }

}  // namespace

PoolBlock::PoolBlock(PoolSpec spec) : spec_(spec), params_(make_params(spec)) {}

PoolBlock::PoolBlock(PoolSpec spec, PoolParams params) : spec_(spec), params_(std::move(params)) {
  validate_params(spec_, params_);
}

void PoolBlock::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != spec_.channels) {
    throw ShapeError("pooling block expects a [" + std::to_string(spec_.channels) +
                     ", H, W] input");
  }
}

Tensor PoolBlock::forward(const Tensor& x, PoolCache* cache) const {
  check_input(x);
  const WindowSpec& win = spec_.window;
  const std::size_t channels = x.dim(0);
  const auto out = output_size(x.dim(1), x.dim(2), win);
  const std::size_t per_channel = out.height * out.width;
  const std::size_t n = win.window_size();
  const Method m = spec_.method;

  PoolCache local;
  PoolCache& cc = cache ? *cache : local;
  if (m == Method::MP || m == Method::SEMP) cc.index.resize(channels * per_channel);
  if (m == Method::OP) cc.index.resize(channels * per_channel * n);
  if (m == Method::GP) cc.gate.resize(channels * per_channel);

  if (m == Method::SMP || m == Method::SMPF) cc.tau = params_.tau;
  if (uses_se(m)) {
    cc.mu = gap_channel(x);
    cc.se = se_branch_forward(cc.mu, params_.se_f1, params_.se_f2, params_.se_ratio);
    if (m == Method::SESMP) {
      cc.tau = cc.se.out;
    } else {
      cc.scale.resize(channels);
      for (std::size_t c = 0; c < channels; ++c) cc.scale[c] = sigmoid(cc.se.out[c]);
    }
  }

  Tensor y({channels, out.height, out.width});
  std::vector<double> w(n);
  std::vector<std::size_t> order(n);
  std::size_t k = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < out.height; ++i) {
      for (std::size_t j = 0; j < out.width; ++j, ++k) {
        gather_window(x, c, win, i, j, w);
        double v = 0.0;
        switch (m) {
          case Method::MP:
          case Method::SEMP: {
            const std::size_t a = argmax_first(w);
            cc.index[k] = a;
            v = m == Method::MP ? w[a] : cc.scale[c] * w[a];
            break;
          }
          case Method::AP: v = f_ap(w); break;
          case Method::NN: v = f_nn(w); break;
          case Method::CONV: v = f_conv(w, params_.conv_w); break;
          case Method::GP: {
            const auto r = f_gp(w, params_.gate_w);
            cc.gate[k] = r.gate;
            v = r.value;
            break;
          }
          case Method::OP: {
            const std::span<std::size_t> slot(cc.index.data() + k * n, n);
            sort_order(w, slot);
            v = ordinal_sum(w, params_.ordinal_w, slot);
            break;
          }
          case Method::LNP: v = f_lnp(w, params_.p_tilde); break;
          case Method::LSE: v = f_lse(w, params_.lse_r); break;
          case Method::SMP:
          case Method::SMPF:
          case Method::SESMP: v = f_smp(w, cc.tau[c]); break;
        }
        y[k] = v;
      }
    }
  }
  return y;
}

Tensor PoolBlock::backward(const Tensor& x, const Tensor& d_y, const PoolCache& cache,
                           PoolParams& grads) const {
  check_input(x);
  const WindowSpec& win = spec_.window;
  const std::size_t channels = x.dim(0);
  const auto out = output_size(x.dim(1), x.dim(2), win);
  if (d_y.size() != channels * out.height * out.width) {
    throw ShapeError("pooling backward: upstream gradient has the wrong size");
  }
  const std::size_t n = win.window_size();
  const Method m = spec_.method;

  Tensor d_x(x.shape(), 0.0);
  std::vector<double> w(n), d_in(n), scratch(n);
  std::vector<double> d_gate(n);
  std::vector<std::size_t> off(n);
  std::vector<double> d_branch(uses_se(m) ? channels : 0, 0.0);

  std::size_t k = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < out.height; ++i) {
      for (std::size_t j = 0; j < out.width; ++j, ++k) {
        const double g = d_y[k];
        if (g == 0.0 && !uses_se(m)) continue;
        gather_window(x, c, win, i, j, w);
        window_offsets(x, c, win, i, j, off);
        switch (m) {
          case Method::MP: d_x[off[cache.index[k]]] += g; break;
          case Method::SEMP: {
            const std::size_t a = cache.index[k];
            d_x[off[a]] += cache.scale[c] * g;
            d_branch[c] += w[a] * g;  // dL/ds_c for now
            break;
          }
          case Method::AP: {
            const double share = g / static_cast<double>(n);
            for (std::size_t t = 0; t < n; ++t) d_x[off[t]] += share;
            break;
          }
          case Method::NN: d_x[off[0]] += g; break;
          case Method::CONV:
            for (std::size_t t = 0; t < n; ++t) {
              d_x[off[t]] += params_.conv_w[t] * g;
              grads.conv_w[t] += w[t] * g;
            }
            break;
          case Method::GP:
            grad_gp_into(w, params_.gate_w, cache.gate[k], d_in, d_gate);
            for (std::size_t t = 0; t < n; ++t) {
              d_x[off[t]] += d_in[t] * g;
              grads.gate_w[t] += d_gate[t] * g;
            }
            break;
          case Method::OP: {
            const std::size_t* order = cache.index.data() + k * n;
            for (std::size_t t = 0; t < n; ++t) {
              d_x[off[order[t]]] += params_.ordinal_w[t] * g;
              grads.ordinal_w[t] += w[order[t]] * g;
            }
            break;
          }
          case Method::LNP: {
            const double dp = grad_lnp_into(w, params_.p_tilde, d_in);
            for (std::size_t t = 0; t < n; ++t) d_x[off[t]] += d_in[t] * g;
            grads.p_tilde += dp * g;
            break;
          }
          case Method::LSE:
            softmax_tau(w, params_.lse_r, d_in);
            for (std::size_t t = 0; t < n; ++t) d_x[off[t]] += d_in[t] * g;
            break;
          case Method::SMP:
          case Method::SMPF:
          case Method::SESMP: {
            const double dt = grad_smp_into(w, cache.tau[c], d_in, scratch);
            for (std::size_t t = 0; t < n; ++t) d_x[off[t]] += d_in[t] * g;
            if (m == Method::SMP) grads.tau[c] += dt * g;
            if (m == Method::SESMP) d_branch[c] += dt * g;
            break;
          }
        }
      }
    }
  }

  if (uses_se(m)) {
    if (m == Method::SEMP) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double s = cache.scale[c];
        d_branch[c] *= s * (1.0 - s);
      }
    }
    std::vector<double> d_mu(channels);
    grad_se_branch_accumulate(cache.se, cache.mu, params_.se_f1, params_.se_f2, d_branch,
                              grads.se_f1, grads.se_f2, d_mu);
    const double area = static_cast<double>(x.dim(1) * x.dim(2));
    for (std::size_t c = 0; c < channels; ++c) {
      const double share = d_mu[c] / area;
      for (double& v : d_x.channel(c)) v += share;
    }
  }
  return d_x;
}

PoolParams zero_like(const PoolParams& params) {
  PoolParams g = params;
  std::fill(g.conv_w.begin(), g.conv_w.end(), 0.0);
  std::fill(g.gate_w.begin(), g.gate_w.end(), 0.0);
  std::fill(g.ordinal_w.begin(), g.ordinal_w.end(), 0.0);
  std::fill(g.tau.begin(), g.tau.end(), 0.0);
  g.p_tilde = 0.0;
  zero_affine(g.se_f1);
  zero_affine(g.se_f2);
  return g;
}

std::vector<NamedSpan> trainable_views(Method method, PoolParams& p) {
  switch (method) {
    case Method::CONV: return {{"conv_w", p.conv_w}};
    case Method::GP: return {{"gate_w", p.gate_w}};
    case Method::OP: return {{"ordinal_w", p.ordinal_w}};
    case Method::LNP: return {{"p_tilde", std::span<double>(&p.p_tilde, 1)}};
    case Method::SMP: return {{"tau", p.tau}};
    case Method::SESMP:
    case Method::SEMP:
      return {{"se_f1.weight", p.se_f1.weight},
              {"se_f1.bias", p.se_f1.bias},
              {"se_f2.weight", p.se_f2.weight},
              {"se_f2.bias", p.se_f2.bias}};
    default: return {};
  }
}

}  // namespace poolbench

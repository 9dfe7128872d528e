#include "poolbench/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "poolbench/errors.hpp"
#include "poolbench/kernels.hpp"

namespace poolbench {

void im2col_3x3(const Tensor& x, std::vector<double>& cols) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t plane = h * w;
  cols.assign(c * 9 * plane, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = cols.data() + ((ch * 3 + ky) * 3 + kx) * plane;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            row[y * w + xx] = x.at(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Conv2d& conv, const Tensor& x, std::vector<double>& cols) {
  if (x.rank() != 3 || x.dim(0) != conv.in) throw ShapeError("conv input has the wrong channel count");
  const std::size_t h = x.dim(1), w = x.dim(2), plane = h * w;
  const std::size_t k = conv.in * 9;
  im2col_3x3(x, cols);
  Tensor y({conv.out, h, w});
  for (std::size_t o = 0; o < conv.out; ++o) {
    auto out = y.channel(o);
    std::fill(out.begin(), out.end(), conv.bias[o]);
    for (std::size_t r = 0; r < k; ++r) {
      const double wt = conv.weight[o * k + r];
      if (wt == 0.0) continue;
      kernels::axpy(wt, std::span<const double>(cols).subspan(r * plane, plane), out);
    }
  }
  return y;
}

Tensor conv_backward(const Conv2d& conv, const Tensor& x, std::span<const double> cols,
                     const Tensor& d_y, Conv2d& grads, bool want_input_grad) {
  const std::size_t h = x.dim(1), w = x.dim(2), plane = h * w;
  const std::size_t k = conv.in * 9;
  std::vector<double> d_cols(want_input_grad ? k * plane : 0, 0.0);
  for (std::size_t o = 0; o < conv.out; ++o) {
    const auto dy = d_y.channel(o);
    double bias = 0.0;
    for (double v : dy) bias += v;
    grads.bias[o] += bias;
    for (std::size_t r = 0; r < k; ++r) {
      grads.weight[o * k + r] += kernels::dot(dy, cols.subspan(r * plane, plane));
      if (want_input_grad) {
        kernels::axpy(conv.weight[o * k + r], dy,
                      std::span<double>(d_cols).subspan(r * plane, plane));
      }
    }
  }
  Tensor d_x(x.shape(), 0.0);
  if (!want_input_grad) return d_x;
  // col2im
  for (std::size_t ch = 0; ch < conv.in; ++ch) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = d_cols.data() + ((ch * 3 + ky) * 3 + kx) * plane;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            d_x.at(ch, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) += row[y * w + xx];
          }
        }
      }
    }
  }
  return d_x;
}

ToyNet::ToyNet(ToyNetConfig config) : config_(std::move(config)) {
  if (config_.stage_channels.empty()) throw ConfigError("network needs at least one stage");
  if (config_.classes < 2) throw ConfigError("network needs at least two classes");
  std::size_t channels = config_.input_channels;
  std::size_t h = config_.height, w = config_.width;
  for (std::size_t out : config_.stage_channels) {
    convs_.emplace_back(channels, out);
    PoolSpec spec{config_.method, WindowSpec::square(2, 2), out, config_.se_ratio, config_.lse_r};
    pools_.emplace_back(spec);
    const auto o = output_size(h, w, spec.window);
    h = o.height;
    w = o.width;
    channels = out;
  }
  head_ = Affine(channels * h * w, config_.classes);
}

std::vector<NamedSpan> ToyNet::parameters() {
  std::vector<NamedSpan> views;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    const std::string prefix = "stage" + std::to_string(s) + ".";
    views.push_back({prefix + "conv.weight", convs_[s].weight});
    views.push_back({prefix + "conv.bias", convs_[s].bias});
    for (auto& v : trainable_views(config_.method, pools_[s].params())) {
      views.push_back({prefix + "pool." + v.name, v.values});
    }
  }
  views.push_back({"head.weight", head_.weight});
  views.push_back({"head.bias", head_.bias});
  return views;
}

std::size_t ToyNet::parameter_count() {
  std::size_t n = 0;
  for (const auto& v : parameters()) n += v.values.size();
  return n;
}

ToyNet ToyNet::zeros_like() const {
  ToyNet z = *this;
  z.set_zero();
  return z;
}

void ToyNet::set_zero() {
  for (auto& v : parameters()) std::fill(v.values.begin(), v.values.end(), 0.0);
  for (auto& p : pools_) std::fill(p.params().ordinal_w.begin(), p.params().ordinal_w.end(), 0.0);
}

void ToyNet::project_constraints() {
  if (config_.method != Method::OP) return;
  for (auto& p : pools_) {
    auto& w = p.params().ordinal_w;
    const auto projected = project_ordinal_weights(w);
    std::copy(projected.begin(), projected.end(), w.begin());  // keep storage: optimizer holds views
  }
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - top);
  return top + std::log(sum) - logits[label];
}

std::vector<double> ToyNet::logits(const Tensor& image) const {
  Tensor x = image;
  std::vector<double> cols;
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    Tensor a = conv_forward(convs_[s], x, cols);
    for (double& v : a.data()) v = std::max(v, 0.0);
    x = pools_[s].forward(a);
  }
  return head_.apply(x.data());
}

double ToyNet::accumulate_gradient(const Tensor& image, std::size_t label, double weight,
                                   ToyNet& grads, bool& correct) const {
  const std::size_t stages = convs_.size();
  std::vector<Tensor> inputs(stages), acts(stages);
  std::vector<std::vector<double>> cols(stages);
  std::vector<PoolCache> caches(stages);

  Tensor x = image;
  for (std::size_t s = 0; s < stages; ++s) {
    inputs[s] = x;
    Tensor a = conv_forward(convs_[s], x, cols[s]);
    for (double& v : a.data()) v = std::max(v, 0.0);
    x = pools_[s].forward(a, &caches[s]);
    acts[s] = std::move(a);
  }
  const std::vector<double> z = head_.apply(x.data());
  const double loss = cross_entropy(z, label);
  correct = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin()) == label;

  // dLoss/dlogits = softmax(z) - onehot(label)
  std::vector<double> dz(z.size());
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) total += (dz[k] = std::exp(z[k] - top));
  for (std::size_t k = 0; k < z.size(); ++k) dz[k] = weight * (dz[k] / total - (k == label ? 1.0 : 0.0));

  Tensor d_x(x.shape(), 0.0);
  const std::size_t in = head_.in;
  for (std::size_t k = 0; k < z.size(); ++k) {
    grads.head_.bias[k] += dz[k];
    kernels::axpy(dz[k], x.data(), std::span<double>(grads.head_.weight).subspan(k * in, in));
    kernels::axpy(dz[k], std::span<const double>(head_.weight).subspan(k * in, in), d_x.data());
  }

  for (std::size_t s = stages; s-- > 0;) {
    Tensor d_a = pools_[s].backward(acts[s], d_x, caches[s], grads.pools_[s].params());
    for (std::size_t i = 0; i < d_a.size(); ++i)
      if (acts[s][i] <= 0.0) d_a[i] = 0.0;
    d_x = conv_backward(convs_[s], inputs[s], cols[s], d_a, grads.convs_[s], s > 0);
  }
  return loss;
}

ToyNet init_weights(const ToyNetConfig& config, std::uint64_t seed) {
  ToyNet net(config);
  std::mt19937_64 rng(seed);
  for (auto& conv : net.convs()) {
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(conv.fan_in())));
    for (double& w : conv.weight) w = he(rng);
  }
  std::normal_distribution<double> linear(0.0, 0.01);
  for (double& w : net.head().weight) w = linear(rng);

  for (auto& block : net.pools()) {
    PoolParams& p = block.params();
    const std::size_t n = block.spec().window.window_size();
    switch (config.method) {
      case Method::CONV: p.conv_w.assign(n, 1.0 / static_cast<double>(n)); break;
      case Method::LNP: p.p_tilde = lnp_p_tilde_for(3.0); break;
      case Method::SMP: {
        std::normal_distribution<double> standard(0.0, 1.0);
        for (double& t : p.tau) t = standard(rng);
        break;
      }
      case Method::SESMP:
      case Method::SEMP:
        for (Affine* a : {&p.se_f1, &p.se_f2}) {
          const double bound = std::sqrt(6.0 / static_cast<double>(a->in));
          std::uniform_real_distribution<double> he_uniform(-bound, bound);
          for (double& w : a->weight) w = he_uniform(rng);
        }
        break;
      default: break;
    }
  }
  return net;
}

}  // namespace poolbench

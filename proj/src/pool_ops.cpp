#include "poolbench/pool_ops.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>

#include "poolbench/errors.hpp"
#include "poolbench/kernels.hpp"

namespace poolbench {

namespace {

constexpr std::array kAllMethods{Method::MP,  Method::AP,  Method::NN,   Method::CONV,
                                 Method::GP,  Method::OP,  Method::LNP,  Method::LSE,
                                 Method::SMP, Method::SMPF, Method::SESMP, Method::SEMP};
constexpr std::array kComparisonMethods{Method::MP,  Method::AP,   Method::NN,    Method::GP,
                                        Method::OP,  Method::LNP,  Method::SMP,   Method::SMPF,
                                        Method::SESMP, Method::SEMP};

void require_nonempty(std::span<const double> x, const char* op) {
  if (x.empty()) throw ShapeError(std::string(op) + ": empty window");
}

void require_same_length(std::span<const double> x, std::span<const double> w, const char* op) {
  if (x.size() != w.size()) {
    throw ShapeError(std::string(op) + ": window has " + std::to_string(x.size()) +
                     " entries but " + std::to_string(w.size()) + " weights were given");
  }
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

void check_se_shapes(std::size_t channels, const Affine& f1, const Affine& f2, std::size_t ratio) {
  if (ratio == 0 || channels % ratio != 0) {
    throw ConfigError("SE reduction ratio " + std::to_string(ratio) +
                      " does not divide the channel count " + std::to_string(channels));
  }
  const std::size_t hidden = channels / ratio;
  if (f1.in != channels || f1.out != hidden || f2.in != hidden || f2.out != channels) {
    throw ConfigError("SE affine maps must be " + std::to_string(channels) + "->" +
                      std::to_string(hidden) + "->" + std::to_string(channels));
  }
}

}  // namespace

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::MP: return "MP";
    case Method::AP: return "AP";
    case Method::NN: return "NN";
    case Method::CONV: return "CONV";
    case Method::GP: return "GP";
    case Method::OP: return "OP";
    case Method::LNP: return "LNP";
    case Method::LSE: return "LSE";
    case Method::SMP: return "SMP";
    case Method::SMPF: return "SMPF";
    case Method::SESMP: return "SESMP";
    case Method::SEMP: return "SEMP";
  }
  return "?";
}

std::span<const Method> all_methods() noexcept { return kAllMethods; }
std::span<const Method> comparison_methods() noexcept { return kComparisonMethods; }

std::string valid_method_names() {
  std::string names;
  for (Method m : kAllMethods) {
    if (!names.empty()) names += ", ";
    names += method_name(m);
  }
  return names;
}

Method parse_method(std::string_view name) {
  const std::string key = upper(name);
  for (Method m : kAllMethods)
    if (key == method_name(m)) return m;
  if (key == "SMP_TRAINABLE") return Method::SMP;
  if (key == "SMP_FIXED") return Method::SMPF;
  throw ConfigError("unknown pooling method '" + std::string(name) +
                    "'; valid names: " + valid_method_names());
}

std::vector<double> Affine::apply(std::span<const double> x) const {
  if (x.size() != in) throw ShapeError("affine map input has wrong length");
  std::vector<double> y(bias);
  for (std::size_t o = 0; o < out; ++o) {
    y[o] += kernels::dot(std::span<const double>(weight).subspan(o * in, in), x);
  }
  return y;
}

PoolParams make_params(const PoolSpec& spec) {
  PoolParams p;
  const std::size_t n = spec.window.window_size();
  const std::size_t c = spec.channels;
  switch (spec.method) {
    case Method::CONV: p.conv_w.assign(n, 0.0); break;
    case Method::GP: p.gate_w.assign(n, 0.0); break;
    case Method::OP: p.ordinal_w.assign(n, 1.0 / static_cast<double>(n)); break;
    case Method::LSE: p.lse_r = spec.lse_r; break;
    case Method::SMP: p.tau.assign(c, 0.0); break;
    case Method::SMPF: p.tau = smp_fixed_init(c); break;
    case Method::SESMP:
    case Method::SEMP:
      if (spec.se_ratio == 0 || c % spec.se_ratio != 0) {
        throw ConfigError("SE reduction ratio " + std::to_string(spec.se_ratio) +
                          " does not divide the channel count " + std::to_string(c));
      }
      p.se_ratio = spec.se_ratio;
      p.se_f1 = Affine(c, c / spec.se_ratio);
      p.se_f2 = Affine(c / spec.se_ratio, c);
      break;
    default: break;
  }
  return p;
}

void validate_params(const PoolSpec& spec, const PoolParams& p) {
  const std::size_t n = spec.window.window_size();
  const auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("pooling parameters: ") + what);
  };
  switch (spec.method) {
    case Method::CONV: need(p.conv_w.size() == n, "conv_w must have one weight per window entry"); break;
    case Method::GP: need(p.gate_w.size() == n, "gate_w must have one weight per window entry"); break;
    case Method::OP:
      need(p.ordinal_w.size() == n, "ordinal_w must have one weight per window entry");
      if (!on_simplex(p.ordinal_w, 1e-9)) throw ParameterError("ordinal weights are not on the simplex");
      break;
    case Method::LSE:
      if (!(p.lse_r > 0.0)) throw ParameterError("LSE sharpness r must be positive");
      break;
    case Method::SMP:
    case Method::SMPF: need(p.tau.size() == spec.channels, "tau must have one value per channel"); break;
    case Method::SESMP:
    case Method::SEMP: check_se_shapes(spec.channels, p.se_f1, p.se_f2, p.se_ratio); break;
    default: break;
  }
}

double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double f_mp(std::span<const double> x) {
  require_nonempty(x, "f_mp");
  return *std::max_element(x.begin(), x.end());
}

double f_min(std::span<const double> x) {
  require_nonempty(x, "f_min");
  return *std::min_element(x.begin(), x.end());
}

double f_ap(std::span<const double> x) {
  require_nonempty(x, "f_ap");
  double sum = 0.0;
  for (double v : x) sum += v;
  return sum / static_cast<double>(x.size());
}

double f_nn(std::span<const double> x) {
  require_nonempty(x, "f_nn");
  return x[0];
}

double f_conv(std::span<const double> x, std::span<const double> w) {
  require_nonempty(x, "f_conv");
  require_same_length(x, w, "f_conv");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * x[i];
  return sum;
}

std::size_t argmax_first(std::span<const double> x) {
  require_nonempty(x, "argmax");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

GateResult f_gp(std::span<const double> x, std::span<const double> gate_w) {
  require_nonempty(x, "f_gp");
  require_same_length(x, gate_w, "f_gp");
  const double g = sigmoid(f_conv(x, gate_w));
  return {g * f_ap(x) + (1.0 - g) * f_mp(x), g};
}

void sort_order(std::span<const double> x, std::span<std::size_t> order) {
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Insertion sort: windows are tiny and the sort must be stable.
  for (std::size_t i = 1; i < order.size(); ++i) {
    const std::size_t idx = order[i];
    std::size_t j = i;
    while (j > 0 && x[order[j - 1]] > x[idx]) {
      order[j] = order[j - 1];
      --j;
    }
    order[j] = idx;
  }
}

double ordinal_sum(std::span<const double> x, std::span<const double> w,
                   std::span<const std::size_t> order) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * x[order[i]];
  return sum;
}

bool on_simplex(std::span<const double> w, double tolerance) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

OrdinalResult f_op(std::span<const double> x, std::span<const double> ordinal_w) {
  require_nonempty(x, "f_op");
  require_same_length(x, ordinal_w, "f_op");
  if (!on_simplex(ordinal_w, 1e-9)) {
    throw ParameterError("f_op: ordinal weights must be nonnegative and sum to 1");
  }
  OrdinalResult r{0.0, std::vector<std::size_t>(x.size())};
  sort_order(x, r.order);
  r.value = ordinal_sum(x, ordinal_w, r.order);
  return r;
}

std::vector<double> project_ordinal_weights(std::span<const double> w) {
  double total = 0.0;
  for (double v : w) total += std::max(v, 0.0);
  if (!(total > 0.0)) {
    throw ParameterError("ordinal weight projection: all weights are <= 0");
  }
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::max(w[i], 0.0) / total;
  return out;
}

double lnp_exponent(double p_tilde) noexcept {
  // softplus without overflow for large p_tilde
  const double softplus = p_tilde > 0.0 ? p_tilde + std::log1p(std::exp(-p_tilde))
                                        : std::log1p(std::exp(p_tilde));
  return 1.0 + softplus;
}

double lnp_p_tilde_for(double p) {
  if (!(p > 1.0)) throw ParameterError("LNP exponent must be > 1");
  return std::log(std::expm1(p - 1.0));
}

double f_lnp_exponent(std::span<const double> x, double p) {
  require_nonempty(x, "f_lnp");
  if (!(p >= 1.0)) throw ParameterError("LNP exponent must be >= 1");
  const double n = static_cast<double>(x.size());
  if (p == 1.0) {
    double sum = 0.0;
    for (double v : x) sum += std::abs(v);
    return sum / n;
  }
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  // Factor out max|x| so |x_i|^p cannot overflow.
  double mean = 0.0;
  for (double v : x) mean += std::pow(std::abs(v) / scale, p);
  mean /= n;
  return scale * std::pow(mean, 1.0 / p);
}

double f_lnp(std::span<const double> x, double p_tilde) {
  return f_lnp_exponent(x, lnp_exponent(p_tilde));
}

double f_lse(std::span<const double> x, double r) {
  require_nonempty(x, "f_lse");
  if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("f_lse: r must be positive and finite");
  const double top = f_mp(x);
  double sum = 0.0;
  for (double v : x) sum += std::exp(r * (v - top));
  return top + std::log(sum / static_cast<double>(x.size())) / r;
}

void softmax_tau(std::span<const double> x, double tau, std::span<double> weights) {
  // Shift by the entry maximizing tau * x so every exponent is <= 0.
  const double ref = tau >= 0.0 ? f_mp(x) : f_min(x);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    weights[i] = std::exp(tau * (x[i] - ref));
    total += weights[i];
  }
  for (double& w : weights) w /= total;
}

double f_smp(std::span<const double> x, double tau) {
  require_nonempty(x, "f_smp");
  if (!std::isfinite(tau)) throw ParameterError("f_smp: tau must be finite");
  for (double v : x)
    if (!std::isfinite(v)) throw ParameterError("f_smp: non-finite window entry");
  if (tau == 0.0) return f_ap(x);

  const double ref = tau > 0.0 ? f_mp(x) : f_min(x);
  double total = 0.0;
  double weighted = 0.0;
  for (double v : x) {
    const double d = v - ref;
    const double e = std::exp(tau * d);
    total += e;
    weighted += e * d;
  }
  const double y = ref + weighted / total;
  // rounding can leave the convex hull by an ulp
  return std::clamp(y, f_min(x), f_mp(x));
}

std::vector<double> gap_channel(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("gap_channel expects a [C, H, W] tensor");
  std::vector<double> mu(x.dim(0));
  const double area = static_cast<double>(x.dim(1) * x.dim(2));
  for (std::size_t c = 0; c < mu.size(); ++c) {
    double sum = 0.0;
    for (double v : x.channel(c)) sum += v;
    mu[c] = sum / area;
  }
  return mu;
}

SeForward se_branch_forward(std::span<const double> mu, const Affine& f1, const Affine& f2,
                            std::size_t ratio) {
  check_se_shapes(mu.size(), f1, f2, ratio);
  SeForward fw;
  fw.pre = f1.apply(mu);
  fw.hidden.resize(fw.pre.size());
  for (std::size_t i = 0; i < fw.pre.size(); ++i) fw.hidden[i] = std::max(fw.pre[i], 0.0);
  fw.out = f2.apply(fw.hidden);
  return fw;
}

std::vector<double> se_tau_branch(std::span<const double> mu, const Affine& f1, const Affine& f2,
                                  std::size_t ratio) {
  return se_branch_forward(mu, f1, f2, ratio).out;
}

Tensor se_recalibrate_then_maxpool(const Tensor& x, const Affine& f1, const Affine& f2,
                                   std::size_t ratio, const WindowSpec& window) {
  const auto z = se_tau_branch(gap_channel(x), f1, f2, ratio);
  Tensor scaled = x;
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double s = sigmoid(z[c]);
    for (double& v : scaled.channel(c)) v *= s;
  }
  return map_windows(scaled, window, [](std::span<const double> w, std::size_t) { return f_mp(w); });
}

std::vector<double> smp_fixed_init(std::size_t channels) {
  if (channels == 0) throw ConfigError("smp_fixed_init: need at least one channel");
  std::vector<double> tau(channels);
  for (std::size_t c = 1; c <= channels; ++c) {
    tau[c - 1] = std::log(static_cast<double>(c) / static_cast<double>(channels));
  }
  return tau;
}

}  // namespace poolbench

#include "poolbench/fd_check.hpp"

#include <algorithm>
#include <cmath>

#include "poolbench/errors.hpp"
#include "poolbench/pool_block.hpp"

namespace poolbench {

namespace {

constexpr std::size_t kWindow = 4;
constexpr int kMaxDraws = 10000;

std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> dist(1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (double& v : w) total += (v = dist(rng));
  for (double& v : w) v /= total;
  return w;
}

// Smallest distance between any two entries (sorted gap).
double min_gap(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  double gap = INFINITY;
  for (std::size_t i = 1; i < s.size(); ++i) gap = std::min(gap, s[i] - s[i - 1]);
  return gap;
}

// Gap between the largest and the second largest entry.
double top_gap(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return s.size() < 2 ? INFINITY : s.back() - s[s.size() - 2];
}

double min_abs(std::span<const double> x) {
  double m = INFINITY;
  for (double v : x) m = std::min(m, std::abs(v));
  return m;
}

// Distance to a kink must exceed this multiple of the FD step.
constexpr double kMargin = 100.0;

FdPoint draw(const DifferentiableOp& op, std::mt19937_64& rng,
             const std::function<FdPoint(std::mt19937_64&)>& raw) {
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    FdPoint p = raw(rng);
    if (!op.smooth_at || op.smooth_at(p, FDOracleConfig{}.step)) return p;
  }
  throw OracleError(op.name + ": could not sample a differentiable point");
}

}  // namespace

const std::vector<double>& FdPoint::param(std::string_view name) const {
  for (const auto& b : params)
    if (b.name == name) return b.values;
  throw ParameterError("fd point has no parameter block '" + std::string(name) + "'");
}

FdResult fd_check(const DifferentiableOp& op, const FdPoint& point, const FDOracleConfig& config) {
  if (!(config.step > 0.0)) throw ParameterError("finite-difference step must be positive");
  FdResult result;
  if (op.smooth_at && !op.smooth_at(point, config.step)) {
    result.excluded = true;
    return result;
  }

  const GradBundle analytic = op.gradient(point);
  if (analytic.d_input.size() != point.input.size()) {
    throw OracleError(op.name + ": analytic input gradient has the wrong length");
  }

  const double h = config.step;
  const auto central = [&](FdPoint& p, double& slot) {
    const double saved = slot;
    slot = saved + h;
    const double up = op.value(p);
    slot = saved - h;
    const double down = op.value(p);
    slot = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError(op.name + ": non-finite value in the finite-difference neighbourhood");
    }
    return (up - down) / (2.0 * h);
  };

  struct Pair {
    std::string label;
    double analytic;
    double numeric;
  };
  std::vector<Pair> pairs;
  FdPoint p = point;
  for (std::size_t i = 0; i < p.input.size(); ++i) {
    pairs.push_back({"input[" + std::to_string(i) + "]", analytic.d_input[i],
                     central(p, p.input[i])});
  }
  for (auto& block : p.params) {
    const std::vector<double>* grad = analytic.find(block.name);
    if (!grad) continue;
    if (grad->size() != block.values.size()) {
      throw OracleError(op.name + ": gradient for '" + block.name + "' has the wrong length");
    }
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      pairs.push_back({block.name + "[" + std::to_string(i) + "]", (*grad)[i],
                       central(p, block.values[i])});
    }
  }

  double scale = config.floor;
  for (const auto& q : pairs) scale = std::max({scale, std::abs(q.analytic), std::abs(q.numeric)});
  for (const auto& q : pairs) {
    const double err = std::abs(q.analytic - q.numeric) / scale;
    if (err > result.max_rel_error || result.worst.empty()) {
      result.max_rel_error = err;
      result.worst = q.label;
    }
  }
  result.coordinates = pairs.size();
  return result;
}

DifferentiableOp window_op(Method method) {
  DifferentiableOp op;
  op.name = std::string(method_name(method));
  std::function<FdPoint(std::mt19937_64&)> raw;
  const auto x_only = [](double lo, double hi) {
    return [lo, hi](std::mt19937_64& rng) { return FdPoint{uniform_vector(rng, kWindow, lo, hi), {}}; };
  };

  switch (method) {
    case Method::MP:
      op.value = [](const FdPoint& p) { return f_mp(p.input); };
      op.gradient = [](const FdPoint& p) { return grad_mp(p.input); };
      op.smooth_at = [](const FdPoint& p, double h) { return top_gap(p.input) > kMargin * h; };
      raw = x_only(-1.0, 1.0);
      break;
    case Method::AP:
      op.value = [](const FdPoint& p) { return f_ap(p.input); };
      op.gradient = [](const FdPoint& p) { return grad_ap(p.input); };
      raw = x_only(-1.0, 1.0);
      break;
    case Method::NN:
      op.value = [](const FdPoint& p) { return f_nn(p.input); };
      op.gradient = [](const FdPoint& p) { return grad_nn(p.input); };
      raw = x_only(-1.0, 1.0);
      break;
    case Method::CONV:
      op.value = [](const FdPoint& p) { return f_conv(p.input, p.param("conv_w")); };
      op.gradient = [](const FdPoint& p) { return grad_conv(p.input, p.param("conv_w")); };
      raw = [](std::mt19937_64& rng) {
        auto x = uniform_vector(rng, kWindow, -1.0, 1.0);
        return FdPoint{std::move(x), {{"conv_w", uniform_vector(rng, kWindow, -1.0, 1.0)}}};
      };
      break;
    case Method::GP:
      op.value = [](const FdPoint& p) { return f_gp(p.input, p.param("gate_w")).value; };
      op.gradient = [](const FdPoint& p) {
        const auto& w = p.param("gate_w");
        return grad_gp(p.input, w, f_gp(p.input, w).gate);
      };
      op.smooth_at = [](const FdPoint& p, double h) { return top_gap(p.input) > kMargin * h; };
      raw = [](std::mt19937_64& rng) {
        auto x = uniform_vector(rng, kWindow, -1.0, 1.0);
        return FdPoint{std::move(x), {{"gate_w", uniform_vector(rng, kWindow, -2.0, 2.0)}}};
      };
      break;
    case Method::OP:
      // Off-simplex perturbations are fine for the unchecked ordinal sum.
      op.value = [](const FdPoint& p) {
        std::vector<std::size_t> order(p.input.size());
        sort_order(p.input, order);
        return ordinal_sum(p.input, p.param("ordinal_w"), order);
      };
      op.gradient = [](const FdPoint& p) {
        std::vector<std::size_t> order(p.input.size());
        sort_order(p.input, order);
        return grad_op(p.input, p.param("ordinal_w"), order);
      };
      op.smooth_at = [](const FdPoint& p, double h) { return min_gap(p.input) > kMargin * h; };
      raw = [](std::mt19937_64& rng) {
        auto x = uniform_vector(rng, kWindow, -1.0, 1.0);
        return FdPoint{std::move(x), {{"ordinal_w", random_simplex(rng, kWindow)}}};
      };
      break;
    case Method::LNP:
      op.value = [](const FdPoint& p) { return f_lnp(p.input, p.param("p_tilde")[0]); };
      op.gradient = [](const FdPoint& p) { return grad_lnp(p.input, p.param("p_tilde")[0]); };
      op.smooth_at = [](const FdPoint& p, double h) { return min_abs(p.input) > kMargin * h; };
      raw = [](std::mt19937_64& rng) {
        auto x = uniform_vector(rng, kWindow, -2.0, 2.0);
        return FdPoint{std::move(x), {{"p_tilde", uniform_vector(rng, 1, -2.0, 3.0)}}};
      };
      break;
    case Method::LSE:
      op.value = [](const FdPoint& p) { return f_lse(p.input, p.param("r")[0]); };
      op.gradient = [](const FdPoint& p) { return grad_lse(p.input, p.param("r")[0]); };
      raw = [](std::mt19937_64& rng) {
        auto x = uniform_vector(rng, kWindow, -5.0, 5.0);
        return FdPoint{std::move(x), {{"r", uniform_vector(rng, 1, 0.1, 5.0)}}};
      };
      break;
    case Method::SMP:
    case Method::SMPF: {
      op.value = [](const FdPoint& p) { return f_smp(p.input, p.param("tau")[0]); };
      if (method == Method::SMP) {
        op.gradient = [](const FdPoint& p) { return grad_smp(p.input, p.param("tau")[0]); };
      } else {
        op.gradient = [](const FdPoint& p) {
          auto g = grad_smp(p.input, p.param("tau")[0]);
          g.d_params.clear();  // fixed temperature
          return g;
        };
      }
      raw = [](std::mt19937_64& rng) {
        auto x = uniform_vector(rng, kWindow, -5.0, 5.0);
        return FdPoint{std::move(x), {{"tau", uniform_vector(rng, 1, -5.0, 5.0)}}};
      };
      break;
    }
    case Method::SESMP:
    case Method::SEMP:
      throw ConfigError(op.name + " has no window-level form; use block_op");
  }
  op.sample = [op, raw](std::mt19937_64& rng) { return draw(op, rng, raw); };
  return op;
}

DifferentiableOp block_op(Method method, std::size_t channels, std::size_t height,
                          std::size_t width, std::size_t se_ratio) {
  PoolSpec spec;
  spec.method = method;
  spec.window = WindowSpec::square(2, 2);
  spec.channels = channels;
  spec.se_ratio = se_ratio;
  const std::vector<std::size_t> shape{channels, height, width};
  const auto out = output_size(height, width, spec.window);
  const std::size_t out_size = channels * out.height * out.width;

  // Rebuilds a block from the point's parameter blocks.
  auto make_block = [spec](const FdPoint& p) {
    PoolParams params = make_params(spec);
    for (auto& view : trainable_views(spec.method, params)) {
      const auto& src = p.param(view.name);
      std::copy(src.begin(), src.end(), view.values.begin());
    }
    if (spec.method == Method::SMPF) {
      const auto& tau = p.param("tau");
      params.tau.assign(tau.begin(), tau.end());
    }
    // Unvalidated: finite differences step off the ordinal simplex.
    PoolBlock block(spec);
    block.params() = std::move(params);
    return block;
  };

  DifferentiableOp op;
  op.name = std::string(method_name(method)) + "-block";
  op.value = [make_block, shape](const FdPoint& p) {
    const PoolBlock block = make_block(p);
    PoolCache cache;
    const Tensor y = block.forward(Tensor(shape, p.input), &cache);
    const auto& up = p.param("upstream");
    double sum = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) sum += up[k] * y[k];
    return sum;
  };
  op.gradient = [make_block, shape, spec](const FdPoint& p) {
    PoolBlock block = make_block(p);
    const Tensor x(shape, p.input);
    PoolCache cache;
    const Tensor y = block.forward(x, &cache);
    const Tensor d_y(y.shape(), p.param("upstream"));
    PoolParams grads = zero_like(block.params());
    const Tensor d_x = block.backward(x, d_y, cache, grads);
    GradBundle bundle{{d_x.data().begin(), d_x.data().end()}, {}};
    for (auto& view : trainable_views(spec.method, grads)) {
      bundle.d_params.push_back({view.name, {view.values.begin(), view.values.end()}});
    }
    return bundle;
  };
  op.smooth_at = [make_block, shape, spec](const FdPoint& p, double h) {
    const Tensor x(shape, p.input);
    const double margin = kMargin * h;
    std::vector<double> w(spec.window.window_size());
    const auto o = output_size(shape[1], shape[2], spec.window);
    for (std::size_t c = 0; c < shape[0]; ++c) {
      for (std::size_t i = 0; i < o.height; ++i) {
        for (std::size_t j = 0; j < o.width; ++j) {
          gather_window(x, c, spec.window, i, j, w);
          switch (spec.method) {
            case Method::MP:
            case Method::GP:
            case Method::SEMP:
              if (top_gap(w) <= margin) return false;
              break;
            case Method::OP:
              if (min_gap(w) <= margin) return false;
              break;
            case Method::LNP:
              if (min_abs(w) <= margin) return false;
              break;
            default: break;
          }
        }
      }
    }
    if (spec.method == Method::SESMP || spec.method == Method::SEMP) {
      const PoolBlock block = make_block(p);
      const auto fw = se_branch_forward(gap_channel(x), block.params().se_f1,
                                        block.params().se_f2, block.params().se_ratio);
      for (double v : fw.pre)
        if (std::abs(v) <= margin) return false;
    }
    return true;
  };

  auto raw = [spec, shape, out_size](std::mt19937_64& rng) {
    const std::size_t numel = shape[0] * shape[1] * shape[2];
    const std::size_t n = spec.window.window_size();
    FdPoint p{uniform_vector(rng, numel, -1.0, 1.0), {}};
    p.params.push_back({"upstream", uniform_vector(rng, out_size, -1.0, 1.0)});
    PoolParams params = make_params(spec);
    switch (spec.method) {
      case Method::CONV: p.params.push_back({"conv_w", uniform_vector(rng, n, -1.0, 1.0)}); break;
      case Method::GP: p.params.push_back({"gate_w", uniform_vector(rng, n, -2.0, 2.0)}); break;
      case Method::OP: p.params.push_back({"ordinal_w", random_simplex(rng, n)}); break;
      case Method::LNP: p.params.push_back({"p_tilde", uniform_vector(rng, 1, -2.0, 3.0)}); break;
      case Method::SMP:
      case Method::SMPF: p.params.push_back({"tau", uniform_vector(rng, shape[0], -3.0, 3.0)}); break;
      case Method::SESMP:
      case Method::SEMP:
        for (const auto& view : trainable_views(spec.method, params)) {
          p.params.push_back({view.name, uniform_vector(rng, view.values.size(), -1.5, 1.5)});
        }
        break;
      default: break;
    }
    return p;
  };
  op.sample = [op, raw](std::mt19937_64& rng) { return draw(op, rng, raw); };
  return op;
}

}  // namespace poolbench

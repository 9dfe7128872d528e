#include "poolbench/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "poolbench/errors.hpp"

namespace poolbench {

BatchResult forward_backward(const ToyNet& net, const SyntheticDataset& data,
                             std::span<const std::size_t> batch, ToyNet& grads) {
  if (batch.empty()) throw ShapeError("empty batch");
  grads.set_zero();
  const double weight = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i : batch) {
    bool hit = false;
    loss += net.accumulate_gradient(data.images.at(i), data.labels.at(i), weight, grads, hit);
    correct += hit ? 1 : 0;
  }
  loss /= static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw DivergedError("loss is not finite", 0);
  for (const auto& g : grads.parameters())
    for (double v : g.values)
      if (!std::isfinite(v)) throw DivergedError("gradient '" + g.name + "' is not finite", 0);
  return {loss, static_cast<double>(correct) * weight};
}

BatchResult evaluate(const ToyNet& net, const SyntheticDataset& data,
                     std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("nothing to evaluate");
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const auto z = net.logits(data.images.at(i));
    loss += cross_entropy(z, data.labels.at(i));
    const auto top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    correct += top == data.labels.at(i) ? 1 : 0;
  }
  const double n = static_cast<double>(indices.size());
  return {loss / n, static_cast<double>(correct) / n};
}

std::vector<ParamSnapshot> snapshot_pooling(ToyNet& net) {
  std::vector<ParamSnapshot> out;
  const Method method = net.config().method;
  for (std::size_t b = 0; b < net.pools().size(); ++b) {
    PoolParams& p = net.pools()[b].params();
    for (const auto& v : trainable_views(method, p))
      out.push_back({b, v.name, std::vector<double>(v.values.begin(), v.values.end())});
    if (method == Method::LNP) out.push_back({b, "p", {lnp_exponent(p.p_tilde)}});
    if (method == Method::SMPF) out.push_back({b, "tau", p.tau});
  }
  return out;
}

RunReport train(ToyNet& net, const SyntheticDataset& data, const OptimConfig& optim,
                const StepObserver& observer) {
  optim.validate();
  if (data.train.empty() || data.test.empty()) throw ConfigError("dataset split is empty");

  RunReport report;
  report.method = std::string(method_name(net.config().method));
  report.seed = optim.seed;

  Adam adam(optim);
  ToyNet grads = net.zeros_like();
  const auto params = net.parameters();
  const auto grad_views = grads.parameters();
  // Distinct stream from the weight initialization, which also uses optim.seed.
  std::mt19937_64 rng(optim.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order = data.train;
  std::size_t step = 0;

  try {
    for (std::size_t epoch = 1; epoch <= optim.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += optim.batch_size) {
        const std::size_t len = std::min(optim.batch_size, order.size() - start);
        try {
          forward_backward(net, data, std::span(order).subspan(start, len), grads);
        } catch (const DivergedError& e) {
          throw DivergedError(e.what(), step + 1);
        }
        adam.step(params, grad_views);
        net.project_constraints();
        ++step;
        if (observer) observer(step, net);
      }
      const BatchResult tr = evaluate(net, data, data.train);
      const BatchResult te = evaluate(net, data, data.test);
      if (!std::isfinite(tr.loss) || !std::isfinite(te.loss))
        throw DivergedError("evaluation loss is not finite", step);
      report.epochs.push_back({epoch, tr.loss, tr.accuracy, te.loss, te.accuracy});
    }
  } catch (const DivergedError& e) {
    report.diverged = true;
    report.diverged_step = e.step();
  }
  report.params = snapshot_pooling(net);
  return report;
}

}  // namespace poolbench

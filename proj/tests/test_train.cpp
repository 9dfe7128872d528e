#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "poolbench/errors.hpp"
#include "poolbench/train.hpp"

using namespace poolbench;

namespace {

ToyNetConfig micro_config(Method m) {
  ToyNetConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.stage_channels = {4, 8};
  cfg.method = m;
  cfg.se_ratio = 2;
  return cfg;
}

// Moves every pooling parameter away from its special initial value (uniform OP weights,
// zero gate) so the end-to-end check exercises generic points.
void perturb_pooling(ToyNet& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& block : net.pools()) {
    for (auto& view : trainable_views(net.config().method, block.params()))
      for (double& v : view.values) v += 0.5 * d(rng);
    if (net.config().method == Method::OP) block.params().ordinal_w = {0.1, 0.2, 0.3, 0.4};
  }
}

double batch_loss(const ToyNet& net, const SyntheticDataset& data, std::span<const std::size_t> batch) {
  double loss = 0.0;
  for (std::size_t i : batch) loss += cross_entropy(net.logits(data.images[i]), data.labels[i]);
  return loss / static_cast<double>(batch.size());
}

SyntheticDataset micro_data(std::size_t n, std::uint64_t seed) {
  SyntheticDataset d = make_synthetic(4, n, seed, 0.5);
  // Crop to 8x8 for the micro-net.
  for (auto& img : d.images) {
    Tensor small({1, 8, 8});
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) small.at(0, y, x) = img.at(0, y + 4, x + 4);
    img = std::move(small);
  }
  d.height = d.width = 8;
  return d;
}

}  // namespace

TEST_CASE("init_weights") {
  ToyNetConfig cfg;
  SUBCASE("conv weights follow He normal") {
    ToyNet net = init_weights(cfg, 3);
    const auto& w = net.convs()[1].weight;  // fan-in 8 * 9 = 72
    const double m = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    double ss = 0.0;
    for (double v : w) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(w.size() - 1));
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / 72.0)).epsilon(0.06));
    for (double b : net.convs()[1].bias) CHECK(b == 0.0);
  }
  SUBCASE("head weights are N(0, 0.01)") {
    ToyNet net = init_weights(cfg, 3);
    const auto& w = net.head().weight;
    CHECK(w.size() == 4 * 16 * 4 * 4);
    double ss = 0.0;
    for (double v : w) ss += v * v;
    CHECK(std::sqrt(ss / static_cast<double>(w.size())) == doctest::Approx(0.01).epsilon(0.06));
  }
  SUBCASE("pooling initialization") {
    cfg.method = Method::LNP;
    ToyNet lnp = init_weights(cfg, 1);
    CHECK(lnp.pools()[0].params().p_tilde == doctest::Approx(1.85458654213114094).epsilon(1e-14));
    CHECK(lnp_exponent(lnp.pools()[0].params().p_tilde) == doctest::Approx(3.0).epsilon(1e-14));

    cfg.method = Method::SMPF;
    ToyNet smpf = init_weights(cfg, 1);
    const auto& tau = smpf.pools()[0].params().tau;
    REQUIRE(tau.size() == 8);
    CHECK(tau[1] == doctest::Approx(std::log(2.0 / 8.0)));
    CHECK(tau[7] == 0.0);

    cfg.method = Method::OP;
    ToyNet op = init_weights(cfg, 1);
    for (double w : op.pools()[1].params().ordinal_w) CHECK(w == 0.25);

    cfg.method = Method::SMP;
    ToyNet a = init_weights(cfg, 5), b = init_weights(cfg, 5), c = init_weights(cfg, 6);
    CHECK(a.pools()[1].params().tau == b.pools()[1].params().tau);
    CHECK(a.pools()[1].params().tau != c.pools()[1].params().tau);
    CHECK(a.convs()[0].weight == b.convs()[0].weight);
  }
}

TEST_CASE("zero head gives loss log K") {
  ToyNetConfig cfg;
  ToyNet net = init_weights(cfg, 1);
  std::fill(net.head().weight.begin(), net.head().weight.end(), 0.0);
  const auto data = make_synthetic(4, 40, 1);
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  ToyNet grads = net.zeros_like();
  const BatchResult r = forward_backward(net, data, batch, grads);
  CHECK(r.loss == std::log(4.0));
}

TEST_CASE("end-to-end gradient matches finite differences for every method") {
  const auto data = micro_data(40, 11);
  const std::vector<std::size_t> batch{0, 5, 9};
  for (Method m : all_methods()) {
    CAPTURE(method_name(m));
    std::mt19937_64 rng(100 + static_cast<unsigned>(m));
    ToyNet net = init_weights(micro_config(m), 7);
    perturb_pooling(net, rng);
    ToyNet grads = net.zeros_like();
    forward_backward(net, data, batch, grads);

    auto params = net.parameters();
    const auto analytic = grads.parameters();
    double scale = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t k = 0; k < params.size(); ++k)
      for (std::size_t i = 0; i < params[k].values.size(); ++i) {
        coords.emplace_back(k, i);
        scale = std::max(scale, std::abs(analytic[k].values[i]));
      }
    std::shuffle(coords.begin(), coords.end(), rng);
    // Every pooling parameter is included on top of 50 random coordinates.
    std::vector<std::pair<std::size_t, std::size_t>> picked(coords.begin(), coords.begin() + 50);
    for (std::size_t k = 0; k < params.size(); ++k)
      if (params[k].name.find(".pool.") != std::string::npos)
        for (std::size_t i = 0; i < params[k].values.size(); ++i) picked.emplace_back(k, i);

    const double h = 1e-5;
    double worst = 0.0;
    for (auto [k, i] : picked) {
      double& v = params[k].values[i];
      const double saved = v;
      v = saved + h;
      const double up = batch_loss(net, data, batch);
      v = saved - h;
      const double down = batch_loss(net, data, batch);
      v = saved;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - analytic[k].values[i]) / scale);
    }
    CHECK(picked.size() >= 50);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("single-sample overfit") {
  const auto data = make_synthetic(4, 40, 3);
  ToyNet net = init_weights(ToyNetConfig{}, 1);
  OptimConfig o;
  o.lr = 1e-2;
  Adam adam(o);
  ToyNet grads = net.zeros_like();
  const auto params = net.parameters();
  const auto gviews = grads.parameters();
  const std::vector<std::size_t> one{0};
  for (int step = 0; step < 200; ++step) {
    forward_backward(net, data, one, grads);
    adam.step(params, gviews);
  }
  CHECK(batch_loss(net, data, one) < 1e-3);
}

TEST_CASE("adam") {
  std::vector<double> p{1.0, -2.0, 3.0}, g(3, 0.0);
  std::vector<NamedSpan> pv{{"p", p}}, gv{{"p", g}};
  OptimConfig o;
  o.lr = 0.1;
  SUBCASE("zero gradient leaves parameters unchanged") {
    Adam adam(o);
    adam.step(pv, gv);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
  }
  SUBCASE("first step is bounded by lr") {
    g = {1e-3, -50.0, 7.0};
    Adam adam(o);
    adam.step(pv, gv);
    const std::vector<double> before{1.0, -2.0, 3.0};
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(p[i] - before[i]) <= 0.1 * (1.0 + 1e-8));
      CHECK(std::abs(p[i] - before[i]) > 0.099);
    }
    CHECK(p[0] < 1.0);
    CHECK(p[1] > -2.0);
  }
  SUBCASE("config validation") {
    o.lr = 0.0;
    CHECK_THROWS_AS(Adam{o}, ConfigError);
    o.lr = 1e-3;
    o.beta2 = 1.0;
    CHECK_THROWS_AS(Adam{o}, ConfigError);
  }
  SUBCASE("gradient shape mismatch") {
    std::vector<double> short_g(2, 0.0);
    std::vector<NamedSpan> bad{{"p", short_g}};
    Adam adam(o);
    CHECK_THROWS_AS(adam.step(pv, bad), ShapeError);
  }
}

TEST_CASE("synthetic dataset") {
  SUBCASE("balanced classes") {
    const auto d = make_synthetic(4, 1000, 1);
    std::vector<std::size_t> count(4, 0);
    for (auto l : d.labels) ++count[l];
    for (auto c : count) CHECK(c == 250);
    const auto odd = make_synthetic(3, 100, 1);
    std::vector<std::size_t> c3(3, 0);
    for (auto l : odd.labels) ++c3[l];
    for (auto c : c3) CHECK((c == 33 || c == 34));
  }
  SUBCASE("80/20 disjoint split") {
    const auto d = make_synthetic(4, 1000, 1);
    CHECK(d.train.size() == 800);
    CHECK(d.test.size() == 200);
    std::vector<int> seen(1000, 0);
    for (auto i : d.train) ++seen[i];
    for (auto i : d.test) ++seen[i];
    for (int s : seen) CHECK(s == 1);
  }
  SUBCASE("deterministic per seed") {
    const auto a = make_synthetic(4, 100, 9), b = make_synthetic(4, 100, 9), c = make_synthetic(4, 100, 10);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    CHECK(a.images != c.images);
    CHECK(a.classes == c.classes);
  }
  SUBCASE("nearest centroid is perfect without noise") {
    const auto d = make_synthetic(4, 400, 5, 0.0);
    std::vector<std::vector<double>> centroid(4, std::vector<double>(256, 0.0));
    std::vector<double> n(4, 0.0);
    for (auto i : d.train) {
      for (std::size_t p = 0; p < 256; ++p) centroid[d.labels[i]][p] += d.images[i][p];
      n[d.labels[i]] += 1.0;
    }
    for (std::size_t k = 0; k < 4; ++k)
      for (double& v : centroid[k]) v /= n[k];
    std::size_t correct = 0;
    for (auto i : d.test) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < 4; ++k) {
        double dist = 0.0;
        for (std::size_t p = 0; p < 256; ++p) dist += std::pow(d.images[i][p] - centroid[k][p], 2);
        if (dist < best_d) best_d = dist, best = k;
      }
      correct += best == d.labels[i] ? 1 : 0;
    }
    CHECK(correct == d.test.size());
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(make_synthetic(1, 100, 1), ConfigError);
    CHECK_THROWS_AS(make_synthetic(4, 10, 1), ConfigError);
    CHECK_THROWS_AS(make_synthetic(4, 100, 1, -1.0), ConfigError);
  }
}

TEST_CASE("training") {
  const auto data = make_synthetic(4, 400, 2024);
  OptimConfig o;
  o.epochs = 2;
  o.seed = 3;

  SUBCASE("same seed gives identical reports") {
    ToyNetConfig cfg;
    cfg.method = Method::SMP;
    ToyNet a = init_weights(cfg, o.seed), b = init_weights(cfg, o.seed);
    const RunReport ra = train(a, data, o), rb = train(b, data, o);
    CHECK(ra == rb);
    REQUIRE(ra.epochs.size() == 2);
    CHECK(!ra.diverged);
    const ParamSnapshot* tau = ra.find(1, "tau");
    REQUIRE(tau != nullptr);
    CHECK(tau->values.size() == 16);
    CHECK(tau->values != init_weights(cfg, o.seed).pools()[1].params().tau);
  }
  SUBCASE("OP weights stay on the simplex after every step") {
    ToyNetConfig cfg;
    cfg.method = Method::OP;
    ToyNet net = init_weights(cfg, o.seed);
    std::size_t steps = 0;
    double worst = 0.0;
    bool nonneg = true;
    train(net, data, o, [&](std::size_t, const ToyNet& n) {
      ++steps;
      for (const auto& block : n.pools()) {
        double s = 0.0;
        for (double w : block.params().ordinal_w) {
          s += w;
          nonneg = nonneg && w >= 0.0;
        }
        worst = std::max(worst, std::abs(s - 1.0));
      }
    });
    CHECK(steps == 2 * 20);
    CHECK(nonneg);
    CHECK(worst < 1e-12);
  }
  SUBCASE("LNP snapshots include p") {
    ToyNetConfig cfg;
    cfg.method = Method::LNP;
    ToyNet net = init_weights(cfg, o.seed);
    const RunReport r = train(net, data, o);
    const ParamSnapshot* p = r.find(0, "p");
    const ParamSnapshot* pt = r.find(0, "p_tilde");
    REQUIRE(p != nullptr);
    REQUIRE(pt != nullptr);
    CHECK(p->values[0] == lnp_exponent(pt->values[0]));
  }
  SUBCASE("divergence returns a partial report") {
    ToyNetConfig cfg;
    ToyNet net = init_weights(cfg, o.seed);
    net.head().weight[0] = INFINITY;
    const RunReport r = train(net, data, o);
    CHECK(r.diverged);
    CHECK(r.diverged_step == 1);
    CHECK(r.epochs.empty());
  }
}

TEST_CASE("MP reaches 90% train accuracy on the default task in 10 epochs") {
  const auto data = make_synthetic(4, 2000, 2024);
  OptimConfig o;
  o.seed = 1;
  ToyNet net = init_weights(ToyNetConfig{}, o.seed);
  const RunReport r = train(net, data, o);
  REQUIRE(r.epochs.size() == 10);
  CHECK(r.epochs.back().train_acc >= 0.90);
}

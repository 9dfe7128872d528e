#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "poolbench/errors.hpp"
#include "poolbench/pool_grads.hpp"

using namespace poolbench;
using Vec = std::vector<double>;

namespace {

const Vec kX{1, 3, 2, 0};

Vec random_window(std::mt19937_64& rng, double lo, double hi, std::size_t n = 4) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

void check_close(const Vec& a, const Vec& b, double eps) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(eps));
}

double sum(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("max and average gradients") {
  CHECK(grad_mp(kX).d_input == Vec{0, 1, 0, 0});
  CHECK(grad_mp(Vec{2, 2, 1, 1}).d_input == Vec{1, 0, 0, 0});
  CHECK(grad_ap(kX).d_input == Vec(4, 0.25));
  CHECK(grad_ap(Vec{-7, 1e6, 0, 3}).d_input == Vec(4, 0.25));
  CHECK(grad_nn(kX).d_input == Vec{1, 0, 0, 0});
  CHECK(grad_mp(kX).d_params.empty());
}

TEST_CASE("convolution gradient") {
  const Vec w{0.3, -0.1, 2.0, 0.5};
  const auto g = grad_conv(kX, w);
  CHECK(g.d_input == w);
  CHECK(*g.find("conv_w") == kX);
  CHECK(grad_conv(kX, Vec(4, 0.25)).d_input == grad_ap(kX).d_input);
}

TEST_CASE("gated pooling gradient") {
  const Vec zero(4, 0.0);
  const auto g = grad_gp(kX, zero, 0.5);
  check_close(*g.find("gate_w"), Vec{-0.375, -1.125, -0.75, 0.0}, 1e-15);
  // d_input = g/n + (1-g) onehot + 0
  check_close(g.d_input, Vec{0.125, 0.625, 0.125, 0.125}, 1e-15);

  const auto flat = grad_gp(Vec(4, 1.7), Vec{1, 2, 3, 4}, f_gp(Vec(4, 1.7), Vec{1, 2, 3, 4}).gate);
  for (double v : *flat.find("gate_w")) CHECK(v == 0.0);

  CHECK_THROWS_AS(grad_gp(kX, zero, 0.7), ParameterError);

  SUBCASE("hand chain rule is confirmed by central differences") {
    const auto f = [&](const Vec& w) { return f_gp(kX, w).value; };
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(oracle::central_diff(f, zero, i, 1e-6) ==
            doctest::Approx((*g.find("gate_w"))[i]).epsilon(1e-8));
    }
  }
}

TEST_CASE("ordinal pooling gradient") {
  const Vec w{0.1, 0.2, 0.3, 0.4};
  const auto r = f_op(kX, w);
  const auto g = grad_op(kX, w, r.order);
  check_close(g.d_input, Vec{0.2, 0.4, 0.3, 0.1}, 1e-15);
  CHECK(*g.find("ordinal_w") == Vec{0, 1, 2, 3});
  CHECK(grad_op(kX, Vec(4, 0.25), r.order).d_input == Vec(4, 0.25));

  const std::vector<std::size_t> wrong{0, 1, 2, 3};
  CHECK_THROWS_AS(grad_op(kX, w, wrong), ParameterError);

  SUBCASE("FD away from ties") {
    const auto fx = [&](const Vec& x) { return oracle::ordinal(x, w); };
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(oracle::central_diff(fx, kX, i, 1e-6) == doctest::Approx(g.d_input[i]).epsilon(1e-8));
  }
}

TEST_CASE("learned norm gradient") {
  SUBCASE("p = 2 gives x_i / (n y)") {
    const double pt = lnp_p_tilde_for(2.0);
    const Vec x{0.5, 1.5, 2.0, 0.25};
    const auto g = grad_lnp(x, pt);
    const double y = oracle::power_mean(x, 2.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(g.d_input[i] == doctest::Approx(x[i] / (4 * y)).epsilon(1e-12));
  }

  SUBCASE("zero entries get zero gradient") {
    const auto g = grad_lnp(kX, 0.3);
    CHECK(g.d_input[3] == 0.0);
    for (double v : g.d_input) CHECK(std::isfinite(v));
    const auto all_zero = grad_lnp(Vec(4, 0.0), 0.3);
    CHECK(all_zero.d_input == Vec(4, 0.0));
    CHECK((*all_zero.find("p_tilde"))[0] == 0.0);
  }

  SUBCASE("matches FD on nonnegative windows away from zero") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> pts(-2.0, 4.0);
    for (int t = 0; t < 500; ++t) {
      const Vec x = random_window(rng, 0.05, 2.0);
      const double pt = pts(rng);
      const auto g = grad_lnp(x, pt);
      const double fd = (f_lnp(x, pt + 1e-5) - f_lnp(x, pt - 1e-5)) / 2e-5;
      CHECK(std::abs(fd - (*g.find("p_tilde"))[0]) <= 1e-5 * std::max(1.0, std::abs(fd)));
      const auto fx = [&](const Vec& v) { return oracle::power_mean(v, lnp_exponent(pt)); };
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(oracle::central_diff(fx, x, i, 1e-6) - g.d_input[i]) <= 1e-7);
    }
  }
}

TEST_CASE("log-sum-exp gradient") {
  const auto g = grad_lse(kX, 1.0);
  check_close(g.d_input,
              Vec{0.087144318742032567, 0.643914259887972312, 0.236882818089910132,
                  0.032058603280084988},
              1e-14);
  CHECK(grad_lse(Vec(4, 3.0), 5.0).d_input == Vec(4, 0.25));
  std::mt19937_64 rng(22);
  for (int t = 0; t < 1000; ++t) {
    const Vec x = random_window(rng, -1e4, 1e4);
    const auto d = grad_lse(x, 10.0).d_input;
    CHECK(sum(d) == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : d) CHECK(v >= 0.0);
  }
  const auto fx = [](const Vec& x) { return oracle::log_mean_exp(x, 1.0); };
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(oracle::central_diff(fx, kX, i, 1e-6) == doctest::Approx(g.d_input[i]).epsilon(1e-8));
}

TEST_CASE("smooth maximum gradient") {
  SUBCASE("tau = 0 is the average gradient and the plain variance") {
    const auto g = grad_smp(kX, 0.0);
    CHECK(g.d_input == grad_ap(kX).d_input);
    CHECK((*g.find("tau"))[0] == doctest::Approx(1.25).epsilon(1e-15));
  }

  SUBCASE("constant window has zero variance") {
    CHECK((*grad_smp(Vec(4, -0.3), 2.0).find("tau"))[0] == 0.0);
  }

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> taus(-5.0, 5.0);

  SUBCASE("factored form equals the quotient form") {
    for (int t = 0; t < 1000; ++t) {
      const Vec x = random_window(rng, -2, 2);
      const double tau = taus(rng);
      const auto g = grad_smp(x, tau);
      check_close(g.d_input, oracle::smooth_max_dx_quotient(x, tau), 1e-10);
      CHECK((*g.find("tau"))[0] ==
            doctest::Approx(oracle::smooth_max_dtau_raw(x, tau)).epsilon(1e-10).scale(1e-12));
    }
  }

  SUBCASE("input gradient sums to one, tau gradient is a variance") {
    for (int t = 0; t < 10000; ++t) {
      const Vec x = random_window(rng, -5, 5);
      const double tau = taus(rng) * 20.0;
      const auto g = grad_smp(x, tau);
      REQUIRE(sum(g.d_input) == doctest::Approx(1.0).epsilon(1e-12));
      REQUIRE((*g.find("tau"))[0] >= 0.0);
    }
  }

  SUBCASE("one-hot limits") {
    CHECK(grad_smp(kX, 1e4).d_input == Vec{0, 1, 0, 0});
    CHECK(grad_smp(kX, -1e4).d_input == Vec{0, 0, 0, 1});
  }

  SUBCASE("central differences in x and tau") {
    for (int t = 0; t < 1000; ++t) {
      const Vec x = random_window(rng, -5, 5);
      const double tau = taus(rng);
      const auto g = grad_smp(x, tau);
      const double h = 1e-5;
      const double fd_tau = (f_smp(x, tau + h) - f_smp(x, tau - h)) / (2 * h);
      double scale = std::abs(fd_tau);
      for (double v : g.d_input) scale = std::max(scale, std::abs(v));
      CHECK(std::abs(fd_tau - (*g.find("tau"))[0]) <= 1e-6 * scale);
      const auto fx = [&](const Vec& v) { return f_smp(v, tau); };
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(oracle::central_diff(fx, x, i, h) - g.d_input[i]) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("squeeze-and-excitation branch gradient") {
  SUBCASE("zero upstream gives zero gradients") {
    Affine f1(4, 2), f2(2, 4);
    f1.weight.assign(8, 0.3);
    f2.weight.assign(8, -0.2);
    const auto g = grad_se_branch(Vec{1, 2, 3, 4}, f1, f2, Vec(4, 0.0));
    for (double v : g.d_mu) CHECK(v == 0.0);
    for (double v : g.d_f1.weight) CHECK(v == 0.0);
    for (double v : g.d_f2.weight) CHECK(v == 0.0);
  }

  SUBCASE("one-channel scalar chain") {
    // tau = v * relu(u * mu + b1) + b2 with u = 2, b1 = 0.5, v = 3, b2 = -1
    Affine f1(1, 1), f2(1, 1);
    f1.weight = {2.0};
    f1.bias = {0.5};
    f2.weight = {3.0};
    f2.bias = {-1.0};
    const double mu = 0.75, up = 1.5;
    const auto g = grad_se_branch(Vec{mu}, f1, f2, Vec{up});
    const double hidden = 2.0 * mu + 0.5;
    CHECK(g.d_f2.weight[0] == doctest::Approx(up * hidden));
    CHECK(g.d_f2.bias[0] == doctest::Approx(up));
    CHECK(g.d_f1.weight[0] == doctest::Approx(up * 3.0 * mu));
    CHECK(g.d_f1.bias[0] == doctest::Approx(up * 3.0));
    CHECK(g.d_mu[0] == doctest::Approx(up * 3.0 * 2.0));
  }

  SUBCASE("FD on random small C") {
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      Affine f1(6, 2), f2(2, 6);
      for (auto* v : {&f1.weight, &f1.bias, &f2.weight, &f2.bias})
        for (double& x : *v) x = d(rng);
      const Vec mu = random_window(rng, -1, 1, 6);
      const Vec up = random_window(rng, -1, 1, 6);
      const auto loss = [&](const Vec& m, const Affine& a, const Affine& b) {
        const auto tau = se_tau_branch(m, a, b, 3);
        double s = 0.0;
        for (std::size_t c = 0; c < 6; ++c) s += up[c] * tau[c];
        return s;
      };
      const auto pre = oracle::affine(f1.weight, f1.bias, mu);
      if (std::abs(pre[0]) < 1e-3 || std::abs(pre[1]) < 1e-3) continue;  // ReLU kink
      const auto g = grad_se_branch(mu, f1, f2, up);
      const double h = 1e-6;
      for (std::size_t i = 0; i < 6; ++i) {
        const auto f = [&](const Vec& m) { return loss(m, f1, f2); };
        CHECK(oracle::central_diff(f, mu, i, h) == doctest::Approx(g.d_mu[i]).epsilon(1e-7).scale(1.0));
      }
      for (std::size_t i = 0; i < f1.weight.size(); ++i) {
        const auto f = [&](const Vec& w) { Affine a = f1; a.weight = w; return loss(mu, a, f2); };
        CHECK(oracle::central_diff(f, f1.weight, i, h) == doctest::Approx(g.d_f1.weight[i]).epsilon(1e-7).scale(1.0));
      }
      for (std::size_t i = 0; i < f2.weight.size(); ++i) {
        const auto f = [&](const Vec& w) { Affine b = f2; b.weight = w; return loss(mu, f1, b); };
        CHECK(oracle::central_diff(f, f2.weight, i, h) == doctest::Approx(g.d_f2.weight[i]).epsilon(1e-7).scale(1.0));
      }
      for (std::size_t i = 0; i < f1.bias.size(); ++i) {
        const auto f = [&](const Vec& w) { Affine a = f1; a.bias = w; return loss(mu, a, f2); };
        CHECK(oracle::central_diff(f, f1.bias, i, h) == doctest::Approx(g.d_f1.bias[i]).epsilon(1e-7).scale(1.0));
      }
    }
  }

  SUBCASE("gap backward spreads uniformly") {
    const Tensor d = gap_backward(Vec{4.0, -8.0}, 2, 2);
    for (double v : d.channel(0)) CHECK(v == 1.0);
    for (double v : d.channel(1)) CHECK(v == -2.0);
  }
}

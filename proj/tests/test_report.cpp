#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "poolbench/errors.hpp"
#include "poolbench/experiment.hpp"
#include "poolbench/stats.hpp"

using namespace poolbench;

namespace {

RunReport sample_report(const std::string& method, std::uint64_t seed, double acc) {
  RunReport r;
  r.method = method;
  r.seed = seed;
  for (std::size_t e = 1; e <= 3; ++e)
    r.epochs.push_back({e, 1.0 / (3.0 * static_cast<double>(e)), acc - 0.1 / static_cast<double>(e),
                        std::sqrt(2.0) / static_cast<double>(e), acc - 0.01 * static_cast<double>(seed)});
  r.params.push_back({0, "tau", {0.1, -1.0 / 3.0, 1e-300, 12345.678901234567}});
  r.params.push_back({1, "p", {std::nextafter(3.0, 4.0)}});
  return r;
}

}  // namespace

TEST_CASE("percentiles") {
  SUBCASE("linear interpolation oracle") {
    std::vector<double> v;
    for (int i = 100; i >= 1; --i) v.push_back(i / 100.0);
    CHECK(percentile(v, 50.0) == doctest::Approx(0.505).epsilon(1e-15));
    CHECK(percentile(v, 0.0) == 0.01);
    CHECK(percentile(v, 100.0) == 1.0);
    CHECK(percentile(v, 5.0) == doctest::Approx(0.0595).epsilon(1e-14));
  }
  SUBCASE("single value") {
    const std::vector<double> one{2.5};
    for (double p : box_percentiles(one)) CHECK(p == 2.5);
  }
  SUBCASE("nondecreasing") {
    const std::vector<double> v{3.0, -1.0, 7.5, 0.25, 0.25, 9.0, -4.0};
    const auto p = box_percentiles(v);
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i - 1] <= p[i]);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(percentile(std::vector<double>{}, 50.0), ShapeError);
    CHECK_THROWS_AS(percentile(std::vector<double>{1.0}, 101.0), ParameterError);
  }
}

TEST_CASE("mean and sample sd") {
  const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  CHECK(mean(v) == 5.0);
  CHECK(sample_sd(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sample_sd(std::vector<double>{1.0}) == 0.0);
}

TEST_CASE("run CSV round trip") {
  const RunReport r = sample_report("SMP", 3, 0.9);
  std::stringstream s;
  write_run_csv(s, r);
  CHECK(s.str().rfind("epoch,train_loss,train_acc,test_loss,test_acc\n", 0) == 0);
  CHECK(read_run_csv(s) == r.epochs);
}

TEST_CASE("params JSON round trip") {
  RunReport r = sample_report("OP", 2, 0.8);
  r.diverged = true;
  r.diverged_step = 17;
  r.params.push_back({1, "ordinal_w", {0.1, 0.2, 0.3, 0.4}});
  r.params.push_back({0, "tau", {std::numeric_limits<double>::quiet_NaN()}});
  std::stringstream s;
  write_params_json(s, r);
  const RunReport back = read_params_json(s);
  CHECK(back.method == r.method);
  CHECK(back.seed == r.seed);
  CHECK(back.diverged);
  CHECK(back.diverged_step == 17);
  REQUIRE(back.params.size() == r.params.size());
  for (std::size_t i = 0; i + 1 < r.params.size(); ++i) CHECK(back.params[i] == r.params[i]);
  CHECK(std::isnan(back.params.back().values[0]));

  std::stringstream bad("{\"method\": \"MP\"}");
  CHECK_THROWS_AS(read_params_json(bad), ConfigError);
}

TEST_CASE("summary") {
  std::vector<RunReport> reports{sample_report("MP", 1, 0.9), sample_report("MP", 2, 0.91),
                                 sample_report("AP", 1, 0.8), sample_report("AP", 2, 0.7)};
  RunReport dead = sample_report("AP", 3, 0.5);
  dead.diverged = true;
  reports.push_back(dead);
  const auto rows = summarize(reports);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "MP");
  CHECK(rows[1].runs == 2);
  CHECK(rows[1].diverged == 1);

  SUBCASE("round trip") {
    std::stringstream s;
    write_summary_csv(s, rows);
    CHECK(s.str()[0] == '#');
    const auto back = read_summary_csv(s);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].method == rows[i].method);
      CHECK(back[i].mean_train_acc == rows[i].mean_train_acc);
      CHECK(back[i].sd_train_acc == rows[i].sd_train_acc);
      CHECK(back[i].mean_test_acc == rows[i].mean_test_acc);
      CHECK(back[i].sd_test_acc == rows[i].sd_test_acc);
    }
  }

  SUBCASE("recomputed from written run files") {
    const auto dir = std::filesystem::temp_directory_path() / "poolbench_test_report";
    std::filesystem::remove_all(dir);
    write_sweep(reports, dir);
    std::ifstream summary(dir / "summary.csv");
    const auto written = read_summary_csv(summary);
    for (const auto& row : written) {
      std::vector<double> train, test;
      for (std::uint64_t seed : {1, 2, 3}) {
        if (row.method == "MP" && seed == 3) continue;
        std::ifstream run(dir / run_csv_name(row.method, seed));
        std::ifstream params(dir / params_json_name(row.method, seed));
        if (read_params_json(params).diverged) continue;
        const auto epochs = read_run_csv(run);
        train.push_back(epochs.back().train_acc);
        test.push_back(epochs.back().test_acc);
      }
      CHECK(std::abs(mean(train) - row.mean_train_acc) <= 1e-12);
      CHECK(std::abs(sample_sd(train) - row.sd_train_acc) <= 1e-12);
      CHECK(std::abs(mean(test) - row.mean_test_acc) <= 1e-12);
      CHECK(std::abs(sample_sd(test) - row.sd_test_acc) <= 1e-12);
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("params report") {
  RunReport op = sample_report("OP", 1, 0.9);
  op.params = {{0, "ordinal_w", {0.1, 0.2, 0.3, 0.4}}, {1, "ordinal_w", {0.25, 0.25, 0.125, 0.375}}};
  RunReport smp = sample_report("SMP", 1, 0.9);
  std::vector<double> tau;
  for (int i = 1; i <= 100; ++i) tau.push_back(i / 100.0);
  smp.params = {{1, "tau", tau}};
  RunReport lnp = sample_report("LNP", 4, 0.9);
  lnp.params = {{0, "p_tilde", {1.0}}, {0, "p", {3.25}}};

  const ParamsReport rep = params_report({smp, op, lnp});
  REQUIRE(rep.ordinal.size() == 4);
  CHECK(rep.ordinal[0].weights == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(rep.ordinal[1].weights == std::vector<double>{0.25, 0.25, 0.125, 0.375});
  CHECK(rep.ordinal[2].seed == "mean");

  const PercentileRow* tau_row = nullptr;
  const PercentileRow* p_row = nullptr;
  for (const auto& r : rep.percentiles) {
    if (r.method == "SMP" && r.seed == "1") tau_row = &r;
    if (r.method == "LNP" && r.seed == "4") p_row = &r;
  }
  REQUIRE(tau_row != nullptr);
  CHECK(tau_row->count == 100);
  CHECK(tau_row->p[2] == doctest::Approx(0.505).epsilon(1e-15));
  REQUIRE(p_row != nullptr);
  for (double v : p_row->p) CHECK(v == 3.25);
}

TEST_CASE("best learning rate") {
  CHECK(best_lr({{1e-3, 0.5, false}}) == 1e-3);
  CHECK(best_lr({{1e-2, 0.1, true}, {1e-3, 0.4, false}, {1e-4, 0.3, false}}) == 1e-4);
  CHECK(best_lr({{1e-3, 0.3, false}, {1e-5, 0.3, false}, {1e-4, 0.3, false}}) == 1e-5);
  CHECK_THROWS_AS(best_lr({{1e-1, 0.0, true}}), ConfigError);
}

TEST_CASE("worker count honors POOLBENCH_THREADS") {
  ::setenv("POOLBENCH_THREADS", "1", 1);
  CHECK(worker_count(40) == 1);
  ::setenv("POOLBENCH_THREADS", "junk", 1);
  CHECK(worker_count(1) == 1);
  CHECK(worker_count(40) >= 1);
  ::unsetenv("POOLBENCH_THREADS");
}

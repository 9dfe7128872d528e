#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "poolbench/adam.hpp"
#include "poolbench/dataset.hpp"
#include "poolbench/net.hpp"
#include "poolbench/pool_ops.hpp"
#include "poolbench/report.hpp"

namespace poolbench {

struct DatasetConfig {
  std::size_t classes = 4;
  std::size_t count = 2000;
  std::uint64_t seed = 2024;
  double noise = 1.75;
};

struct ExperimentConfig {
  std::vector<Method> methods{comparison_methods().begin(), comparison_methods().end()};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  OptimConfig optim;
  DatasetConfig dataset;
  std::filesystem::path out = "results";

  // Throws ConfigError on an empty method or seed list, duplicates, or a bad OptimConfig.
  void validate() const;
};

// Number of worker threads for `jobs` independent runs: hardware concurrency, capped by
// POOLBENCH_THREADS when it is set to a positive integer.
std::size_t worker_count(std::size_t jobs);

SyntheticDataset make_dataset(const DatasetConfig& config);

// One seeded run: weights initialized and batches shuffled from `seed`.
RunReport run_one(Method method, std::uint64_t seed, const ExperimentConfig& config,
                  const SyntheticDataset& data);

// Every (method, seed) pair, in parallel. Reports are sorted by method, then seed.
std::vector<RunReport> run_sweep(const ExperimentConfig& config);

// Writes run_<method>_<seed>.csv, params_<method>_<seed>.json and summary.csv into `dir`.
std::vector<SummaryRow> write_sweep(const std::vector<RunReport>& reports,
                                    const std::filesystem::path& dir);

struct GradcheckRow {
  std::string method;
  std::string level;  // "window" or "block"
  std::size_t trials = 0;
  std::size_t excluded = 0;
  double worst = 0.0;
  std::string worst_coordinate;
  bool passed = false;
};

// Finite-difference check of every analytic gradient at `trials` sampled points per method
// and level (SESMP and SEMP exist only at block level).
std::vector<GradcheckRow> run_gradcheck(const std::vector<Method>& methods, std::size_t trials,
                                        double tolerance, std::uint64_t seed = 1);
void write_gradcheck_csv(std::ostream& out, const std::vector<GradcheckRow>& rows);

struct PercentileRow {
  std::string method;
  std::string seed;  // a seed, or "all" for the pooled row
  std::size_t block = 0;
  std::string param;
  std::size_t count = 0;
  std::array<double, 5> p{};  // 5th, 25th, 50th, 75th, 95th percentile
};

struct OrdinalRow {
  std::string method;
  std::string seed;
  std::size_t block = 0;
  std::vector<double> weights;  // w1 (minimum) .. wn (maximum)
};

struct ParamsReport {
  std::vector<PercentileRow> percentiles;
  std::vector<OrdinalRow> ordinal;
};

// Percentile summaries of LNP p and SMP tau per block (per seed and pooled over seeds), plus
// the OP weights echoed per block and their mean over seeds.
ParamsReport params_report(const std::vector<RunReport>& reports);
// Loads every params_*.json in `dir`, sorted by method then seed.
std::vector<RunReport> load_params_dir(const std::filesystem::path& dir);
void write_params_report(const ParamsReport& report, const std::filesystem::path& dir);
void print_params_report(std::ostream& out, const ParamsReport& report);

struct LrResult {
  double lr = 0.0;
  double final_train_loss = 0.0;
  bool diverged = false;
};

// One run per lr on the first method and seed of `config`; rows follow `lrs` order.
std::vector<LrResult> run_lr_sweep(const ExperimentConfig& config, const std::vector<double>& lrs);
// Lowest final train loss among non-diverged runs; ties go to the smaller lr.
// Throws ConfigError when every run diverged.
double best_lr(const std::vector<LrResult>& results);

}  // namespace poolbench

#include "poolbench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "poolbench/errors.hpp"
#include "poolbench/fd_check.hpp"
#include "poolbench/stats.hpp"
#include "poolbench/train.hpp"

namespace poolbench {

namespace {

std::size_t method_rank(const std::string& name) {
  try {
    return static_cast<std::size_t>(parse_method(name));
  } catch (const ConfigError&) {
    return all_methods().size();
  }
}

bool report_order(const RunReport& a, const RunReport& b) {
  const auto ra = method_rank(a.method), rb = method_rank(b.method);
  if (ra != rb) return ra < rb;
  if (a.method != b.method) return a.method < b.method;
  return a.seed < b.seed;
}

// Runs job(i) for i in [0, jobs) on up to worker_count(jobs) threads; rethrows the first error.
template <class Job>
void parallel_for(std::size_t jobs, Job job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n = worker_count(jobs);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string csv_join(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + format_double(values[i]);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("method list is empty");
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size())
    throw ConfigError("method list contains duplicates");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seed list contains duplicates");
  optim.validate();
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("POOLBENCH_THREADS"); env && *env) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (*end == '\0' && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

SyntheticDataset make_dataset(const DatasetConfig& config) {
  return make_synthetic(config.classes, config.count, config.seed, config.noise);
}

RunReport run_one(Method method, std::uint64_t seed, const ExperimentConfig& config,
                  const SyntheticDataset& data) {
  ToyNetConfig net_config;
  net_config.method = method;
  net_config.classes = config.dataset.classes;
  net_config.height = data.height;
  net_config.width = data.width;
  ToyNet net = init_weights(net_config, seed);
  OptimConfig optim = config.optim;
  optim.seed = seed;
  return train(net, data, optim);
}

std::vector<RunReport> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const SyntheticDataset data = make_dataset(config.dataset);
  std::vector<std::pair<Method, std::uint64_t>> jobs;
  for (Method m : config.methods)
    for (std::uint64_t s : config.seeds) jobs.emplace_back(m, s);
  std::vector<RunReport> reports(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    reports[i] = run_one(jobs[i].first, jobs[i].second, config, data);
  });
  std::sort(reports.begin(), reports.end(), report_order);
  return reports;
}

std::vector<SummaryRow> write_sweep(const std::vector<RunReport>& reports,
                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& r : reports) {
    std::ostringstream csv, json;
    write_run_csv(csv, r);
    write_params_json(json, r);
    write_file(dir / run_csv_name(r.method, r.seed), csv.str());
    write_file(dir / params_json_name(r.method, r.seed), json.str());
  }
  const auto rows = summarize(reports);
  std::ostringstream summary;
  write_summary_csv(summary, rows);
  write_file(dir / "summary.csv", summary.str());
  return rows;
}

std::vector<GradcheckRow> run_gradcheck(const std::vector<Method>& methods, std::size_t trials,
                                        double tolerance, std::uint64_t seed) {
  if (trials == 0) throw ConfigError("trials must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  struct Job {
    Method method;
    bool block;
  };
  std::vector<Job> jobs;
  for (Method m : methods) {
    if (m != Method::SESMP && m != Method::SEMP) jobs.push_back({m, false});
    jobs.push_back({m, true});
  }
  std::vector<GradcheckRow> rows(jobs.size());
  FDOracleConfig cfg;
  cfg.tolerance = tolerance;
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    const DifferentiableOp op = job.block ? block_op(job.method) : window_op(job.method);
    std::mt19937_64 rng(seed * 1000003 + static_cast<std::uint64_t>(job.method) * 2 + job.block);
    GradcheckRow& row = rows[i];
    row.method = std::string(method_name(job.method));
    row.level = job.block ? "block" : "window";
    row.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
      const FdResult r = fd_check(op, op.sample(rng), cfg);
      if (r.excluded) {
        ++row.excluded;
        continue;
      }
      if (r.max_rel_error >= row.worst) {
        row.worst = r.max_rel_error;
        row.worst_coordinate = r.worst;
      }
    }
    row.passed = row.worst <= tolerance;
  });
  return rows;
}

void write_gradcheck_csv(std::ostream& out, const std::vector<GradcheckRow>& rows) {
  out << "method,level,trials,excluded,max_rel_error,worst_coordinate,passed\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.level << ',' << r.trials << ',' << r.excluded << ','
        << format_double(r.worst) << ',' << r.worst_coordinate << ',' << (r.passed ? 1 : 0) << '\n';
  }
}

ParamsReport params_report(const std::vector<RunReport>& input) {
  std::vector<RunReport> reports = input;
  std::sort(reports.begin(), reports.end(), report_order);
  ParamsReport out;
  // (method, block, param) -> values pooled over seeds
  std::map<std::tuple<std::size_t, std::string, std::size_t, std::string>, std::vector<double>> pooled;
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::vector<std::vector<double>>> ordinal;

  for (const auto& r : reports) {
    const std::size_t rank = method_rank(r.method);
    for (const auto& p : r.params) {
      const bool summarized = (r.method == "LNP" && p.name == "p") ||
                              (r.method == "SMP" && p.name == "tau");
      if (summarized && !p.values.empty()) {
        out.percentiles.push_back({r.method, std::to_string(r.seed), p.block, p.name,
                                   p.values.size(), box_percentiles(p.values)});
        auto& all = pooled[{rank, r.method, p.block, p.name}];
        all.insert(all.end(), p.values.begin(), p.values.end());
      }
      if (r.method == "OP" && p.name == "ordinal_w") {
        out.ordinal.push_back({r.method, std::to_string(r.seed), p.block, p.values});
        ordinal[{rank, r.method, p.block}].push_back(p.values);
      }
    }
  }
  for (const auto& [key, values] : pooled) {
    out.percentiles.push_back({std::get<1>(key), "all", std::get<2>(key), std::get<3>(key),
                               values.size(), box_percentiles(values)});
  }
  for (const auto& [key, runs] : ordinal) {
    std::vector<double> avg(runs.front().size(), 0.0);
    for (const auto& w : runs)
      for (std::size_t i = 0; i < avg.size() && i < w.size(); ++i) avg[i] += w[i];
    for (double& v : avg) v /= static_cast<double>(runs.size());
    out.ordinal.push_back({std::get<1>(key), "mean", std::get<2>(key), avg});
  }
  return out;
}

std::vector<RunReport> load_params_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  std::vector<RunReport> reports;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.rfind("params_", 0) != 0 || entry.path().extension() != ".json")
      continue;
    std::ifstream in(entry.path());
    reports.push_back(read_params_json(in));
  }
  std::sort(reports.begin(), reports.end(), report_order);
  return reports;
}

void write_params_report(const ParamsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream pct;
  pct << "method,seed,block,param,count,p5,p25,p50,p75,p95\n";
  for (const auto& r : report.percentiles) {
    pct << r.method << ',' << r.seed << ',' << r.block << ',' << r.param << ',' << r.count;
    for (double v : r.p) pct << ',' << format_double(v);
    pct << '\n';
  }
  write_file(dir / "params_report.csv", pct.str());

  std::ostringstream op;
  std::size_t n = 0;
  for (const auto& r : report.ordinal) n = std::max(n, r.weights.size());
  op << "method,seed,block";
  for (std::size_t i = 1; i <= n; ++i) op << ",w" << i;
  op << '\n';
  for (const auto& r : report.ordinal)
    op << r.method << ',' << r.seed << ',' << r.block << ',' << csv_join(r.weights) << '\n';
  write_file(dir / "op_weights.csv", op.str());
}

void print_params_report(std::ostream& out, const ParamsReport& report) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  if (!report.percentiles.empty()) {
    s << "Parameter percentiles (5 / 25 / 50 / 75 / 95)\n";
    for (const auto& r : report.percentiles) {
      s << "  " << std::left << std::setw(5) << r.method << " seed " << std::setw(4) << r.seed
        << " block " << r.block << "  " << std::setw(4) << r.param << std::right;
      for (double v : r.p) s << std::setw(10) << v;
      s << "  (n=" << r.count << ")\n";
    }
  }
  if (!report.ordinal.empty()) {
    s << "Ordinal weights (w1 = minimum slot)\n";
    for (const auto& r : report.ordinal) {
      s << "  " << std::left << std::setw(5) << r.method << " seed " << std::setw(4) << r.seed
        << " block " << r.block << std::right;
      for (double v : r.weights) s << std::setw(10) << v;
      s << '\n';
    }
  }
  if (report.percentiles.empty() && report.ordinal.empty()) s << "No LNP, SMP or OP snapshots found.\n";
  out << s.str();
}

std::vector<LrResult> run_lr_sweep(const ExperimentConfig& config, const std::vector<double>& lrs) {
  config.validate();
  if (lrs.empty()) throw ConfigError("learning-rate list is empty");
  for (double lr : lrs)
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive, got " + format_double(lr));
  const SyntheticDataset data = make_dataset(config.dataset);
  std::vector<LrResult> results(lrs.size());
  parallel_for(lrs.size(), [&](std::size_t i) {
    ExperimentConfig c = config;
    c.optim.lr = lrs[i];
    const RunReport r = run_one(config.methods.front(), config.seeds.front(), c, data);
    results[i].lr = lrs[i];
    results[i].diverged = r.diverged;
    results[i].final_train_loss = r.epochs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                   : r.epochs.back().train_loss;
  });
  return results;
}

double best_lr(const std::vector<LrResult>& results) {
  const LrResult* best = nullptr;
  for (const auto& r : results) {
    if (r.diverged || !std::isfinite(r.final_train_loss)) continue;
    if (!best || r.final_train_loss < best->final_train_loss ||
        (r.final_train_loss == best->final_train_loss && r.lr < best->lr))
      best = &r;
  }
  if (!best) throw ConfigError("every learning rate diverged");
  return best->lr;
}

}  // namespace poolbench

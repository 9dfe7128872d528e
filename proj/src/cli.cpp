#include "poolbench/cli.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "poolbench/errors.hpp"
#include "poolbench/experiment.hpp"

namespace poolbench {

namespace {

struct Options {
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::size_t epochs = 10;
  std::vector<double> lr;
  std::size_t batch_size = 16;
  std::string out = "results";
  std::size_t trials = 1000;
  double tolerance = 1e-5;
  std::size_t samples = 2000;
  double noise = 1.75;
  std::uint64_t data_seed = 2024;
};

std::vector<Method> parse_methods(const std::vector<std::string>& names, std::vector<Method> fallback) {
  if (names.empty()) return fallback;
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

ExperimentConfig to_config(const Options& o, std::vector<Method> default_methods) {
  ExperimentConfig c;
  c.methods = parse_methods(o.methods, std::move(default_methods));
  if (!o.seeds.empty()) c.seeds = o.seeds;
  c.optim.epochs = o.epochs;
  c.optim.batch_size = o.batch_size;
  if (o.lr.size() > 1) throw ConfigError("--lr takes a single value outside lr-sweep");
  if (!o.lr.empty()) c.optim.lr = o.lr.front();
  c.dataset.count = o.samples;
  c.dataset.noise = o.noise;
  c.dataset.seed = o.data_seed;
  c.out = o.out;
  c.validate();
  return c;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const ExperimentConfig c = to_config(o, {comparison_methods().begin(), comparison_methods().end()});
  const auto reports = run_sweep(c);
  const auto rows = write_sweep(reports, c.out);
  print_summary_table(out, rows);
  std::size_t diverged = 0;
  for (const auto& r : reports) {
    if (!r.diverged) continue;
    ++diverged;
    out << "diverged: " << r.method << " seed " << r.seed << " at step " << r.diverged_step << '\n';
  }
  out << reports.size() << " runs written to " << c.out.string() << '\n';
  return diverged > 0 ? kExitDiverged : kExitOk;
}

int cmd_gradcheck(const Options& o, bool write_csv, std::ostream& out) {
  const auto methods = parse_methods(o.methods, {all_methods().begin(), all_methods().end()});
  const auto rows = run_gradcheck(methods, o.trials, o.tolerance);
  std::ostringstream s;
  s << std::left << std::setw(7) << "method" << std::setw(8) << "level" << std::right << std::setw(8)
    << "trials" << std::setw(10) << "excluded" << std::setw(14) << "max rel err" << "  result\n";
  bool ok = true;
  for (const auto& r : rows) {
    s << std::left << std::setw(7) << r.method << std::setw(8) << r.level << std::right << std::setw(8)
      << r.trials << std::setw(10) << r.excluded << std::setw(14) << std::scientific
      << std::setprecision(3) << r.worst << "  " << (r.passed ? "pass" : "FAIL") << '\n';
    ok = ok && r.passed;
  }
  s << "tolerance " << std::scientific << std::setprecision(1) << o.tolerance << ": "
    << (ok ? "all passed" : "failures present") << '\n';
  out << s.str();
  if (write_csv) {
    std::filesystem::create_directories(o.out);
    std::ostringstream csv;
    write_gradcheck_csv(csv, rows);
    write_file(std::filesystem::path(o.out) / "gradcheck.csv", csv.str());
  }
  return ok ? kExitOk : kExitGradcheckFailed;
}

int cmd_params_report(const Options& o, std::ostream& out) {
  const auto reports = load_params_dir(o.out);
  if (reports.empty()) throw ConfigError("no params_*.json files in '" + o.out + "'");
  const ParamsReport report = params_report(reports);
  write_params_report(report, o.out);
  print_params_report(out, report);
  return kExitOk;
}

int cmd_lr_sweep(Options o, bool epochs_given, bool write_csv, std::ostream& out) {
  std::vector<double> lrs = o.lr.empty() ? std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5} : o.lr;
  for (double lr : lrs)
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  o.lr.clear();
  if (!epochs_given) o.epochs = 3;
  const ExperimentConfig c = to_config(o, {Method::MP});
  const auto results = run_lr_sweep(c, lrs);
  std::ostringstream s;
  s << "lr sweep: " << method_name(c.methods.front()) << ", seed " << c.seeds.front() << ", "
    << c.optim.epochs << " epochs\n";
  s << std::setw(12) << "lr" << std::setw(18) << "final train loss" << '\n';
  for (const auto& r : results) {
    s << std::setw(12) << std::scientific << std::setprecision(1) << r.lr << std::setw(18);
    if (r.diverged) s << "diverged";
    else s << std::fixed << std::setprecision(6) << r.final_train_loss;
    s << '\n';
  }
  const double best = best_lr(results);
  s << "best lr: " << std::scientific << std::setprecision(1) << best << '\n';
  out << s.str();
  if (write_csv) {
    std::filesystem::create_directories(o.out);
    std::ostringstream csv;
    csv << "lr,final_train_loss,diverged\n";
    for (const auto& r : results)
      csv << format_double(r.lr) << ',' << format_double(r.final_train_loss) << ','
          << (r.diverged ? 1 : 0) << '\n';
    write_file(std::filesystem::path(o.out) / "lr_sweep.csv", csv.str());
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pooling-operator benchmark on a synthetic image task", "poolbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file; command-line flags override it");

  Options o;
  app.add_option("--methods", o.methods, "Comma-separated method names")->delimiter(',');
  app.add_option("--seeds", o.seeds, "Comma-separated seeds (default 1,2,3,4)")->delimiter(',');
  auto* epochs = app.add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  app.add_option("--lr", o.lr, "Learning rate (a comma-separated list for lr-sweep)")->delimiter(',');
  app.add_option("--batch-size", o.batch_size, "Mini-batch size")->capture_default_str();
  auto* out_dir = app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--trials", o.trials, "Random points per gradient check")->capture_default_str();
  app.add_option("--tolerance", o.tolerance, "Relative error bound for gradcheck")->capture_default_str();
  app.add_option("--samples", o.samples, "Synthetic dataset size")->capture_default_str();
  app.add_option("--noise", o.noise, "Additive pixel noise sd")->capture_default_str();
  app.add_option("--data-seed", o.data_seed, "Dataset generator seed")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Train every (method, seed) pair and summarize")->fallthrough();
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all gradients")->fallthrough();
  auto* params = app.add_subcommand("params-report", "Percentiles of trained pooling parameters in --out")
                     ->fallthrough();
  auto* lr_sweep = app.add_subcommand("lr-sweep", "One short run per learning rate")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sweep) return cmd_sweep(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out_dir->count() > 0, out);
    if (*params) return cmd_params_report(o, out);
    if (*lr_sweep) return cmd_lr_sweep(o, epochs->count() > 0, out_dir->count() > 0, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace poolbench

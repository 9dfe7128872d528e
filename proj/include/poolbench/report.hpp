#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace poolbench {

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  bool operator==(const EpochMetrics&) const = default;
};

// Flat values of one pooling parameter at the end of training.
struct ParamSnapshot {
  std::size_t block = 0;  // 0 = nearest the input
  std::string name;       // "tau", "p", "p_tilde", "ordinal_w", "gate_w", "conv_w", "se_f1.weight", ...
  std::vector<double> values;
  bool operator==(const ParamSnapshot&) const = default;
};

struct RunReport {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  bool diverged = false;
  std::size_t diverged_step = 0;
  std::vector<ParamSnapshot> params;

  const ParamSnapshot* find(std::size_t block, const std::string& name) const;
  bool operator==(const RunReport&) const = default;
};

struct SummaryRow {
  std::string method;
  double mean_train_acc = 0.0;
  double sd_train_acc = 0.0;
  double mean_test_acc = 0.0;
  double sd_test_acc = 0.0;
  std::size_t runs = 0;      // non-diverged runs contributing to the statistics
  std::size_t diverged = 0;
  bool operator==(const SummaryRow&) const = default;
};

// Numbers are printed with %.17g so parsing reproduces them bit for bit.
std::string format_double(double v);

void write_run_csv(std::ostream& out, const RunReport& report);
// Reads epoch rows back into `report.epochs`.
std::vector<EpochMetrics> read_run_csv(std::istream& in);

// {"method", "seed", "diverged", "diverged_step", "blocks": [{"block", "name", "values"}]}
void write_params_json(std::ostream& out, const RunReport& report);
// Restores method, seed, divergence and params; epochs are left empty.
RunReport read_params_json(std::istream& in);

// One row per method in first-seen order; final-epoch accuracies of non-diverged runs,
// mean and sample standard deviation over seeds.
std::vector<SummaryRow> summarize(const std::vector<RunReport>& reports);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);
// Table 1 layout, accuracies in percent.
void print_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows);

std::string run_csv_name(const std::string& method, std::uint64_t seed);
std::string params_json_name(const std::string& method, std::uint64_t seed);

// Writes `text` to `path` (binary mode, replacing any existing file).
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace poolbench

#include "poolbench/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "poolbench/errors.hpp"
#include "poolbench/stats.hpp"

namespace poolbench {

namespace {

constexpr const char* kRunHeader = "epoch,train_loss,train_acc,test_loss,test_acc";
constexpr const char* kSummaryHeader = "method,mean_train_acc,sd_train_acc,mean_test_acc,sd_test_acc";
constexpr const char* kSummaryNote =
    "# accuracies are final-epoch fractions; sd = sample standard deviation (n-1) over seeds; "
    "diverged runs excluded";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("not a number: '" + s + "'");
  return v;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

const ParamSnapshot* RunReport::find(std::size_t block, const std::string& name) const {
  for (const auto& p : params)
    if (p.block == block && p.name == name) return &p;
  return nullptr;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_run_csv(std::ostream& out, const RunReport& report) {
  out << kRunHeader << '\n';
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_acc) << ','
        << format_double(e.test_loss) << ',' << format_double(e.test_acc) << '\n';
  }
}

std::vector<EpochMetrics> read_run_csv(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line) || line != kRunHeader) throw ConfigError("run CSV header missing");
  std::vector<EpochMetrics> rows;
  while (next_data_line(in, line)) {
    const auto f = split_csv(line);
    if (f.size() != 5) throw ConfigError("run CSV row needs 5 fields: '" + line + "'");
    rows.push_back({static_cast<std::size_t>(std::stoull(f[0])), parse_double(f[1]),
                    parse_double(f[2]), parse_double(f[3]), parse_double(f[4])});
  }
  return rows;
}

void write_params_json(std::ostream& out, const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["method"] = report.method;
  doc["seed"] = report.seed;
  doc["diverged"] = report.diverged;
  doc["diverged_step"] = report.diverged_step;
  doc["blocks"] = nlohmann::ordered_json::array();
  for (const auto& p : report.params) {
    nlohmann::ordered_json entry;
    entry["block"] = p.block;
    entry["name"] = p.name;
    entry["values"] = p.values;
    doc["blocks"].push_back(std::move(entry));
  }
  // nlohmann prints doubles with round-trip precision.
  out << doc.dump(1) << '\n';
}

RunReport read_params_json(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed params JSON: ") + e.what());
  }
  RunReport r;
  try {
    r.method = doc.at("method").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.diverged = doc.at("diverged").get<bool>();
    r.diverged_step = doc.at("diverged_step").get<std::size_t>();
    for (const auto& entry : doc.at("blocks")) {
      ParamSnapshot p{entry.at("block").get<std::size_t>(), entry.at("name").get<std::string>(), {}};
      // Non-finite values are written as null.
      for (const auto& v : entry.at("values"))
        p.values.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
      r.params.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("params JSON is missing a field: ") + e.what());
  }
  return r;
}

std::vector<SummaryRow> summarize(const std::vector<RunReport>& reports) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunReport*>> by_method;
  for (const auto& r : reports) {
    if (!by_method.count(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& m : order) {
    SummaryRow row;
    row.method = m;
    std::vector<double> train, test;
    for (const RunReport* r : by_method[m]) {
      if (r->diverged || r->epochs.empty()) {
        ++row.diverged;
        continue;
      }
      train.push_back(r->epochs.back().train_acc);
      test.push_back(r->epochs.back().test_acc);
    }
    row.runs = train.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean_train_acc = train.empty() ? nan : mean(train);
    row.sd_train_acc = train.empty() ? nan : sample_sd(train);
    row.mean_test_acc = test.empty() ? nan : mean(test);
    row.sd_test_acc = test.empty() ? nan : sample_sd(test);
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryNote << '\n' << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.mean_train_acc) << ',' << format_double(r.sd_train_acc)
        << ',' << format_double(r.mean_test_acc) << ',' << format_double(r.sd_test_acc) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line) || line != kSummaryHeader) throw ConfigError("summary CSV header missing");
  std::vector<SummaryRow> rows;
  while (next_data_line(in, line)) {
    const auto f = split_csv(line);
    if (f.size() != 5) throw ConfigError("summary CSV row needs 5 fields: '" + line + "'");
    SummaryRow r;
    r.method = f[0];
    r.mean_train_acc = parse_double(f[1]);
    r.sd_train_acc = parse_double(f[2]);
    r.mean_test_acc = parse_double(f[3]);
    r.sd_test_acc = parse_double(f[4]);
    rows.push_back(r);
  }
  return rows;
}

void print_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << std::left << std::setw(8) << "Method" << std::right << std::setw(18) << "Train acc [%]"
    << std::setw(18) << "Test acc [%]" << std::setw(6) << "runs" << '\n';
  for (const auto& r : rows) {
    std::ostringstream train, test;
    train << std::fixed << std::setprecision(2) << 100.0 * r.mean_train_acc << " ± "
          << 100.0 * r.sd_train_acc;
    test << std::fixed << std::setprecision(2) << 100.0 * r.mean_test_acc << " ± "
         << 100.0 * r.sd_test_acc;
    s << std::left << std::setw(8) << r.method << std::right << std::setw(19) << train.str()
      << std::setw(19) << test.str() << std::setw(6) << r.runs;
    if (r.diverged > 0) s << "  (" << r.diverged << " diverged)";
    s << '\n';
  }
  s << "± = sample standard deviation over seeds\n";
  out << s.str();
}

std::string run_csv_name(const std::string& method, std::uint64_t seed) {
  return "run_" + method + "_" + std::to_string(seed) + ".csv";
}

std::string params_json_name(const std::string& method, std::uint64_t seed) {
  return "params_" + method + "_" + std::to_string(seed) + ".json";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace poolbench

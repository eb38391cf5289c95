#include "padrl/metrics.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace padrl {

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "step",          "stage",          "skipped",      "reward_accuracy", "entropy",     "mean_response_length",
      "clip_fraction", "effective_set_fraction",       "k_prime",         "surrogate_loss", "kl_penalty",
      "entropy_bonus", "total_loss",     "grad_norm",    "tau",             "beta"};
  return cols;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0 into 0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << row[i];
  }
  out << '\n';
}

std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

}  // namespace

void write_csv(std::ostream& out, const CsvTable& table) {
  write_row(out, table.header);
  for (const auto& row : table.rows) write_row(out, row);
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw SchemaError("row has " + std::to_string(row.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_metrics_csv(std::ostream& out, std::span<const TrainMetrics> metrics) {
  CsvTable t;
  t.header = metrics_columns();
  for (const auto& m : metrics) {
    t.rows.push_back({std::to_string(m.step), m.stage, m.skipped ? "1" : "0", format_number(m.reward_accuracy),
                      format_number(m.entropy), format_number(m.mean_response_length), format_number(m.clip_fraction),
                      format_number(m.effective_set_fraction), std::to_string(m.k_prime),
                      format_number(m.surrogate_loss), format_number(m.kl_penalty), format_number(m.entropy_bonus),
                      format_number(m.total_loss), format_number(m.grad_norm), format_number(m.tau),
                      format_number(m.beta)});
  }
  write_csv(out, t);
}

std::vector<TrainMetrics> read_metrics_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < std::max(cols.size(), t.header.size()); ++i) {
    if (i >= t.header.size()) throw SchemaError("metrics CSV is missing column '" + cols[i] + "'");
    if (i >= cols.size() || t.header[i] != cols[i])
      throw SchemaError("unexpected metrics CSV header '" + t.header[i] + "'");
  }
  std::vector<TrainMetrics> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    TrainMetrics m;
    m.step = parse_int(r[0]);
    m.stage = r[1];
    m.skipped = parse_int(r[2]) != 0;
    m.reward_accuracy = parse_number(r[3]);
    m.entropy = parse_number(r[4]);
    m.mean_response_length = parse_number(r[5]);
    m.clip_fraction = parse_number(r[6]);
    m.effective_set_fraction = parse_number(r[7]);
    m.k_prime = parse_int(r[8]);
    m.surrogate_loss = parse_number(r[9]);
    m.kl_penalty = parse_number(r[10]);
    m.entropy_bonus = parse_number(r[11]);
    m.total_loss = parse_number(r[12]);
    m.grad_norm = parse_number(r[13]);
    m.tau = parse_number(r[14]);
    m.beta = parse_number(r[15]);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace padrl

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace padrl {

struct TrainMetrics {
  std::int64_t step = 0;
  std::string stage;
  bool skipped = false;
  double reward_accuracy = 0.0;
  double entropy = 0.0;
  double mean_response_length = 0.0;
  double clip_fraction = 0.0;
  double effective_set_fraction = 0.0;
  std::int64_t k_prime = 0;
  double surrogate_loss = 0.0;
  double kl_penalty = 0.0;
  double entropy_bonus = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;
  double tau = 0.0;
  double beta = 0.0;

  bool operator==(const TrainMetrics&) const = default;
};

/// Column order of the metrics CSV. Frozen per checkpoint format version.
const std::vector<std::string>& metrics_columns();

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);
double parse_number(std::string_view text);

// Minimal CSV table: comma-separated, no quoting (no field in this project
// contains a comma), LF line endings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);

class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void write_metrics_csv(std::ostream& out, std::span<const TrainMetrics> metrics);
/// Throws SchemaError naming the first header that deviates from
/// metrics_columns().
std::vector<TrainMetrics> read_metrics_csv(std::istream& in);

}  // namespace padrl

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sfperc/report.hpp"

namespace sfperc {

enum class Command { kGrow, kPercolate, kTheorem1, kBpLimits, kYuleCheck, kSpacings };
enum class Format { kCsv, kJson };

const char* to_string(Command c);
std::optional<Command> parse_command(const std::string& name);

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInconclusive = 2;
inline constexpr int kExitUsage = 64;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  Command command = Command::kTheorem1;
  double beta = 0.0;
  double c = 0.69314718055994531;  // ln 2
  std::vector<std::uint32_t> n{1000000};
  std::uint64_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t k = 10;           // top clusters tracked
  std::size_t spacing_k = 3;    // spacings tested by the Poisson check
  double level = 0.01;
  double tolerance = 0.05;      // relative tolerance of mean checks
  double r = 1.0;               // offset of the early-time window for Delta
  double horizon = 8.0;         // yule-check gamma limit time
  std::vector<double> p{0.9, 0.99, 0.999};  // bp-limits retention ladder
  std::filesystem::path out_path = ".";
  Format format = Format::kCsv;
  unsigned jobs = 1;

  // Throws UsageError on an invalid combination.
  void validate() const;
  // Everything that determines the outputs; excludes jobs and out_path.
  nlohmann::ordered_json to_json() const;
};

// Plot-ready table; empty cells are written as blank CSV fields or JSON null.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

// CSV (RFC 4180, 17 significant digits) or newline-delimited JSON objects.
void write_table(const std::filesystem::path& path, const Table& table, Format format);

struct TrialRow {
  std::uint64_t trial = 0;
  std::uint32_t n = 0;
  double c0_over_n = 0.0;
  std::vector<double> top_scaled;  // (ln n / n) times the largest non-root sizes
  std::uint32_t delta = 0;         // Delta at the end of growth
  std::uint32_t delta_early = 0;   // Delta at time ln ln n / (2 + beta) + r
};

struct AggregateRow {
  std::uint32_t n = 0;
  std::string quantity;
  double mean = 0.0;
  std::optional<double> std_error;
  double theory = 0.0;
  double relative_error = 0.0;
};

struct Summary {
  std::size_t k = 0;
  std::vector<TrialRow> trials;
  std::vector<AggregateRow> aggregate;
};

// Builds the aggregate rows (C0/n, 1/x1, early Delta) per n from trial rows.
std::vector<AggregateRow> aggregate_trials(const std::vector<TrialRow>& trials, double beta, double c, double r);

// Writes <stem>_trials and <stem>_aggregate tables into dir.
std::vector<std::filesystem::path> emit_summary(const Summary& summary, const std::filesystem::path& dir,
                                                const std::string& stem, Format format);

struct RunResult {
  int exit_status = kExitPass;
  std::vector<StatReport> reports;
  std::vector<std::filesystem::path> files;
};

RunResult run(const ExperimentConfig& config);

// Exact finite-p expectation of Delta at time t for the timed tree started
// from the edge 0-1: the compensators of N and M integrate (1 - p) E Y and
// (1 - p) E Y_0, where Y_0 is the root cluster's value.
double expected_delta(double beta, double p, double t);

}  // namespace sfperc

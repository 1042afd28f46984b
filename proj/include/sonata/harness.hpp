#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sonata/baselines.hpp"

namespace sonata {

struct ProblemSpec {
  std::string type = "sparse_regression";  // sparse_regression | dpca_synthetic | dpca_file
  int agents = 10;
  int dim = 50;
  int rows_per_agent = 6;
  double noise_sigma = 0.31622776601683794;  // variance 0.1
  double sparsity = 0.8;
  Regularizer reg{RegKind::Log, 2.0, 3.7, 1e-4, -1.0, 0.1};
  std::string data_file;
  bool operator==(const ProblemSpec&) const = default;
};

struct GraphSpec {
  GraphModel model = GraphModel::RingPlusRandom;
  int window = 1;
  std::string file;  // custom model only
  bool operator==(const GraphSpec&) const = default;
};

enum class AlgorithmFamily { Sonata, SubgradientPush, GradientProjection };

struct AlgorithmEntry {
  std::string label;
  AlgorithmFamily family = AlgorithmFamily::Sonata;
  AlgorithmConfig sonata;
  BaselineConfig baseline;
  bool operator==(const AlgorithmEntry&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemSpec problem;
  GraphSpec graph;
  std::vector<AlgorithmEntry> algorithms;
  std::uint64_t n_iters = 1000;
  int trials = 1;
  std::uint64_t base_seed = 1;
  std::string output;
  std::uint64_t log_every = 10;
  bool operator==(const ExperimentConfig&) const = default;
};

class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& what, unsigned long line)
      : std::runtime_error(what), line_(line) {}
  unsigned long line() const { return line_; }

 private:
  unsigned long line_;
};

// Raised for well-formed files whose content is invalid; names the offending field.
class ConfigValidationError : public std::runtime_error {
 public:
  ConfigValidationError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

// Builds the trial's problem and graph; every algorithm of the trial shares them.
ProblemInstance build_problem(const ExperimentConfig& cfg, int trial);
GraphSequence build_graph(const ExperimentConfig& cfg, int trial);
std::uint64_t trial_seed(const ExperimentConfig& cfg, int trial);

struct AggregateRow {
  std::uint64_t iter = 0;
  double msg_exchanges = 0.0;
  double mean_log10_J = 0.0;
  double mean_log10_J_inf = 0.0;
  double mean_log10_D = 0.0;
  double mean_log10_D_inf = 0.0;
  double mean_NMSE = 0.0;
};

struct AlgorithmOutcome {
  std::string label;
  std::vector<std::vector<TraceRecord>> trials;
  std::vector<AggregateRow> aggregate;
};

struct ExperimentSummary {
  std::vector<AlgorithmOutcome> algorithms;
  std::vector<std::string> files_written;
};

struct ExperimentControls {
  unsigned threads = 0;  // 0: hardware concurrency
  bool write_files = true;
  std::ostream* log = nullptr;
};

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const ExperimentControls& ctl = {});

// Averages log10 values over trials record by record; traces must share their iteration grid.
std::vector<AggregateRow> aggregate_traces(const std::vector<std::vector<TraceRecord>>& trials);

// First message-exchange count at which the infinity-norm residual J_inf <= threshold, or +infinity.
double exchanges_to_reach_J(const std::vector<TraceRecord>& trace, double threshold);

inline constexpr const char* kTraceHeader =
    "iter,msg_exchanges,alpha,J,J_inf,D,D_inf,M,NMSE,consensus_err,tracking_err,U_mean";

std::string format_double(double v);  // shortest round-trip decimal
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

}  // namespace sonata

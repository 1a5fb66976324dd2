#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unideal/config.hpp"
#include "unideal/federation.hpp"

namespace unideal {

// Builds the per-client datasets, views, splits and freshly initialized
// models for one experiment seed. Method-independent: two methods run under
// the same config and seed see bit-identical starting states.
std::vector<ClientState> setup_clients(const ExperimentConfig& config, std::uint64_t seed);

// One (method, seed) cell. `execution_order` is forwarded to run_federation.
FederationResult run_single(const ExperimentConfig& config, const Method& method,
                            std::uint64_t seed,
                            const std::vector<int>* execution_order = nullptr);

struct CellResult {
  std::string method;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double best_accuracy = 0.0;
  int best_round = -1;
  std::uint64_t total_bytes_up = 0;
  std::uint64_t total_bytes_down = 0;
  CommSummary comm;
  double wall_seconds = 0.0;
};

struct MethodSummary {
  std::string method;
  std::vector<double> best_accuracies;  // per seed, only successful cells
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // unbiased; 0 for a single seed
  std::uint64_t bytes_per_round = 0;
  std::optional<int> rounds_to_threshold;
  std::optional<std::uint64_t> total_bytes_to_threshold;
};

struct PairwiseTest {
  std::string method_a;
  std::string method_b;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

struct SuiteReport {
  std::vector<CellResult> cells;
  std::vector<MethodSummary> methods;
  std::vector<PairwiseTest> t_tests;
  bool all_ok = true;
};

// Runs every (method, seed) cell, writes rounds_<method>_<seed>.csv per cell
// plus summary.csv and summary.json into config.output_dir (all files written
// atomically), and returns the in-memory report. A failing cell is recorded
// and the suite continues.
SuiteReport run_suite(const ExperimentConfig& config,
                      const std::vector<int>* execution_order = nullptr);

// Fixed-point-free formatting used for every CSV/JSON number so that repeat
// runs are byte-identical: shortest round-trip representation.
std::string format_double(double x);

std::string rounds_csv_text(const std::vector<RoundReport>& rounds);
std::string summary_csv_text(const SuiteReport& report);
std::string summary_json_text(const SuiteReport& report, const ExperimentConfig& config);

// Human-readable table; every number it shows also appears in summary.json.
std::string render_summary_table(const SuiteReport& report);

void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace unideal

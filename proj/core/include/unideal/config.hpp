#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unideal/clkd.hpp"
#include "unideal/data.hpp"
#include "unideal/federation.hpp"

namespace unideal {

struct DatasetConfig {
  enum class Type { kSynthetic, kCsv };
  Type type = Type::kSynthetic;

  // synthetic
  int samples_per_client = 600;
  int classes = 3;
  int feature_dim = 2;
  double radius = 2.0;
  double noise = 0.8;
  double rotation_deg = 90.0;

  // csv
  std::string path;
  CsvSchema schema;
};

struct PartitionConfig {
  double niid1_feature_fraction = 1.0;   // 1.0 = keep all features
  std::optional<double> niid2_alpha;     // set = Dirichlet label skew on top
};

struct ModelConfig {
  std::vector<int> hidden = {32, 16};
  int head_depth = 1;
  bool hetero = false;
  std::pair<int, int> depth_range = {1, 3};
  std::pair<int, int> width_range = {8, 32};
};

struct ExperimentConfig {
  std::vector<std::string> methods;  // canonical method names
  int clients = 3;
  int rounds = 50;          // T_max
  int local_epochs = 1;
  double lr = 0.05;
  int batch_size = 32;
  double alpha = 1.0;
  ScheduleMode schedule_mode = ScheduleMode::kLinearKept;
  bool schedule_per_round_reset = false;
  SimilarityMetric metric;  // default metric for "unideal"
  DatasetConfig dataset;
  PartitionConfig partition;
  ModelConfig model;
  double test_fraction = 0.2;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output_dir = "out";
  double participation_fraction = 1.0;
  bool weighted_aggregation = false;
  double nc_accuracy_threshold = 0.5;

  std::vector<Method> resolved_methods() const;
};

// Parses and fully validates a JSON config file. Reports every violation it
// finds (unknown keys, missing required keys, bad enumerations, out-of-range
// values) in one ConfigError rather than stopping at the first.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

// Serialization such that parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace unideal

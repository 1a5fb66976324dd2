#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unideal/matrix.hpp"
#include "unideal/rng.hpp"

namespace unideal {

struct TabularDataset {
  Matrix features;  // N x d
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  void validate() const;
};

// Synthetic cross-domain generator: clients share class-conditional Gaussian
// latents but see them through a per-client affine transform, so label
// distributions match while input features differ.
struct DomainSpec {
  Matrix class_means;  // C x d latent class centers
  double noise_scale = 1.0;
  std::vector<Matrix> client_transforms;       // per client, d x d
  std::vector<std::vector<double>> client_shifts;  // per client, length d
  // Per-client class priors; empty = shared uniform prior.
  std::vector<std::vector<double>> client_class_priors;

  int clients() const { return static_cast<int>(client_transforms.size()); }
  int latent_dim() const { return static_cast<int>(class_means.cols()); }
  int class_count() const { return static_cast<int>(class_means.rows()); }
};

// Class means on a circle in the first two latent coordinates; client k sees
// them rotated by k * rotation_step_deg in that plane.
DomainSpec rotated_domains_spec(int clients, int classes, int latent_dim, double radius,
                                double noise_scale, double rotation_step_deg);

std::vector<TabularDataset> synth_cross_domain(const DomainSpec& spec, int clients,
                                               int n_per_client, std::uint64_t seed);

// A client's window onto a dataset: feature subset, sample subset, and the
// train/test split inside the sample subset. Indices are absolute.
struct ClientDataView {
  std::vector<int> feature_indices;
  std::vector<int> sample_indices;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
  bool stratify_fallback = false;
};

// Selects round(fraction * d) distinct feature indices uniformly without
// replacement, returned in ascending order (fraction 1 keeps original order).
ClientDataView feature_subsample(const TabularDataset& ds, double fraction,
                                 std::uint64_t seed);

// Per class, draws proportions ~ Dirichlet(alpha) over clients and assigns the
// class's samples by largest-remainder rounding. The result is an exact
// partition; draws are retried (bounded) until every client is nonempty.
std::vector<std::vector<int>> dirichlet_label_skew(const std::vector<int>& labels,
                                                   double alpha, int clients,
                                                   std::uint64_t seed);

struct CsvSchema {
  std::string label_column;
  std::vector<std::string> numeric_columns;
  std::vector<std::string> categorical_columns;
  int max_malformed_rows = 0;
};

struct CsvLoadResult {
  TabularDataset dataset;
  int rows_dropped_missing = 0;
  std::vector<std::string> class_names;  // sorted; index = class id
};

// Comma-separated, first row header, UTF-8, no quoting. Numeric columns are
// loaded raw (z-scoring happens per client against train-fold statistics, see
// Standardizer); categorical columns expand to one indicator column per
// observed category. Rows with empty schema fields are dropped and counted;
// rows that fail to parse count against schema.max_malformed_rows.
CsvLoadResult load_csv_dataset(const std::string& path, const CsvSchema& schema);

// Stratified split of view.sample_indices (largest-remainder per class,
// deterministic tie-break by class id). Falls back to an unstratified split
// with the flag set when some class has a single sample.
void train_test_split(ClientDataView& view, const std::vector<int>& labels,
                      double test_fraction, std::uint64_t seed);

// Per-feature affine z-scoring fitted on a sample subset (the train fold).
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;  // population std, floored at 1e-12

  static Standardizer fit(const TabularDataset& ds, const std::vector<int>& sample_indices,
                          const std::vector<int>& feature_indices);
  double transform(double value, std::size_t feature_pos) const;
};

// Materialized per-client matrices in view order. When standardize is set the
// z-scoring is fitted on the train fold and applied to both folds.
struct ClientData {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  bool stratify_fallback = false;
};

ClientData materialize(const TabularDataset& ds, const ClientDataView& view,
                       bool standardize);

}  // namespace unideal

#include "unideal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace unideal {

namespace {

constexpr std::uint64_t kClientStreamTag = 0x11;
constexpr std::uint64_t kPriorStreamTag = 0x12;
constexpr int kDirichletRetries = 100;

// Largest-remainder apportionment of `total` items into quotas proportional
// to `weights`; ties go to the lower index.
std::vector<int> largest_remainder(const std::vector<double>& weights, int total) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const std::size_t n = weights.size();
  std::vector<int> counts(n, 0);
  std::vector<std::pair<double, std::size_t>> remainders(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = wsum > 0.0 ? weights[i] / wsum * total : 0.0;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    remainders[i] = {quota - counts[i], i};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < total - assigned; ++i) {
    ++counts[remainders[static_cast<std::size_t>(i) % n].second];
  }
  return counts;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // Trim surrounding whitespace and a possible trailing CR.
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') {
    fields.push_back("");
  }
  return fields;
}

}  // namespace

void TabularDataset::validate() const {
  if (labels.empty() || features.rows() != labels.size()) {
    throw ShapeError("dataset feature rows and label count must match and be >= 1");
  }
  for (double x : features.data()) {
    if (!std::isfinite(x)) {
      throw InvalidInputError("dataset contains non-finite features");
    }
  }
  for (int y : labels) {
    if (y < 0 || y >= class_count) {
      throw InvalidInputError("dataset label out of range");
    }
  }
}

DomainSpec rotated_domains_spec(int clients, int classes, int latent_dim, double radius,
                                double noise_scale, double rotation_step_deg) {
  if (clients < 1 || classes < 2 || latent_dim < 2 || radius <= 0.0 || noise_scale <= 0.0) {
    throw ConfigError("rotated_domains_spec: need clients >= 1, classes >= 2, "
                      "latent_dim >= 2, positive radius and noise");
  }
  DomainSpec spec;
  spec.noise_scale = noise_scale;
  spec.class_means = Matrix(static_cast<std::size_t>(classes),
                            static_cast<std::size_t>(latent_dim));
  for (int c = 0; c < classes; ++c) {
    const double angle = 2.0 * M_PI * c / classes;
    spec.class_means(c, 0) = radius * std::cos(angle);
    spec.class_means(c, 1) = radius * std::sin(angle);
  }
  for (int k = 0; k < clients; ++k) {
    const double theta = rotation_step_deg * M_PI / 180.0 * k;
    Matrix t(static_cast<std::size_t>(latent_dim), static_cast<std::size_t>(latent_dim));
    for (int i = 2; i < latent_dim; ++i) t(i, i) = 1.0;
    t(0, 0) = std::cos(theta);
    t(0, 1) = -std::sin(theta);
    t(1, 0) = std::sin(theta);
    t(1, 1) = std::cos(theta);
    spec.client_transforms.push_back(std::move(t));
    spec.client_shifts.emplace_back(static_cast<std::size_t>(latent_dim), 0.0);
  }
  return spec;
}

std::vector<TabularDataset> synth_cross_domain(const DomainSpec& spec, int clients,
                                               int n_per_client, std::uint64_t seed) {
  if (clients != spec.clients()) {
    throw ConfigError("synth_cross_domain: client count does not match DomainSpec");
  }
  const int d = spec.latent_dim();
  const int c_count = spec.class_count();
  if (clients < 1 || n_per_client < c_count || d < 1 || c_count < 2) {
    throw ConfigError("synth_cross_domain: degenerate spec");
  }
  if (!spec.client_class_priors.empty() &&
      spec.client_class_priors.size() != static_cast<std::size_t>(clients)) {
    throw ConfigError("synth_cross_domain: prior count does not match client count");
  }
  std::vector<TabularDataset> out;
  out.reserve(static_cast<std::size_t>(clients));
  std::vector<double> latent(static_cast<std::size_t>(d));
  for (int k = 0; k < clients; ++k) {
    Rng rng(mix_seed(seed, kClientStreamTag, static_cast<std::uint64_t>(k)));
    const Matrix& transform = spec.client_transforms[static_cast<std::size_t>(k)];
    const auto& shift = spec.client_shifts[static_cast<std::size_t>(k)];
    if (transform.rows() != static_cast<std::size_t>(d) ||
        transform.cols() != static_cast<std::size_t>(d) ||
        shift.size() != static_cast<std::size_t>(d)) {
      throw ConfigError("synth_cross_domain: transform/shift shape mismatch");
    }
    TabularDataset ds;
    ds.class_count = c_count;
    ds.features = Matrix(static_cast<std::size_t>(n_per_client), static_cast<std::size_t>(d));
    ds.labels.resize(static_cast<std::size_t>(n_per_client));
    for (int j = 0; j < d; ++j) {
      ds.feature_names.push_back("x" + std::to_string(j));
    }
    const std::vector<double>* prior =
        spec.client_class_priors.empty() ? nullptr
                                         : &spec.client_class_priors[static_cast<std::size_t>(k)];
    for (int i = 0; i < n_per_client; ++i) {
      int label;
      if (prior == nullptr) {
        label = rng.uniform_int(c_count);
      } else {
        const double u = rng.uniform();
        double acc = 0.0;
        label = c_count - 1;
        for (int c = 0; c < c_count; ++c) {
          acc += (*prior)[static_cast<std::size_t>(c)];
          if (u < acc) {
            label = c;
            break;
          }
        }
      }
      ds.labels[static_cast<std::size_t>(i)] = label;
      for (int j = 0; j < d; ++j) {
        latent[static_cast<std::size_t>(j)] =
            spec.class_means(label, j) + spec.noise_scale * rng.normal();
      }
      for (int r = 0; r < d; ++r) {
        double acc = shift[static_cast<std::size_t>(r)];
        for (int j = 0; j < d; ++j) {
          acc += transform(r, j) * latent[static_cast<std::size_t>(j)];
        }
        ds.features(i, r) = acc;
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

ClientDataView feature_subsample(const TabularDataset& ds, double fraction,
                                 std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("feature_subsample: fraction must lie in (0, 1]");
  }
  const int d = ds.feature_dim();
  const int m = static_cast<int>(std::llround(fraction * d));
  if (m < 1) {
    throw ConfigError("feature_subsample: zero features selected");
  }
  ClientDataView view;
  if (m >= d) {
    view.feature_indices.resize(static_cast<std::size_t>(d));
    std::iota(view.feature_indices.begin(), view.feature_indices.end(), 0);
  } else {
    Rng rng(seed);
    auto perm = rng.permutation(d);
    view.feature_indices.assign(perm.begin(), perm.begin() + m);
    std::sort(view.feature_indices.begin(), view.feature_indices.end());
  }
  view.sample_indices.resize(ds.size());
  std::iota(view.sample_indices.begin(), view.sample_indices.end(), 0);
  return view;
}

std::vector<std::vector<int>> dirichlet_label_skew(const std::vector<int>& labels,
                                                   double alpha, int clients,
                                                   std::uint64_t seed) {
  if (alpha <= 0.0 || clients < 1) {
    throw ConfigError("dirichlet_label_skew: need alpha > 0 and clients >= 1");
  }
  if (labels.empty()) {
    throw InvalidInputError("dirichlet_label_skew: empty label vector");
  }
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> per_class(static_cast<std::size_t>(classes));
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    per_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  }
  Rng rng(seed);
  for (auto& bucket : per_class) {
    rng.shuffle(bucket);
  }
  for (int attempt = 0; attempt < kDirichletRetries; ++attempt) {
    std::vector<std::vector<int>> assignment(static_cast<std::size_t>(clients));
    for (const auto& bucket : per_class) {
      if (bucket.empty()) continue;
      const auto proportions = rng.dirichlet(alpha, clients);
      const auto counts = largest_remainder(proportions, static_cast<int>(bucket.size()));
      std::size_t at = 0;
      for (int k = 0; k < clients; ++k) {
        for (int c = 0; c < counts[static_cast<std::size_t>(k)]; ++c) {
          assignment[static_cast<std::size_t>(k)].push_back(bucket[at++]);
        }
      }
    }
    const bool all_nonempty = std::all_of(assignment.begin(), assignment.end(),
                                          [](const auto& a) { return !a.empty(); });
    if (all_nonempty || clients == 1) {
      for (auto& a : assignment) {
        std::sort(a.begin(), a.end());
      }
      return assignment;
    }
  }
  throw ConfigError("dirichlet_label_skew: a client kept receiving zero samples; "
                    "alpha too small for this client count");
}

CsvLoadResult load_csv_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot open " + path);
  }
  if (schema.label_column.empty()) {
    throw ConfigError("csv schema: label_column is required");
  }
  if (schema.numeric_columns.empty() && schema.categorical_columns.empty()) {
    throw ConfigError("csv schema: at least one feature column is required");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestionError(path + ": empty file");
  }
  const auto header = split_csv_line(line);
  const auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw IngestionError(path + ": column '" + name + "' not present in header");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_at = column_index(schema.label_column);
  std::vector<std::size_t> numeric_at;
  for (const auto& name : schema.numeric_columns) numeric_at.push_back(column_index(name));
  std::vector<std::size_t> categorical_at;
  for (const auto& name : schema.categorical_columns) {
    categorical_at.push_back(column_index(name));
  }

  struct RawRow {
    std::string label;
    std::vector<double> numeric;
    std::vector<std::string> categorical;
  };
  std::vector<RawRow> rows;
  std::vector<int> malformed_rows;
  int dropped_missing = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      malformed_rows.push_back(line_no);
      continue;
    }
    RawRow row;
    bool missing = false;
    bool malformed = false;
    row.label = fields[label_at];
    if (row.label.empty()) missing = true;
    for (std::size_t at : numeric_at) {
      const std::string& f = fields[at];
      if (f.empty() || f == "?" || f == "NA") {
        missing = true;
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0' || !std::isfinite(v)) {
        malformed = true;
        continue;
      }
      row.numeric.push_back(v);
    }
    for (std::size_t at : categorical_at) {
      const std::string& f = fields[at];
      if (f.empty() || f == "?" || f == "NA") {
        missing = true;
        continue;
      }
      row.categorical.push_back(f);
    }
    if (malformed) {
      malformed_rows.push_back(line_no);
    } else if (missing) {
      ++dropped_missing;
    } else {
      rows.push_back(std::move(row));
    }
  }
  if (static_cast<int>(malformed_rows.size()) > schema.max_malformed_rows) {
    std::string msg = path + ": malformed rows beyond tolerance at lines";
    for (int r : malformed_rows) msg += " " + std::to_string(r);
    throw IngestionError(msg);
  }
  if (rows.empty()) {
    throw IngestionError(path + ": no usable data rows");
  }

  // Class ids and category columns in sorted order, stable across row order.
  std::set<std::string> label_set;
  for (const auto& r : rows) label_set.insert(r.label);
  CsvLoadResult result;
  result.class_names.assign(label_set.begin(), label_set.end());
  std::map<std::string, int> label_to_id;
  for (std::size_t i = 0; i < result.class_names.size(); ++i) {
    label_to_id[result.class_names[i]] = static_cast<int>(i);
  }
  std::vector<std::vector<std::string>> categories(categorical_at.size());
  for (std::size_t ci = 0; ci < categorical_at.size(); ++ci) {
    std::set<std::string> values;
    for (const auto& r : rows) values.insert(r.categorical[ci]);
    categories[ci].assign(values.begin(), values.end());
  }

  TabularDataset& ds = result.dataset;
  ds.class_count = static_cast<int>(result.class_names.size());
  for (const auto& name : schema.numeric_columns) ds.feature_names.push_back(name);
  for (std::size_t ci = 0; ci < categorical_at.size(); ++ci) {
    for (const auto& cat : categories[ci]) {
      ds.feature_names.push_back(schema.categorical_columns[ci] + "=" + cat);
    }
  }
  ds.features = Matrix(rows.size(), ds.feature_names.size());
  ds.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ds.labels[r] = label_to_id[rows[r].label];
    std::size_t col = 0;
    for (double v : rows[r].numeric) {
      ds.features(r, col++) = v;
    }
    for (std::size_t ci = 0; ci < categorical_at.size(); ++ci) {
      const auto& cats = categories[ci];
      const auto it = std::find(cats.begin(), cats.end(), rows[r].categorical[ci]);
      const std::size_t hot = static_cast<std::size_t>(it - cats.begin());
      for (std::size_t j = 0; j < cats.size(); ++j) {
        ds.features(r, col++) = j == hot ? 1.0 : 0.0;
      }
    }
  }
  result.rows_dropped_missing = dropped_missing;
  ds.validate();
  return result;
}

void train_test_split(ClientDataView& view, const std::vector<int>& labels,
                      double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("train_test_split: test_fraction must lie in (0, 1)");
  }
  const int n = static_cast<int>(view.sample_indices.size());
  if (n < 2) {
    throw InvalidInputError("train_test_split: need at least two samples");
  }
  const int total_test =
      std::clamp(static_cast<int>(std::llround(test_fraction * n)), 1, n - 1);
  std::map<int, std::vector<int>> by_class;
  for (int idx : view.sample_indices) {
    by_class[labels[static_cast<std::size_t>(idx)]].push_back(idx);
  }
  Rng rng(seed);
  view.train_indices.clear();
  view.test_indices.clear();
  const bool has_singleton =
      std::any_of(by_class.begin(), by_class.end(),
                  [](const auto& kv) { return kv.second.size() < 2; });
  if (has_singleton) {
    view.stratify_fallback = true;
    auto pool = view.sample_indices;
    rng.shuffle(pool);
    view.test_indices.assign(pool.begin(), pool.begin() + total_test);
    view.train_indices.assign(pool.begin() + total_test, pool.end());
  } else {
    view.stratify_fallback = false;
    std::vector<double> weights;
    std::vector<const std::vector<int>*> buckets;
    for (const auto& [cls, idxs] : by_class) {
      weights.push_back(static_cast<double>(idxs.size()));
      buckets.push_back(&idxs);
    }
    const auto test_counts = largest_remainder(weights, total_test);
    for (std::size_t ci = 0; ci < buckets.size(); ++ci) {
      auto pool = *buckets[ci];
      rng.shuffle(pool);
      const int tc = std::min<int>(test_counts[ci], static_cast<int>(pool.size()));
      view.test_indices.insert(view.test_indices.end(), pool.begin(), pool.begin() + tc);
      view.train_indices.insert(view.train_indices.end(), pool.begin() + tc, pool.end());
    }
  }
  std::sort(view.train_indices.begin(), view.train_indices.end());
  std::sort(view.test_indices.begin(), view.test_indices.end());
}

Standardizer Standardizer::fit(const TabularDataset& ds,
                               const std::vector<int>& sample_indices,
                               const std::vector<int>& feature_indices) {
  if (sample_indices.empty()) {
    throw InvalidInputError("Standardizer::fit: empty sample set");
  }
  Standardizer s;
  const double n = static_cast<double>(sample_indices.size());
  for (int f : feature_indices) {
    double m = 0.0;
    for (int i : sample_indices) m += ds.features(i, f);
    m /= n;
    double ss = 0.0;
    for (int i : sample_indices) {
      const double dx = ds.features(i, f) - m;
      ss += dx * dx;
    }
    s.means.push_back(m);
    s.stds.push_back(std::max(std::sqrt(ss / n), 1e-12));
  }
  return s;
}

double Standardizer::transform(double value, std::size_t feature_pos) const {
  return (value - means[feature_pos]) / stds[feature_pos];
}

ClientData materialize(const TabularDataset& ds, const ClientDataView& view,
                       bool standardize) {
  if (view.train_indices.empty() || view.test_indices.empty()) {
    throw InvalidInputError("materialize: view has an empty train or test fold");
  }
  ClientData out;
  out.stratify_fallback = view.stratify_fallback;
  Standardizer scaler;
  if (standardize) {
    scaler = Standardizer::fit(ds, view.train_indices, view.feature_indices);
  }
  const auto gather = [&](const std::vector<int>& rows, Matrix& x, std::vector<int>& y) {
    x = Matrix(rows.size(), view.feature_indices.size());
    y.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      y[r] = ds.labels[static_cast<std::size_t>(rows[r])];
      for (std::size_t c = 0; c < view.feature_indices.size(); ++c) {
        double v = ds.features(rows[r], view.feature_indices[c]);
        if (standardize) v = scaler.transform(v, c);
        x(r, c) = v;
      }
    }
  };
  gather(view.train_indices, out.train_x, out.train_y);
  gather(view.test_indices, out.test_x, out.test_y);
  return out;
}

}  // namespace unideal

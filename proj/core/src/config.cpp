#include "unideal/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace unideal {

namespace {

using nlohmann::json;

class Validator {
 public:
  void fail(const std::string& msg) { violations_.push_back(msg); }

  void check_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.contains(key)) {
        fail("unknown key '" + key + "' in " + where);
      }
    }
  }

  template <typename T>
  bool read(const json& obj, const std::string& where, const std::string& key, T& out) {
    if (!obj.contains(key)) return false;
    try {
      out = obj.at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      fail("key '" + key + "' in " + where + " has the wrong type");
      return false;
    }
  }

  void finish() {
    if (!violations_.empty()) {
      throw ConfigError(std::move(violations_));
    }
  }

 private:
  std::vector<std::string> violations_;
};

ScheduleMode parse_schedule_mode(const std::string& s, Validator& v) {
  if (s == "linear_kept") return ScheduleMode::kLinearKept;
  if (s == "paper_literal") return ScheduleMode::kPaperLiteral;
  v.fail("schedule.mode '" + s + "' is not one of {linear_kept, paper_literal}");
  return ScheduleMode::kLinearKept;
}

std::string schedule_mode_name(ScheduleMode m) {
  return m == ScheduleMode::kLinearKept ? "linear_kept" : "paper_literal";
}

MetricKind parse_metric_kind(const std::string& s, Validator& v) {
  if (s == "cosine") return MetricKind::kCosine;
  if (s == "inv_l1") return MetricKind::kInvL1;
  if (s == "inv_l2") return MetricKind::kInvL2;
  v.fail("metric.kind '" + s + "' is not one of {cosine, inv_l1, inv_l2}");
  return MetricKind::kCosine;
}

std::string metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::kCosine:
      return "cosine";
    case MetricKind::kInvL1:
      return "inv_l1";
    case MetricKind::kInvL2:
      return "inv_l2";
  }
  return "cosine";
}

void parse_dataset(const json& obj, DatasetConfig& out, Validator& v) {
  std::string type;
  if (!v.read(obj, "dataset", "type", type)) {
    v.fail("missing required key 'type' in dataset");
    return;
  }
  if (type == "synthetic") {
    out.type = DatasetConfig::Type::kSynthetic;
    v.check_keys(obj, "dataset",
                 {"type", "samples_per_client", "classes", "feature_dim", "radius",
                  "noise", "rotation_deg"});
    v.read(obj, "dataset", "samples_per_client", out.samples_per_client);
    v.read(obj, "dataset", "classes", out.classes);
    v.read(obj, "dataset", "feature_dim", out.feature_dim);
    v.read(obj, "dataset", "radius", out.radius);
    v.read(obj, "dataset", "noise", out.noise);
    v.read(obj, "dataset", "rotation_deg", out.rotation_deg);
    if (out.classes < 2) v.fail("dataset.classes must be >= 2");
    if (out.samples_per_client < out.classes) {
      v.fail("dataset.samples_per_client must be >= dataset.classes");
    }
    if (out.feature_dim < 2) v.fail("dataset.feature_dim must be >= 2");
    if (out.radius <= 0.0) v.fail("dataset.radius must be > 0");
    if (out.noise <= 0.0) v.fail("dataset.noise must be > 0");
  } else if (type == "csv") {
    out.type = DatasetConfig::Type::kCsv;
    v.check_keys(obj, "dataset",
                 {"type", "path", "label_column", "numeric_columns",
                  "categorical_columns", "max_malformed_rows"});
    if (!v.read(obj, "dataset", "path", out.path)) {
      v.fail("missing required key 'path' in dataset");
    }
    if (!v.read(obj, "dataset", "label_column", out.schema.label_column)) {
      v.fail("missing required key 'label_column' in dataset");
    }
    v.read(obj, "dataset", "numeric_columns", out.schema.numeric_columns);
    v.read(obj, "dataset", "categorical_columns", out.schema.categorical_columns);
    v.read(obj, "dataset", "max_malformed_rows", out.schema.max_malformed_rows);
    if (out.schema.numeric_columns.empty() && out.schema.categorical_columns.empty()) {
      v.fail("dataset needs numeric_columns or categorical_columns");
    }
    if (out.schema.max_malformed_rows < 0) {
      v.fail("dataset.max_malformed_rows must be >= 0");
    }
  } else {
    v.fail("dataset.type '" + type + "' is not one of {synthetic, csv}");
  }
}

ExperimentConfig parse_config_impl(const json& root) {
  Validator v;
  ExperimentConfig cfg;
  if (!root.is_object()) {
    throw ConfigError("top-level config must be a JSON object");
  }
  v.check_keys(root, "config",
               {"methods", "clients", "rounds", "local_epochs", "lr", "batch_size",
                "alpha", "schedule", "metric", "dataset", "partition", "model",
                "test_fraction", "seeds", "output_dir", "participation_fraction",
                "weighted_aggregation", "nc_accuracy_threshold"});

  if (!v.read(root, "config", "methods", cfg.methods)) {
    v.fail("missing required key 'methods'");
  }
  v.read(root, "config", "clients", cfg.clients);
  v.read(root, "config", "rounds", cfg.rounds);
  v.read(root, "config", "local_epochs", cfg.local_epochs);
  v.read(root, "config", "lr", cfg.lr);
  v.read(root, "config", "batch_size", cfg.batch_size);
  v.read(root, "config", "alpha", cfg.alpha);
  v.read(root, "config", "test_fraction", cfg.test_fraction);
  v.read(root, "config", "seeds", cfg.seeds);
  v.read(root, "config", "output_dir", cfg.output_dir);
  v.read(root, "config", "participation_fraction", cfg.participation_fraction);
  v.read(root, "config", "weighted_aggregation", cfg.weighted_aggregation);
  v.read(root, "config", "nc_accuracy_threshold", cfg.nc_accuracy_threshold);

  if (root.contains("schedule")) {
    const auto& sched = root.at("schedule");
    v.check_keys(sched, "schedule", {"mode", "per_round_reset"});
    std::string mode;
    if (v.read(sched, "schedule", "mode", mode)) {
      cfg.schedule_mode = parse_schedule_mode(mode, v);
    }
    v.read(sched, "schedule", "per_round_reset", cfg.schedule_per_round_reset);
  }
  if (root.contains("metric")) {
    const auto& metric = root.at("metric");
    v.check_keys(metric, "metric", {"kind", "epsilon"});
    std::string kind;
    if (v.read(metric, "metric", "kind", kind)) {
      cfg.metric.kind = parse_metric_kind(kind, v);
    }
    v.read(metric, "metric", "epsilon", cfg.metric.epsilon);
    if (cfg.metric.epsilon <= 0.0) v.fail("metric.epsilon must be > 0");
  }
  if (root.contains("dataset")) {
    if (root.at("dataset").is_object()) {
      parse_dataset(root.at("dataset"), cfg.dataset, v);
    } else {
      v.fail("'dataset' must be an object");
    }
  } else {
    v.fail("missing required key 'dataset'");
  }
  if (root.contains("partition")) {
    const auto& part = root.at("partition");
    v.check_keys(part, "partition", {"niid1_feature_fraction", "niid2_alpha"});
    v.read(part, "partition", "niid1_feature_fraction", cfg.partition.niid1_feature_fraction);
    if (part.contains("niid2_alpha") && !part.at("niid2_alpha").is_null()) {
      double alpha = 0.0;
      if (v.read(part, "partition", "niid2_alpha", alpha)) {
        cfg.partition.niid2_alpha = alpha;
      }
    }
    if (!(cfg.partition.niid1_feature_fraction > 0.0 &&
          cfg.partition.niid1_feature_fraction <= 1.0)) {
      v.fail("partition.niid1_feature_fraction must lie in (0, 1]");
    }
    if (cfg.partition.niid2_alpha && *cfg.partition.niid2_alpha <= 0.0) {
      v.fail("partition.niid2_alpha must be > 0");
    }
  }
  if (root.contains("model")) {
    const auto& model = root.at("model");
    v.check_keys(model, "model",
                 {"hidden", "head_depth", "hetero", "depth_range", "width_range"});
    v.read(model, "model", "hidden", cfg.model.hidden);
    v.read(model, "model", "head_depth", cfg.model.head_depth);
    v.read(model, "model", "hetero", cfg.model.hetero);
    std::vector<int> range;
    if (v.read(model, "model", "depth_range", range)) {
      if (range.size() == 2) {
        cfg.model.depth_range = {range[0], range[1]};
      } else {
        v.fail("model.depth_range must be a [min, max] pair");
      }
    }
    range.clear();
    if (v.read(model, "model", "width_range", range)) {
      if (range.size() == 2) {
        cfg.model.width_range = {range[0], range[1]};
      } else {
        v.fail("model.width_range must be a [min, max] pair");
      }
    }
  }

  // Cross-field checks.
  if (cfg.methods.empty()) {
    v.fail("methods must be nonempty");
  }
  std::set<std::string> seen;
  for (const auto& name : cfg.methods) {
    try {
      const auto canonical = method_name(parse_method(name, cfg.metric));
      if (!seen.insert(canonical).second) {
        v.fail("duplicate method '" + canonical + "'");
      }
    } catch (const ConfigError& e) {
      v.fail(e.what());
    }
  }
  if (cfg.clients < 1) v.fail("clients must be >= 1");
  if (cfg.rounds < 1) v.fail("rounds must be >= 1");
  if (cfg.local_epochs < 1) v.fail("local_epochs must be >= 1");
  if (cfg.lr < 0.0) v.fail("lr must be >= 0");
  if (cfg.batch_size < 1) v.fail("batch_size must be >= 1");
  if (cfg.alpha < 0.0) v.fail("alpha must be >= 0");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    v.fail("test_fraction must lie in (0, 1)");
  }
  if (cfg.seeds.empty()) v.fail("seeds must be nonempty");
  if (cfg.output_dir.empty()) v.fail("output_dir must be nonempty");
  if (!(cfg.participation_fraction > 0.0 && cfg.participation_fraction <= 1.0)) {
    v.fail("participation_fraction must lie in (0, 1]");
  }
  if (!(cfg.nc_accuracy_threshold >= 0.0 && cfg.nc_accuracy_threshold <= 1.0)) {
    v.fail("nc_accuracy_threshold must lie in [0, 1]");
  }
  for (int h : cfg.model.hidden) {
    if (h < 1) v.fail("model.hidden entries must be >= 1");
  }
  const int layer_count = static_cast<int>(cfg.model.hidden.size()) + 1;
  if (cfg.model.head_depth < 1 || cfg.model.head_depth > layer_count) {
    v.fail("model.head_depth must lie in [1, layer count]");
  }
  if (cfg.model.hetero) {
    if (cfg.model.depth_range.first < 1 ||
        cfg.model.depth_range.second < cfg.model.depth_range.first) {
      v.fail("model.depth_range must be a nonempty positive range");
    }
    if (cfg.model.width_range.first < 1 ||
        cfg.model.width_range.second < cfg.model.width_range.first) {
      v.fail("model.width_range must be a nonempty positive range");
    }
    if (cfg.model.hidden.empty()) {
      v.fail("model.hetero needs a nonempty model.hidden (its last entry pins the "
             "shared head input width)");
    }
    if (cfg.model.head_depth != 1) {
      v.fail("model.hetero supports head_depth 1 only");
    }
  }
  v.finish();
  return cfg;
}

}  // namespace

std::vector<Method> ExperimentConfig::resolved_methods() const {
  std::vector<Method> out;
  out.reserve(methods.size());
  for (const auto& name : methods) {
    out.push_back(parse_method(name, metric));
  }
  return out;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

ExperimentConfig parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not well-formed JSON: ") + e.what());
  }
  return parse_config_impl(root);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json root;
  root["methods"] = cfg.methods;
  root["clients"] = cfg.clients;
  root["rounds"] = cfg.rounds;
  root["local_epochs"] = cfg.local_epochs;
  root["lr"] = cfg.lr;
  root["batch_size"] = cfg.batch_size;
  root["alpha"] = cfg.alpha;
  root["schedule"] = {{"mode", schedule_mode_name(cfg.schedule_mode)},
                      {"per_round_reset", cfg.schedule_per_round_reset}};
  root["metric"] = {{"kind", metric_kind_name(cfg.metric.kind)},
                    {"epsilon", cfg.metric.epsilon}};
  json ds;
  if (cfg.dataset.type == DatasetConfig::Type::kSynthetic) {
    ds["type"] = "synthetic";
    ds["samples_per_client"] = cfg.dataset.samples_per_client;
    ds["classes"] = cfg.dataset.classes;
    ds["feature_dim"] = cfg.dataset.feature_dim;
    ds["radius"] = cfg.dataset.radius;
    ds["noise"] = cfg.dataset.noise;
    ds["rotation_deg"] = cfg.dataset.rotation_deg;
  } else {
    ds["type"] = "csv";
    ds["path"] = cfg.dataset.path;
    ds["label_column"] = cfg.dataset.schema.label_column;
    ds["numeric_columns"] = cfg.dataset.schema.numeric_columns;
    ds["categorical_columns"] = cfg.dataset.schema.categorical_columns;
    ds["max_malformed_rows"] = cfg.dataset.schema.max_malformed_rows;
  }
  root["dataset"] = std::move(ds);
  json part;
  part["niid1_feature_fraction"] = cfg.partition.niid1_feature_fraction;
  if (cfg.partition.niid2_alpha) {
    part["niid2_alpha"] = *cfg.partition.niid2_alpha;
  }
  root["partition"] = std::move(part);
  root["model"] = {{"hidden", cfg.model.hidden},
                   {"head_depth", cfg.model.head_depth},
                   {"hetero", cfg.model.hetero},
                   {"depth_range", {cfg.model.depth_range.first, cfg.model.depth_range.second}},
                   {"width_range", {cfg.model.width_range.first, cfg.model.width_range.second}}};
  root["test_fraction"] = cfg.test_fraction;
  root["seeds"] = cfg.seeds;
  root["output_dir"] = cfg.output_dir;
  root["participation_fraction"] = cfg.participation_fraction;
  root["weighted_aggregation"] = cfg.weighted_aggregation;
  root["nc_accuracy_threshold"] = cfg.nc_accuracy_threshold;
  return root.dump(2);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace unideal

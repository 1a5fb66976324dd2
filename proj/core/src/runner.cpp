#include "unideal/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "unideal/log.hpp"
#include "unideal/stats.hpp"

namespace unideal {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDataTag = 0x31;
constexpr std::uint64_t kFeatureTag = 0x32;
constexpr std::uint64_t kPartitionTag = 0x33;
constexpr std::uint64_t kSplitTag = 0x34;
constexpr std::uint64_t kArchTag = 0x35;
constexpr std::uint64_t kInitTag = 0x36;
constexpr std::uint64_t kPriorTag = 0x37;

Architecture client_architecture(const ExperimentConfig& cfg, std::uint64_t seed, int client,
                                 int in_dim, int classes) {
  if (cfg.model.hetero) {
    return generate_hetero_arch(mix_seed(seed, kArchTag, static_cast<std::uint64_t>(client)),
                                in_dim, classes, cfg.model.depth_range, cfg.model.width_range,
                                cfg.model.hidden.back());
  }
  Architecture arch;
  arch.layer_dims.push_back(in_dim);
  arch.layer_dims.insert(arch.layer_dims.end(), cfg.model.hidden.begin(),
                         cfg.model.hidden.end());
  arch.layer_dims.push_back(classes);
  arch.head_depth = cfg.model.head_depth;
  return arch;
}

// Equal-size random chunks covering [0, n); the first n % k clients get one
// extra sample.
std::vector<std::vector<int>> equal_partition(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::vector<int>> parts(static_cast<std::size_t>(k));
  const int base = n / k;
  const int extra = n % k;
  int at = 0;
  for (int c = 0; c < k; ++c) {
    const int take = base + (c < extra ? 1 : 0);
    parts[static_cast<std::size_t>(c)].assign(perm.begin() + at, perm.begin() + at + take);
    std::sort(parts[static_cast<std::size_t>(c)].begin(),
              parts[static_cast<std::size_t>(c)].end());
    at += take;
  }
  return parts;
}

std::string optional_to_string(const std::optional<int>& v) {
  return v ? std::to_string(*v) : "never";
}

std::string optional_to_string(const std::optional<std::uint64_t>& v) {
  return v ? std::to_string(*v) : "never";
}

std::string sanitize_csv_field(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::vector<ClientState> setup_clients(const ExperimentConfig& cfg, std::uint64_t seed) {
  const int k = cfg.clients;
  std::vector<ClientState> clients;
  clients.reserve(static_cast<std::size_t>(k));

  if (cfg.dataset.type == DatasetConfig::Type::kSynthetic) {
    auto spec = rotated_domains_spec(k, cfg.dataset.classes, cfg.dataset.feature_dim,
                                     cfg.dataset.radius, cfg.dataset.noise,
                                     cfg.dataset.rotation_deg);
    if (cfg.partition.niid2_alpha) {
      // NIID-2 on synthetic domains: skew each client's class prior, since
      // there is no shared sample pool to repartition across feature spaces.
      Rng prior_rng(mix_seed(seed, kPriorTag));
      for (int c = 0; c < k; ++c) {
        spec.client_class_priors.push_back(
            prior_rng.dirichlet(*cfg.partition.niid2_alpha, cfg.dataset.classes));
      }
    }
    const auto datasets =
        synth_cross_domain(spec, k, cfg.dataset.samples_per_client, mix_seed(seed, kDataTag));
    for (int c = 0; c < k; ++c) {
      const auto& ds = datasets[static_cast<std::size_t>(c)];
      auto view = feature_subsample(ds, cfg.partition.niid1_feature_fraction,
                                    mix_seed(seed, kFeatureTag, static_cast<std::uint64_t>(c)));
      train_test_split(view, ds.labels, cfg.test_fraction,
                       mix_seed(seed, kSplitTag, static_cast<std::uint64_t>(c)));
      ClientState client;
      client.client_id = c;
      client.data = materialize(ds, view, /*standardize=*/false);
      const auto arch = client_architecture(cfg, seed, c,
                                            static_cast<int>(view.feature_indices.size()),
                                            ds.class_count);
      Rng init_rng(mix_seed(seed, kInitTag, static_cast<std::uint64_t>(c)));
      client.model = DecoupledModel::init(arch, init_rng);
      clients.push_back(std::move(client));
    }
    return clients;
  }

  const auto loaded = load_csv_dataset(cfg.dataset.path, cfg.dataset.schema);
  const auto& ds = loaded.dataset;
  if (loaded.rows_dropped_missing > 0) {
    log::info("dropped " + std::to_string(loaded.rows_dropped_missing) +
              " rows with missing values from " + cfg.dataset.path);
  }
  std::vector<std::vector<int>> parts;
  if (cfg.partition.niid2_alpha) {
    parts = dirichlet_label_skew(ds.labels, *cfg.partition.niid2_alpha, k,
                                 mix_seed(seed, kPartitionTag));
  } else {
    parts = equal_partition(static_cast<int>(ds.size()), k, mix_seed(seed, kPartitionTag));
  }
  for (int c = 0; c < k; ++c) {
    auto view = feature_subsample(ds, cfg.partition.niid1_feature_fraction,
                                  mix_seed(seed, kFeatureTag, static_cast<std::uint64_t>(c)));
    view.sample_indices = parts[static_cast<std::size_t>(c)];
    train_test_split(view, ds.labels, cfg.test_fraction,
                     mix_seed(seed, kSplitTag, static_cast<std::uint64_t>(c)));
    if (view.stratify_fallback) {
      log::info("client " + std::to_string(c) +
                ": class with a single sample, unstratified split");
    }
    ClientState client;
    client.client_id = c;
    client.data = materialize(ds, view, /*standardize=*/true);
    const auto arch = client_architecture(cfg, seed, c,
                                          static_cast<int>(view.feature_indices.size()),
                                          ds.class_count);
    Rng init_rng(mix_seed(seed, kInitTag, static_cast<std::uint64_t>(c)));
    client.model = DecoupledModel::init(arch, init_rng);
    clients.push_back(std::move(client));
  }
  return clients;
}

FederationResult run_single(const ExperimentConfig& cfg, const Method& method,
                            std::uint64_t seed, const std::vector<int>* execution_order) {
  auto clients = setup_clients(cfg, seed);
  FederationConfig fc;
  fc.method = method;
  fc.hyper = {cfg.lr, cfg.local_epochs, cfg.batch_size, cfg.alpha};
  fc.schedule_mode = cfg.schedule_mode;
  fc.schedule_per_round_reset = cfg.schedule_per_round_reset;
  fc.rounds = cfg.rounds;
  fc.seed = seed;
  fc.participation_fraction = cfg.participation_fraction;
  fc.weighted_aggregation = cfg.weighted_aggregation;
  return run_federation(fc, std::move(clients), execution_order);
}

std::string rounds_csv_text(const std::vector<RoundReport>& rounds) {
  std::ostringstream out;
  const std::size_t k = rounds.empty() ? 0 : rounds.front().client_test_acc.size();
  out << "round,mean_accuracy,mean_train_objective,bytes_up,bytes_down";
  for (std::size_t c = 0; c < k; ++c) out << ",acc_client_" << c;
  for (std::size_t c = 0; c < k; ++c) out << ",train_loss_client_" << c;
  out << "\n";
  for (const auto& r : rounds) {
    out << r.round << "," << format_double(r.mean_accuracy) << ","
        << format_double(r.mean_train_objective) << "," << r.bytes_up << ","
        << r.bytes_down;
    for (double a : r.client_test_acc) out << "," << format_double(a);
    for (double l : r.client_train_loss) out << "," << format_double(l);
    out << "\n";
  }
  return out.str();
}

SuiteReport run_suite(const ExperimentConfig& cfg, const std::vector<int>* execution_order) {
  fs::create_directories(cfg.output_dir);
  SuiteReport report;
  const auto methods = cfg.resolved_methods();
  for (const auto& method : methods) {
    const std::string name = method_name(method);
    MethodSummary summary;
    summary.method = name;
    bool comm_recorded = false;
    for (std::uint64_t seed : cfg.seeds) {
      CellResult cell;
      cell.method = name;
      cell.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto result = run_single(cfg, method, seed);
        cell.ok = true;
        cell.best_accuracy = result.best_mean_accuracy;
        cell.best_round = result.best_round;
        for (const auto& r : result.rounds) {
          cell.total_bytes_up += r.bytes_up;
          cell.total_bytes_down += r.bytes_down;
        }
        cell.comm = communication_accounting(result.rounds, cfg.nc_accuracy_threshold);
        const std::string file =
            (fs::path(cfg.output_dir) /
             ("rounds_" + name + "_" + std::to_string(seed) + ".csv"))
                .string();
        write_file_atomic(file, rounds_csv_text(result.rounds));
        summary.best_accuracies.push_back(cell.best_accuracy);
        if (!comm_recorded) {
          summary.bytes_per_round = cell.comm.bytes_per_round;
          summary.rounds_to_threshold = cell.comm.rounds_to_threshold;
          summary.total_bytes_to_threshold = cell.comm.total_bytes_to_threshold;
          comm_recorded = true;
        }
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
        report.all_ok = false;
        log::info("cell (" + name + ", seed " + std::to_string(seed) +
                  ") failed: " + cell.error);
      }
      cell.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log::debug("cell (" + name + ", seed " + std::to_string(seed) + ") done in " +
                 format_double(cell.wall_seconds) + "s");
      report.cells.push_back(std::move(cell));
    }
    if (!summary.best_accuracies.empty()) {
      summary.mean_accuracy = mean(summary.best_accuracies);
      summary.std_accuracy = summary.best_accuracies.size() >= 2
                                 ? sample_std(summary.best_accuracies)
                                 : 0.0;
    }
    report.methods.push_back(std::move(summary));
  }
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    for (std::size_t j = i + 1; j < report.methods.size(); ++j) {
      const auto& a = report.methods[i];
      const auto& b = report.methods[j];
      if (a.best_accuracies.size() < 2 || b.best_accuracies.size() < 2) continue;
      const auto tt = students_t_test(a.best_accuracies, b.best_accuracies);
      report.t_tests.push_back({a.method, b.method, tt.t, tt.df, tt.p});
    }
  }
  write_file_atomic((fs::path(cfg.output_dir) / "summary.csv").string(),
                    summary_csv_text(report));
  write_file_atomic((fs::path(cfg.output_dir) / "summary.json").string(),
                    summary_json_text(report, cfg));
  return report;
}

std::string summary_csv_text(const SuiteReport& report) {
  std::ostringstream out;
  out << "method,seed,ok,best_accuracy,best_round,total_bytes_up,total_bytes_down,"
         "bytes_per_round,rounds_to_threshold,total_bytes_to_threshold,error\n";
  for (const auto& cell : report.cells) {
    out << cell.method << "," << cell.seed << "," << (cell.ok ? 1 : 0) << ","
        << format_double(cell.best_accuracy) << "," << cell.best_round << ","
        << cell.total_bytes_up << "," << cell.total_bytes_down << ","
        << cell.comm.bytes_per_round << ","
        << optional_to_string(cell.comm.rounds_to_threshold) << ","
        << optional_to_string(cell.comm.total_bytes_to_threshold) << ","
        << sanitize_csv_field(cell.error) << "\n";
  }
  return out.str();
}

std::string summary_json_text(const SuiteReport& report, const ExperimentConfig& cfg) {
  nlohmann::json root;
  root["config"] = nlohmann::json::parse(serialize_config(cfg));
  root["all_ok"] = report.all_ok;
  auto& cells = root["cells"] = nlohmann::json::array();
  for (const auto& cell : report.cells) {
    nlohmann::json c;
    c["method"] = cell.method;
    c["seed"] = cell.seed;
    c["ok"] = cell.ok;
    if (cell.ok) {
      c["best_accuracy"] = cell.best_accuracy;
      c["best_round"] = cell.best_round;
      c["total_bytes_up"] = cell.total_bytes_up;
      c["total_bytes_down"] = cell.total_bytes_down;
    } else {
      c["error"] = cell.error;
    }
    cells.push_back(std::move(c));
  }
  auto& methods = root["methods"] = nlohmann::json::array();
  for (const auto& m : report.methods) {
    nlohmann::json j;
    j["method"] = m.method;
    j["seeds_ok"] = m.best_accuracies.size();
    j["best_accuracies"] = m.best_accuracies;
    j["mean_accuracy"] = m.mean_accuracy;
    j["std_accuracy"] = m.std_accuracy;
    j["bytes_per_round"] = m.bytes_per_round;
    if (m.rounds_to_threshold) {
      j["rounds_to_threshold"] = *m.rounds_to_threshold;
      j["total_bytes_to_threshold"] = *m.total_bytes_to_threshold;
    } else {
      j["rounds_to_threshold"] = nullptr;
      j["total_bytes_to_threshold"] = nullptr;
    }
    methods.push_back(std::move(j));
  }
  auto& tests = root["t_tests"] = nlohmann::json::array();
  for (const auto& t : report.t_tests) {
    tests.push_back({{"method_a", t.method_a},
                     {"method_b", t.method_b},
                     {"t", t.t},
                     {"df", t.df},
                     {"p", t.p}});
  }
  return root.dump(2) + "\n";
}

std::string render_summary_table(const SuiteReport& report) {
  const auto pad = [](std::string s, std::size_t width) {
    s.append(s.size() < width ? width - s.size() : 1, ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("method", 20) << pad("seeds", 6) << pad("mean_accuracy", 21)
      << pad("std_accuracy", 21) << pad("bytes_per_round", 16) << pad("N_c", 6)
      << "C_t\n";
  for (const auto& m : report.methods) {
    out << pad(m.method, 20) << pad(std::to_string(m.best_accuracies.size()), 6)
        << pad(format_double(m.mean_accuracy), 21)
        << pad(format_double(m.std_accuracy), 21)
        << pad(std::to_string(m.bytes_per_round), 16)
        << pad(optional_to_string(m.rounds_to_threshold), 6)
        << optional_to_string(m.total_bytes_to_threshold) << "\n";
  }
  if (!report.t_tests.empty()) {
    out << "\npairwise Student's t-tests (two-sided)\n";
    for (const auto& t : report.t_tests) {
      out << "  " << t.method_a << " vs " << t.method_b << ": t=" << format_double(t.t)
          << " df=" << format_double(t.df) << " p=" << format_double(t.p) << "\n";
    }
  }
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open " + tmp + " for writing");
    }
    out << contents;
  }
  fs::rename(tmp, path);
}

}  // namespace unideal

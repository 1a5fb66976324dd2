#include "unideal/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace unideal {

namespace {

constexpr std::uint64_t kRoundStreamTag = 0x21;
constexpr std::uint64_t kParticipationTag = 0x22;

ParamSnapshot take_upload(const ClientState& client, MethodKind kind) {
  switch (kind) {
    case MethodKind::kFedAvg:
      return client.model.full_snapshot();
    case MethodKind::kFedRep:
      return client.model.extractor_snapshot();
    default:
      return client.model.head_snapshot();
  }
}

}  // namespace

bool shares_head(MethodKind kind) {
  switch (kind) {
    case MethodKind::kPartialAvg:
    case MethodKind::kPartialAvgKd:
    case MethodKind::kPartialKd:
    case MethodKind::kUnideal:
      return true;
    default:
      return false;
  }
}

bool uses_kd(MethodKind kind) {
  return kind == MethodKind::kPartialAvgKd || kind == MethodKind::kPartialKd ||
         kind == MethodKind::kUnideal;
}

bool requires_homogeneous(MethodKind kind) {
  return kind == MethodKind::kFedAvg || kind == MethodKind::kFedRep;
}

std::string method_name(const Method& method) {
  switch (method.kind) {
    case MethodKind::kLocal:
      return "local";
    case MethodKind::kFedAvg:
      return "fedavg";
    case MethodKind::kFedRep:
      return "fedrep";
    case MethodKind::kPartialAvg:
      return "partial_avg";
    case MethodKind::kPartialAvgKd:
      return "partial_avg_kd";
    case MethodKind::kPartialKd:
      return "partial_kd";
    case MethodKind::kUnideal:
      switch (method.metric.kind) {
        case MetricKind::kCosine:
          return "unideal";
        case MetricKind::kInvL1:
          return "unideal_inv_l1";
        case MetricKind::kInvL2:
          return "unideal_inv_l2";
      }
  }
  return "unknown";
}

Method parse_method(const std::string& name, const SimilarityMetric& default_metric) {
  Method m;
  m.metric = default_metric;
  if (name == "local") {
    m.kind = MethodKind::kLocal;
  } else if (name == "fedavg") {
    m.kind = MethodKind::kFedAvg;
  } else if (name == "fedrep") {
    m.kind = MethodKind::kFedRep;
  } else if (name == "partial_avg") {
    m.kind = MethodKind::kPartialAvg;
  } else if (name == "partial_avg_kd") {
    m.kind = MethodKind::kPartialAvgKd;
  } else if (name == "partial_kd") {
    m.kind = MethodKind::kPartialKd;
  } else if (name == "unideal") {
    m.kind = MethodKind::kUnideal;
  } else if (name == "unideal_cosine") {
    m.kind = MethodKind::kUnideal;
    m.metric.kind = MetricKind::kCosine;
  } else if (name == "unideal_inv_l1") {
    m.kind = MethodKind::kUnideal;
    m.metric.kind = MetricKind::kInvL1;
  } else if (name == "unideal_inv_l2") {
    m.kind = MethodKind::kUnideal;
    m.metric.kind = MetricKind::kInvL2;
  } else {
    throw ConfigError("unknown method '" + name + "'");
  }
  return m;
}

HeadSnapshot aggregate_heads(const std::vector<HeadSnapshot>& snapshots) {
  return aggregate_snapshots(snapshots);
}

ParamSnapshot aggregate_snapshots(const std::vector<ParamSnapshot>& snapshots,
                                  const std::vector<double>* weights) {
  if (snapshots.empty()) {
    throw InvalidInputError("aggregate_snapshots: empty snapshot list");
  }
  for (const auto& snap : snapshots) {
    if (snap.signature != snapshots.front().signature) {
      throw IncompatibleHeadError("aggregate_snapshots: signature mismatch");
    }
  }
  ParamSnapshot out;
  out.signature = snapshots.front().signature;
  out.values.assign(snapshots.front().values.size(), 0.0);
  if (weights == nullptr) {
    for (const auto& snap : snapshots) {
      for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] += snap.values[i];
      }
    }
    const double k = static_cast<double>(snapshots.size());
    for (auto& v : out.values) v /= k;
  } else {
    if (weights->size() != snapshots.size()) {
      throw ShapeError("aggregate_snapshots: weight count mismatch");
    }
    const double total = std::accumulate(weights->begin(), weights->end(), 0.0);
    if (total <= 0.0) {
      throw InvalidInputError("aggregate_snapshots: weights must sum to > 0");
    }
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
      const double w = (*weights)[k] / total;
      for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] += w * snapshots[k].values[i];
      }
    }
  }
  return out;
}

LocalRoundStats local_round(ClientState& client, const ParamSnapshot* broadcast,
                            const Method& method, const CurriculumSchedule& schedule,
                            int schedule_step_base, const Hyper& hyper, Rng& rng) {
  if (hyper.local_epochs < 1 || hyper.batch_size < 1) {
    throw ConfigError("local_round: local_epochs and batch_size must be >= 1");
  }
  if (hyper.alpha < 0.0) {
    throw ConfigError("local_round: alpha must be >= 0");
  }
  switch (method.kind) {
    case MethodKind::kFedAvg:
      client.model.install_full(*broadcast);
      break;
    case MethodKind::kFedRep:
      client.model.install_extractor(*broadcast);
      break;
    case MethodKind::kPartialAvg:
    case MethodKind::kPartialAvgKd:
      client.model.install_head(*broadcast);
      break;
    default:
      break;  // local / partial_kd / unideal keep their parameters
  }
  const bool kd_active = uses_kd(method.kind) && hyper.alpha > 0.0;
  if (kd_active && broadcast == nullptr) {
    throw InvalidInputError("local_round: KD method needs a broadcast head");
  }
  if (kd_active && broadcast->signature != client.model.head_signature()) {
    throw IncompatibleHeadError("local_round: broadcast head incompatible with model");
  }

  const int n_train = static_cast<int>(client.data.train_y.size());
  const int classes = client.model.arch.class_count();
  LocalRoundStats stats;
  double objective_sum = 0.0;
  for (int epoch = 0; epoch < hyper.local_epochs; ++epoch) {
    const int step = schedule_step_base + epoch;
    const auto order = rng.permutation(n_train);
    for (int start = 0; start < n_train; start += hyper.batch_size) {
      const int b = std::min(hyper.batch_size, n_train - start);
      Matrix xb(static_cast<std::size_t>(b), client.data.train_x.cols());
      std::vector<int> yb(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const int src = order[static_cast<std::size_t>(start + i)];
        std::copy(client.data.train_x.row(src).begin(), client.data.train_x.row(src).end(),
                  xb.row(static_cast<std::size_t>(i)).begin());
        yb[static_cast<std::size_t>(i)] = client.data.train_y[static_cast<std::size_t>(src)];
      }
      validate_batch({xb, yb}, classes);

      double total_loss;
      Matrix logit_grad;
      std::vector<Matrix> extractor_acts;
      std::vector<Matrix> head_acts;
      if (kd_active) {
        auto dual = forward_dual(client.model, *broadcast, xb);
        const auto ce = cross_entropy_loss(dual.student_logits, yb);
        // Unideal masks by the curriculum; the plain KD ablations keep the
        // whole batch, i.e. the threshold sits at the minimum score.
        const auto scores =
            mutual_eval_scores(dual.teacher_logits, dual.student_logits, method.metric);
        const int kept = method.kind == MethodKind::kUnideal
                             ? kept_count(step, schedule, b)
                             : b;
        const double threshold = adjustable_threshold(scores, kept);
        const auto kd = clkd_loss(dual.teacher_logits, dual.student_logits, threshold, scores);
        auto combined = combined_objective(ce, kd, hyper.alpha);
        total_loss = combined.loss;
        logit_grad = std::move(combined.student_logit_grad);
        extractor_acts = std::move(dual.extractor_acts);
        head_acts = std::move(dual.student_head_acts);
      } else {
        extractor_acts = forward_layers(client.model.extractor, xb);
        head_acts = forward_layers(client.model.head, extractor_acts.back());
        auto ce = cross_entropy_loss(head_acts.back(), yb);
        total_loss = ce.loss;
        logit_grad = std::move(ce.logit_grad);
      }
      auto head_back = backward_layers(client.model.head, head_acts, logit_grad);
      auto extractor_back =
          backward_layers(client.model.extractor, extractor_acts, head_back.input_grad);
      sgd_step(client.model.head, head_back.grads, hyper.lr);
      sgd_step(client.model.extractor, extractor_back.grads, hyper.lr);
      objective_sum += total_loss;
      ++stats.batches;
    }
  }
  stats.train_objective = stats.batches > 0 ? objective_sum / stats.batches : 0.0;
  return stats;
}

double evaluate_accuracy(const DecoupledModel& model, const Matrix& inputs,
                         const std::vector<int>& labels) {
  if (labels.empty()) {
    throw InvalidInputError("evaluate_accuracy: empty evaluation set");
  }
  const Matrix logits = model.logits(inputs);
  int correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const std::size_t arg =
        static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (static_cast<int>(arg) == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

FederationResult run_federation(const FederationConfig& config,
                                std::vector<ClientState> clients,
                                const std::vector<int>* execution_order) {
  const int k = static_cast<int>(clients.size());
  if (k == 0) {
    throw ConfigError("run_federation: no clients");
  }
  if (config.rounds < 1) {
    throw ConfigError("run_federation: rounds must be >= 1");
  }
  if (!(config.participation_fraction > 0.0 && config.participation_fraction <= 1.0)) {
    throw ConfigError("run_federation: participation_fraction must lie in (0, 1]");
  }
  const MethodKind kind = config.method.kind;
  if (requires_homogeneous(kind)) {
    for (const auto& c : clients) {
      if (!(c.model.arch == clients.front().model.arch)) {
        throw ConfigError("run_federation: " + method_name(config.method) +
                          " requires homogeneous architectures");
      }
    }
  }
  if (shares_head(kind)) {
    for (const auto& c : clients) {
      if (c.model.head_signature() != clients.front().model.head_signature()) {
        throw IncompatibleHeadError(
            "run_federation: clients disagree on the head signature");
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  if (execution_order != nullptr) {
    auto sorted = *execution_order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != order) {
      throw ConfigError("run_federation: execution_order must permute [0, K)");
    }
    order = *execution_order;
  }

  CurriculumSchedule schedule;
  schedule.mode = config.schedule_mode;
  schedule.total_steps = config.schedule_per_round_reset
                             ? config.hyper.local_epochs
                             : config.rounds * config.hyper.local_epochs;

  const bool communicates = kind != MethodKind::kLocal;
  std::optional<ParamSnapshot> shared;
  if (communicates) {
    std::vector<ParamSnapshot> initial;
    initial.reserve(clients.size());
    for (const auto& c : clients) initial.push_back(take_upload(c, kind));
    shared = aggregate_snapshots(initial);
  }

  FederationResult result;
  result.rounds.reserve(static_cast<std::size_t>(config.rounds));
  for (int t = 0; t < config.rounds; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::uint8_t> participating(static_cast<std::size_t>(k), 1);
    if (config.participation_fraction < 1.0) {
      const int m = std::clamp(
          static_cast<int>(std::llround(config.participation_fraction * k)), 1, k);
      Rng prng(mix_seed(config.seed, kParticipationTag, static_cast<std::uint64_t>(t)));
      const auto perm = prng.permutation(k);
      participating.assign(static_cast<std::size_t>(k), 0);
      for (int i = 0; i < m; ++i) participating[static_cast<std::size_t>(perm[i])] = 1;
    }

    RoundReport report;
    report.round = t;
    report.client_train_loss.assign(static_cast<std::size_t>(k),
                                    std::numeric_limits<double>::quiet_NaN());
    report.client_test_acc.assign(static_cast<std::size_t>(k), 0.0);

    const int step_base = config.schedule_per_round_reset ? 0 : t * config.hyper.local_epochs;
    for (int idx : order) {
      if (!participating[static_cast<std::size_t>(idx)]) continue;
      auto& client = clients[static_cast<std::size_t>(idx)];
      Rng rng(mix_seed(config.seed, kRoundStreamTag,
                       static_cast<std::uint64_t>(client.client_id),
                       static_cast<std::uint64_t>(t)));
      const auto stats = local_round(client, shared ? &*shared : nullptr, config.method,
                                     schedule, step_base, config.hyper, rng);
      report.client_train_loss[static_cast<std::size_t>(idx)] = stats.train_objective;
      if (communicates) {
        report.bytes_down += shared->payload_bytes();
      }
    }

    if (communicates) {
      std::vector<ParamSnapshot> uploads;
      std::vector<double> weights;
      for (int idx = 0; idx < k; ++idx) {
        if (!participating[static_cast<std::size_t>(idx)]) continue;
        uploads.push_back(take_upload(clients[static_cast<std::size_t>(idx)], kind));
        weights.push_back(
            static_cast<double>(clients[static_cast<std::size_t>(idx)].data.train_y.size()));
        report.bytes_up += uploads.back().payload_bytes();
      }
      shared = aggregate_snapshots(uploads,
                                   config.weighted_aggregation ? &weights : nullptr);
    }

    double acc_sum = 0.0;
    double loss_sum = 0.0;
    int loss_count = 0;
    for (int idx = 0; idx < k; ++idx) {
      const auto& client = clients[static_cast<std::size_t>(idx)];
      const double acc =
          evaluate_accuracy(client.model, client.data.test_x, client.data.test_y);
      report.client_test_acc[static_cast<std::size_t>(idx)] = acc;
      acc_sum += acc;
      const double loss = report.client_train_loss[static_cast<std::size_t>(idx)];
      if (!std::isnan(loss)) {
        loss_sum += loss;
        ++loss_count;
      }
    }
    report.mean_accuracy = acc_sum / k;
    report.mean_train_objective = loss_count > 0 ? loss_sum / loss_count : 0.0;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.rounds.push_back(std::move(report));
  }

  for (const auto& r : result.rounds) {
    if (r.mean_accuracy > result.best_mean_accuracy || result.best_round < 0) {
      result.best_mean_accuracy = r.mean_accuracy;
      result.best_round = r.round;
    }
  }
  result.clients = std::move(clients);
  return result;
}

CommSummary communication_accounting(const std::vector<RoundReport>& reports,
                                     double accuracy_threshold) {
  CommSummary summary;
  if (reports.empty()) return summary;
  summary.bytes_per_round = reports.front().bytes_up + reports.front().bytes_down;
  for (const auto& r : reports) {
    if (r.mean_accuracy >= accuracy_threshold) {
      summary.rounds_to_threshold = r.round + 1;
      summary.total_bytes_to_threshold =
          summary.bytes_per_round * static_cast<std::uint64_t>(r.round + 1);
      break;
    }
  }
  return summary;
}

}  // namespace unideal

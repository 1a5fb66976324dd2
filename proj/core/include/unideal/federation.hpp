#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unideal/clkd.hpp"
#include "unideal/data.hpp"
#include "unideal/model.hpp"

namespace unideal {

enum class MethodKind {
  kLocal,         // no communication
  kFedAvg,        // full-parameter mean, installed each round
  kFedRep,        // extractor-parameter mean, installed each round
  kPartialAvg,    // head mean installed each round, plain CE
  kPartialAvgKd,  // head mean installed, plus full-batch KD against it
  kPartialKd,     // head retained, full-batch KD against the head mean
  kUnideal,       // head retained, curriculum-masked KD against the head mean
};

struct Method {
  MethodKind kind = MethodKind::kUnideal;
  SimilarityMetric metric;  // scores for kUnideal; ignored elsewhere
};

bool shares_head(MethodKind kind);
bool uses_kd(MethodKind kind);
bool requires_homogeneous(MethodKind kind);

// Canonical name, e.g. "partial_avg" or "unideal_inv_l1" (cosine is the
// unsuffixed "unideal"). Used for config strings and output file names.
std::string method_name(const Method& method);
Method parse_method(const std::string& name, const SimilarityMetric& default_metric);

struct Hyper {
  double lr = 0.05;
  int local_epochs = 1;
  int batch_size = 32;
  double alpha = 1.0;
};

struct ClientState {
  int client_id = 0;
  DecoupledModel model;
  ClientData data;
};

struct LocalRoundStats {
  double train_objective = 0.0;  // mean combined objective over the round's batches
  int batches = 0;
};

// Elementwise unweighted mean of shape-identical snapshots.
HeadSnapshot aggregate_heads(const std::vector<HeadSnapshot>& snapshots);

// Mean with optional weights (normalized internally).
ParamSnapshot aggregate_snapshots(const std::vector<ParamSnapshot>& snapshots,
                                  const std::vector<double>* weights = nullptr);

// One client's local work for one round: install whatever the method installs,
// then local_epochs of shuffled-minibatch SGD on the method's objective. The
// broadcast snapshot is never modified. The curriculum step for epoch e is
// schedule_step_base + e.
LocalRoundStats local_round(ClientState& client, const ParamSnapshot* broadcast,
                            const Method& method, const CurriculumSchedule& schedule,
                            int schedule_step_base, const Hyper& hyper, Rng& rng);

double evaluate_accuracy(const DecoupledModel& model, const Matrix& inputs,
                         const std::vector<int>& labels);

struct RoundReport {
  int round = 0;
  std::vector<double> client_train_loss;  // NaN for clients that sat the round out
  std::vector<double> client_test_acc;
  double mean_accuracy = 0.0;
  double mean_train_objective = 0.0;
  std::uint64_t bytes_up = 0;    // sum of serialized payloads actually uplinked
  std::uint64_t bytes_down = 0;  // sum of payloads broadcast to participants
  double wall_seconds = 0.0;
};

struct FederationConfig {
  Method method;
  Hyper hyper;
  ScheduleMode schedule_mode = ScheduleMode::kLinearKept;
  bool schedule_per_round_reset = false;
  int rounds = 50;
  std::uint64_t seed = 0;
  double participation_fraction = 1.0;
  bool weighted_aggregation = false;
};

struct FederationResult {
  std::vector<RoundReport> rounds;
  double best_mean_accuracy = 0.0;
  int best_round = -1;
  std::vector<ClientState> clients;  // final states
};

// Orchestrates rounds: broadcast the shared object, run every participating
// client's local_round, aggregate, evaluate, report. Deterministic in
// (config, clients); independent of intra-round execution order because each
// client draws from an isolated stream seeded by (seed, client_id, round) and
// aggregation happens at the barrier in client-index order. `execution_order`
// (a permutation of client indices) only reorders the local computations.
FederationResult run_federation(const FederationConfig& config,
                                std::vector<ClientState> clients,
                                const std::vector<int>* execution_order = nullptr);

struct CommSummary {
  std::uint64_t bytes_per_round = 0;                     // C_r
  std::optional<int> rounds_to_threshold;                // N_c, 1-based count
  std::optional<std::uint64_t> total_bytes_to_threshold; // C_t = C_r * N_c
};

CommSummary communication_accounting(const std::vector<RoundReport>& reports,
                                     double accuracy_threshold);

}  // namespace unideal

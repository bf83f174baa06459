#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "distzsl/dataset.hpp"
#include "distzsl/eval.hpp"
#include "distzsl/glasso.hpp"
#include "distzsl/losses.hpp"
#include "distzsl/model.hpp"
#include "distzsl/partition.hpp"

namespace distzsl {

struct TrainConfig {
  int rounds = 100;       // T
  int local_epochs = 2;   // E
  int batch_size = 64;    // B
  double local_lr = 1e-2;     // lambda
  double server_lr = 1.0;     // eta
  double delta_scale = 1.0;   // beta
  double sample_fraction = 1.0;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;

  LossWeights weights;
  LossTerms terms;
  double tau = 4.0;
  GlassoConfig<double> glasso;
  GammaSource gamma_source = GammaSource::Covariance;

  ModelMode mode = ModelMode::AttributeBased;
  PartitionSpec partition;  // carries K and the data scheme
  int eval_every = 1;
  int threads = 1;

  int num_clients() const { return partition.num_clients; }
  void validate() const;
};

/// Read-only state computed once by the server and shared with every client.
struct ServerContext {
  Eigen::MatrixXd prototypes;  // d_a x |Y|
  std::vector<GroupRange> groups;
  std::vector<int> seen_classes;
  SimilarityMatrix<double> similarity;
  DistillTargets<double> targets;
};

ServerContext make_server_context(const AttributeMatrix& attrs, const ClassSplit& split,
                                  const TrainConfig& cfg);

/// Mean per-step values of each weighted loss term during one client's local training.
struct LossBreakdown {
  double total = 0;
  double sce = 0;
  double kl = 0;
  double bc = 0;
  double ad = 0;
  double ce = 0;
};

struct ClientUpdate {
  ModelParams<double> delta;
  int num_local_classes = 0;
  int client_id = 0;
  double mean_local_loss = 0;
  LossBreakdown terms;
  ModelParams<double> local_model;  // pre-aggregation parameters, for per-client metrics
};

/// E epochs of seeded minibatch SGD starting from `global`, then delta = beta * (w' - w).
/// The RNG depends only on (cfg.seed, round, client_id).
ClientUpdate local_train(const ModelParams<double>& global, const FeatureDataset& client_data,
                         const ServerContext& ctx, const TrainConfig& cfg, int round,
                         int client_id, int num_local_classes);

/// w + eta * sum_k (n_k / sum_j n_j) delta_k with n_k the local class counts of the
/// participating clients; summed in ascending client id.
ModelParams<double> aggregate(const ModelParams<double>& global, std::vector<ClientUpdate> updates,
                              double server_lr);

/// Normalized aggregation coefficients, ordered by ascending client id.
std::vector<double> aggregation_weights(const std::vector<ClientUpdate>& updates);

/// Joint (or attribute-free cross-entropy) objective over a whole dataset, as one batch.
LossBreakdown dataset_loss(const ModelParams<double>& p, const FeatureDataset& data,
                           const ServerContext& ctx, const TrainConfig& cfg);

struct ClientRoundMetrics {
  int client_id = 0;
  double local_loss = 0;
  Metrics metrics;  // filled on evaluation rounds
};

struct RoundMetrics {
  int round = 0;  // 1-based count of completed rounds
  bool evaluated = false;
  Metrics global;
  std::optional<double> global_loss;
  double client_loss_mean = 0;
  double client_loss_std = 0;
  LossBreakdown terms;  // averaged over the round's participating clients
  std::vector<ClientRoundMetrics> clients;
};

struct SimulationResult {
  std::vector<RoundMetrics> rounds;
  ModelParams<double> final_model;
  ModelParams<double> initial_model;
  ClientPartition partition;
  ServerContext context;
};

using RoundCallback = std::function<void(int round, const ModelParams<double>& global)>;

SimulationResult run_simulation(const TrainTestSplit& data, const AttributeMatrix& attrs,
                                const TrainConfig& cfg, const RoundCallback& on_round = {});

/// Splits `ds` with cfg.seed and runs the simulation.
SimulationResult run_simulation(const FeatureDataset& ds, const AttributeMatrix& attrs,
                                const TrainConfig& cfg, const RoundCallback& on_round = {});

// CSV emitters. metrics.csv has the fixed header
// round,acc_c,acc_u,acc_s,acc_h,global_loss,client_loss_mean,client_loss_std
// and leaves absent values empty.
void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds);
void write_loss_terms_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds);
void write_client_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds);

}  // namespace distzsl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distzsl/dataset.hpp"

namespace distzsl {

enum class PartitionScheme { IID, Dirichlet, PCCD };

std::string to_string(PartitionScheme scheme);
PartitionScheme parse_partition_scheme(std::string_view text);

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::PCCD;
  double alpha = 0.5;  // Dirichlet concentration, used only by the Dirichlet scheme
  int num_clients = 10;
  double local_data_ratio = 1.0;  // rho
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClientPartition {
  std::vector<std::vector<int>> assignments;    // row indices into the train set, ascending
  std::vector<std::vector<int>> local_classes;  // classes with >= 1 assigned sample, ascending

  int num_clients() const { return static_cast<int>(assignments.size()); }
  int total_samples() const;
};

/// Distributes train rows across clients. Retries with seed + attempt (up to 100
/// attempts) when a client ends up empty; throws PartitionError after that.
ClientPartition partition(const FeatureDataset& train, const PartitionSpec& spec);

/// ceil(fraction * K) distinct client ids, ascending, determined by (seed, round).
std::vector<int> sample_clients(int num_clients, double fraction, int round, std::uint64_t seed);

/// Rows (client, class, count) with classes ascending within each client.
struct ClassCount {
  int client = 0;
  int class_id = 0;
  int count = 0;
};
std::vector<ClassCount> partition_summary(const FeatureDataset& train, const ClientPartition& part);

}  // namespace distzsl

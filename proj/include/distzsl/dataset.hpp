#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distzsl/common.hpp"

namespace distzsl {

/// Half-open range [start, end) of attribute dimensions forming one semantic group.
struct GroupRange {
  int start = 0;
  int end = 0;
  int size() const { return end - start; }
  bool operator==(const GroupRange&) const = default;
};

/// Class-level semantic vectors, one column per class (column y is the prototype a_y).
struct AttributeMatrix {
  Eigen::MatrixXd values;  // d_a x num_classes
  std::vector<GroupRange> groups;
  std::vector<std::string> class_names;  // optional, empty or one per class

  int dim() const { return static_cast<int>(values.rows()); }
  int num_classes() const { return static_cast<int>(values.cols()); }
  auto prototype(int y) const { return values.col(y); }

  /// Throws ValidationError unless the group ranges tile [0, d_a) and shapes are sane.
  void validate() const;
};

/// Evenly sized contiguous groups covering [0, dim).
std::vector<GroupRange> even_groups(int dim, int count);

struct ClassSplit {
  std::vector<int> seen;    // sorted
  std::vector<int> unseen;  // sorted
  double test_fraction_seen = 0.2;

  int num_classes() const { return static_cast<int>(seen.size() + unseen.size()); }
  bool is_seen(int y) const;
  bool is_unseen(int y) const;
  void validate(int num_classes) const;
};

struct FeatureDataset {
  Eigen::MatrixXd features;  // N x d_v, one sample per row
  std::vector<int> labels;
  ClassSplit split;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool empty() const { return features.rows() == 0; }

  /// Rows in the given order; the split is copied.
  FeatureDataset subset(std::span<const int> rows) const;
  /// Distinct labels in ascending order.
  std::vector<int> classes_present() const;
  void validate(int num_classes) const;
};

struct Corpus {
  FeatureDataset data;
  AttributeMatrix attributes;
};

struct SyntheticSpec {
  int num_seen = 20;
  int num_unseen = 5;
  int attr_dim = 16;
  int feature_dim = 32;
  int samples_per_class = 50;
  double attribute_sparsity = 0.5;
  double noise_std = 0.1;
  int group_count = 4;

  void validate() const;
};

/// Planted linear structure plus the hidden map, which tests use to build oracle models.
struct SyntheticCorpus : Corpus {
  Eigen::MatrixXd planted_map;  // d_v x d_a
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

Corpus load_dataset(const std::filesystem::path& dir);

/// Parses a lone attributes.csv; the groups default to a single group over all dimensions.
AttributeMatrix load_attributes(const std::filesystem::path& file);

enum class FeatureFormat { Csv, Binary };

/// Writes the directory layout read by load_dataset. Reals use the shortest
/// round-trip representation so load followed by save is byte-stable.
void save_dataset(const std::filesystem::path& dir, const Corpus& corpus,
                  FeatureFormat format = FeatureFormat::Csv);

struct TrainTestSplit {
  FeatureDataset train;
  FeatureDataset test_seen;
  FeatureDataset test_unseen;
  // row indices into the source dataset, aligned with the rows above
  std::vector<int> train_rows;
  std::vector<int> test_seen_rows;
  std::vector<int> test_unseen_rows;
};

TrainTestSplit split_train_test(const FeatureDataset& ds, std::uint64_t seed);

/// Mean over classes of the within-class feature variance (averaged over dimensions).
double mean_within_class_variance(const FeatureDataset& ds);

}  // namespace distzsl

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "distzsl/config.hpp"
#include "distzsl/dataset.hpp"
#include "distzsl/glasso.hpp"
#include "distzsl/partition.hpp"
#include "distzsl/theory.hpp"

namespace distzsl {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,    // I/O or unexpected error
  kExitDiverged = 2,   // non-finite loss or parameters during training
  kExitPartition = 3,  // partition could not be formed
  kExitBadInput = 4,   // parse or validation error in inputs/configuration
};

/// Loads settings.data_dir, or synthesizes from settings.synth when it is empty.
Corpus resolve_corpus(const RunSettings& settings);

int cmd_synth(const SyntheticSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir,
              FeatureFormat format, std::ostream& log, std::ostream& err);

struct PartitionCommand {
  std::filesystem::path data_dir;
  PartitionSpec spec;
  std::uint64_t split_seed = 0;
  std::filesystem::path out_dir = ".";
};
/// Writes partition.csv (client_id,sample_index; indices into the full dataset)
/// and partition_summary.csv (client_id,class_id,count).
int cmd_partition(const PartitionCommand& cmd, std::ostream& log, std::ostream& err);

struct GlassoCommand {
  std::filesystem::path input;  // attributes.csv or a dataset directory
  GlassoConfig<double> config;
  GammaSource gamma_source = GammaSource::Covariance;
  std::filesystem::path out_dir = ".";
};
/// Writes gamma.csv and theta.csv (header n, then n rows).
int cmd_glasso(const GlassoCommand& cmd, std::ostream& log, std::ostream& err);

/// Writes manifest.ini (before round 0), metrics.csv, loss_terms.csv,
/// client_metrics.csv and final_model.csv into out_dir.
int cmd_run(const RunSettings& settings, const std::filesystem::path& out_dir, std::ostream& log,
            std::ostream& err);

struct EvalCommand {
  std::filesystem::path checkpoint;  // may be empty with `stats`
  std::filesystem::path data_dir;
  std::uint64_t split_seed = 0;
  std::optional<double> test_fraction_seen;
  bool stats = false;
};
/// Prints "acc_c,acc_u,acc_s,acc_h" and one value line; with `stats` also a
/// dataset statistics block.
int cmd_eval(const EvalCommand& cmd, std::ostream& out, std::ostream& err);

/// Prints "name,trials,violations,max_slack" and one line per check.
int cmd_check(const SuiteOptions& opts, std::ostream& out, std::ostream& err);

void write_square_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace distzsl

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "distzsl/dataset.hpp"
#include "distzsl/fed.hpp"

namespace distzsl {

/// Flat "section.key" -> value view of an INI-style file:
///
///   [train]
///   rounds = 50
///   # comments and blank lines are ignored
class ConfigMap {
 public:
  static ConfigMap parse(std::istream& in, const std::string& name = "config");
  static ConfigMap load(const std::filesystem::path& path);

  /// Accepts "section.key=value".
  void set_assignment(std::string_view assignment);
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  std::optional<std::string> get(const std::string& key) const;
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Sections in alphabetical order, keys sorted within each section.
  std::string render() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Everything `run` needs: the training configuration plus where the data comes from.
struct RunSettings {
  TrainConfig train;
  std::string data_dir;  // empty: synthesize from `synth`
  SyntheticSpec synth;
  std::uint64_t synth_seed = 0;
  std::optional<double> test_fraction_seen;  // overrides the dataset's split when set
};

/// Applies every entry; unknown keys and malformed values throw ValidationError.
void apply_config(const ConfigMap& config, RunSettings& settings);

/// The full resolved configuration in the same key space, for manifests.
ConfigMap to_config(const RunSettings& settings);

}  // namespace distzsl

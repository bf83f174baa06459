#include "distzsl/config.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace distzsl {

ConfigMap ConfigMap::parse(std::istream& in, const std::string& name) {
  ConfigMap out;
  std::string section;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const auto ctx = name + ": line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(ctx + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(ctx + ": expected key = value");
    const auto key = std::string(trim(line.substr(0, eq)));
    const auto value = std::string(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(ctx + ": empty key");
    out.entries_[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": missing or unreadable config file");
  return parse(in, path.filename().string());
}

void ConfigMap::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError("expected section.key=value, got '" + std::string(assignment) + "'");
  }
  entries_[std::string(trim(assignment.substr(0, eq)))] = std::string(trim(assignment.substr(eq + 1)));
}

std::optional<std::string> ConfigMap::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigMap::render() const {
  std::map<std::string, std::map<std::string, std::string>> sections;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      sections[""][key] = value;
    } else {
      sections[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
  }
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : sections) {
    if (!first) out << '\n';
    first = false;
    if (!section.empty()) out << '[' << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << '\n';
  }
  return out.str();
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(key + ": expected a boolean, got '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

GammaSource parse_gamma_source(const std::string& v) {
  if (v == "covariance") return GammaSource::Covariance;
  if (v == "precision") return GammaSource::Precision;
  throw ValidationError("glasso.gamma_source: expected covariance or precision, got '" + v + "'");
}

using Setter = std::function<void(RunSettings&, const std::string&, const std::string&)>;

template <typename T>
T number(const std::string& v, const std::string& key) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(parse_real(v, key));
    } else {
      return static_cast<T>(parse_integer(v, key));
    }
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"train.rounds", [](RunSettings& s, auto& k, auto& v) { s.train.rounds = number<int>(v, k); }},
      {"train.local_epochs", [](RunSettings& s, auto& k, auto& v) { s.train.local_epochs = number<int>(v, k); }},
      {"train.batch_size", [](RunSettings& s, auto& k, auto& v) { s.train.batch_size = number<int>(v, k); }},
      {"train.local_lr", [](RunSettings& s, auto& k, auto& v) { s.train.local_lr = number<double>(v, k); }},
      {"train.server_lr", [](RunSettings& s, auto& k, auto& v) { s.train.server_lr = number<double>(v, k); }},
      {"train.delta_scale", [](RunSettings& s, auto& k, auto& v) { s.train.delta_scale = number<double>(v, k); }},
      {"train.sample_fraction", [](RunSettings& s, auto& k, auto& v) { s.train.sample_fraction = number<double>(v, k); }},
      {"train.momentum", [](RunSettings& s, auto& k, auto& v) { s.train.momentum = number<double>(v, k); }},
      {"train.weight_decay", [](RunSettings& s, auto& k, auto& v) { s.train.weight_decay = number<double>(v, k); }},
      {"train.seed", [](RunSettings& s, auto& k, auto& v) { s.train.seed = number<std::uint64_t>(v, k); }},
      {"train.eval_every", [](RunSettings& s, auto& k, auto& v) { s.train.eval_every = number<int>(v, k); }},
      {"train.threads", [](RunSettings& s, auto& k, auto& v) { s.train.threads = number<int>(v, k); }},

      {"losses.w_kl", [](RunSettings& s, auto& k, auto& v) { s.train.weights.kl = number<double>(v, k); }},
      {"losses.w_bc", [](RunSettings& s, auto& k, auto& v) { s.train.weights.bc = number<double>(v, k); }},
      {"losses.w_ad", [](RunSettings& s, auto& k, auto& v) { s.train.weights.ad = number<double>(v, k); }},
      {"losses.tau", [](RunSettings& s, auto& k, auto& v) { s.train.tau = number<double>(v, k); }},
      {"losses.ablation", [](RunSettings& s, auto&, auto& v) { s.train.terms = parse_loss_terms(v); }},
      {"losses.bc_norm",
       [](RunSettings& s, auto& k, auto& v) {
         if (v == "squared") s.train.weights.bc_norm = BcNorm::Squared;
         else if (v == "unsquared") s.train.weights.bc_norm = BcNorm::Unsquared;
         else throw ValidationError(k + ": expected squared or unsquared");
       }},

      {"partition.scheme", [](RunSettings& s, auto&, auto& v) { s.train.partition.scheme = parse_partition_scheme(v); }},
      {"partition.alpha", [](RunSettings& s, auto& k, auto& v) { s.train.partition.alpha = number<double>(v, k); }},
      {"partition.clients", [](RunSettings& s, auto& k, auto& v) { s.train.partition.num_clients = number<int>(v, k); }},
      {"partition.local_data_ratio", [](RunSettings& s, auto& k, auto& v) { s.train.partition.local_data_ratio = number<double>(v, k); }},
      {"partition.seed", [](RunSettings& s, auto& k, auto& v) { s.train.partition.seed = number<std::uint64_t>(v, k); }},

      {"glasso.delta", [](RunSettings& s, auto& k, auto& v) { s.train.glasso.delta = number<double>(v, k); }},
      {"glasso.tol", [](RunSettings& s, auto& k, auto& v) { s.train.glasso.tol = number<double>(v, k); }},
      {"glasso.max_sweeps", [](RunSettings& s, auto& k, auto& v) { s.train.glasso.max_sweeps = number<int>(v, k); }},
      {"glasso.standardize", [](RunSettings& s, auto& k, auto& v) { s.train.glasso.standardize = parse_bool(v, k); }},
      {"glasso.gamma_source", [](RunSettings& s, auto&, auto& v) { s.train.gamma_source = parse_gamma_source(v); }},

      {"model.mode", [](RunSettings& s, auto&, auto& v) { s.train.mode = parse_model_mode(v); }},

      {"data.dir", [](RunSettings& s, auto&, auto& v) { s.data_dir = v; }},
      {"data.synth_seed", [](RunSettings& s, auto& k, auto& v) { s.synth_seed = number<std::uint64_t>(v, k); }},
      {"data.num_seen", [](RunSettings& s, auto& k, auto& v) { s.synth.num_seen = number<int>(v, k); }},
      {"data.num_unseen", [](RunSettings& s, auto& k, auto& v) { s.synth.num_unseen = number<int>(v, k); }},
      {"data.attr_dim", [](RunSettings& s, auto& k, auto& v) { s.synth.attr_dim = number<int>(v, k); }},
      {"data.feature_dim", [](RunSettings& s, auto& k, auto& v) { s.synth.feature_dim = number<int>(v, k); }},
      {"data.samples_per_class", [](RunSettings& s, auto& k, auto& v) { s.synth.samples_per_class = number<int>(v, k); }},
      {"data.attribute_sparsity", [](RunSettings& s, auto& k, auto& v) { s.synth.attribute_sparsity = number<double>(v, k); }},
      {"data.noise_std", [](RunSettings& s, auto& k, auto& v) { s.synth.noise_std = number<double>(v, k); }},
      {"data.group_count", [](RunSettings& s, auto& k, auto& v) { s.synth.group_count = number<int>(v, k); }},
      {"data.test_fraction_seen", [](RunSettings& s, auto& k, auto& v) { s.test_fraction_seen = number<double>(v, k); }},
  };
  return table;
}

}  // namespace

void apply_config(const ConfigMap& config, RunSettings& settings) {
  const auto& table = setters();
  for (const auto& [key, value] : config.entries()) {
    auto it = table.find(key);
    if (it == table.end()) throw ValidationError("unknown configuration key '" + key + "'");
    it->second(settings, key, value);
  }
}

ConfigMap to_config(const RunSettings& s) {
  ConfigMap c;
  const auto& t = s.train;
  auto real = [](double x) { return format_shortest(x); };
  c.set("train.rounds", std::to_string(t.rounds));
  c.set("train.local_epochs", std::to_string(t.local_epochs));
  c.set("train.batch_size", std::to_string(t.batch_size));
  c.set("train.local_lr", real(t.local_lr));
  c.set("train.server_lr", real(t.server_lr));
  c.set("train.delta_scale", real(t.delta_scale));
  c.set("train.sample_fraction", real(t.sample_fraction));
  c.set("train.momentum", real(t.momentum));
  c.set("train.weight_decay", real(t.weight_decay));
  c.set("train.seed", std::to_string(t.seed));
  c.set("train.eval_every", std::to_string(t.eval_every));
  c.set("train.threads", std::to_string(t.threads));

  c.set("losses.w_kl", real(t.weights.kl));
  c.set("losses.w_bc", real(t.weights.bc));
  c.set("losses.w_ad", real(t.weights.ad));
  c.set("losses.tau", real(t.tau));
  c.set("losses.ablation", to_string(t.terms));
  c.set("losses.bc_norm", t.weights.bc_norm == BcNorm::Squared ? "squared" : "unsquared");

  c.set("partition.scheme", to_string(t.partition.scheme));
  c.set("partition.alpha", real(t.partition.alpha));
  c.set("partition.clients", std::to_string(t.partition.num_clients));
  c.set("partition.local_data_ratio", real(t.partition.local_data_ratio));
  c.set("partition.seed", std::to_string(t.partition.seed));

  c.set("glasso.delta", real(t.glasso.delta));
  c.set("glasso.tol", real(t.glasso.tol));
  c.set("glasso.max_sweeps", std::to_string(t.glasso.max_sweeps));
  c.set("glasso.standardize", bool_text(t.glasso.standardize));
  c.set("glasso.gamma_source", t.gamma_source == GammaSource::Covariance ? "covariance" : "precision");

  c.set("model.mode", to_string(t.mode));

  if (!s.data_dir.empty()) {
    c.set("data.dir", s.data_dir);
  } else {
    c.set("data.synth_seed", std::to_string(s.synth_seed));
    c.set("data.num_seen", std::to_string(s.synth.num_seen));
    c.set("data.num_unseen", std::to_string(s.synth.num_unseen));
    c.set("data.attr_dim", std::to_string(s.synth.attr_dim));
    c.set("data.feature_dim", std::to_string(s.synth.feature_dim));
    c.set("data.samples_per_class", std::to_string(s.synth.samples_per_class));
    c.set("data.attribute_sparsity", real(s.synth.attribute_sparsity));
    c.set("data.noise_std", real(s.synth.noise_std));
    c.set("data.group_count", std::to_string(s.synth.group_count));
  }
  if (s.test_fraction_seen) c.set("data.test_fraction_seen", real(*s.test_fraction_seen));
  return c;
}

}  // namespace distzsl

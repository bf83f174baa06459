#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distzsl/commands.hpp"

using namespace distzsl;

namespace {

struct RunFlags {
  std::string config_path;
  std::vector<std::string> assignments;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> rounds;
  std::optional<int> clients;
  std::optional<std::string> mode;
  std::optional<std::string> ablation;
  std::optional<std::string> scheme;
  std::optional<double> alpha;
  std::optional<double> rho;
  std::optional<double> fraction;
  std::optional<double> local_lr;
  std::optional<std::string> gamma_source;
  std::optional<std::string> data;
  std::string out = "run_out";
};

template <typename T>
void put(ConfigMap& c, const char* key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    c.set(key, *v);
  } else if constexpr (std::is_floating_point_v<T>) {
    c.set(key, format_precise(*v));
  } else {
    c.set(key, std::to_string(*v));
  }
}

int exec_run(const RunFlags& f) {
  try {
    ConfigMap config;
    if (!f.config_path.empty()) config = ConfigMap::load(f.config_path);
    for (const auto& a : f.assignments) config.set_assignment(a);
    put(config, "train.seed", f.seed);
    put(config, "partition.seed", f.seed);
    put(config, "train.threads", f.threads);
    put(config, "train.rounds", f.rounds);
    put(config, "train.sample_fraction", f.fraction);
    put(config, "train.local_lr", f.local_lr);
    put(config, "partition.clients", f.clients);
    put(config, "partition.scheme", f.scheme);
    put(config, "partition.alpha", f.alpha);
    put(config, "partition.local_data_ratio", f.rho);
    put(config, "model.mode", f.mode);
    put(config, "losses.ablation", f.ablation);
    put(config, "glasso.gamma_source", f.gamma_source);
    put(config, "data.dir", f.data);
    RunSettings settings;
    apply_config(config, settings);
    return cmd_run(settings, f.out, std::cerr, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated zero-shot learning simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // synth
  SyntheticSpec synth;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "data";
  bool binary = false;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  s->add_option("--seed", synth_seed);
  s->add_option("--out", synth_out);
  s->add_option("--num-seen", synth.num_seen);
  s->add_option("--num-unseen", synth.num_unseen);
  s->add_option("--attr-dim", synth.attr_dim);
  s->add_option("--feature-dim", synth.feature_dim);
  s->add_option("--samples-per-class", synth.samples_per_class);
  s->add_option("--sparsity", synth.attribute_sparsity);
  s->add_option("--noise-std", synth.noise_std);
  s->add_option("--groups", synth.group_count);
  s->add_flag("--binary", binary, "Write features.bin instead of features.csv");

  // partition
  PartitionCommand pc;
  std::string scheme = "pccd";
  std::optional<std::uint64_t> part_seed;
  auto* p = app.add_subcommand("partition", "Partition a dataset's training split across clients");
  p->add_option("--data", pc.data_dir)->required();
  p->add_option("--scheme", scheme);
  p->add_option("--alpha", pc.spec.alpha);
  p->add_option("-k,--clients", pc.spec.num_clients);
  p->add_option("--rho", pc.spec.local_data_ratio);
  p->add_option("--seed", part_seed);
  p->add_option("--out", pc.out_dir);

  // glasso
  GlassoCommand gc;
  std::string gamma_source = "covariance";
  bool no_standardize = false;
  auto* g = app.add_subcommand("glasso", "Estimate the class similarity matrix");
  g->add_option("input", gc.input, "attributes.csv or a dataset directory")->required();
  g->add_option("--delta", gc.config.delta);
  g->add_option("--tol", gc.config.tol);
  g->add_option("--max-sweeps", gc.config.max_sweeps);
  g->add_flag("--no-standardize", no_standardize);
  g->add_option("--gamma-source", gamma_source)->check(CLI::IsMember({"covariance", "precision"}));
  g->add_option("--out", gc.out_dir);

  // run
  RunFlags rf;
  auto* r = app.add_subcommand("run", "Run a federated training simulation");
  r->add_option("--config", rf.config_path);
  r->add_option("--set", rf.assignments, "Override a config key, e.g. train.rounds=20");
  r->add_option("--seed", rf.seed);
  r->add_option("--threads", rf.threads);
  r->add_option("--out", rf.out);
  r->add_option("--rounds", rf.rounds);
  r->add_option("-k,--clients", rf.clients);
  r->add_option("--mode", rf.mode);
  r->add_option("--ablation", rf.ablation);
  r->add_option("--scheme", rf.scheme);
  r->add_option("--alpha", rf.alpha);
  r->add_option("--rho", rf.rho);
  r->add_option("--fraction", rf.fraction);
  r->add_option("--lr", rf.local_lr);
  r->add_option("--gamma-source", rf.gamma_source);
  r->add_option("--data", rf.data);

  // eval
  EvalCommand ec;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ec.checkpoint);
  e->add_option("--data", ec.data_dir)->required();
  e->add_option("--seed", ec.split_seed);
  e->add_option("--test-fraction", ec.test_fraction_seen);
  e->add_flag("--stats", ec.stats);

  // check
  SuiteOptions so;
  auto* c = app.add_subcommand("check", "Run the property checks");
  c->add_option("--trials", so.trials);
  c->add_option("--seed", so.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitFailure;
  }

  if (*s) {
    return cmd_synth(synth, synth_seed, synth_out, binary ? FeatureFormat::Binary : FeatureFormat::Csv,
                     std::cerr, std::cerr);
  }
  if (*p) {
    try {
      pc.spec.scheme = parse_partition_scheme(scheme);
    } catch (const std::exception& err) {
      std::cerr << "error: " << err.what() << '\n';
      return kExitBadInput;
    }
    if (part_seed) pc.spec.seed = pc.split_seed = *part_seed;
    return cmd_partition(pc, std::cerr, std::cerr);
  }
  if (*g) {
    gc.config.standardize = !no_standardize;
    gc.gamma_source = gamma_source == "precision" ? GammaSource::Precision : GammaSource::Covariance;
    return cmd_glasso(gc, std::cerr, std::cerr);
  }
  if (*r) return exec_run(rf);
  if (*e) {
    if (ec.checkpoint.empty() && !ec.stats) {
      std::cerr << "error: eval needs --checkpoint or --stats\n";
      return kExitFailure;
    }
    return cmd_eval(ec, std::cout, std::cerr);
  }
  if (*c) return cmd_check(so, std::cout, std::cerr);
  return kExitFailure;
}

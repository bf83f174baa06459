#include "distzsl/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "distzsl/checkpoint.hpp"
#include "distzsl/eval.hpp"
#include "distzsl/fed.hpp"

namespace distzsl {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const PartitionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitPartition;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

// Writes via a temporary so a failed run never leaves a half-written CSV behind.
void write_text(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

Corpus resolve_corpus(const RunSettings& settings) {
  Corpus corpus;
  if (!settings.data_dir.empty()) {
    corpus = load_dataset(settings.data_dir);
  } else {
    auto synth = generate_synthetic(settings.synth, settings.synth_seed);
    corpus = std::move(static_cast<Corpus&>(synth));
  }
  if (settings.test_fraction_seen) {
    corpus.data.split.test_fraction_seen = *settings.test_fraction_seen;
    corpus.data.split.validate(corpus.attributes.num_classes());
  }
  return corpus;
}

void write_square_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << m.rows() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_precise(m(r, c));
    }
    out << '\n';
  }
  write_text(path, out.str());
}

int cmd_synth(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out_dir,
              FeatureFormat format, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto corpus = generate_synthetic(spec, seed);
    save_dataset(out_dir, corpus, format);
    log << "wrote " << corpus.data.size() << " samples, " << corpus.attributes.num_classes()
        << " classes to " << out_dir.string() << '\n';
    return kExitOk;
  });
}

int cmd_partition(const PartitionCommand& cmd, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto corpus = load_dataset(cmd.data_dir);
    const auto split = split_train_test(corpus.data, cmd.split_seed);
    const auto part = partition(split.train, cmd.spec);
    fs::create_directories(cmd.out_dir);
    std::ostringstream rows;
    rows << "client_id,sample_index\n";
    for (int c = 0; c < part.num_clients(); ++c) {
      for (int r : part.assignments[static_cast<std::size_t>(c)]) {
        rows << c << ',' << split.train_rows[static_cast<std::size_t>(r)] << '\n';
      }
    }
    std::ostringstream summary;
    summary << "client_id,class_id,count\n";
    for (const auto& cc : partition_summary(split.train, part)) {
      summary << cc.client << ',' << cc.class_id << ',' << cc.count << '\n';
    }
    write_text(cmd.out_dir / "partition.csv", rows.str());
    write_text(cmd.out_dir / "partition_summary.csv", summary.str());
    for (int c = 0; c < part.num_clients(); ++c) {
      log << "client " << c << ": " << part.assignments[static_cast<std::size_t>(c)].size()
          << " samples, " << part.local_classes[static_cast<std::size_t>(c)].size() << " classes\n";
    }
    return kExitOk;
  });
}

int cmd_glasso(const GlassoCommand& cmd, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const fs::path file = fs::is_directory(cmd.input) ? cmd.input / "attributes.csv" : cmd.input;
    const auto attrs = load_attributes(file);
    const Eigen::MatrixXd s = sample_covariance(attrs.values, cmd.config.standardize);
    const auto sim = graphical_lasso<double>(s, cmd.config);
    fs::create_directories(cmd.out_dir);
    write_square_matrix_csv(cmd.out_dir / "gamma.csv",
                            cmd.gamma_source == GammaSource::Covariance ? sim.gamma : sim.theta);
    write_square_matrix_csv(cmd.out_dir / "theta.csv", sim.theta);
    log << "glasso: " << sim.sweeps << " sweeps, " << (sim.converged ? "converged" : "NOT converged")
        << ", objective " << format_shortest(sim.objective_trace.empty() ? 0.0 : sim.objective_trace.back())
        << '\n';
    return kExitOk;
  });
}

int cmd_run(const RunSettings& settings, const fs::path& out_dir, std::ostream& log,
            std::ostream& err) {
  return guarded(err, [&] {
    settings.train.validate();
    const auto corpus = resolve_corpus(settings);
    fs::create_directories(out_dir);
    {
      std::ostringstream manifest;
      manifest << "# distzsl " << kVersion << "\n# started " << utc_timestamp() << "\n# output "
               << out_dir.string() << "\n\n"
               << to_config(settings).render();
      write_text(out_dir / "manifest.ini", manifest.str());
    }
    const auto result = run_simulation(corpus.data, corpus.attributes, settings.train,
                                       [&](int round, const ModelParams<double>&) {
                                         if (round % 10 == 0) log << "round " << round << '\n';
                                       });
    std::ostringstream metrics, terms, clients, model;
    write_metrics_csv(metrics, result.rounds);
    write_loss_terms_csv(terms, result.rounds);
    write_client_metrics_csv(clients, result.rounds);
    write_checkpoint(model, result.final_model);
    write_text(out_dir / "metrics.csv", metrics.str());
    write_text(out_dir / "loss_terms.csv", terms.str());
    write_text(out_dir / "client_metrics.csv", clients.str());
    write_text(out_dir / "final_model.csv", model.str());
    if (!result.rounds.empty()) {
      const auto& last = result.rounds.back().global;
      log << "final:";
      if (last.acc_c) log << " acc_c=" << *last.acc_c;
      if (last.acc_u) log << " acc_u=" << *last.acc_u;
      if (last.acc_s) log << " acc_s=" << *last.acc_s;
      if (last.acc_h) log << " acc_h=" << *last.acc_h;
      log << '\n';
    }
    return kExitOk;
  });
}

int cmd_eval(const EvalCommand& cmd, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto corpus = load_dataset(cmd.data_dir);
    if (cmd.test_fraction_seen) corpus.data.split.test_fraction_seen = *cmd.test_fraction_seen;
    if (cmd.stats) {
      out << "num_samples,feature_dim,attr_dim,num_classes,within_class_variance\n"
          << corpus.data.size() << ',' << corpus.data.dim() << ',' << corpus.attributes.dim() << ','
          << corpus.attributes.num_classes() << ','
          << format_shortest(mean_within_class_variance(corpus.data)) << '\n';
      if (cmd.checkpoint.empty()) return kExitOk;
    }
    const auto params = load_checkpoint(cmd.checkpoint);
    const auto split = split_train_test(corpus.data, cmd.split_seed);
    if (params.feature_dim() != corpus.data.dim()) {
      throw ValidationError("checkpoint feature dimension does not match the dataset");
    }
    const auto m = evaluate(params, split.test_seen, split.test_unseen, corpus.attributes.values,
                            corpus.data.split);
    auto field = [](const std::optional<double>& v) { return v ? format_shortest(*v) : std::string(); };
    out << "acc_c,acc_u,acc_s,acc_h\n"
        << field(m.acc_c) << ',' << field(m.acc_u) << ',' << field(m.acc_s) << ',' << field(m.acc_h)
        << '\n';
    return kExitOk;
  });
}

int cmd_check(const SuiteOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto results = run_theory_suite(opts);
    out << "name,trials,violations,max_slack\n";
    bool clean = true;
    for (const auto& r : results) {
      out << r.name << ',' << r.trials << ',' << r.violations << ',' << format_shortest(r.max_slack)
          << '\n';
      clean = clean && r.violations == 0;
    }
    return clean ? kExitOk : kExitFailure;
  });
}

}  // namespace distzsl

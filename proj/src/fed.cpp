#include "distzsl/fed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace distzsl {

void TrainConfig::validate() const {
  if (rounds < 0) throw ValidationError("train: rounds must be >= 0");
  if (local_epochs < 1 || batch_size < 1) {
    throw ValidationError("train: local_epochs and batch_size must be >= 1");
  }
  if (!(local_lr >= 0.0) || !(server_lr > 0.0) || !(delta_scale > 0.0)) {
    throw ValidationError("train: need local_lr >= 0, server_lr > 0, delta_scale > 0");
  }
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw ValidationError("train: sample_fraction must lie in (0, 1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0)) {
    throw ValidationError("train: momentum must lie in [0, 1) and weight_decay >= 0");
  }
  if (!(tau > 0.0)) throw ValidationError("train: tau must be positive");
  if (eval_every < 1 || threads < 1) throw ValidationError("train: eval_every and threads must be >= 1");
  weights.validate();
  glasso.validate();
  partition.validate();
}

ServerContext make_server_context(const AttributeMatrix& attrs, const ClassSplit& split,
                                  const TrainConfig& cfg) {
  attrs.validate();
  ServerContext ctx;
  ctx.prototypes = attrs.values;
  ctx.groups = attrs.groups;
  ctx.seen_classes = split.seen;
  if (cfg.mode == ModelMode::AttributeBased) {
    const Eigen::MatrixXd s = sample_covariance(attrs.values, cfg.glasso.standardize);
    ctx.similarity = graphical_lasso<double>(s, cfg.glasso);
    const auto& source =
        cfg.gamma_source == GammaSource::Covariance ? ctx.similarity.gamma : ctx.similarity.theta;
    ctx.targets = distill_targets(source, cfg.tau);
  }
  return ctx;
}

namespace {

LossReport<double> objective(const ModelParams<double>& p, const Batch<double>& batch,
                             const ServerContext& ctx, const TrainConfig& cfg) {
  if (cfg.mode == ModelMode::AttributeFree) {
    return ce_loss_attribute_free(p, batch, ctx.seen_classes);
  }
  return joint_loss(p, batch, ctx.prototypes, ctx.targets, cfg.weights, ctx.groups, cfg.terms);
}

void accumulate(LossBreakdown& acc, const LossReport<double>& r) {
  acc.total += r.total;
  acc.sce += r.sce;
  acc.kl += r.kl;
  acc.bc += r.bc;
  acc.ad += r.ad;
  acc.ce += r.ce;
}

void scale(LossBreakdown& acc, double c) {
  acc.total *= c;
  acc.sce *= c;
  acc.kl *= c;
  acc.bc *= c;
  acc.ad *= c;
  acc.ce *= c;
}

}  // namespace

ClientUpdate local_train(const ModelParams<double>& global, const FeatureDataset& client_data,
                         const ServerContext& ctx, const TrainConfig& cfg, int round,
                         int client_id, int num_local_classes) {
  if (client_data.empty()) {
    throw ValidationError("local_train: client " + std::to_string(client_id) + " has no data");
  }
  if (global.mode != cfg.mode) throw ValidationError("local_train: model mode does not match config");
  ModelParams<double> w = global;
  auto opt = OptState<double>::for_params(w, cfg.local_lr, cfg.momentum, cfg.weight_decay);
  Rng rng = make_rng({cfg.seed, static_cast<std::uint64_t>(round),
                      static_cast<std::uint64_t>(client_id), 0x10ca1u});

  std::vector<int> order(static_cast<std::size_t>(client_data.size()));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  LossBreakdown sums;
  int steps = 0;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto b = make_batch<double>(
          client_data, std::span<const int>(order.data() + start, end - start));
      const auto report = objective(w, b, ctx, cfg);
      if (!std::isfinite(report.total)) {
        throw DivergenceError("training diverged: client " + std::to_string(client_id) +
                              ", round " + std::to_string(round) + ", step " +
                              std::to_string(steps) + ": non-finite loss");
      }
      try {
        sgd_step(w, report.grads, opt);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged: client " + std::to_string(client_id) +
                              ", round " + std::to_string(round) + ", step " +
                              std::to_string(steps) + ": " + e.what());
      }
      accumulate(sums, report);
      ++steps;
    }
  }
  scale(sums, 1.0 / static_cast<double>(steps));

  ClientUpdate up;
  up.delta = cfg.delta_scale * (w - global);
  up.num_local_classes = num_local_classes;
  up.client_id = client_id;
  up.mean_local_loss = sums.total;
  up.terms = sums;
  up.local_model = std::move(w);
  return up;
}

std::vector<double> aggregation_weights(const std::vector<ClientUpdate>& updates) {
  std::vector<const ClientUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });
  double total = 0.0;
  for (const auto* u : sorted) {
    if (u->num_local_classes < 1) throw ValidationError("aggregate: client with no local classes");
    total += u->num_local_classes;
  }
  std::vector<double> out;
  for (const auto* u : sorted) out.push_back(u->num_local_classes / total);
  return out;
}

ModelParams<double> aggregate(const ModelParams<double>& global, std::vector<ClientUpdate> updates,
                              double server_lr) {
  if (updates.empty()) throw ValidationError("aggregate: no client updates");
  std::sort(updates.begin(), updates.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  const auto coeffs = aggregation_weights(updates);
  // lone client at unit rates: keep its parameters exactly
  if (updates.size() == 1 && server_lr == 1.0 && updates[0].local_model.same_shape(global) &&
      updates[0].delta == updates[0].local_model - global) {
    return updates[0].local_model;
  }
  ModelParams<double> step = global.zeros_like();
  for (std::size_t i = 0; i < updates.size(); ++i) {
    global.require_same_shape(updates[i].delta);
    step += coeffs[i] * updates[i].delta;
  }
  return global + server_lr * step;
}

LossBreakdown dataset_loss(const ModelParams<double>& p, const FeatureDataset& data,
                           const ServerContext& ctx, const TrainConfig& cfg) {
  LossBreakdown out;
  if (data.empty()) return out;
  accumulate(out, objective(p, make_batch<double>(data), ctx, cfg));
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first failure
// by lowest index so the reported error does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

SimulationResult run_simulation(const TrainTestSplit& data, const AttributeMatrix& attrs,
                                const TrainConfig& cfg, const RoundCallback& on_round) {
  cfg.validate();
  const auto& train = data.train;
  SimulationResult result;
  result.partition = partition(train, cfg.partition);
  result.context = make_server_context(attrs, train.split, cfg);
  const auto& ctx = result.context;

  const int k = cfg.num_clients();
  std::vector<FeatureDataset> client_data;
  client_data.reserve(static_cast<std::size_t>(k));
  for (const auto& rows : result.partition.assignments) client_data.push_back(train.subset(rows));

  // class-count weights over all clients, for the global objective
  std::vector<double> global_weights;
  {
    double total = 0.0;
    for (const auto& lc : result.partition.local_classes) total += static_cast<double>(lc.size());
    for (const auto& lc : result.partition.local_classes) {
      global_weights.push_back(static_cast<double>(lc.size()) / total);
    }
  }

  ModelParams<double> global =
      init_params<double>(train.dim(), attrs.dim(), static_cast<int>(train.split.seen.size()),
                          cfg.mode, cfg.seed);
  result.initial_model = global;

  for (int t = 0; t < cfg.rounds; ++t) {
    const auto sampled = sample_clients(k, cfg.sample_fraction, t, cfg.seed);
    std::vector<ClientUpdate> updates(sampled.size());
    parallel_for(sampled.size(), cfg.threads, [&](std::size_t i) {
      const int id = sampled[i];
      const auto uid = static_cast<std::size_t>(id);
      updates[i] = local_train(global, client_data[uid], ctx, cfg, t, id,
                               static_cast<int>(result.partition.local_classes[uid].size()));
    });

    RoundMetrics rm;
    rm.round = t + 1;
    std::vector<double> losses;
    for (const auto& u : updates) {
      losses.push_back(u.mean_local_loss);
      rm.terms.total += u.terms.total;
      rm.terms.sce += u.terms.sce;
      rm.terms.kl += u.terms.kl;
      rm.terms.bc += u.terms.bc;
      rm.terms.ad += u.terms.ad;
      rm.terms.ce += u.terms.ce;
    }
    scale(rm.terms, 1.0 / static_cast<double>(updates.size()));
    std::tie(rm.client_loss_mean, rm.client_loss_std) = mean_std(losses);

    const bool evaluate_now = (t + 1) % cfg.eval_every == 0;
    rm.clients.resize(updates.size());
    parallel_for(updates.size(), evaluate_now ? cfg.threads : 1, [&](std::size_t i) {
      rm.clients[i].client_id = updates[i].client_id;
      rm.clients[i].local_loss = updates[i].mean_local_loss;
      if (evaluate_now) {
        rm.clients[i].metrics = evaluate(updates[i].local_model, data.test_seen, data.test_unseen,
                                         ctx.prototypes, train.split);
      }
    });

    global = aggregate(global, std::move(updates), cfg.server_lr);
    if (!global.all_finite()) {
      throw DivergenceError("training diverged: non-finite global parameters after round " +
                            std::to_string(t + 1));
    }

    if (evaluate_now) {
      rm.evaluated = true;
      rm.global = evaluate(global, data.test_seen, data.test_unseen, ctx.prototypes, train.split);
      double objective_value = 0.0;
      for (int c = 0; c < k; ++c) {
        objective_value += global_weights[static_cast<std::size_t>(c)] *
                           dataset_loss(global, client_data[static_cast<std::size_t>(c)], ctx, cfg).total;
      }
      rm.global_loss = objective_value;
    }
    result.rounds.push_back(std::move(rm));
    if (on_round) on_round(t + 1, global);
  }
  result.final_model = std::move(global);
  return result;
}

SimulationResult run_simulation(const FeatureDataset& ds, const AttributeMatrix& attrs,
                                const TrainConfig& cfg, const RoundCallback& on_round) {
  return run_simulation(split_train_test(ds, cfg.seed), attrs, cfg, on_round);
}

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? format_shortest(*v) : std::string();
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds) {
  out << "round,acc_c,acc_u,acc_s,acc_h,global_loss,client_loss_mean,client_loss_std\n";
  for (const auto& r : rounds) {
    out << r.round << ',' << opt_field(r.global.acc_c) << ',' << opt_field(r.global.acc_u) << ','
        << opt_field(r.global.acc_s) << ',' << opt_field(r.global.acc_h) << ','
        << opt_field(r.global_loss) << ',' << format_shortest(r.client_loss_mean) << ','
        << format_shortest(r.client_loss_std) << '\n';
  }
}

void write_loss_terms_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds) {
  out << "round,total,sce,kl,bc,ad,ce\n";
  for (const auto& r : rounds) {
    out << r.round << ',' << format_shortest(r.terms.total) << ',' << format_shortest(r.terms.sce)
        << ',' << format_shortest(r.terms.kl) << ',' << format_shortest(r.terms.bc) << ','
        << format_shortest(r.terms.ad) << ',' << format_shortest(r.terms.ce) << '\n';
  }
}

void write_client_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rounds) {
  out << "round,client_id,local_loss,acc_c,acc_u,acc_s,acc_h\n";
  for (const auto& r : rounds) {
    for (const auto& c : r.clients) {
      out << r.round << ',' << c.client_id << ',' << format_shortest(c.local_loss) << ','
          << opt_field(c.metrics.acc_c) << ',' << opt_field(c.metrics.acc_u) << ','
          << opt_field(c.metrics.acc_s) << ',' << opt_field(c.metrics.acc_h) << '\n';
    }
  }
}

}  // namespace distzsl

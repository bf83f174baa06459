#include "distzsl/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace distzsl {

namespace {

constexpr int kMaxAttempts = 100;

std::vector<std::vector<int>> rows_by_class(const FeatureDataset& train,
                                            const std::vector<int>& classes) {
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < classes.size(); ++i) slot[classes[i]] = i;
  std::vector<std::vector<int>> out(classes.size());
  for (int i = 0; i < train.size(); ++i) {
    out[slot.at(train.labels[static_cast<std::size_t>(i)])].push_back(i);
  }
  return out;
}

std::vector<std::vector<int>> assign_iid(const std::vector<std::vector<int>>& by_class, int k,
                                         Rng& rng) {
  std::vector<std::vector<int>> clients(static_cast<std::size_t>(k));
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;  // remainder samples continue round-robin across classes
  for (auto rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t base = rows.size() / static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (int c = 0; c < k; ++c) {
      auto& dst = clients[static_cast<std::size_t>(c)];
      dst.insert(dst.end(), rows.begin() + static_cast<long>(pos),
                 rows.begin() + static_cast<long>(pos + base));
      pos += base;
    }
    for (; pos < rows.size(); ++pos) {
      clients[static_cast<std::size_t>(order[cursor % order.size()])].push_back(rows[pos]);
      ++cursor;
    }
  }
  return clients;
}

std::vector<std::vector<int>> assign_dirichlet(const std::vector<std::vector<int>>& by_class,
                                               int k, double alpha, Rng& rng) {
  std::vector<std::vector<int>> clients(static_cast<std::size_t>(k));
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> q(static_cast<std::size_t>(k));
  for (auto rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    double total = 0.0;
    for (auto& x : q) {
      x = gamma(rng);
      total += x;
    }
    if (!(total > 0.0)) {
      // every gamma draw underflowed; fall back to a single random owner
      std::fill(q.begin(), q.end(), 0.0);
      q[std::uniform_int_distribution<std::size_t>(0, q.size() - 1)(rng)] = 1.0;
      total = 1.0;
    }
    const double n = static_cast<double>(rows.size());
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (int c = 0; c < k; ++c) {
      cumulative += q[static_cast<std::size_t>(c)] / total;
      std::size_t end = c + 1 == k ? rows.size()
                                   : std::min(rows.size(), static_cast<std::size_t>(
                                                               std::llround(cumulative * n)));
      end = std::max(end, begin);
      auto& dst = clients[static_cast<std::size_t>(c)];
      dst.insert(dst.end(), rows.begin() + static_cast<long>(begin),
                 rows.begin() + static_cast<long>(end));
      begin = end;
    }
  }
  return clients;
}

std::vector<std::vector<int>> assign_pccd(const std::vector<std::vector<int>>& by_class, int k,
                                          Rng& rng) {
  std::vector<std::size_t> class_order(by_class.size());
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng);
  std::vector<std::vector<int>> clients(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < class_order.size(); ++i) {
    auto& dst = clients[i % static_cast<std::size_t>(k)];
    const auto& rows = by_class[class_order[i]];
    dst.insert(dst.end(), rows.begin(), rows.end());
  }
  return clients;
}

// Keeps ceil(rho * n) rows of every (client, class) cell.
void truncate_local(std::vector<int>& rows, const FeatureDataset& train, double rho, Rng& rng) {
  if (rho >= 1.0) return;
  std::map<int, std::vector<int>> cells;
  for (int r : rows) cells[train.labels[static_cast<std::size_t>(r)]].push_back(r);
  rows.clear();
  for (auto& [label, cell] : cells) {
    std::shuffle(cell.begin(), cell.end(), rng);
    // tolerance keeps exact products such as 0.1 * 60 from rounding up
    const double want = rho * static_cast<double>(cell.size());
    const auto keep = static_cast<std::size_t>(std::ceil(want - 1e-9));
    rows.insert(rows.end(), cell.begin(),
                cell.begin() + static_cast<long>(std::min(cell.size(), std::max<std::size_t>(keep, 1))));
  }
}

}  // namespace

std::string to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::IID: return "iid";
    case PartitionScheme::Dirichlet: return "dirichlet";
    case PartitionScheme::PCCD: return "pccd";
  }
  return "?";
}

PartitionScheme parse_partition_scheme(std::string_view text) {
  if (text == "iid") return PartitionScheme::IID;
  if (text == "dirichlet" || text == "noniid") return PartitionScheme::Dirichlet;
  if (text == "pccd") return PartitionScheme::PCCD;
  throw ValidationError("unknown partition scheme '" + std::string(text) + "'");
}

void PartitionSpec::validate() const {
  if (num_clients < 1) throw ValidationError("partition: num_clients must be >= 1");
  if (!(local_data_ratio > 0.0 && local_data_ratio <= 1.0)) {
    throw ValidationError("partition: local_data_ratio must lie in (0, 1]");
  }
  if (scheme == PartitionScheme::Dirichlet && !(std::isfinite(alpha) && alpha > 0.0)) {
    throw ValidationError("partition: Dirichlet alpha must be finite and positive");
  }
}

int ClientPartition::total_samples() const {
  int total = 0;
  for (const auto& a : assignments) total += static_cast<int>(a.size());
  return total;
}

ClientPartition partition(const FeatureDataset& train, const PartitionSpec& spec) {
  spec.validate();
  if (train.empty()) throw PartitionError("partition: training set is empty");
  const auto classes = train.classes_present();
  const int k = spec.num_clients;
  if (spec.scheme == PartitionScheme::PCCD && k > static_cast<int>(classes.size())) {
    throw PartitionError("partition: " + std::to_string(k) + " clients exceed the " +
                         std::to_string(classes.size()) + " seen classes available under pccd");
  }
  const auto by_class = rows_by_class(train, classes);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = make_rng({spec.seed + static_cast<std::uint64_t>(attempt), 0x9a47u});
    std::vector<std::vector<int>> clients;
    switch (spec.scheme) {
      case PartitionScheme::IID: clients = assign_iid(by_class, k, rng); break;
      case PartitionScheme::Dirichlet: clients = assign_dirichlet(by_class, k, spec.alpha, rng); break;
      case PartitionScheme::PCCD: clients = assign_pccd(by_class, k, rng); break;
    }
    for (auto& rows : clients) truncate_local(rows, train, spec.local_data_ratio, rng);
    const bool any_empty =
        std::any_of(clients.begin(), clients.end(), [](const auto& c) { return c.empty(); });
    if (any_empty) continue;

    ClientPartition out;
    out.assignments = std::move(clients);
    for (auto& rows : out.assignments) {
      std::sort(rows.begin(), rows.end());
      std::vector<int> local;
      for (int r : rows) local.push_back(train.labels[static_cast<std::size_t>(r)]);
      std::sort(local.begin(), local.end());
      local.erase(std::unique(local.begin(), local.end()), local.end());
      out.local_classes.push_back(std::move(local));
    }
    return out;
  }
  throw PartitionError("partition: a client remained empty after " +
                       std::to_string(kMaxAttempts) + " attempts");
}

std::vector<int> sample_clients(int num_clients, double fraction, int round, std::uint64_t seed) {
  if (num_clients < 1) throw ValidationError("sample_clients: need at least one client");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("sample_clients: fraction must lie in (0, 1]");
  }
  std::vector<int> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  if (fraction >= 1.0) return ids;
  const double want = fraction * static_cast<double>(num_clients);
  const int m = std::clamp(static_cast<int>(std::ceil(want - 1e-9)), 1, num_clients);
  Rng rng = make_rng({seed, static_cast<std::uint64_t>(round), 0xc1e7u});
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<ClassCount> partition_summary(const FeatureDataset& train, const ClientPartition& part) {
  std::vector<ClassCount> out;
  for (int c = 0; c < part.num_clients(); ++c) {
    std::map<int, int> counts;
    for (int r : part.assignments[static_cast<std::size_t>(c)]) {
      ++counts[train.labels[static_cast<std::size_t>(r)]];
    }
    for (const auto& [label, n] : counts) out.push_back({c, label, n});
  }
  return out;
}

}  // namespace distzsl

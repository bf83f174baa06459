#include "distzsl/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace distzsl {

namespace fs = std::filesystem;

namespace {

std::string where(const std::string& file, std::size_t line) {
  return file + ": line " + std::to_string(line);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.filename().string() + ": missing or unreadable file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // trailing blank lines are tolerated
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::pair<long long, long long> parse_header(const std::vector<std::string>& lines,
                                             const std::string& file) {
  if (lines.empty()) throw ParseError(file + ": empty file");
  auto fields = split_fields(lines[0]);
  if (fields.size() != 2) throw ParseError(where(file, 1) + ": header must have two fields");
  return {parse_integer(fields[0], where(file, 1)), parse_integer(fields[1], where(file, 1))};
}

std::vector<int> parse_id_list(std::string_view text, const std::string& ctx) {
  std::vector<int> ids;
  text = trim(text);
  if (text.empty()) return ids;
  for (auto field : split_fields(text)) {
    ids.push_back(static_cast<int>(parse_integer(field, ctx)));
  }
  return ids;
}

void write_id_list(std::ostream& out, const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out << ',';
    out << ids[i];
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void AttributeMatrix::validate() const {
  if (dim() < 1) throw ValidationError("attribute matrix needs d_a >= 1");
  if (num_classes() < 2) throw ValidationError("attribute matrix needs at least 2 classes");
  if (!values.allFinite()) throw ValidationError("attribute matrix has non-finite entries");
  if (!class_names.empty() && static_cast<int>(class_names.size()) != num_classes()) {
    throw ValidationError("class_names must be empty or one per class");
  }
  std::vector<GroupRange> sorted = groups;
  std::sort(sorted.begin(), sorted.end(),
            [](const GroupRange& a, const GroupRange& b) { return a.start < b.start; });
  int cursor = 0;
  for (const auto& g : sorted) {
    if (g.start != cursor || g.end <= g.start) {
      throw ValidationError("attribute groups must be disjoint, non-empty and tile [0, d_a)");
    }
    cursor = g.end;
  }
  if (cursor != dim()) {
    throw ValidationError("attribute groups must tile [0, d_a); covered up to " +
                          std::to_string(cursor) + " of " + std::to_string(dim()));
  }
}

std::vector<GroupRange> even_groups(int dim, int count) {
  if (count < 1 || count > dim) throw ValidationError("group count must be in [1, d_a]");
  std::vector<GroupRange> groups;
  const int base = dim / count;
  const int extra = dim % count;
  int start = 0;
  for (int l = 0; l < count; ++l) {
    const int len = base + (l < extra ? 1 : 0);
    groups.push_back({start, start + len});
    start += len;
  }
  return groups;
}

bool ClassSplit::is_seen(int y) const { return std::binary_search(seen.begin(), seen.end(), y); }

bool ClassSplit::is_unseen(int y) const {
  return std::binary_search(unseen.begin(), unseen.end(), y);
}

void ClassSplit::validate(int num_classes) const {
  if (!std::is_sorted(seen.begin(), seen.end()) || !std::is_sorted(unseen.begin(), unseen.end())) {
    throw ValidationError("class split lists must be sorted");
  }
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end() ||
      std::adjacent_find(unseen.begin(), unseen.end()) != unseen.end()) {
    throw ValidationError("class split lists contain duplicates");
  }
  for (int y : seen) {
    if (is_unseen(y)) {
      throw ValidationError("class " + std::to_string(y) + " is listed as both seen and unseen");
    }
  }
  for (const auto* list : {&seen, &unseen}) {
    for (int y : *list) {
      if (y < 0 || y >= num_classes) {
        throw ValidationError("class id " + std::to_string(y) + " out of range");
      }
    }
  }
  if (!(test_fraction_seen > 0.0 && test_fraction_seen < 1.0)) {
    throw ValidationError("test_fraction_seen must lie in (0, 1)");
  }
}

FeatureDataset FeatureDataset::subset(std::span<const int> rows) const {
  FeatureDataset out;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

std::vector<int> FeatureDataset::classes_present() const {
  std::vector<int> out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void FeatureDataset::validate(int num_classes) const {
  if (static_cast<int>(labels.size()) != size()) {
    throw ValidationError("label count does not match feature rows");
  }
  if (dim() < 1) throw ValidationError("feature dimension must be >= 1");
  if (!features.allFinite()) throw ValidationError("features contain non-finite values");
  split.validate(num_classes);
  for (int i = 0; i < size(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= num_classes) {
      throw ValidationError("row " + std::to_string(i) + ": label " + std::to_string(y) +
                            " out of range");
    }
    if (!split.is_seen(y) && !split.is_unseen(y)) {
      throw ValidationError("row " + std::to_string(i) + ": label " + std::to_string(y) +
                            " is in neither the seen nor the unseen list");
    }
  }
}

void SyntheticSpec::validate() const {
  if (num_seen < 1 || num_unseen < 1 || attr_dim < 1 || feature_dim < 1 ||
      samples_per_class < 1 || group_count < 1) {
    throw ValidationError("synthetic spec: all counts must be positive");
  }
  if (num_seen + num_unseen < 2) throw ValidationError("synthetic spec: need at least 2 classes");
  if (group_count > attr_dim) throw ValidationError("synthetic spec: group_count exceeds d_a");
  if (!(attribute_sparsity >= 0.0 && attribute_sparsity <= 1.0)) {
    throw ValidationError("synthetic spec: attribute_sparsity must lie in [0, 1]");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ValidationError("synthetic spec: noise_std must be finite and >= 0");
  }
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng({seed, 0x5e7u});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int num_classes = spec.num_seen + spec.num_unseen;
  SyntheticCorpus out;
  auto& attrs = out.attributes;
  attrs.values = Eigen::MatrixXd::Zero(spec.attr_dim, num_classes);
  attrs.groups = even_groups(spec.attr_dim, spec.group_count);
  for (int y = 0; y < num_classes; ++y) {
    auto col = attrs.values.col(y);
    for (int l = 0; l < spec.attr_dim; ++l) {
      const bool active = unit(rng) >= spec.attribute_sparsity;
      const double magnitude = unit(rng);
      if (active) col(l) = magnitude;
    }
    if (col.norm() == 0.0) {
      // keep every prototype normalizable
      std::uniform_int_distribution<int> pick(0, spec.attr_dim - 1);
      col(pick(rng)) = 1.0;
    }
    col /= col.norm();
  }

  out.planted_map.resize(spec.feature_dim, spec.attr_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.attr_dim));
  for (int c = 0; c < spec.attr_dim; ++c) {
    for (int r = 0; r < spec.feature_dim; ++r) out.planted_map(r, c) = scale * gauss(rng);
  }

  auto& ds = out.data;
  const int n = num_classes * spec.samples_per_class;
  ds.features.resize(n, spec.feature_dim);
  ds.labels.resize(static_cast<std::size_t>(n));
  int row = 0;
  for (int y = 0; y < num_classes; ++y) {
    const Eigen::VectorXd center = out.planted_map * attrs.values.col(y);
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      ds.labels[static_cast<std::size_t>(row)] = y;
      for (int j = 0; j < spec.feature_dim; ++j) {
        const double noise = spec.noise_std > 0.0 ? spec.noise_std * gauss(rng) : 0.0;
        ds.features(row, j) = center(j) + noise;
      }
    }
  }
  ds.split.seen.resize(static_cast<std::size_t>(spec.num_seen));
  std::iota(ds.split.seen.begin(), ds.split.seen.end(), 0);
  ds.split.unseen.resize(static_cast<std::size_t>(spec.num_unseen));
  std::iota(ds.split.unseen.begin(), ds.split.unseen.end(), spec.num_seen);
  return out;
}

namespace {

Eigen::MatrixXd read_attribute_values(const fs::path& path) {
  const std::string file = path.filename().string();
  const auto lines = read_lines(path);
  const auto [rows, cols] = parse_header(lines, file);
  if (rows < 1 || cols < 2) throw ParseError(where(file, 1) + ": need d_a >= 1 and >= 2 classes");
  if (static_cast<long long>(lines.size()) - 1 != rows) {
    throw ParseError(file + ": header declares " + std::to_string(rows) + " rows, found " +
                     std::to_string(lines.size() - 1));
  }
  Eigen::MatrixXd values(rows, cols);
  for (long long r = 0; r < rows; ++r) {
    const auto ctx = where(file, static_cast<std::size_t>(r + 2));
    const auto fields = split_fields(lines[static_cast<std::size_t>(r + 1)]);
    if (static_cast<long long>(fields.size()) != cols) {
      throw ParseError(ctx + ": dimension mismatch, expected " + std::to_string(cols) +
                       " values, got " + std::to_string(fields.size()));
    }
    for (long long c = 0; c < cols; ++c) {
      values(r, c) = parse_real(fields[static_cast<std::size_t>(c)], ctx);
    }
  }
  return values;
}

}  // namespace

AttributeMatrix load_attributes(const fs::path& file) {
  AttributeMatrix attrs;
  attrs.values = read_attribute_values(file);
  attrs.groups = {{0, attrs.dim()}};
  attrs.validate();
  return attrs;
}

Corpus load_dataset(const fs::path& dir) {
  Corpus corpus;
  auto& attrs = corpus.attributes;
  attrs.values = read_attribute_values(dir / "attributes.csv");
  {
    const std::string file = "groups.csv";
    const auto lines = read_lines(dir / file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto ctx = where(file, i + 1);
      const auto fields = split_fields(lines[i]);
      if (fields.size() != 2) throw ParseError(ctx + ": expected 'start,end'");
      attrs.groups.push_back({static_cast<int>(parse_integer(fields[0], ctx)),
                              static_cast<int>(parse_integer(fields[1], ctx))});
    }
  }
  try {
    attrs.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("groups.csv: ") + e.what());
  }
  const int num_classes = attrs.num_classes();

  auto& ds = corpus.data;
  if (fs::exists(dir / "features.csv")) {
    const std::string file = "features.csv";
    const auto lines = read_lines(dir / file);
    const auto [n, dv] = parse_header(lines, file);
    if (n < 1 || dv < 1) throw ParseError(where(file, 1) + ": need N >= 1 and d_v >= 1");
    if (static_cast<long long>(lines.size()) - 1 != n) {
      throw ParseError(file + ": header declares " + std::to_string(n) + " rows, found " +
                       std::to_string(lines.size() - 1));
    }
    ds.features.resize(n, dv);
    ds.labels.resize(static_cast<std::size_t>(n));
    for (long long r = 0; r < n; ++r) {
      const auto ctx = where(file, static_cast<std::size_t>(r + 2));
      const auto fields = split_fields(lines[static_cast<std::size_t>(r + 1)]);
      if (static_cast<long long>(fields.size()) != dv + 1) {
        throw ParseError(ctx + ": dimension mismatch, expected label + " + std::to_string(dv) +
                         " values, got " + std::to_string(fields.size()) + " fields");
      }
      const auto label = parse_integer(fields[0], ctx);
      if (label < 0 || label >= num_classes) {
        throw ParseError(ctx + ": label " + std::to_string(label) + " out of range");
      }
      ds.labels[static_cast<std::size_t>(r)] = static_cast<int>(label);
      for (long long c = 0; c < dv; ++c) {
        ds.features(r, c) = parse_real(fields[static_cast<std::size_t>(c + 1)], ctx);
      }
    }
  } else if (fs::exists(dir / "features.bin")) {
    const std::string file = "features.bin";
    std::ifstream in(dir / file, std::ios::binary);
    if (!in) throw ParseError(file + ": unreadable file");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw ParseError(file + ": truncated header");
    auto read_u32 = [&](std::size_t off) {
      return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
             (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
             (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
    };
    const std::uint32_t n = read_u32(0);
    const std::uint32_t dv = read_u32(4);
    if (n < 1 || dv < 1) throw ParseError(file + ": need N >= 1 and d_v >= 1");
    const std::size_t expected = 8 + 4ull * n * dv;
    if (bytes.size() != expected) {
      throw ParseError(file + ": dimension mismatch, expected " + std::to_string(expected) +
                       " bytes, found " + std::to_string(bytes.size()));
    }
    ds.features.resize(n, dv);
    for (std::uint32_t r = 0; r < n; ++r) {
      for (std::uint32_t c = 0; c < dv; ++c) {
        const std::uint32_t raw = read_u32(8 + 4ull * (static_cast<std::size_t>(r) * dv + c));
        const float value = std::bit_cast<float>(raw);
        if (!std::isfinite(value)) {
          throw ParseError(file + ": row " + std::to_string(r) + ": non-finite value");
        }
        ds.features(r, c) = value;
      }
    }
    const std::string lfile = "labels.csv";
    const auto lines = read_lines(dir / lfile);
    if (lines.size() != n) {
      throw ParseError(lfile + ": dimension mismatch, expected " + std::to_string(n) +
                       " labels, found " + std::to_string(lines.size()));
    }
    ds.labels.resize(n);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto ctx = where(lfile, i + 1);
      const auto label = parse_integer(lines[i], ctx);
      if (label < 0 || label >= num_classes) {
        throw ParseError(ctx + ": label " + std::to_string(label) + " out of range");
      }
      ds.labels[i] = static_cast<int>(label);
    }
  } else {
    throw ParseError("features.csv: missing file (and no features.bin)");
  }

  {
    const std::string file = "splits.csv";
    const auto lines = read_lines(dir / file);
    bool have_seen = false;
    bool have_unseen = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto ctx = where(file, i + 1);
      const std::string_view line = lines[i];
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) throw ParseError(ctx + ": expected 'key:values'");
      const auto key = trim(line.substr(0, colon));
      const auto rest = line.substr(colon + 1);
      if (key == "seen") {
        ds.split.seen = parse_id_list(rest, ctx);
        have_seen = true;
      } else if (key == "unseen") {
        ds.split.unseen = parse_id_list(rest, ctx);
        have_unseen = true;
      } else if (key == "test_fraction_seen") {
        ds.split.test_fraction_seen = parse_real(rest, ctx);
      } else {
        throw ParseError(ctx + ": unknown key '" + std::string(key) + "'");
      }
    }
    if (!have_seen || !have_unseen) throw ParseError(file + ": needs 'seen:' and 'unseen:' lines");
    std::sort(ds.split.seen.begin(), ds.split.seen.end());
    std::sort(ds.split.unseen.begin(), ds.split.unseen.end());
    try {
      ds.split.validate(num_classes);
    } catch (const ValidationError& e) {
      throw ValidationError(file + ": " + e.what());
    }
  }
  ds.validate(num_classes);
  return corpus;
}

void save_dataset(const fs::path& dir, const Corpus& corpus, FeatureFormat format) {
  const auto& attrs = corpus.attributes;
  const auto& ds = corpus.data;
  attrs.validate();
  ds.validate(attrs.num_classes());
  fs::create_directories(dir);

  {
    std::ostringstream out;
    out << attrs.dim() << ',' << attrs.num_classes() << '\n';
    for (int r = 0; r < attrs.dim(); ++r) {
      for (int c = 0; c < attrs.num_classes(); ++c) {
        if (c) out << ',';
        out << format_shortest(attrs.values(r, c));
      }
      out << '\n';
    }
    write_file(dir / "attributes.csv", out.str());
  }
  {
    std::ostringstream out;
    for (const auto& g : attrs.groups) out << g.start << ',' << g.end << '\n';
    write_file(dir / "groups.csv", out.str());
  }
  if (format == FeatureFormat::Csv) {
    std::ostringstream out;
    out << ds.size() << ',' << ds.dim() << '\n';
    for (int r = 0; r < ds.size(); ++r) {
      out << ds.labels[static_cast<std::size_t>(r)];
      for (int c = 0; c < ds.dim(); ++c) out << ',' << format_shortest(ds.features(r, c));
      out << '\n';
    }
    write_file(dir / "features.csv", out.str());
    fs::remove(dir / "features.bin");
    fs::remove(dir / "labels.csv");
  } else {
    std::string bytes;
    bytes.reserve(8 + 4ull * static_cast<std::size_t>(ds.size() * ds.dim()));
    auto put_u32 = [&](std::uint32_t v) {
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
    };
    put_u32(static_cast<std::uint32_t>(ds.size()));
    put_u32(static_cast<std::uint32_t>(ds.dim()));
    for (int r = 0; r < ds.size(); ++r) {
      for (int c = 0; c < ds.dim(); ++c) {
        put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(ds.features(r, c))));
      }
    }
    write_file(dir / "features.bin", bytes);
    std::ostringstream labels;
    for (int y : ds.labels) labels << y << '\n';
    write_file(dir / "labels.csv", labels.str());
    fs::remove(dir / "features.csv");
  }
  {
    std::ostringstream out;
    out << "seen:";
    write_id_list(out, ds.split.seen);
    out << "\nunseen:";
    write_id_list(out, ds.split.unseen);
    out << '\n';
    if (ds.split.test_fraction_seen != ClassSplit{}.test_fraction_seen) {
      out << "test_fraction_seen:" << format_shortest(ds.split.test_fraction_seen) << '\n';
    }
    write_file(dir / "splits.csv", out.str());
  }
}

TrainTestSplit split_train_test(const FeatureDataset& ds, std::uint64_t seed) {
  std::vector<std::vector<int>> rows_by_class;
  int max_label = -1;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  rows_by_class.resize(static_cast<std::size_t>(max_label + 1));
  for (int i = 0; i < ds.size(); ++i) {
    rows_by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
  }

  std::vector<int> train_rows;
  std::vector<int> seen_test_rows;
  std::vector<int> unseen_rows;
  for (int y = 0; y <= max_label; ++y) {
    auto& rows = rows_by_class[static_cast<std::size_t>(y)];
    if (rows.empty()) continue;
    if (ds.split.is_unseen(y)) {
      unseen_rows.insert(unseen_rows.end(), rows.begin(), rows.end());
      continue;
    }
    if (!ds.split.is_seen(y)) {
      throw ValidationError("class " + std::to_string(y) + " is neither seen nor unseen");
    }
    const int n = static_cast<int>(rows.size());
    if (n < 2) {
      throw ValidationError("seen class " + std::to_string(y) +
                            " has fewer than 2 samples and cannot be split");
    }
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(y), 0x511u});
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto wanted = std::llround(ds.split.test_fraction_seen * n);
    const int n_test = static_cast<int>(std::clamp<long long>(wanted, 1, n - 1));
    seen_test_rows.insert(seen_test_rows.end(), rows.begin(), rows.begin() + n_test);
    train_rows.insert(train_rows.end(), rows.begin() + n_test, rows.end());
  }
  if (train_rows.empty()) throw ValidationError("no seen-class samples: training set is empty");
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(seen_test_rows.begin(), seen_test_rows.end());
  std::sort(unseen_rows.begin(), unseen_rows.end());
  TrainTestSplit out{ds.subset(train_rows), ds.subset(seen_test_rows), ds.subset(unseen_rows),
                     std::move(train_rows), std::move(seen_test_rows), std::move(unseen_rows)};
  return out;
}

double mean_within_class_variance(const FeatureDataset& ds) {
  const auto classes = ds.classes_present();
  if (classes.empty()) return 0.0;
  double total = 0.0;
  for (int y : classes) {
    std::vector<int> rows;
    for (int i = 0; i < ds.size(); ++i) {
      if (ds.labels[static_cast<std::size_t>(i)] == y) rows.push_back(i);
    }
    // shifted by the first sample so identical rows give exactly zero
    Eigen::MatrixXd block = ds.subset(rows).features;
    const Eigen::RowVectorXd first = block.row(0);
    block.rowwise() -= first;
    const Eigen::RowVectorXd mean = block.colwise().mean();
    total += (block.rowwise() - mean).squaredNorm() / static_cast<double>(block.size());
  }
  return total / static_cast<double>(classes.size());
}

}  // namespace distzsl

#include "distzsl/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace distzsl {

namespace {

template <typename T>
void write_section(std::ostream& out, const char* name, const T& t) {
  out << '[' << name << "]\n" << t.rows() << ',' << t.cols() << '\n';
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      if (c) out << ',';
      out << format_precise(t(r, c));
    }
    out << '\n';
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams<double>& p) {
  p.for_each([&](const char* name, const auto& t) { write_section(out, name, t); });
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<double>& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(out, p);
}

ModelParams<double> read_checkpoint(std::istream& in, const std::string& name) {
  std::map<std::string, Eigen::MatrixXd> sections;
  std::string line;
  std::size_t lineno = 0;
  auto where = [&] { return name + ": line " + std::to_string(lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto header = trim(line);
    if (header.size() < 3 || header.front() != '[' || header.back() != ']') {
      throw ParseError(where() + ": expected a [section] header");
    }
    const std::string key(header.substr(1, header.size() - 2));
    if (!std::getline(in, line)) throw ParseError(where() + ": missing dimension header");
    ++lineno;
    const auto dims = split_fields(line);
    if (dims.size() != 2) throw ParseError(where() + ": expected 'rows,cols'");
    const auto rows = parse_integer(dims[0], where());
    const auto cols = parse_integer(dims[1], where());
    if (rows < 0 || cols < 0) throw ParseError(where() + ": negative dimension");
    Eigen::MatrixXd m(rows, cols);
    for (long long r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw ParseError(where() + ": truncated section " + key);
      ++lineno;
      const auto fields = split_fields(line);
      if (static_cast<long long>(fields.size()) != cols) {
        throw ParseError(where() + ": dimension mismatch in section " + key);
      }
      for (long long c = 0; c < cols; ++c) m(r, c) = parse_real(fields[static_cast<std::size_t>(c)], where());
    }
    sections[key] = std::move(m);
  }

  ModelParams<double> p;
  auto take_matrix = [&](const char* key, Eigen::MatrixXd& dst) {
    auto it = sections.find(key);
    if (it == sections.end()) throw ParseError(name + ": missing section [" + key + "]");
    dst = it->second;
  };
  auto take_vector = [&](const char* key, Eigen::VectorXd& dst) {
    Eigen::MatrixXd m;
    take_matrix(key, m);
    if (m.cols() > 1) throw ParseError(name + ": section [" + key + "] must be a column");
    dst = m.size() ? Eigen::VectorXd(m.col(0)) : Eigen::VectorXd();
  };
  take_matrix("W_g", p.w_g);
  take_vector("b_g", p.b_g);
  take_matrix("W_h", p.w_h);
  take_vector("b_h", p.b_h);
  take_matrix("W_c", p.w_c);
  take_vector("b_c", p.b_c);
  p.mode = p.w_c.size() > 0 ? ModelMode::AttributeFree : ModelMode::AttributeBased;
  if (p.mode == ModelMode::AttributeBased) {
    if (p.w_g.rows() != p.b_g.size() || p.w_h.rows() != p.b_h.size() ||
        p.w_h.cols() != p.w_g.rows() || p.w_h.rows() != p.w_g.cols() || p.w_g.size() == 0) {
      throw ParseError(name + ": inconsistent regressor/decoder shapes");
    }
  } else if (p.w_c.rows() != p.b_c.size()) {
    throw ParseError(name + ": inconsistent classifier shapes");
  }
  return p;
}

ModelParams<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.filename().string() + ": missing or unreadable file");
  return read_checkpoint(in, path.filename().string());
}

}  // namespace distzsl

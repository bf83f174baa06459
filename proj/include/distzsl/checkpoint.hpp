#pragma once

#include <filesystem>
#include <iosfwd>

#include "distzsl/model.hpp"

namespace distzsl {

// Text checkpoint: sections [W_g] [b_g] [W_h] [b_h] [W_c] [b_c], each followed by a
// "rows,cols" header and that many comma-separated rows at 17 significant digits.
// The mode is implied: a non-empty W_c marks the attribute-free baseline.
void write_checkpoint(std::ostream& out, const ModelParams<double>& p);
void save_checkpoint(const std::filesystem::path& path, const ModelParams<double>& p);
ModelParams<double> read_checkpoint(std::istream& in, const std::string& name = "model.csv");
ModelParams<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace distzsl

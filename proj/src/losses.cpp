#include "distzsl/eval.hpp"
#include "distzsl/losses.hpp"

namespace distzsl {

std::string to_string(const LossTerms& terms) {
  if (terms == LossTerms{}) return "full";
  if (terms == LossTerms::sce_only()) return "sce-only";
  std::string out = "sce";
  if (terms.kl) out += "+kl";
  if (terms.bc) out += "+bc";
  if (terms.ad) out += "+ad";
  return out;
}

LossTerms parse_loss_terms(std::string_view text) {
  if (text == "full") return {};
  if (text == "sce-only" || text == "sce") return LossTerms::sce_only();
  LossTerms terms = LossTerms::sce_only();
  for (auto part : split_fields(text, '+')) {
    part = trim(part);
    if (part == "sce") continue;
    if (part == "kl") terms.kl = true;
    else if (part == "bc") terms.bc = true;
    else if (part == "ad") terms.ad = true;
    else throw ValidationError("unknown ablation term '" + std::string(part) + "'");
  }
  return terms;
}

double per_class_top1(std::span<const int> preds, std::span<const int> labels,
                      std::span<const int> classes) {
  if (preds.size() != labels.size()) throw ValidationError("per_class_top1: size mismatch");
  if (classes.empty()) throw ValidationError("per_class_top1: no classes");
  std::map<int, std::pair<long, long>> tally;  // class -> (correct, total)
  for (int y : classes) tally[y] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = tally.find(labels[i]);
    if (it == tally.end()) {
      throw ValidationError("per_class_top1: label " + std::to_string(labels[i]) +
                            " outside the evaluated classes");
    }
    ++it->second.second;
    if (preds[i] == labels[i]) ++it->second.first;
  }
  double sum = 0.0;
  for (const auto& [y, counts] : tally) {
    if (counts.second == 0) {
      throw ValidationError("per_class_top1: class " + std::to_string(y) + " has no test samples");
    }
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return 100.0 * sum / static_cast<double>(tally.size());
}

double harmonic_mean(double acc_u, double acc_s) {
  if (acc_u + acc_s == 0.0) return 0.0;
  return 2.0 * acc_u * acc_s / (acc_u + acc_s);
}

}  // namespace distzsl

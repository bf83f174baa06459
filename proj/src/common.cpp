#include "distzsl/common.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace distzsl {

Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * keys.size());
  for (auto key : keys) {
    words.push_back(static_cast<std::uint32_t>(key & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(key >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::string format_shortest(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

std::string format_precise(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), end);
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

double parse_real(std::string_view field, std::string_view where) {
  field = trim(field);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(std::string(where) + ": cannot parse real '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(std::string(where) + ": non-finite value '" + std::string(field) + "'");
  }
  return value;
}

long long parse_integer(std::string_view field, std::string_view where) {
  field = trim(field);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(std::string(where) + ": cannot parse integer '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace distzsl

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace distzsl {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the file and row.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A domain invariant does not hold (bad spec, overlapping split, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during local training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Deterministic generator keyed by a tuple of integers, e.g. (seed, round, client).
Rng make_rng(std::initializer_list<std::uint64_t> keys);

// Canonical decimal text for reals. `format_shortest` is the shortest string that
// parses back to the same double; `format_precise` always uses 17 significant digits.
std::string format_shortest(double value);
std::string format_precise(double value);

/// Strict parse of a whole field; throws ParseError on garbage or trailing text.
double parse_real(std::string_view field, std::string_view where);
long long parse_integer(std::string_view field, std::string_view where);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');
std::string_view trim(std::string_view text);

}  // namespace distzsl

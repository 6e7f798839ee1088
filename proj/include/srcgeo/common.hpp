#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace srcgeo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
  parse,
  empty_input,
  io,
  invalid_argument,
  dimension_mismatch,
  degenerate_embedding,
  dictionary_not_normalized,
  budget_exceeded,
  infeasible_geometry,
  no_overlap,
  numerical_failure,
  divergence,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Seeded generator with platform-independent draws. std::*_distribution
/// output differs between standard libraries, so the transforms are done here
/// on top of the (fully specified) mt19937_64 engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // N(0, 1), Box-Muller
  std::size_t index(std::size_t n);    // [0, n)
  Vec normal_vector(Index n);
  Mat normal_matrix(Index rows, Index cols);
  Vec unit_vector(Index n);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 mixing, used to derive independent stream seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Fixed 9-significant-digit rendering used by every report writer.
std::string format_number(double value);

}  // namespace srcgeo

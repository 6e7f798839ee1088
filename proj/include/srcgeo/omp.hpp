#pragma once

#include "srcgeo/common.hpp"

#include <vector>

namespace srcgeo {

/// Output of orthogonal matching pursuit.
struct SparseCode {
  std::vector<Index> support;     // selection order
  Vec coefficients;               // aligned with `support`
  double final_residual_norm = 0.0;
  int iterations = 0;
  bool rank_deficient = false;    // some support system needed min-norm LS
  std::vector<double> residual_history;  // ||r|| before the first and after every iteration

  /// Coefficients scattered into a length-`atoms` vector.
  Vec dense(Index atoms) const;
};

inline constexpr double kDefaultStopTol = 1e-10;
inline constexpr double kUnitNormTol = 1e-6;

/// Classical OMP with a budget of `budget` atoms.
///
/// Each iteration picks the unselected atom with the largest |<a_j, r>|
/// (ties to the lowest index), re-solves least squares on the whole support
/// and updates the residual. Stops at the budget, when ||r|| <= stop_tol, or
/// when no atom correlates with the residual (an extra atom could not lower
/// it). Dictionary columns must be unit norm within kUnitNormTol.
SparseCode omp(const Mat& dictionary, const Vec& target, int budget,
               double stop_tol = kDefaultStopTol);

/// Minimum-norm least-squares fit of `target` on the listed columns.
/// Returns the coefficients; `rank_deficient` is set when the columns are
/// numerically dependent.
Vec support_least_squares(const Mat& dictionary, const std::vector<Index>& support,
                          const Vec& target, bool* rank_deficient = nullptr);

}  // namespace srcgeo

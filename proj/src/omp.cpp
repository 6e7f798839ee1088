#include "srcgeo/omp.hpp"

#include <algorithm>
#include <cmath>

namespace srcgeo {

Vec SparseCode::dense(Index atoms) const {
  Vec out = Vec::Zero(atoms);
  for (std::size_t i = 0; i < support.size(); ++i) out(support[i]) += coefficients(static_cast<Index>(i));
  return out;
}

Vec support_least_squares(const Mat& dictionary, const std::vector<Index>& support,
                          const Vec& target, bool* rank_deficient) {
  Mat sub(dictionary.rows(), static_cast<Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j) sub.col(static_cast<Index>(j)) = dictionary.col(support[j]);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(sub);
  if (rank_deficient) *rank_deficient = cod.rank() < sub.cols();
  return cod.solve(target);
}

SparseCode omp(const Mat& dictionary, const Vec& target, int budget, double stop_tol) {
  const Index p = dictionary.rows();
  const Index n = dictionary.cols();
  if (target.size() != p)
    throw Error(ErrorCode::dimension_mismatch, "omp: target length differs from dictionary rows");
  if (budget < 1 || budget > std::min(p, n))
    throw Error(ErrorCode::invalid_argument,
                "omp: budget " + std::to_string(budget) + " outside 1..min(p, N)");
  if (stop_tol < 0) throw Error(ErrorCode::invalid_argument, "omp: negative stop tolerance");
  for (Index j = 0; j < n; ++j) {
    if (std::abs(dictionary.col(j).norm() - 1.0) > kUnitNormTol)
      throw Error(ErrorCode::dictionary_not_normalized,
                  "omp: atom " + std::to_string(j + 1) + " is not unit norm");
  }

  SparseCode code;
  std::vector<char> selected(static_cast<std::size_t>(n), 0);
  Vec residual = target;
  double rnorm = residual.norm();
  code.residual_history.push_back(rnorm);

  while (static_cast<int>(code.support.size()) < budget && rnorm > stop_tol) {
    const Vec corr = dictionary.transpose() * residual;
    Index best = -1;
    double best_abs = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (selected[j]) continue;
      const double a = std::abs(corr(j));
      if (best < 0 || a > best_abs) {
        best = j;
        best_abs = a;
      }
    }
    if (best < 0 || !(best_abs > 0.0)) break;

    selected[best] = 1;
    code.support.push_back(best);
    bool deficient = false;
    code.coefficients = support_least_squares(dictionary, code.support, target, &deficient);
    code.rank_deficient = code.rank_deficient || deficient;

    residual = target;
    for (std::size_t i = 0; i < code.support.size(); ++i)
      residual -= code.coefficients(static_cast<Index>(i)) * dictionary.col(code.support[i]);
    rnorm = residual.norm();
    code.residual_history.push_back(rnorm);
    ++code.iterations;
  }
  if (code.support.empty()) code.coefficients = Vec();
  code.final_residual_norm = rnorm;
  return code;
}

}  // namespace srcgeo

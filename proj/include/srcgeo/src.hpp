#pragma once

#include "srcgeo/embedding.hpp"
#include "srcgeo/omp.hpp"

#include <string>
#include <vector>

namespace srcgeo {

/// Class-wise residuals of one test point and their ordering.
struct ResidualProfile {
  Vec residuals;           // r_k, index k - 1
  int predicted_label = 1; // argmin, lowest id on ties
  double margin_top2 = 0;  // r_(2) - r_(1); 0 when K = 1
  bool tie_flag = false;
};

struct LeakageDecomposition {
  double eta_rec = 0;              // ||z - Z c||
  double eta_leak = 0;             // ||Z_{-y} c_{-y}||
  double true_class_residual = 0;  // ||z - Z delta_y(c)||
};

struct Prediction {
  int label = 1;
  bool stable = false;
};

enum class SparseResidualMode { exact, greedy };

/// Upper limit on the number of supports enumerated in exact mode.
inline constexpr double kExactSupportCap = 1e5;

struct EvaluationReport {
  std::vector<long> class_ids;         // original labels, union of dictionary and test classes
  Eigen::MatrixXi confusion;           // rows: true class, cols: predicted class
  std::vector<long> recall_class_ids;  // classes with test support
  std::vector<double> per_class_recall;
  double accuracy = 0;
  double balanced_accuracy = 0;
  double margin_mean = 0;
  double margin_median = 0;
  std::vector<double> margins;         // per test column
  std::vector<int> true_labels;        // per test column, indices into class_ids
  std::vector<int> predicted;          // per test column, indices into class_ids
  std::vector<Vec> residuals;          // per test column, over dictionary classes
  std::vector<std::string> warnings;
  int budget = 0;
};

/// Builds the profile (argmin, top-2 margin, tie flag) from raw residuals.
ResidualProfile profile_from_residuals(const Vec& residuals);

/// r_k(z) = ||z - Z delta_k(c)|| for every class of the partition.
ResidualProfile class_restricted_residuals(const Mat& dictionary, const ClassPartition& partition,
                                           const SparseCode& code, const Vec& target);
ResidualProfile class_restricted_residuals(const LabeledEmbeddingSet& dictionary,
                                           const ClassPartition& partition,
                                           const SparseCode& code, const Vec& target);

/// Argmin label plus the eta-stability certificate margin > 2 eta (strict).
Prediction src_predict(const ResidualProfile& profile, double eta);

LeakageDecomposition leakage_decomposition(const Mat& dictionary, const ClassPartition& partition,
                                           const SparseCode& code, const Vec& target,
                                           int true_label);

/// Best residual using at most `budget` atoms of class `class_id`.
/// exact: enumerates supports (throws budget_exceeded above kExactSupportCap);
/// greedy: OMP over the class atoms only, an upper bound on the exact value.
double class_restricted_sparse_residual(const Mat& dictionary, const ClassPartition& partition,
                                        const Vec& target, int class_id, int budget,
                                        SparseResidualMode mode);

/// Fixed SRC rule over every test column.
///
/// The dictionary must have unit-norm columns; test columns are normalized
/// here. Test classes missing from the dictionary count as errors and add a
/// warning. Every run checks r_k >= r_k^sub against the uncentered class
/// spans and throws numerical_failure if that ever fails.
EvaluationReport evaluate(const LabeledEmbeddingSet& dictionary,
                          const LabeledEmbeddingSet& test_set, int budget);

/// Mean of per-class recalls.
double balanced_accuracy(const std::vector<double>& per_class_recall);

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace srcgeo

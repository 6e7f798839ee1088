#pragma once

// Training-time geometry objective. Nothing here may depend on the sparse
// coder or on SRC inference.

#include "srcgeo/common.hpp"
#include "srcgeo/subspace.hpp"

#include "json.hpp"

#include <vector>

namespace srcgeo {

/// min_C ||Z - Z C||_F^2 + lambda ||C||_F^2 + mu ||(1 - M) . C||_F^2,
/// subject to diag(C) = 0.
struct MaskedRidgeProblem {
  Mat batch;     // p x n
  Mat mask;      // n x n, M_ij = 1[y_i = y_j]
  double lambda = 0.01;
  double mu = 1.0;

  static MaskedRidgeProblem from_labels(Mat batch, const std::vector<int>& labels, double lambda,
                                        double mu);
  void validate() const;
};

Mat class_mask(const std::vector<int>& labels);

/// Column-wise closed form: for column i the system
/// (Z_{-i}^T Z_{-i} + lambda I + mu D_i) c = Z_{-i}^T z_i over every other
/// sample, D_i flagging cross-class positions. The diagonal is exactly zero.
Mat masked_ridge_solve(const MaskedRidgeProblem& problem);

/// Value of the masked ridge objective at C (diag(C) is not checked).
double masked_ridge_objective(const MaskedRidgeProblem& problem, const Mat& coefficients);

/// L_SE = ||Z - Z C||_F^2.
double se_loss(const Mat& batch, const Mat& coefficients);

/// ||(1 - M) . C||_F.
double cross_class_leakage_norm(const Mat& coefficients, const Mat& mask);

struct LeakageBound {
  double cross_class_reconstruction = 0;  // ||Z ((1 - M) . C)||_F
  double bound = 0;                       // ||Z||_2 ||(1 - M) . C||_F
  bool holds() const { return cross_class_reconstruction <= bound * (1.0 + 1e-12) + 1e-15; }
};
LeakageBound cross_class_leakage_bound(const Mat& batch, const Mat& coefficients, const Mat& mask);

/// (1/p) sum_j max(0, c / sqrt(p) - std(Z_j,:)), population std.
double variance_anchor_loss(const Mat& batch, double anchor_c);

struct RepulsionResult {
  double loss = 0;
  std::size_t pairs = 0;
  bool no_defined_pair = false;        // loss forced to 0
  std::vector<int> classes;            // label value per entry of `bases`
  std::vector<SubspaceBasis> bases;    // only classes with a defined basis
};

/// Mean over class pairs of ||U_k^T U_l||_F^2 with centered top-d bases.
/// Classes with fewer than two samples (or a rank-0 centered matrix) have no
/// basis and are skipped.
RepulsionResult repulsion(const Mat& batch, const std::vector<int>& labels, Index dim,
                          bool drop_top);
double repulsion_loss(const Mat& batch, const std::vector<int>& labels, Index dim, bool drop_top);

struct GeometryConfig {
  double lambda_se = 1.0;
  double beta_anchor = 1.0;
  double lambda_rep = 1.0;
  double inner_lambda = 0.01;
  double inner_mu = 1.0;
  double anchor_c = 0.25;
  Index rep_dim = 6;
  bool rep_drop_top = false;
};

void to_json(nlohmann::json& j, const GeometryConfig& config);
void from_json(const nlohmann::json& j, GeometryConfig& config);

struct GeometryLossReport {
  double se_loss = 0;
  double anchor_loss = 0;
  double repulsion_loss = 0;
  double total = 0;
  double lambda_se = 0;
  double beta_anchor = 0;
  double lambda_rep = 0;
  double anchor_c = 0;
  Index rep_dim = 0;
  std::size_t repulsion_pairs = 0;
  bool repulsion_warning = false;
};

GeometryLossReport total_geometry_loss(const Mat& batch, const std::vector<int>& labels,
                                       const GeometryConfig& config);

/// Weighted sum of precomputed components.
GeometryLossReport combine_geometry_loss(double se, double anchor, const RepulsionResult& rep,
                                         const GeometryConfig& config);

}  // namespace srcgeo

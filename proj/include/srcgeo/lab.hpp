#pragma once

// Synthetic geometry generators and randomized checks of the margin,
// obstruction and transfer statements.

#include "srcgeo/common.hpp"
#include "srcgeo/embedding.hpp"
#include "srcgeo/src.hpp"
#include "srcgeo/subspace.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace srcgeo {

inline constexpr double kTheoremTol = 1e-9;

/// Orthonormal p x d basis from a seeded Gaussian QR.
SubspaceBasis random_subspace(Index p, Index d, std::uint64_t seed);

/// Haar-distributed p x p orthogonal matrix.
Mat random_rotation(Index p, Rng& rng);

/// (U, V) with principal angles equal to `angles` (ascending, in [0, pi/2]).
/// Needs 2d <= p.
std::pair<Mat, Mat> subspace_pair_with_angles(Index p, const std::vector<double>& angles,
                                              std::uint64_t seed);

struct ScenarioA1A4 {
  std::vector<SubspaceBasis> bases;  // class k at index k - 1
  int true_class = 1;
  Vec signal;  // in S_y, norm gamma
  Vec noise;   // norm epsilon (at most epsilon with noise_le)
  Vec point;   // signal + noise
  double gamma = 0;
  double epsilon = 0;
  double alpha = 0;         // measured min_j theta_min(S_y, S_j)
  double alpha_target = 0;

  int class_count() const noexcept { return static_cast<int>(bases.size()); }
};

/// Class y = 1 gets a d_1-dim span; every other class j shares exactly one
/// principal angle alpha with it (the rest lie in [alpha, pi/2]). Requires
/// d_1 + d_j <= p for each j.
ScenarioA1A4 sample_scenario(Index p, int classes, const std::vector<Index>& dims, double alpha,
                             double gamma, double epsilon, std::uint64_t seed,
                             bool noise_le = false);

/// Claims lhs >= rhs. holds iff slack = lhs - rhs >= -kTheoremTol.
struct TheoremReport {
  std::string theorem;
  double lhs = 0;
  double rhs = 0;
  double slack = 0;
  bool holds = true;
  bool precondition_met = true;
};

TheoremReport make_report(std::string theorem, double lhs, double rhs);

/// m_sub(z) >= gamma sin(alpha) - 2 eps; when the bound is positive the
/// minimum must also be unique and sit at the true class.
TheoremReport verify_margin_bound(const ScenarioA1A4& scenario);

struct Witness {
  Vec direction;  // unit
  TheoremReport report;
};

/// Unit vector in span(U_y) n span(U_j), plus a cloud of `cloud` points
/// within delta of it whose margins must stay <= 2 delta. Throws no_overlap
/// if theta_min > 1e-8.
Witness witness_overlap(const Mat& u_y, const Mat& u_j, double delta = 0.05, int cloud = 100,
                        std::uint64_t seed = 0);

/// Principal vector of S_y for the top singular pair of U_y^T U_j:
/// r_y = 0, r_j = sin theta_min, m_sub <= sin theta_min.
Witness witness_small_angle(const Mat& u_y, const Mat& u_j);

/// m_sub >= gamma sqrt(1 - eta) - 2 eps when every ||U_y^T U_j||_F^2 <= eta,
/// together with theta_min >= arccos(sqrt(eta)). Reports
/// precondition_met = false (and holds) if a coherence exceeds eta.
TheoremReport verify_repulsion_margin(const ScenarioA1A4& scenario, double eta);

struct TransferReport {
  TheoremReport report;
  double practical_margin = 0;  // min_{j != y} (r~_j - r~_y)
  double span_margin = 0;       // min_{j != y} (r_j^sub - r_y^sub)
  double true_span_residual = 0;
  double eta_rec = 0;
  double eta_leak = 0;
  bool domination = true;       // r~_j >= r_j^sub for all j
  bool sufficient_condition = false;
  bool predicted_true_class = false;
};

/// Global OMP plus class restriction against the span residuals.
TransferReport verify_transfer(const Mat& dictionary, const ClassPartition& partition,
                               const Vec& target, int true_label, int budget);

/// Adds independent U[-eta, eta] noise to every residual and returns the
/// fraction of trials whose argmin (lowest index on ties) changes.
double perturbation_stability_trial(const ResidualProfile& profile, double eta, int trials,
                                    std::uint64_t seed);

// Single randomized instances of the remaining statements.
TheoremReport check_argmin_stability(std::uint64_t seed);
TheoremReport check_projector_perturbation(std::uint64_t seed);
TheoremReport check_distance_lipschitz(std::uint64_t seed);
TheoremReport check_overlap(std::uint64_t seed);
TheoremReport check_dominance(std::uint64_t seed);
TheoremReport check_small_angle(std::uint64_t seed);
TheoremReport check_angle_distance(std::uint64_t seed);
TheoremReport check_margin_bound(std::uint64_t seed);
TheoremReport check_repulsion_margin(std::uint64_t seed);
TheoremReport check_transfer(std::uint64_t seed);

struct SuiteResult {
  std::string theorem;
  int trials = 0;
  int violations = 0;
  double min_slack = 0;
  nlohmann::json parameters;
};

/// Every randomized check, `trials` instances each.
std::vector<SuiteResult> run_theorem_suite(int trials, std::uint64_t seed);

nlohmann::json to_json(const SuiteResult& result);

struct UnionDatasetConfig {
  int classes = 3;
  Index ambient_dim = 32;  // D
  Index subspace_dim = 4;  // d
  double angle = 0.15;     // every principal angle between class subspaces
  int train_per_class = 30;
  int test_per_class = 30;
  double noise = 0.0;      // isotropic Gaussian std added before normalization
  std::uint64_t seed = 0;
};

struct UnionDataset {
  LabeledEmbeddingSet train;
  LabeledEmbeddingSet test;
  std::vector<Mat> class_bases;
};

/// Union of d-dim subspaces whose pairwise principal angles all equal
/// `angle`: U_k = cos(a) B + sin(a) W_k with cos^2(a) = cos(angle), B shared
/// and every W_k orthogonal to B and to each other. Needs D >= d (K + 1).
/// Samples are unit-normalized.
UnionDataset generate_union_dataset(const UnionDatasetConfig& config);

void to_json(nlohmann::json& j, const UnionDatasetConfig& config);
void from_json(const nlohmann::json& j, UnionDatasetConfig& config);

}  // namespace srcgeo

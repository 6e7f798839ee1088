#pragma once

#include "srcgeo/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace srcgeo {

enum class BasisMode { uncentered_span, centered_top_d };

/// Orthonormal basis (p x d) for a class subspace.
struct SubspaceBasis {
  Mat basis;
  int class_id = 0;
  BasisMode mode = BasisMode::uncentered_span;
  std::optional<Index> requested_dim;  // empty: full numerical rank
  bool truncated = false;              // requested_dim exceeded the available rank
  bool drop_top_direction = false;

  Index dim() const noexcept { return basis.cols(); }
  Index ambient_dim() const noexcept { return basis.rows(); }
};

/// Principal angles, ascending, together with the cosines (descending) they
/// were derived from.
struct AngleSpectrum {
  std::vector<double> angles;
  std::vector<double> cosines;

  double min_angle() const { return angles.empty() ? 0.0 : angles.front(); }
  double max_angle() const { return angles.empty() ? 0.0 : angles.back(); }
};

struct SpanMargin {
  double margin = 0.0;
  int best_class = 0;
  std::vector<double> residuals;  // same order as the input bases
};

/// Relative singular-value threshold defining numerical rank.
inline constexpr double kRankTol = 1e-10;

/// Basis for the span of `class_matrix` columns.
///
/// uncentered_span keeps every left singular direction with
/// sigma_i > kRankTol * sigma_max (optionally capped at `dim`).
/// centered_top_d subtracts the column mean first and keeps the top `dim`
/// directions, skipping the leading one when `drop_top` is set. Requesting
/// more directions than the rank provides yields a truncated basis with
/// `truncated` set.
SubspaceBasis span_basis(const Mat& class_matrix, BasisMode mode,
                         std::optional<Index> dim = std::nullopt, bool drop_top = false,
                         int class_id = 0);

/// Numerical rank after per-class centering.
Index centered_rank(const Mat& class_matrix);

/// dist(z, span U) = || z - U U^T z ||.
double subspace_residual(const Vec& target, const SubspaceBasis& basis);
double subspace_residual(const Vec& target, const Mat& orthonormal_basis);

/// Top-2 gap of the span residuals; ties go to the lowest class id.
SpanMargin span_margin(const Vec& target, std::span<const SubspaceBasis> bases);

/// Cosines from svd(U^T V); angles below pi/4 are recovered from the sines
/// of (I - U U^T) V instead, which stays accurate near zero.
AngleSpectrum principal_angles(const Mat& u, const Mat& v);
AngleSpectrum principal_angles(const SubspaceBasis& u, const SubspaceBasis& v);

/// ||P_U - P_V||_2. Explicit projector difference for p <= 512, otherwise
/// from the angle spectrum (sin theta_max for equal dims, 1 for unequal).
double projector_distance(const Mat& u, const Mat& v);
double projector_distance(const SubspaceBasis& u, const SubspaceBasis& v);

/// Mean over unordered pairs of sigma_max(U_k^T U_l). Bases must share d.
double cohesion_max(std::span<const SubspaceBasis> bases);

/// exp(H(p)) with p_i = s_i / sum s_j over singular values above the rank
/// threshold.
double effective_rank_of_spectrum(const Vec& singular_values);
/// Centers the columns, then effective_rank_of_spectrum.
double effective_rank(const Mat& class_matrix);

/// Column-mean-centered copy.
Mat center_columns(const Mat& m);

}  // namespace srcgeo

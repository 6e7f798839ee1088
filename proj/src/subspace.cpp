#include "srcgeo/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace srcgeo {

namespace {

Index numerical_rank(const Vec& singular_values) {
  if (singular_values.size() == 0) return 0;
  const double smax = singular_values(0);
  if (!(smax > 0.0)) return 0;
  Index r = 0;
  while (r < singular_values.size() && singular_values(r) > kRankTol * smax) ++r;
  return r;
}

Vec singular_values(const Mat& m) {
  if (m.size() == 0) return Vec();
  return Eigen::JacobiSVD<Mat>(m).singularValues();
}

}  // namespace

Mat center_columns(const Mat& m) {
  Mat out = m;
  if (m.cols() > 0) out.colwise() -= m.rowwise().mean();
  return out;
}

SubspaceBasis span_basis(const Mat& class_matrix, BasisMode mode, std::optional<Index> dim,
                         bool drop_top, int class_id) {
  if (class_matrix.cols() < 1)
    throw Error(ErrorCode::invalid_argument, "span_basis needs at least one column");
  if (dim && *dim < 0) throw Error(ErrorCode::invalid_argument, "negative basis dimension");

  Mat work;
  if (mode == BasisMode::centered_top_d) {
    if (class_matrix.cols() < 2)
      throw Error(ErrorCode::degenerate_embedding,
                  "centered basis of class " + std::to_string(class_id) + " needs >= 2 samples");
    work = center_columns(class_matrix);
  } else {
    work = class_matrix;
  }

  Eigen::JacobiSVD<Mat> svd(work, Eigen::ComputeThinU);
  const Index rank = numerical_rank(svd.singularValues());
  const Index start = (drop_top && mode == BasisMode::centered_top_d) ? 1 : 0;
  const Index available = std::max<Index>(0, rank - start);
  const Index keep = dim ? std::min(*dim, available) : available;

  SubspaceBasis out;
  out.basis = svd.matrixU().middleCols(std::min(start, rank), keep);
  out.class_id = class_id;
  out.mode = mode;
  out.requested_dim = dim;
  out.truncated = dim.has_value() && *dim > available;
  out.drop_top_direction = start == 1;
  return out;
}

Index centered_rank(const Mat& class_matrix) {
  if (class_matrix.cols() < 2) return 0;
  return numerical_rank(singular_values(center_columns(class_matrix)));
}

double subspace_residual(const Vec& target, const Mat& orthonormal_basis) {
  if (orthonormal_basis.rows() != target.size())
    throw Error(ErrorCode::dimension_mismatch, "target and basis ambient dimensions differ");
  const double norm = target.norm();
  if (orthonormal_basis.cols() == 0) return norm;
  const Vec coeffs = orthonormal_basis.transpose() * target;
  const double r = (target - orthonormal_basis * coeffs).norm();
  return std::clamp(r, 0.0, norm);
}

double subspace_residual(const Vec& target, const SubspaceBasis& basis) {
  return subspace_residual(target, basis.basis);
}

SpanMargin span_margin(const Vec& target, std::span<const SubspaceBasis> bases) {
  if (bases.size() < 2) throw Error(ErrorCode::invalid_argument, "span_margin needs >= 2 bases");
  SpanMargin out;
  out.residuals.reserve(bases.size());
  std::size_t best = 0;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    out.residuals.push_back(subspace_residual(target, bases[k]));
    const double r = out.residuals.back();
    if (r < out.residuals[best] ||
        (r == out.residuals[best] && bases[k].class_id < bases[best].class_id))
      best = k;
  }
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < bases.size(); ++k)
    if (k != best) second = std::min(second, out.residuals[k]);
  out.margin = second - out.residuals[best];
  out.best_class = bases[best].class_id;
  return out;
}

AngleSpectrum principal_angles(const Mat& u_in, const Mat& v_in) {
  if (u_in.rows() != v_in.rows())
    throw Error(ErrorCode::dimension_mismatch, "principal_angles: ambient dimensions differ");
  // sines come from the smaller basis projected off the larger one
  const bool swap = v_in.cols() > u_in.cols();
  const Mat& u = swap ? v_in : u_in;
  const Mat& v = swap ? u_in : v_in;
  const Index r = v.cols();

  AngleSpectrum out;
  if (r == 0) return out;

  const Mat cross = u.transpose() * v;
  const Vec cosines = singular_values(cross);                 // descending
  const Vec sines = singular_values(v - u * cross);           // descending

  out.angles.resize(r);
  out.cosines.resize(r);
  for (Index i = 0; i < r; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    const double s = std::clamp(sines(r - 1 - i), 0.0, 1.0);
    out.cosines[i] = c;
    out.angles[i] = (c * c >= 0.5) ? std::asin(s) : std::acos(c);
  }
  std::sort(out.angles.begin(), out.angles.end());
  return out;
}

AngleSpectrum principal_angles(const SubspaceBasis& u, const SubspaceBasis& v) {
  return principal_angles(u.basis, v.basis);
}

double projector_distance(const Mat& u, const Mat& v) {
  if (u.rows() != v.rows())
    throw Error(ErrorCode::dimension_mismatch, "projector_distance: ambient dimensions differ");
  if (u.cols() == 0 && v.cols() == 0) return 0.0;
  if (u.rows() <= 512) {
    const Mat diff = u * u.transpose() - v * v.transpose();
    const Vec eig = Eigen::SelfAdjointEigenSolver<Mat>(diff, Eigen::EigenvaluesOnly).eigenvalues();
    return std::min(1.0, eig.cwiseAbs().maxCoeff());
  }
  if (u.cols() != v.cols()) return 1.0;
  return std::sin(principal_angles(u, v).max_angle());
}

double projector_distance(const SubspaceBasis& u, const SubspaceBasis& v) {
  return projector_distance(u.basis, v.basis);
}

double cohesion_max(std::span<const SubspaceBasis> bases) {
  if (bases.size() < 2) throw Error(ErrorCode::invalid_argument, "cohesion_max needs >= 2 bases");
  const Index d = bases.front().dim();
  if (d == 0) throw Error(ErrorCode::degenerate_embedding, "cohesion_max: empty basis");
  for (const auto& b : bases)
    if (b.dim() != d)
      throw Error(ErrorCode::dimension_mismatch, "cohesion_max: bases must share dimension d");

  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < bases.size(); ++k)
    for (std::size_t l = k + 1; l < bases.size(); ++l, ++pairs)
      sum += principal_angles(bases[k], bases[l]).cosines.front();
  return sum / static_cast<double>(pairs);
}

double effective_rank_of_spectrum(const Vec& singular_values) {
  const double smax = singular_values.size() ? singular_values.maxCoeff() : 0.0;
  if (!(smax > 0.0))
    throw Error(ErrorCode::degenerate_embedding, "effective rank of an all-zero spectrum");
  double total = 0.0;
  for (double s : singular_values)
    if (s > kRankTol * smax) total += s;
  double entropy = 0.0;
  for (double s : singular_values) {
    if (!(s > kRankTol * smax)) continue;
    const double q = s / total;
    entropy -= q * std::log(q);
  }
  return std::exp(entropy);
}

double effective_rank(const Mat& class_matrix) {
  if (class_matrix.cols() < 2)
    throw Error(ErrorCode::degenerate_embedding, "effective rank needs >= 2 samples");
  return effective_rank_of_spectrum(singular_values(center_columns(class_matrix)));
}

}  // namespace srcgeo

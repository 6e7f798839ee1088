#include "srcgeo/lab.hpp"

#include "srcgeo/omp.hpp"
#include "srcgeo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace srcgeo {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

/// Orthonormal columns spanning the columns of m (Householder QR, signs
/// fixed so that diag(R) > 0).
Mat orthonormalize(const Mat& m) {
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ() * Mat::Identity(m.rows(), m.cols());
  const Mat& r = qr.matrixQR();
  for (Index c = 0; c < m.cols(); ++c)
    if (r(c, c) < 0) q.col(c) = -q.col(c);
  return q;
}

int argmin_lowest(const Vec& v) {
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k)
    if (v(k) < v(best)) best = k;
  return static_cast<int>(best);
}

/// |r_y - r_j| for a two-class problem.
double pair_margin(const Vec& z, const Mat& u_y, const Mat& u_j) {
  return std::abs(subspace_residual(z, u_y) - subspace_residual(z, u_j));
}

/// Unit u in span(u_y) with dist(u, span(u_j)) = sin theta_min.
Vec principal_vector(const Mat& u_y, const Mat& u_j) {
  const Eigen::JacobiSVD<Mat> cos_svd(u_y.transpose() * u_j, Eigen::ComputeThinU);
  const double top = cos_svd.singularValues()(0);
  Vec coeff;
  if (top * top >= 0.5) {
    // near-aligned: the smallest sine is resolved more accurately
    const Mat sines = u_y - u_j * (u_j.transpose() * u_y);
    const Eigen::JacobiSVD<Mat> sin_svd(sines, Eigen::ComputeThinV);
    coeff = sin_svd.matrixV().col(sin_svd.matrixV().cols() - 1);
  } else {
    coeff = cos_svd.matrixU().col(0);
  }
  Vec u = u_y * coeff;
  return u / u.norm();
}

Vec random_ball_point(Index p, double radius, Rng& rng) {
  const double rho = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(p));
  return rng.unit_vector(p) * rho;
}

void check_angle(double angle, const char* what, bool allow_zero) {
  if (!(angle <= kHalfPi + 1e-15) || !(allow_zero ? angle >= 0 : angle > 0))
    throw Error(ErrorCode::invalid_argument,
                std::string(what) + (allow_zero ? " must lie in [0, pi/2]" : " must lie in (0, pi/2]"));
}

}  // namespace

TheoremReport make_report(std::string theorem, double lhs, double rhs) {
  TheoremReport r;
  r.theorem = std::move(theorem);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = lhs - rhs;
  r.holds = r.slack >= -kTheoremTol;
  return r;
}

SubspaceBasis random_subspace(Index p, Index d, std::uint64_t seed) {
  if (d < 1 || d > p)
    throw Error(ErrorCode::dimension_mismatch,
                "subspace dimension " + std::to_string(d) + " outside 1.." + std::to_string(p));
  Rng rng(seed);
  SubspaceBasis out;
  out.basis = orthonormalize(rng.normal_matrix(p, d));
  out.requested_dim = d;
  return out;
}

Mat random_rotation(Index p, Rng& rng) { return orthonormalize(rng.normal_matrix(p, p)); }

std::pair<Mat, Mat> subspace_pair_with_angles(Index p, const std::vector<double>& angles,
                                              std::uint64_t seed) {
  const Index d = static_cast<Index>(angles.size());
  if (d < 1) throw Error(ErrorCode::invalid_argument, "at least one angle is required");
  if (2 * d > p)
    throw Error(ErrorCode::infeasible_geometry,
                "need ambient dimension >= " + std::to_string(2 * d) + " for " + std::to_string(d) +
                    " angles, got " + std::to_string(p));
  for (std::size_t i = 0; i < angles.size(); ++i) {
    check_angle(angles[i], "principal angle", true);
    if (i && angles[i] < angles[i - 1])
      throw Error(ErrorCode::invalid_argument, "principal angles must be ascending");
  }
  Rng rng(seed);
  const Mat q = random_rotation(p, rng);
  Mat v(p, d);
  for (Index i = 0; i < d; ++i)
    v.col(i) = std::cos(angles[i]) * q.col(i) + std::sin(angles[i]) * q.col(d + i);
  return {q.leftCols(d), v};
}

ScenarioA1A4 sample_scenario(Index p, int classes, const std::vector<Index>& dims, double alpha,
                             double gamma, double epsilon, std::uint64_t seed, bool noise_le) {
  if (classes < 2) throw Error(ErrorCode::invalid_argument, "scenario needs K >= 2");
  if (static_cast<int>(dims.size()) != classes)
    throw Error(ErrorCode::invalid_argument, "one subspace dimension per class required");
  check_angle(alpha, "alpha", false);
  if (!(gamma > 0)) throw Error(ErrorCode::invalid_argument, "gamma must be > 0");
  if (!(epsilon >= 0)) throw Error(ErrorCode::invalid_argument, "epsilon must be >= 0");
  for (Index d : dims)
    if (d < 1) throw Error(ErrorCode::invalid_argument, "subspace dimensions must be >= 1");
  const Index dy = dims[0];
  for (int j = 1; j < classes; ++j)
    if (dy + dims[j] > p)
      throw Error(ErrorCode::infeasible_geometry,
                  "scenario needs p >= " + std::to_string(dy + dims[j]) + " (class 1 dim " +
                      std::to_string(dy) + " + class " + std::to_string(j + 1) + " dim " +
                      std::to_string(dims[j]) + "), got p = " + std::to_string(p));

  Rng rng(seed);
  const Mat q = random_rotation(p, rng);
  const Mat u_y = q.leftCols(dy);
  const Mat complement = q.rightCols(p - dy);

  ScenarioA1A4 sc;
  sc.true_class = 1;
  sc.gamma = gamma;
  sc.epsilon = epsilon;
  sc.alpha_target = alpha;
  sc.bases.push_back(SubspaceBasis{u_y, 1, BasisMode::uncentered_span, dy});

  for (int j = 1; j < classes; ++j) {
    const Index dj = dims[j];
    const Index m = std::min(dy, dj);
    const Mat u = u_y * random_rotation(dy, rng);
    const Mat w = complement * orthonormalize(rng.normal_matrix(p - dy, dj));
    std::vector<double> theta(static_cast<std::size_t>(m), alpha);
    for (Index i = 1; i < m; ++i) theta[i] = rng.uniform(alpha, kHalfPi);
    std::sort(theta.begin(), theta.end());
    Mat v(p, dj);
    for (Index i = 0; i < dj; ++i)
      v.col(i) = i < m ? Vec(std::cos(theta[i]) * u.col(i) + std::sin(theta[i]) * w.col(i))
                       : Vec(w.col(i));
    sc.bases.push_back(SubspaceBasis{v, j + 1, BasisMode::uncentered_span, dj});
  }

  sc.signal = u_y * rng.unit_vector(dy) * gamma;
  const Vec dir = rng.unit_vector(p);
  const double scale =
      noise_le ? epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(p)) : epsilon;
  sc.noise = dir * scale;
  sc.point = sc.signal + sc.noise;

  sc.alpha = std::numeric_limits<double>::infinity();
  for (int j = 1; j < classes; ++j)
    sc.alpha = std::min(sc.alpha, principal_angles(sc.bases[0], sc.bases[j]).min_angle());
  return sc;
}

TheoremReport verify_margin_bound(const ScenarioA1A4& sc) {
  const SpanMargin m = span_margin(sc.point, sc.bases);
  const double bound = sc.gamma * std::sin(sc.alpha) - 2.0 * sc.epsilon;
  TheoremReport r = make_report("margin_lower_bound", m.margin, bound);
  if (bound > kTheoremTol && (m.best_class != sc.true_class || !(m.margin > 0))) r.holds = false;
  return r;
}

Witness witness_overlap(const Mat& u_y, const Mat& u_j, double delta, int cloud,
                        std::uint64_t seed) {
  if (u_y.rows() != u_j.rows())
    throw Error(ErrorCode::dimension_mismatch, "bases live in different ambient dimensions");
  if (!(delta >= 0)) throw Error(ErrorCode::invalid_argument, "delta must be >= 0");
  const double theta = principal_angles(u_y, u_j).min_angle();
  if (theta > 1e-8)
    throw Error(ErrorCode::no_overlap,
                "spans do not intersect (theta_min = " + format_number(theta) + ")");

  Witness w;
  w.direction = principal_vector(u_y, u_j);
  double slack = -pair_margin(w.direction, u_y, u_j);
  Rng rng(seed);
  for (int i = 0; i < cloud; ++i) {
    const Vec z = w.direction + random_ball_point(u_y.rows(), delta, rng);
    slack = std::min(slack, 2.0 * delta - pair_margin(z, u_y, u_j));
  }
  w.report = make_report("overlap_impossibility", slack, 0.0);
  return w;
}

Witness witness_small_angle(const Mat& u_y, const Mat& u_j) {
  if (u_y.rows() != u_j.rows())
    throw Error(ErrorCode::dimension_mismatch, "bases live in different ambient dimensions");
  const double sine = std::sin(principal_angles(u_y, u_j).min_angle());
  Witness w;
  w.direction = principal_vector(u_y, u_j);
  const double r_y = subspace_residual(w.direction, u_y);
  const double r_j = subspace_residual(w.direction, u_j);
  const double deviation =
      std::max({r_y, std::abs(r_j - sine), std::abs(r_j - r_y) - sine});
  w.report = make_report("small_angle_witness", -deviation, 0.0);
  return w;
}

TheoremReport verify_repulsion_margin(const ScenarioA1A4& sc, double eta) {
  if (!(eta >= 0)) throw Error(ErrorCode::invalid_argument, "eta must be >= 0");
  const Mat& u_y = sc.bases[sc.true_class - 1].basis;
  double angle_slack = std::numeric_limits<double>::infinity();
  const double angle_floor = std::acos(std::sqrt(std::min(1.0, eta)));
  for (int j = 0; j < sc.class_count(); ++j) {
    if (j == sc.true_class - 1) continue;
    const Mat& u_j = sc.bases[j].basis;
    if ((u_y.transpose() * u_j).squaredNorm() > eta + 1e-12) {
      TheoremReport r = make_report("repulsion_margin_bound", 0.0, 0.0);
      r.precondition_met = false;
      return r;
    }
    angle_slack = std::min(angle_slack, principal_angles(u_y, u_j).min_angle() - angle_floor);
  }
  const SpanMargin m = span_margin(sc.point, sc.bases);
  const double bound = sc.gamma * std::sqrt(std::max(0.0, 1.0 - eta)) - 2.0 * sc.epsilon;
  TheoremReport r = make_report("repulsion_margin_bound", m.margin, bound);
  if (angle_slack < r.slack) {
    r.slack = angle_slack;
    r.holds = r.slack >= -kTheoremTol;
  }
  return r;
}

TransferReport verify_transfer(const Mat& dictionary, const ClassPartition& partition,
                               const Vec& target, int true_label, int budget) {
  const int classes = partition.class_count();
  if (classes < 2) throw Error(ErrorCode::invalid_argument, "transfer check needs K >= 2");
  if (true_label < 1 || true_label > classes)
    throw Error(ErrorCode::invalid_argument, "true label outside 1..K");
  if (partition.of(true_label).empty())
    throw Error(ErrorCode::invalid_argument, "true class has no atoms");

  const SparseCode code = omp(dictionary, target, budget);
  const ResidualProfile profile = class_restricted_residuals(dictionary, partition, code, target);
  const Vec dense = code.dense(dictionary.cols());
  const Vec full = dictionary * dense;
  Vec in_class = Vec::Zero(dictionary.rows());
  for (Index j : partition.of(true_label)) in_class += dense(j) * dictionary.col(j);

  TransferReport out;
  out.eta_rec = (target - full).norm();
  out.eta_leak = (full - in_class).norm();

  Vec span_res(classes);
  for (int k = 1; k <= classes; ++k) {
    const auto& members = partition.of(k);
    span_res(k - 1) = members.empty()
                          ? target.norm()
                          : subspace_residual(target, span_basis(gather_columns(dictionary, members),
                                                                 BasisMode::uncentered_span));
  }
  const int y = true_label - 1;
  out.true_span_residual = span_res(y);

  double min_other_span = std::numeric_limits<double>::infinity();
  out.practical_margin = std::numeric_limits<double>::infinity();
  out.span_margin = std::numeric_limits<double>::infinity();
  double domination_slack = std::numeric_limits<double>::infinity();
  for (int k = 0; k < classes; ++k) {
    domination_slack = std::min(domination_slack, profile.residuals(k) - span_res(k));
    if (k == y) continue;
    min_other_span = std::min(min_other_span, span_res(k));
    out.practical_margin = std::min(out.practical_margin, profile.residuals(k) - profile.residuals(y));
    out.span_margin = std::min(out.span_margin, span_res(k) - span_res(y));
  }
  out.domination = domination_slack >= -kTheoremTol;
  const double leak_total = out.eta_rec + out.eta_leak;
  out.sufficient_condition = leak_total < min_other_span - kTheoremTol;
  out.predicted_true_class = out.practical_margin > 0;

  out.report = make_report("leakage_aware_transfer", out.practical_margin, min_other_span - leak_total);
  const double true_bound_slack = leak_total - profile.residuals(y);
  const double slack = std::min({out.report.slack, domination_slack, true_bound_slack});
  out.report.slack = slack;
  out.report.holds = slack >= -kTheoremTol && (!out.sufficient_condition || out.predicted_true_class);
  return out;
}

double perturbation_stability_trial(const ResidualProfile& profile, double eta, int trials,
                                    std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");
  if (!(eta >= 0)) throw Error(ErrorCode::invalid_argument, "eta must be >= 0");
  const Vec& r = profile.residuals;
  const int base = argmin_lowest(r);
  Rng rng(seed);
  int flips = 0;
  Vec perturbed(r.size());
  for (int t = 0; t < trials; ++t) {
    for (Index k = 0; k < r.size(); ++k) perturbed(k) = r(k) + (eta > 0 ? rng.uniform(-eta, eta) : 0.0);
    if (argmin_lowest(perturbed) != base) ++flips;
  }
  return static_cast<double>(flips) / static_cast<double>(trials);
}

TheoremReport check_argmin_stability(std::uint64_t seed) {
  Rng rng(seed);
  const Index k = 2 + static_cast<Index>(rng.index(5));
  Vec a(k);
  for (Index i = 0; i < k; ++i) a(i) = rng.uniform();
  const ResidualProfile profile = profile_from_residuals(a);
  const double gap = profile.margin_top2;
  const double eta = 0.5 * gap * rng.uniform() * (1.0 - 1e-6);
  const int best = argmin_lowest(a);

  Vec perturbed(k);
  for (Index i = 0; i < k; ++i) perturbed(i) = a(i) + (eta > 0 ? rng.uniform(-eta, eta) : 0.0);
  double lhs = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < k; ++i)
    if (i != best) lhs = std::min(lhs, perturbed(i) - perturbed(best));
  TheoremReport r = make_report("argmin_stability", lhs, gap - 2.0 * eta);
  if (gap > 2.0 * eta && perturbation_stability_trial(profile, eta, 20, rng.index(1u << 30)) != 0.0)
    r.holds = false;
  return r;
}

TheoremReport check_projector_perturbation(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 4 + static_cast<Index>(rng.index(13));
  const Index d = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p - 1)));
  const Mat u = orthonormalize(rng.normal_matrix(p, d));
  const bool same_dim = rng.uniform() < 0.5;
  Mat v;
  if (same_dim) {
    const double t = std::pow(10.0, rng.uniform(-6.0, 0.0));
    v = orthonormalize(u + t * rng.normal_matrix(p, d));
  } else {
    const Index d2 = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p - 1)));
    v = orthonormalize(rng.normal_matrix(p, d2));
  }
  const Vec z = rng.normal_vector(p) * rng.uniform(0.1, 3.0);
  const double diff = std::abs(subspace_residual(z, u) - subspace_residual(z, v));
  const double mid = (u * (u.transpose() * z) - v * (v.transpose() * z)).norm();
  const double op = projector_distance(u, v);
  TheoremReport r = make_report("projector_perturbation", mid, diff);
  r.slack = std::min(r.slack, op * z.norm() - mid);
  if (u.cols() == v.cols())
    r.slack = std::min(r.slack, -std::abs(op - std::sin(principal_angles(u, v).max_angle())));
  r.holds = r.slack >= -kTheoremTol;
  return r;
}

TheoremReport check_distance_lipschitz(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 2 + static_cast<Index>(rng.index(19));
  const Index d = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p)));
  const Mat u = orthonormalize(rng.normal_matrix(p, d));
  const Vec z = rng.normal_vector(p);
  const Vec z2 = z + rng.normal_vector(p) * std::pow(10.0, rng.uniform(-8.0, 1.0));
  return make_report("distance_lipschitz", (z - z2).norm(),
                     std::abs(subspace_residual(z, u) - subspace_residual(z2, u)));
}

TheoremReport check_overlap(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 6 + static_cast<Index>(rng.index(15));
  const Vec shared = rng.unit_vector(p);
  auto with_shared = [&](Index extra) {
    Mat m(p, extra + 1);
    m.col(0) = shared;
    m.rightCols(extra) = rng.normal_matrix(p, extra);
    return orthonormalize(m);
  };
  const Mat u_y = with_shared(static_cast<Index>(rng.index(4)));
  const Mat u_j = with_shared(static_cast<Index>(rng.index(4)));
  const double delta = rng.uniform(0.001, 0.2);
  return witness_overlap(u_y, u_j, delta, 20, rng.index(1u << 30)).report;
}

TheoremReport check_dominance(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 4 + static_cast<Index>(rng.index(17));
  const Index dy = 2 + static_cast<Index>(rng.index(static_cast<std::size_t>(std::min<Index>(p, 6) - 1)));
  const Mat u_y = orthonormalize(rng.normal_matrix(p, dy));
  std::vector<Index> cols(static_cast<std::size_t>(dy));
  for (Index i = 0; i < dy; ++i) cols[i] = i;
  for (Index i = dy - 1; i > 0; --i) std::swap(cols[i], cols[rng.index(static_cast<std::size_t>(i + 1))]);
  const Index dj = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(dy - 1)));
  Mat u_j(p, dj);
  for (Index i = 0; i < dj; ++i) u_j.col(i) = u_y.col(cols[i]);
  const Vec z = u_j * rng.unit_vector(dj);
  const double r_y = subspace_residual(z, u_y);
  const double r_j = subspace_residual(z, u_j);
  return make_report("dominance_degeneracy", -std::max({r_y, r_j, std::abs(r_y - r_j)}), 0.0);
}

TheoremReport check_small_angle(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 4 + static_cast<Index>(rng.index(17));
  if (rng.uniform() < 0.5) {
    const Index d = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p / 2)));
    std::vector<double> angles(static_cast<std::size_t>(d));
    for (auto& a : angles) a = rng.uniform(0.0, kHalfPi);
    std::sort(angles.begin(), angles.end());
    const auto [u, v] = subspace_pair_with_angles(p, angles, rng.index(1u << 30));
    return witness_small_angle(u, v).report;
  }
  const Index dy = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p - 1)));
  const Index dj = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p - 1)));
  return witness_small_angle(orthonormalize(rng.normal_matrix(p, dy)),
                             orthonormalize(rng.normal_matrix(p, dj)))
      .report;
}

TheoremReport check_angle_distance(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 4 + static_cast<Index>(rng.index(17));
  Mat u_y, u_j;
  if (rng.uniform() < 0.5) {
    const Index d = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p / 2)));
    std::vector<double> angles(static_cast<std::size_t>(d));
    for (auto& a : angles) a = rng.uniform(0.0, kHalfPi);
    std::sort(angles.begin(), angles.end());
    std::tie(u_y, u_j) = subspace_pair_with_angles(p, angles, rng.index(1u << 30));
  } else {
    u_y = orthonormalize(rng.normal_matrix(p, 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p - 1)))));
    u_j = orthonormalize(rng.normal_matrix(p, 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p - 1)))));
  }
  const Vec s = u_y * rng.normal_vector(u_y.cols()) * rng.uniform(0.1, 3.0);
  const double theta = principal_angles(u_y, u_j).min_angle();
  return make_report("angle_distance_bound", subspace_residual(s, u_j), s.norm() * std::sin(theta));
}

namespace {

ScenarioA1A4 random_scenario(Rng& rng) {
  const Index p = 32;
  const int classes = 4;
  std::vector<Index> dims(classes);
  for (auto& d : dims) d = 1 + static_cast<Index>(rng.index(4));
  const double alpha = rng.uniform(0.01, kHalfPi);
  const double gamma = rng.uniform(0.2, 2.0);
  const double epsilon = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 0.75 * gamma);
  return sample_scenario(p, classes, dims, alpha, gamma, epsilon, rng.index(1u << 30));
}

}  // namespace

TheoremReport check_margin_bound(std::uint64_t seed) {
  Rng rng(seed);
  return verify_margin_bound(random_scenario(rng));
}

TheoremReport check_repulsion_margin(std::uint64_t seed) {
  Rng rng(seed);
  const ScenarioA1A4 sc = random_scenario(rng);
  double eta = 0.0;
  for (int j = 1; j < sc.class_count(); ++j)
    eta = std::max(eta, (sc.bases[0].basis.transpose() * sc.bases[j].basis).squaredNorm());
  return verify_repulsion_margin(sc, eta);
}

TheoremReport check_transfer(std::uint64_t seed) {
  Rng rng(seed);
  const Index p = 8 + static_cast<Index>(rng.index(17));
  const int classes = 2 + static_cast<int>(rng.index(3));
  std::vector<Mat> blocks;
  std::vector<int> labels;
  Index total = 0;
  for (int k = 1; k <= classes; ++k) {
    const Index n = 1 + static_cast<Index>(rng.index(6));
    const Index d = 1 + static_cast<Index>(rng.index(3));
    const Mat basis = orthonormalize(rng.normal_matrix(p, d));
    Mat atoms = basis * rng.normal_matrix(d, n) + 0.05 * rng.normal_matrix(p, n);
    blocks.push_back(l2_normalize_columns(atoms));
    labels.insert(labels.end(), static_cast<std::size_t>(n), k);
    total += n;
  }
  Mat dict(p, total);
  for (Index c = 0; const auto& b : blocks) {
    dict.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  const ClassPartition partition = partition_labels(labels, classes);
  const int y = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
  const int source = rng.uniform() < 0.2 ? 1 + static_cast<int>(rng.index(static_cast<std::size_t>(classes))) : y;
  const Mat& src = blocks[source - 1];
  Vec target = src * rng.normal_vector(src.cols()) + rng.normal_vector(p) * rng.uniform(0.0, 0.5);
  target /= target.norm();
  const int budget = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::min(p, total))));
  return verify_transfer(dict, partition, target, y, budget).report;
}

std::vector<SuiteResult> run_theorem_suite(int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");
  struct Entry {
    const char* name;
    std::function<TheoremReport(std::uint64_t)> check;
    nlohmann::json parameters;
  };
  const nlohmann::json scenario = {{"p", 32}, {"K", 4}, {"dims", "1..4"}, {"alpha", "U(0.01, pi/2)"},
                                   {"gamma", "U(0.2, 2)"}, {"epsilon", "0 w.p. 1/4, else U(0, 0.75 gamma)"}};
  const std::vector<Entry> entries = {
      {"margin_lower_bound", check_margin_bound, scenario},
      {"repulsion_margin_bound", check_repulsion_margin, scenario},
      {"leakage_aware_transfer", check_transfer, {{"p", "8..24"}, {"K", "2..4"}, {"atoms_per_class", "1..6"}}},
      {"argmin_stability", check_argmin_stability, {{"K", "2..6"}, {"eta", "below half the margin"}}},
      {"projector_perturbation", check_projector_perturbation, {{"p", "4..16"}}},
      {"distance_lipschitz", check_distance_lipschitz, {{"p", "2..20"}}},
      {"small_angle_witness", check_small_angle, {{"p", "4..20"}}},
      {"angle_distance_bound", check_angle_distance, {{"p", "4..20"}}},
      {"overlap_impossibility", check_overlap, {{"p", "6..20"}, {"delta", "U(0.001, 0.2)"}, {"cloud", 20}}},
      {"dominance_degeneracy", check_dominance, {{"p", "4..20"}}},
  };

  std::vector<SuiteResult> results(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const Entry& e = entries[i];
    SuiteResult& r = results[i];
    r.theorem = e.name;
    r.trials = trials;
    r.parameters = e.parameters;
    r.min_slack = std::numeric_limits<double>::infinity();
    const std::uint64_t stream = derive_seed(seed, i + 1);
    for (int t = 0; t < trials; ++t) {
      const TheoremReport rep = e.check(derive_seed(stream, static_cast<std::uint64_t>(t)));
      if (!rep.precondition_met) continue;
      if (!rep.holds) ++r.violations;
      r.min_slack = std::min(r.min_slack, rep.slack);
    }
  });
  return results;
}

nlohmann::json to_json(const SuiteResult& r) {
  nlohmann::json j;
  j["theorem"] = r.theorem;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["min_slack"] = format_number(r.min_slack);
  j["parameters"] = r.parameters;
  return j;
}

UnionDataset generate_union_dataset(const UnionDatasetConfig& c) {
  if (c.classes < 1) throw Error(ErrorCode::invalid_argument, "classes must be >= 1");
  if (c.subspace_dim < 1) throw Error(ErrorCode::invalid_argument, "subspace_dim must be >= 1");
  if (c.train_per_class < 1 || c.test_per_class < 1)
    throw Error(ErrorCode::invalid_argument, "train_per_class and test_per_class must be >= 1");
  if (!(c.noise >= 0)) throw Error(ErrorCode::invalid_argument, "noise must be >= 0");
  check_angle(c.angle, "angle", true);
  const bool orthogonal = c.angle >= kHalfPi;
  const Index needed = c.subspace_dim * (c.classes + (orthogonal ? 0 : 1));
  if (c.ambient_dim < needed)
    throw Error(ErrorCode::infeasible_geometry,
                "union dataset needs ambient_dim >= " + std::to_string(needed) + ", got " +
                    std::to_string(c.ambient_dim));

  Rng basis_rng(derive_seed(c.seed, 0));
  const Mat q = random_rotation(c.ambient_dim, basis_rng);
  const Index d = c.subspace_dim;
  const double cos_theta = orthogonal ? 0.0 : std::cos(c.angle);
  const double a = std::sqrt(cos_theta);
  const double b = std::sqrt(1.0 - cos_theta);
  const Index offset = orthogonal ? 0 : d;

  std::vector<Mat> bases;
  for (int k = 0; k < c.classes; ++k) {
    Mat u = b * q.middleCols(offset + k * d, d);
    if (!orthogonal) u += a * q.leftCols(d);
    bases.push_back(std::move(u));
  }

  auto draw = [&](int per_class, std::uint64_t stream) {
    Rng rng(derive_seed(c.seed, stream));
    Mat x(c.ambient_dim, static_cast<Index>(per_class) * c.classes);
    std::vector<long> labels;
    for (int k = 0; k < c.classes; ++k) {
      for (int i = 0; i < per_class; ++i) {
        const Index col = static_cast<Index>(k) * per_class + i;
        x.col(col) = bases[k] * rng.normal_vector(d);
        if (c.noise > 0) x.col(col) += c.noise * rng.normal_vector(c.ambient_dim);
        labels.push_back(k + 1);
      }
    }
    return LabeledEmbeddingSet(l2_normalize_columns(x), std::move(labels));
  };
  return UnionDataset{draw(c.train_per_class, 1), draw(c.test_per_class, 2), std::move(bases)};
}

void to_json(nlohmann::json& j, const UnionDatasetConfig& c) {
  j = nlohmann::json{{"classes", c.classes},
                     {"ambient_dim", c.ambient_dim},
                     {"subspace_dim", c.subspace_dim},
                     {"angle", c.angle},
                     {"train_per_class", c.train_per_class},
                     {"test_per_class", c.test_per_class},
                     {"noise", c.noise},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, UnionDatasetConfig& c) {
  static const char* known[] = {"classes", "ambient_dim", "subspace_dim", "angle",
                                "train_per_class", "test_per_class", "noise", "seed"};
  for (const auto& [key, value] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw Error(ErrorCode::invalid_argument, "unknown dataset config key '" + key + "'");
  c.classes = j.value("classes", c.classes);
  c.ambient_dim = j.value("ambient_dim", c.ambient_dim);
  c.subspace_dim = j.value("subspace_dim", c.subspace_dim);
  c.angle = j.value("angle", c.angle);
  c.train_per_class = j.value("train_per_class", c.train_per_class);
  c.test_per_class = j.value("test_per_class", c.test_per_class);
  c.noise = j.value("noise", c.noise);
  c.seed = j.value("seed", c.seed);
}

}  // namespace srcgeo

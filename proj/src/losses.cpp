#include "srcgeo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace srcgeo {

Mat class_mask(const std::vector<int>& labels) {
  const Index n = static_cast<Index>(labels.size());
  Mat mask(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) mask(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  return mask;
}

MaskedRidgeProblem MaskedRidgeProblem::from_labels(Mat batch, const std::vector<int>& labels,
                                                   double lambda, double mu) {
  if (static_cast<Index>(labels.size()) != batch.cols())
    throw Error(ErrorCode::dimension_mismatch, "one label per batch column required");
  MaskedRidgeProblem problem{std::move(batch), class_mask(labels), lambda, mu};
  problem.validate();
  return problem;
}

void MaskedRidgeProblem::validate() const {
  const Index n = batch.cols();
  if (n < 1) throw Error(ErrorCode::empty_input, "masked ridge needs n >= 1");
  if (mask.rows() != n || mask.cols() != n)
    throw Error(ErrorCode::dimension_mismatch, "mask must be n x n");
  if (!(lambda > 0)) throw Error(ErrorCode::invalid_argument, "ridge lambda must be > 0");
  if (!(mu >= 0)) throw Error(ErrorCode::invalid_argument, "mask penalty mu must be >= 0");
  for (Index i = 0; i < n; ++i) {
    if (mask(i, i) != 1.0) throw Error(ErrorCode::invalid_argument, "mask diagonal must be 1");
    for (Index j = 0; j < n; ++j) {
      if (mask(i, j) != mask(j, i)) throw Error(ErrorCode::invalid_argument, "mask must be symmetric");
      if (mask(i, j) != 0.0 && mask(i, j) != 1.0)
        throw Error(ErrorCode::invalid_argument, "mask entries must be 0 or 1");
    }
  }
}

Mat masked_ridge_solve(const MaskedRidgeProblem& problem) {
  problem.validate();
  const Mat& z = problem.batch;
  const Index n = z.cols();
  Mat coeffs = Mat::Zero(n, n);
  if (n == 1) return coeffs;

  const Mat gram = z.transpose() * z;
  Mat system(n - 1, n - 1);
  Vec rhs(n - 1);
  for (Index i = 0; i < n; ++i) {
    // rows/cols of the reduced system skip sample i
    auto full = [i](Index r) { return r < i ? r : r + 1; };
    for (Index a = 0; a < n - 1; ++a) {
      for (Index b = 0; b < n - 1; ++b) system(a, b) = gram(full(a), full(b));
      system(a, a) += problem.lambda + problem.mu * (1.0 - problem.mask(i, full(a)));
      rhs(a) = gram(full(a), i);
    }
    const Vec c = system.llt().solve(rhs);
    for (Index a = 0; a < n - 1; ++a) coeffs(full(a), i) = c(a);
  }
  return coeffs;
}

double masked_ridge_objective(const MaskedRidgeProblem& problem, const Mat& coefficients) {
  const Mat& z = problem.batch;
  const Mat off = (Mat::Ones(z.cols(), z.cols()) - problem.mask).cwiseProduct(coefficients);
  return (z - z * coefficients).squaredNorm() + problem.lambda * coefficients.squaredNorm() +
         problem.mu * off.squaredNorm();
}

double se_loss(const Mat& batch, const Mat& coefficients) {
  if (coefficients.rows() != batch.cols() || coefficients.cols() != batch.cols())
    throw Error(ErrorCode::dimension_mismatch, "coefficient matrix must be n x n");
  if (coefficients.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorCode::invalid_argument, "self-expressive coefficients need a zero diagonal");
  return (batch - batch * coefficients).squaredNorm();
}

double cross_class_leakage_norm(const Mat& coefficients, const Mat& mask) {
  if (coefficients.rows() != mask.rows() || coefficients.cols() != mask.cols())
    throw Error(ErrorCode::dimension_mismatch, "coefficients and mask shapes differ");
  return (Mat::Ones(mask.rows(), mask.cols()) - mask).cwiseProduct(coefficients).norm();
}

LeakageBound cross_class_leakage_bound(const Mat& batch, const Mat& coefficients, const Mat& mask) {
  const Mat off = (Mat::Ones(mask.rows(), mask.cols()) - mask).cwiseProduct(coefficients);
  LeakageBound out;
  out.cross_class_reconstruction = (batch * off).norm();
  const double spectral = batch.size() ? Eigen::JacobiSVD<Mat>(batch).singularValues()(0) : 0.0;
  out.bound = spectral * off.norm();
  return out;
}

double variance_anchor_loss(const Mat& batch, double anchor_c) {
  const Index p = batch.rows();
  const Index n = batch.cols();
  if (n < 1 || p < 1) throw Error(ErrorCode::empty_input, "variance anchor needs a non-empty batch");
  const double floor = anchor_c / std::sqrt(static_cast<double>(p));
  double sum = 0.0;
  for (Index j = 0; j < p; ++j) {
    const double mean = batch.row(j).mean();
    const double var = (batch.row(j).array() - mean).square().sum() / static_cast<double>(n);
    sum += std::max(0.0, floor - std::sqrt(var));
  }
  return sum / static_cast<double>(p);
}

RepulsionResult repulsion(const Mat& batch, const std::vector<int>& labels, Index dim,
                          bool drop_top) {
  if (static_cast<Index>(labels.size()) != batch.cols())
    throw Error(ErrorCode::dimension_mismatch, "one label per batch column required");
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "repulsion dimension must be >= 1");

  std::map<int, std::vector<Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Index>(i));

  RepulsionResult out;
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2) continue;
    Mat cls(batch.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) cls.col(static_cast<Index>(j)) = batch.col(idx[j]);
    SubspaceBasis basis = span_basis(cls, BasisMode::centered_top_d, dim, drop_top, label);
    if (basis.dim() == 0) continue;
    out.classes.push_back(label);
    out.bases.push_back(std::move(basis));
  }

  double sum = 0.0;
  for (std::size_t k = 0; k < out.bases.size(); ++k)
    for (std::size_t l = k + 1; l < out.bases.size(); ++l, ++out.pairs)
      sum += (out.bases[k].basis.transpose() * out.bases[l].basis).squaredNorm();
  if (out.pairs == 0) {
    out.no_defined_pair = true;
    return out;
  }
  out.loss = sum / static_cast<double>(out.pairs);
  return out;
}

double repulsion_loss(const Mat& batch, const std::vector<int>& labels, Index dim, bool drop_top) {
  return repulsion(batch, labels, dim, drop_top).loss;
}

void to_json(nlohmann::json& j, const GeometryConfig& c) {
  j = nlohmann::json{{"lambda_se", c.lambda_se},     {"beta_anchor", c.beta_anchor},
                     {"lambda_rep", c.lambda_rep},   {"inner_lambda", c.inner_lambda},
                     {"inner_mu", c.inner_mu},       {"anchor_c", c.anchor_c},
                     {"rep_dim", c.rep_dim},         {"rep_drop_top", c.rep_drop_top}};
}

void from_json(const nlohmann::json& j, GeometryConfig& c) {
  static const char* known[] = {"lambda_se", "beta_anchor", "lambda_rep", "inner_lambda",
                                "inner_mu",  "anchor_c",    "rep_dim",    "rep_drop_top"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw Error(ErrorCode::invalid_argument, "unknown geometry config key '" + key + "'");
  }
  c.lambda_se = j.value("lambda_se", c.lambda_se);
  c.beta_anchor = j.value("beta_anchor", c.beta_anchor);
  c.lambda_rep = j.value("lambda_rep", c.lambda_rep);
  c.inner_lambda = j.value("inner_lambda", c.inner_lambda);
  c.inner_mu = j.value("inner_mu", c.inner_mu);
  c.anchor_c = j.value("anchor_c", c.anchor_c);
  c.rep_dim = j.value("rep_dim", c.rep_dim);
  c.rep_drop_top = j.value("rep_drop_top", c.rep_drop_top);
}

GeometryLossReport combine_geometry_loss(double se, double anchor, const RepulsionResult& rep,
                                         const GeometryConfig& config) {
  GeometryLossReport r;
  r.se_loss = se;
  r.anchor_loss = anchor;
  r.repulsion_loss = rep.loss;
  r.repulsion_pairs = rep.pairs;
  r.repulsion_warning = rep.no_defined_pair;
  r.lambda_se = config.lambda_se;
  r.beta_anchor = config.beta_anchor;
  r.lambda_rep = config.lambda_rep;
  r.anchor_c = config.anchor_c;
  r.rep_dim = config.rep_dim;
  r.total = config.lambda_se * se + config.beta_anchor * anchor + config.lambda_rep * rep.loss;
  return r;
}

GeometryLossReport total_geometry_loss(const Mat& batch, const std::vector<int>& labels,
                                       const GeometryConfig& config) {
  const auto problem =
      MaskedRidgeProblem::from_labels(batch, labels, config.inner_lambda, config.inner_mu);
  const double se = se_loss(batch, masked_ridge_solve(problem));
  const double anchor = variance_anchor_loss(batch, config.anchor_c);
  return combine_geometry_loss(se, anchor,
                               repulsion(batch, labels, config.rep_dim, config.rep_drop_top), config);
}

}  // namespace srcgeo

#pragma once

// Reference computations used as test oracles. Deliberately written with
// different numerical routes from the library code.

#include "srcgeo/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using srcgeo::Index;
using srcgeo::Mat;
using srcgeo::Vec;

/// min_c ||z - A c|| via column-pivoted QR.
inline double ls_residual(const Mat& a, const Vec& z) {
  if (a.cols() == 0) return z.norm();
  const Vec c = a.colPivHouseholderQr().solve(z);
  return (z - a * c).norm();
}

/// min_c ||z - U c|| via the normal equations.
inline double normal_equation_residual(const Mat& u, const Vec& z) {
  const Vec c = (u.transpose() * u).ldlt().solve(u.transpose() * z);
  return (z - u * c).norm();
}

/// Best residual over every support of exactly k atoms.
inline double exhaustive_support_optimum(const Mat& dict, const Vec& z, Index k) {
  const Index n = dict.cols();
  std::vector<bool> pick(static_cast<std::size_t>(n), false);
  std::fill(pick.begin(), pick.begin() + k, true);
  double best = std::numeric_limits<double>::infinity();
  do {
    Mat sub(dict.rows(), k);
    Index c = 0;
    for (Index j = 0; j < n; ++j)
      if (pick[j]) sub.col(c++) = dict.col(j);
    best = std::min(best, ls_residual(sub, z));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

/// Indices of the s largest |<a_j, z>| (ties to the lower index).
inline std::vector<Index> top_correlation(const Mat& dict, const Vec& z, Index s) {
  const Vec corr = (dict.transpose() * z).cwiseAbs();
  std::vector<Index> order(static_cast<std::size_t>(dict.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return corr(a) > corr(b); });
  order.resize(static_cast<std::size_t>(s));
  return order;
}

inline double masked_ridge_objective(const Mat& z, const Mat& mask, double lambda, double mu,
                                     const Mat& c) {
  double off = 0.0;
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j)
      if (mask(i, j) == 0.0) off += c(i, j) * c(i, j);
  return (z - z * c).squaredNorm() + lambda * c.squaredNorm() + mu * off;
}

/// Conjugate gradient on the whole n x n coefficient matrix with the
/// diagonal pinned at zero.
inline Mat masked_ridge_cg(const Mat& z, const Mat& mask, double lambda, double mu,
                           int max_iter = 5000, double tol = 1e-14) {
  const Index n = z.cols();
  const Mat gram = z.transpose() * z;
  auto apply = [&](const Mat& c) {
    Mat h = gram * c + lambda * c;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (mask(i, j) == 0.0) h(i, j) += mu * c(i, j);
    h.diagonal().setZero();
    return h;
  };
  Mat rhs = gram;
  rhs.diagonal().setZero();
  Mat x = Mat::Zero(n, n);
  Mat r = rhs;
  Mat p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < max_iter && rr > tol * tol; ++it) {
    const Mat ap = apply(p);
    const double step = rr / (p.cwiseProduct(ap)).sum();
    x += step * p;
    r -= step * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return x;
}

/// exp(entropy) of a spectrum by the textbook formula.
inline double entropy_rank(std::vector<double> s) {
  double total = 0.0;
  for (double v : s) total += v;
  double h = 0.0;
  for (double v : s)
    if (v > 0) h -= (v / total) * std::log(v / total);
  return std::exp(h);
}

/// Central-difference gradient of f at x (entries perturbed in place).
inline Mat numeric_gradient(const std::function<double(const Mat&)>& f, Mat x, double step = 1e-6) {
  Mat g(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c)
    for (Index r = 0; r < x.rows(); ++r) {
      const double saved = x(r, c);
      x(r, c) = saved + step;
      const double up = f(x);
      x(r, c) = saved - step;
      const double down = f(x);
      x(r, c) = saved;
      g(r, c) = (up - down) / (2 * step);
    }
  return g;
}

/// Binary logistic regression by gradient descent; returns training accuracy.
inline double logistic_accuracy(const Mat& x, const std::vector<int>& labels, int iters = 5000,
                                double lr = 0.5) {
  const Index d = x.rows();
  Vec w = Vec::Zero(d);
  double b = 0.0;
  const double n = static_cast<double>(x.cols());
  for (int it = 0; it < iters; ++it) {
    Vec gw = Vec::Zero(d);
    double gb = 0.0;
    for (Index i = 0; i < x.cols(); ++i) {
      const double y = labels[i] == 1 ? 1.0 : 0.0;
      const double p = 1.0 / (1.0 + std::exp(-(w.dot(x.col(i)) + b)));
      gw += (p - y) * x.col(i);
      gb += p - y;
    }
    w -= lr * gw / n;
    b -= lr * gb / n;
  }
  int correct = 0;
  for (Index i = 0; i < x.cols(); ++i)
    if ((w.dot(x.col(i)) + b > 0) == (labels[i] == 1)) ++correct;
  return correct / n;
}

}  // namespace oracle

#include "doctest.h"
#include "oracles.hpp"

#include "srcgeo/losses.hpp"
#include "srcgeo/subspace.hpp"

#include <cmath>

using namespace srcgeo;

namespace {

struct Batch {
  Mat z;
  std::vector<int> labels;
};

Batch random_batch(Rng& rng, Index p, Index n, int classes) {
  Batch b;
  b.z = Mat(rng.normal_matrix(p, n)).colwise().normalized();
  for (Index i = 0; i < n; ++i) b.labels.push_back(1 + static_cast<int>(i % classes));
  return b;
}

}  // namespace

TEST_CASE("masked ridge: scalar cases") {
  const Mat one = Mat::Identity(3, 1);
  const auto single = masked_ridge_solve(MaskedRidgeProblem::from_labels(one, {1}, 0.01, 1.0));
  CHECK(single.rows() == 1);
  CHECK(single(0, 0) == 0.0);
  CHECK(se_loss(one, single) == doctest::Approx(1.0));

  Mat twin(2, 2);
  twin << 1, 1, 0, 0;
  const auto same = masked_ridge_solve(MaskedRidgeProblem::from_labels(twin, {1, 1}, 1.0, 5.0));
  CHECK(same(0, 1) == doctest::Approx(0.5));
  CHECK(same(1, 0) == doctest::Approx(0.5));
  CHECK(same(0, 0) == 0.0);
  CHECK(se_loss(twin, same) == doctest::Approx(0.5));

  const auto cross = masked_ridge_solve(MaskedRidgeProblem::from_labels(twin, {1, 2}, 1.0, 2.0));
  CHECK(cross(0, 1) == doctest::Approx(0.25));
  CHECK(cross(1, 0) == doctest::Approx(0.25));
}

TEST_CASE("masked ridge: contract errors") {
  CHECK_THROWS_AS(masked_ridge_solve(MaskedRidgeProblem::from_labels(Mat::Identity(2, 2), {1, 2}, 0.0, 1.0)), Error);
  CHECK_THROWS_AS(masked_ridge_solve(MaskedRidgeProblem::from_labels(Mat::Identity(2, 2), {1, 2}, 0.1, -1.0)), Error);
  MaskedRidgeProblem p{Mat::Identity(2, 2), Mat::Ones(2, 2), 0.1, 1.0};
  p.mask(0, 1) = 0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("masked ridge matches a conjugate-gradient oracle") {
  Rng rng(101);
  for (int t = 0; t < 30; ++t) {
    const Index p = 2 + static_cast<Index>(rng.index(11));
    const Index n = 2 + static_cast<Index>(rng.index(15));
    const auto b = random_batch(rng, p, n, 1 + static_cast<int>(rng.index(3)));
    const double lambda = std::pow(10.0, rng.uniform(-3, 0));
    const double mu = std::pow(10.0, rng.uniform(-1, 2));
    const auto prob = MaskedRidgeProblem::from_labels(b.z, b.labels, lambda, mu);
    const Mat c = masked_ridge_solve(prob);
    const Mat ref = oracle::masked_ridge_cg(b.z, prob.mask, lambda, mu);
    const double fc = oracle::masked_ridge_objective(b.z, prob.mask, lambda, mu, c);
    const double fr = oracle::masked_ridge_objective(b.z, prob.mask, lambda, mu, ref);
    CHECK(std::abs(fc - fr) <= 1e-6);
    CHECK(fc <= fr + 1e-12);
    CHECK(masked_ridge_objective(prob, c) == doctest::Approx(fc).epsilon(1e-12));
    for (Index i = 0; i < n; ++i) CHECK(c(i, i) == 0.0);
  }
}

TEST_CASE("property: single-entry perturbations never lower the objective") {
  Rng rng(103);
  for (int t = 0; t < 10; ++t) {
    const auto b = random_batch(rng, 5, 8, 2);
    const auto prob = MaskedRidgeProblem::from_labels(b.z, b.labels, 0.05, 3.0);
    const Mat c = masked_ridge_solve(prob);
    const double base = masked_ridge_objective(prob, c);
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 8; ++j) {
        if (i == j) continue;
        for (double h : {1e-4, -1e-4}) {
          Mat moved = c;
          moved(i, j) += h;
          CHECK(masked_ridge_objective(prob, moved) >= base);
        }
      }
  }
}

TEST_CASE("property: lambda and mu sweeps are monotone") {
  Rng rng(107);
  for (int t = 0; t < 10; ++t) {
    const auto b = random_batch(rng, 6, 10, 2);
    double prev = -1;
    for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
      const double se = se_loss(b.z, masked_ridge_solve(MaskedRidgeProblem::from_labels(b.z, b.labels, lambda, 1.0)));
      if (prev >= 0) CHECK(se <= prev + 1e-12);
      prev = se;
    }
    prev = 1e300;
    for (double mu : {0.1, 1.0, 10.0, 100.0}) {
      const auto prob = MaskedRidgeProblem::from_labels(b.z, b.labels, 0.01, mu);
      const double leak = cross_class_leakage_norm(masked_ridge_solve(prob), prob.mask);
      CHECK(leak <= prev + 1e-12);
      prev = leak;
    }
  }
}

TEST_CASE("se loss on a duplicated-class batch vanishes as lambda shrinks") {
  Rng rng(109);
  const Mat base = Mat(rng.normal_matrix(4, 2)).colwise().normalized();
  Mat z(4, 4);
  z << base, base;
  const std::vector<int> labels{1, 1, 1, 1};
  double prev = 1e300;
  for (double lambda : {1.0, 1e-2, 1e-4, 1e-6}) {
    const double se = se_loss(z, masked_ridge_solve(MaskedRidgeProblem::from_labels(z, labels, lambda, 1.0)));
    CHECK(se < prev);
    prev = se;
  }
  CHECK(prev < 1e-8);
  CHECK(se_loss(z, Mat::Zero(4, 4)) == doctest::Approx(4.0));
}

TEST_CASE("leakage norm and the operator-norm bound") {
  Mat twin(2, 2);
  twin << 1, 1, 0, 0;
  const auto prob = MaskedRidgeProblem::from_labels(twin, {1, 1}, 1.0, 1.0);
  CHECK(cross_class_leakage_norm(masked_ridge_solve(prob), prob.mask) == 0.0);

  Rng rng(113);
  for (int t = 0; t < 50; ++t) {
    const auto b = random_batch(rng, 5, 9, 3);
    const auto pr = MaskedRidgeProblem::from_labels(b.z, b.labels, 0.01, rng.uniform(0, 10));
    const auto bound = cross_class_leakage_bound(b.z, masked_ridge_solve(pr), pr.mask);
    CHECK(bound.holds());
  }
}

TEST_CASE("variance anchor: hinge arithmetic") {
  const Mat same = Mat::Constant(4, 3, 0.5);
  CHECK(variance_anchor_loss(same, 0.25) == doctest::Approx(0.25 / 2.0));
  Mat spread(1, 2);
  spread << 0.1, -0.1;
  CHECK(variance_anchor_loss(spread, 0.25) == doctest::Approx(0.15));
  Mat wide(2, 2);
  wide << 1, -1, -1, 1;
  CHECK(variance_anchor_loss(wide, 0.25) == 0.0);
}

TEST_CASE("repulsion: orthogonal, identical and angled spans") {
  Mat z(3, 4);
  z << 1, -1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0;
  CHECK(repulsion_loss(z, {1, 1, 2, 2}, 1, false) == doctest::Approx(0.0));

  Mat same(4, 6);
  same << 1, -1, 0, 1, -1, 0,
          0, 0, 1, 0, 0, 1,
          0, 0, 0, 0, 0, 0,
          0, 0, 0, 0, 0, 0;
  // each class: three points with a 2-dim centered span in the same plane
  CHECK(repulsion_loss(same, {1, 1, 1, 2, 2, 2}, 2, false) == doctest::Approx(2.0));

  for (double a : {0.2, 0.9}) {
    Mat l(2, 4);
    l << 1, -1, std::cos(a), -std::cos(a), 0, 0, std::sin(a), -std::sin(a);
    CHECK(repulsion_loss(l, {1, 1, 2, 2}, 1, false) == doctest::Approx(std::cos(a) * std::cos(a)));
  }
}

TEST_CASE("repulsion: undefined classes are skipped with a warning") {
  Mat z(2, 3);
  z << 1, 0, -1, 0, 1, 0;
  const auto r = repulsion(z, {1, 2, 2}, 1, false);
  CHECK(r.no_defined_pair);
  CHECK(r.loss == 0.0);
  const auto report = total_geometry_loss(z, {1, 2, 2}, GeometryConfig{});
  CHECK(report.repulsion_warning);
}

TEST_CASE("total loss: weighted sum and zero weights") {
  RepulsionResult rep;
  GeometryConfig cfg;
  const auto r = combine_geometry_loss(0.5, 0.0, rep, cfg);
  CHECK(r.total == 0.5);

  Rng rng(127);
  const auto b = random_batch(rng, 5, 8, 2);
  GeometryConfig zero;
  zero.lambda_se = zero.beta_anchor = zero.lambda_rep = 0.0;
  zero.rep_dim = 2;
  CHECK(total_geometry_loss(b.z, b.labels, zero).total == 0.0);

  cfg.rep_dim = 2;
  cfg.lambda_se = 0.3;
  cfg.beta_anchor = 2.0;
  cfg.lambda_rep = 0.7;
  const auto full = total_geometry_loss(b.z, b.labels, cfg);
  CHECK(full.total == 0.3 * full.se_loss + 2.0 * full.anchor_loss + 0.7 * full.repulsion_loss);
  CHECK(full.se_loss >= 0);
  CHECK(full.anchor_loss >= 0);
  CHECK(full.repulsion_loss >= 0);
}

TEST_CASE("geometry config defaults and json keys") {
  const GeometryConfig d;
  CHECK(d.lambda_se == 1.0);
  CHECK(d.beta_anchor == 1.0);
  CHECK(d.lambda_rep == 1.0);
  CHECK(d.anchor_c == 0.25);
  nlohmann::json j = d;
  for (const char* key : {"lambda_se", "beta_anchor", "lambda_rep", "inner_lambda", "inner_mu", "anchor_c",
                          "rep_dim", "rep_drop_top"})
    CHECK(j.contains(key));
  j["rep_dim"] = 3;
  CHECK(j.get<GeometryConfig>().rep_dim == 3);
  j["bogus"] = 1;
  CHECK_THROWS_AS(j.get<GeometryConfig>(), Error);
}

TEST_CASE("property: small repulsion forces principal-angle separation") {
  Rng rng(131);
  for (int t = 0; t < 100; ++t) {
    const auto b = random_batch(rng, 8, 12, 3);
    const auto r = repulsion(b.z, b.labels, 2, false);
    double eta = 0;
    for (std::size_t k = 0; k < r.bases.size(); ++k)
      for (std::size_t l = k + 1; l < r.bases.size(); ++l)
        eta = std::max(eta, (r.bases[k].basis.transpose() * r.bases[l].basis).squaredNorm());
    for (std::size_t k = 0; k < r.bases.size(); ++k)
      for (std::size_t l = k + 1; l < r.bases.size(); ++l)
        CHECK(principal_angles(r.bases[k], r.bases[l]).min_angle() >= std::acos(std::sqrt(std::min(eta, 1.0))) - 1e-9);
  }
}

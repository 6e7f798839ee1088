#include "doctest.h"
#include "oracles.hpp"

#include "srcgeo/omp.hpp"

#include <algorithm>
#include <set>

using namespace srcgeo;

namespace {

void check_record(const SparseCode& code, const Mat& dict, const Vec& z, int budget) {
  CHECK(static_cast<int>(code.support.size()) <= budget);
  CHECK(std::set<Index>(code.support.begin(), code.support.end()).size() == code.support.size());
  for (std::size_t i = 1; i < code.residual_history.size(); ++i)
    CHECK(code.residual_history[i] <= code.residual_history[i - 1] + 1e-12);
  if (!code.support.empty()) {
    Mat sub(dict.rows(), static_cast<Index>(code.support.size()));
    for (std::size_t j = 0; j < code.support.size(); ++j) sub.col(static_cast<Index>(j)) = dict.col(code.support[j]);
    const Vec r = z - sub * code.coefficients;
    // least-squares optimality: residual orthogonal to the support
    CHECK((sub.transpose() * r).norm() <= 1e-8 * z.norm());
    CHECK(r.norm() == doctest::Approx(code.final_residual_norm).epsilon(1e-9));
  }
}

Mat random_unit_dictionary(Index p, Index n, Rng& rng) {
  return srcgeo::Mat(rng.normal_matrix(p, n)).colwise().normalized();
}

}  // namespace

TEST_CASE("omp: identity dictionary, exact match") {
  const Mat dict = Mat::Identity(3, 3);
  const Vec z = Vec::Unit(3, 1);
  const auto code = omp(dict, z, 1);
  CHECK(code.support == std::vector<Index>{1});
  CHECK(code.coefficients(0) == doctest::Approx(1.0));
  CHECK(code.final_residual_norm == doctest::Approx(0.0));
}

TEST_CASE("omp: orthonormal pair with weights 0.8 and 0.6") {
  Rng rng(1);
  const Mat q = Eigen::HouseholderQR<Mat>(rng.normal_matrix(4, 2)).householderQ() * Mat::Identity(4, 2);
  const Vec z = 0.8 * q.col(0) + 0.6 * q.col(1);
  const auto one = omp(q, z, 1);
  CHECK(one.support == std::vector<Index>{0});
  CHECK(one.final_residual_norm == doctest::Approx(0.6).epsilon(1e-12));
  const auto two = omp(q, z, 2);
  CHECK(two.support == std::vector<Index>{0, 1});
  CHECK(two.coefficients(0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(two.coefficients(1) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(two.final_residual_norm <= 1e-12);
}

TEST_CASE("omp: contract errors") {
  Mat bad = Mat::Identity(3, 3);
  bad(0, 0) = 1.1;
  CHECK_THROWS_AS(omp(bad, Vec::Unit(3, 0), 1), Error);
  try {
    omp(bad, Vec::Unit(3, 0), 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dictionary_not_normalized);
  }
  CHECK_THROWS_AS(omp(Mat::Identity(3, 3), Vec::Unit(3, 0), 4), Error);
  CHECK_THROWS_AS(omp(Mat::Identity(3, 3), Vec::Unit(3, 0), 0), Error);
}

TEST_CASE("omp vs exhaustive support search on random 6x10 dictionaries") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat dict = random_unit_dictionary(6, 10, rng);
    const Vec z = rng.unit_vector(6);
    const auto code = omp(dict, z, 3);
    check_record(code, dict, z, 3);
    const double best = oracle::exhaustive_support_optimum(dict, z, 3);
    CHECK(code.final_residual_norm >= best - 1e-12);
    if (best <= 1e-9) CHECK(code.final_residual_norm <= 1e-9);
  }
}

TEST_CASE("omp on planted 3-sparse targets never beats the exhaustive optimum") {
  Rng rng(77);
  int recovered = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Mat dict = random_unit_dictionary(6, 10, rng);
    const Vec z = (dict.col(1) * 0.7 + dict.col(4) * 0.2 - dict.col(9) * 0.5).normalized();
    const auto code = omp(dict, z, 3);
    check_record(code, dict, z, 3);
    CHECK(oracle::exhaustive_support_optimum(dict, z, 3) <= 1e-9);
    if (code.final_residual_norm <= 1e-9) ++recovered;
  }
  // greedy selection is not guaranteed to find the planted support
  MESSAGE("planted supports recovered: " << recovered << "/50");
}

TEST_CASE("property: orthonormal dictionaries reduce to top-correlation selection") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index p = 3 + static_cast<Index>(rng.index(6));
    const Index n = 1 + static_cast<Index>(rng.index(static_cast<std::size_t>(p)));
    const Mat q = Eigen::HouseholderQR<Mat>(rng.normal_matrix(p, p)).householderQ() * Mat::Identity(p, n);
    const Vec z = rng.unit_vector(p);
    const int s = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    const auto code = omp(q, z, s);
    auto got = code.support;
    auto expect = oracle::top_correlation(q, z, s);
    std::sort(got.begin(), got.end());
    std::sort(expect.begin(), expect.end());
    CHECK(got == expect);
    check_record(code, q, z, s);
  }
}

TEST_CASE("property: targets in the span are recovered when s >= rank") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Mat dict = random_unit_dictionary(5, 5, rng);
    const Vec z = (dict * rng.normal_vector(5)).normalized();
    const auto code = omp(dict, z, 5);
    CHECK(code.final_residual_norm <= 1e-9);
  }
}

TEST_CASE("property: determinism and duplicated atoms") {
  Rng rng(9);
  Mat dict = random_unit_dictionary(4, 6, rng);
  dict.col(5) = dict.col(2);
  const Vec z = rng.unit_vector(4);
  const auto a = omp(dict, z, 4);
  const auto b = omp(dict, z, 4);
  CHECK(a.support == b.support);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.residual_history == b.residual_history);
  check_record(a, dict, z, 4);
}

TEST_CASE("support least squares flags dependent columns") {
  Mat dict(3, 3);
  dict << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  bool deficient = false;
  const Vec c = support_least_squares(dict, {0, 1}, Vec::Unit(3, 0), &deficient);
  CHECK(deficient);
  // minimum-norm solution splits evenly
  CHECK(c(0) == doctest::Approx(0.5));
  CHECK(c(1) == doctest::Approx(0.5));
}

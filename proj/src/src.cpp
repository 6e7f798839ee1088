#include "srcgeo/src.hpp"

#include "srcgeo/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace srcgeo {

namespace {

constexpr double kTieRelTol = 1e-12;
constexpr double kInvariantTol = 1e-9;

Vec class_reconstruction(const Mat& dictionary, const std::vector<Index>& members,
                         const Vec& dense_code) {
  Vec recon = Vec::Zero(dictionary.rows());
  for (Index j : members)
    if (dense_code(j) != 0.0) recon += dense_code(j) * dictionary.col(j);
  return recon;
}

void check_class(const ClassPartition& partition, int class_id) {
  if (class_id < 1 || class_id > partition.class_count())
    throw Error(ErrorCode::invalid_argument, "class " + std::to_string(class_id) + " outside 1..K");
}

double binomial(Index n, Index k) {
  double c = 1.0;
  for (Index i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_input, "median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

double balanced_accuracy(const std::vector<double>& per_class_recall) {
  if (per_class_recall.empty()) throw Error(ErrorCode::empty_input, "no per-class recalls");
  return std::accumulate(per_class_recall.begin(), per_class_recall.end(), 0.0) /
         static_cast<double>(per_class_recall.size());
}

ResidualProfile profile_from_residuals(const Vec& residuals) {
  if (residuals.size() < 1) throw Error(ErrorCode::invalid_argument, "empty residual vector");
  ResidualProfile out;
  out.residuals = residuals;
  Index best = 0;
  for (Index k = 1; k < residuals.size(); ++k)
    if (residuals(k) < residuals(best)) best = k;
  out.predicted_label = static_cast<int>(best) + 1;
  if (residuals.size() == 1) return out;

  double second = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < residuals.size(); ++k)
    if (k != best) second = std::min(second, residuals(k));
  out.margin_top2 = std::max(0.0, second - residuals(best));
  out.tie_flag = out.margin_top2 <= kTieRelTol * std::max(1.0, residuals(best));
  return out;
}

ResidualProfile class_restricted_residuals(const Mat& dictionary, const ClassPartition& partition,
                                           const SparseCode& code, const Vec& target) {
  if (target.size() != dictionary.rows())
    throw Error(ErrorCode::dimension_mismatch, "target length differs from dictionary rows");
  const Vec dense = code.dense(dictionary.cols());
  Vec residuals(partition.class_count());
  for (int k = 1; k <= partition.class_count(); ++k)
    residuals(k - 1) = (target - class_reconstruction(dictionary, partition.of(k), dense)).norm();
  return profile_from_residuals(residuals);
}

ResidualProfile class_restricted_residuals(const LabeledEmbeddingSet& dictionary,
                                           const ClassPartition& partition,
                                           const SparseCode& code, const Vec& target) {
  return class_restricted_residuals(dictionary.embeddings(), partition, code, target);
}

Prediction src_predict(const ResidualProfile& profile, double eta) {
  if (profile.residuals.size() < 2) throw Error(ErrorCode::invalid_argument, "src_predict needs K >= 2");
  if (eta < 0) throw Error(ErrorCode::invalid_argument, "eta must be >= 0");
  return {profile.predicted_label, profile.margin_top2 > 2.0 * eta};
}

LeakageDecomposition leakage_decomposition(const Mat& dictionary, const ClassPartition& partition,
                                           const SparseCode& code, const Vec& target,
                                           int true_label) {
  check_class(partition, true_label);
  const Vec dense = code.dense(dictionary.cols());
  const Vec full = dictionary * dense;
  const Vec in_class = class_reconstruction(dictionary, partition.of(true_label), dense);

  LeakageDecomposition out;
  out.eta_rec = (target - full).norm();
  out.eta_leak = (full - in_class).norm();
  out.true_class_residual = (target - in_class).norm();
  if (out.true_class_residual > out.eta_rec + out.eta_leak + kInvariantTol)
    throw Error(ErrorCode::numerical_failure, "true-class residual exceeds eta_rec + eta_leak");
  return out;
}

double class_restricted_sparse_residual(const Mat& dictionary, const ClassPartition& partition,
                                        const Vec& target, int class_id, int budget,
                                        SparseResidualMode mode) {
  check_class(partition, class_id);
  if (budget < 1) throw Error(ErrorCode::invalid_argument, "budget must be >= 1");
  const auto& members = partition.of(class_id);
  if (members.empty()) return target.norm();

  const Index n = static_cast<Index>(members.size());
  if (mode == SparseResidualMode::greedy) {
    Mat sub(dictionary.rows(), n);
    for (Index j = 0; j < n; ++j) sub.col(j) = dictionary.col(members[j]);
    const int s = static_cast<int>(std::min<Index>({budget, n, dictionary.rows()}));
    return omp(sub, target, s).final_residual_norm;
  }

  const Index k = std::min<Index>(budget, n);
  const double count = binomial(n, k);
  if (count > kExactSupportCap)
    throw Error(ErrorCode::budget_exceeded,
                "exact sparse residual needs " + std::to_string(static_cast<long long>(count)) +
                    " supports (cap 1e5); use greedy mode");

  // Supports of exactly k atoms suffice: adding atoms never raises an LS residual.
  std::vector<Index> pick(static_cast<std::size_t>(k));
  std::iota(pick.begin(), pick.end(), Index{0});
  double best = target.norm();
  std::vector<Index> support(pick.size());
  for (;;) {
    for (std::size_t i = 0; i < pick.size(); ++i) support[i] = members[pick[i]];
    const Vec coeffs = support_least_squares(dictionary, support, target);
    Vec recon = Vec::Zero(dictionary.rows());
    for (std::size_t i = 0; i < support.size(); ++i) recon += coeffs(static_cast<Index>(i)) * dictionary.col(support[i]);
    best = std::min(best, (target - recon).norm());

    Index i = k - 1;
    while (i >= 0 && pick[i] == n - k + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (Index j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

EvaluationReport evaluate(const LabeledEmbeddingSet& dictionary,
                          const LabeledEmbeddingSet& test_set, int budget) {
  if (dictionary.dim() != test_set.dim())
    throw Error(ErrorCode::dimension_mismatch, "test and dictionary embedding dimensions differ");

  EvaluationReport report;
  report.budget = budget;
  report.class_ids = dictionary.label_ids();
  for (long id : test_set.label_ids()) report.class_ids.push_back(id);
  std::sort(report.class_ids.begin(), report.class_ids.end());
  report.class_ids.erase(std::unique(report.class_ids.begin(), report.class_ids.end()),
                         report.class_ids.end());
  auto union_index = [&](long id) {
    return static_cast<int>(std::lower_bound(report.class_ids.begin(), report.class_ids.end(), id) -
                            report.class_ids.begin());
  };
  for (long id : test_set.label_ids()) {
    if (!std::binary_search(dictionary.label_ids().begin(), dictionary.label_ids().end(), id))
      report.warnings.push_back("class " + std::to_string(id) +
                                " absent from dictionary; its test points count as errors");
  }

  const Mat& atoms = dictionary.embeddings();
  const ClassPartition partition = partition_by_class(dictionary);
  std::vector<SubspaceBasis> spans;
  for (int k = 1; k <= dictionary.class_count(); ++k)
    spans.push_back(span_basis(gather_columns(atoms, partition.of(k)), BasisMode::uncentered_span,
                               std::nullopt, false, k));

  const Mat targets = l2_normalize_columns(test_set.embeddings());
  const int u = static_cast<int>(report.class_ids.size());
  report.confusion = Eigen::MatrixXi::Zero(u, u);

  for (Index i = 0; i < targets.cols(); ++i) {
    const Vec z = targets.col(i);
    const SparseCode code = omp(atoms, z, budget);
    const ResidualProfile profile = class_restricted_residuals(atoms, partition, code, z);
    for (int k = 1; k <= dictionary.class_count(); ++k) {
      const double sub = subspace_residual(z, spans[k - 1]);
      if (profile.residuals(k - 1) < sub - kInvariantTol)
        throw Error(ErrorCode::numerical_failure,
                    "practical residual below span residual at test column " + std::to_string(i + 1));
    }
    const int truth = union_index(test_set.original_label(test_set.labels()[i]));
    const int pred = union_index(dictionary.original_label(profile.predicted_label));
    report.confusion(truth, pred) += 1;
    report.true_labels.push_back(truth);
    report.predicted.push_back(pred);
    report.margins.push_back(profile.margin_top2);
    report.residuals.push_back(profile.residuals);
  }

  const double total = static_cast<double>(report.confusion.sum());
  report.accuracy = static_cast<double>(report.confusion.trace()) / total;
  for (int k = 0; k < u; ++k) {
    const int support = report.confusion.row(k).sum();
    if (support == 0) continue;
    report.recall_class_ids.push_back(report.class_ids[k]);
    report.per_class_recall.push_back(static_cast<double>(report.confusion(k, k)) / support);
  }
  report.balanced_accuracy = balanced_accuracy(report.per_class_recall);
  report.margin_mean =
      std::accumulate(report.margins.begin(), report.margins.end(), 0.0) / report.margins.size();
  report.margin_median = median(report.margins);
  return report;
}

}  // namespace srcgeo

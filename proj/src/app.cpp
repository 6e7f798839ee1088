#include "srcgeo/app.hpp"

#include "srcgeo/parallel.hpp"
#include "srcgeo/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace srcgeo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number(double x) {
  if (!std::isfinite(x)) return format_number(x);  // JSON has no nan/inf
  return round9(x);
}

}  // namespace

int resolve_sparsity(std::optional<int> requested, Index dim, Index atoms) {
  if (requested) {
    if (*requested < 1) throw Error(ErrorCode::invalid_argument, "sparsity must be >= 1");
    return *requested;
  }
  return static_cast<int>(std::min<Index>({kDefaultSparsity, dim, atoms}));
}

double round9(double x) {
  if (!std::isfinite(x) || x == 0.0) return x == 0.0 ? 0.0 : x;
  return std::stod(format_number(x));
}

nlohmann::json evaluation_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["sparsity"] = r.budget;
  j["test_points"] = r.true_labels.size();
  j["accuracy"] = number(r.accuracy);
  j["balanced_accuracy"] = number(r.balanced_accuracy);
  j["margin_mean"] = number(r.margin_mean);
  j["margin_median"] = number(r.margin_median);
  j["class_ids"] = r.class_ids;
  nlohmann::json recall = nlohmann::json::object();
  for (std::size_t k = 0; k < r.per_class_recall.size(); ++k)
    recall[std::to_string(r.recall_class_ids[k])] = number(r.per_class_recall[k]);
  j["per_class_recall"] = recall;
  nlohmann::json confusion = nlohmann::json::array();
  for (Index i = 0; i < r.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < r.confusion.cols(); ++c) row.push_back(r.confusion(i, c));
    confusion.push_back(std::move(row));
  }
  j["confusion"] = confusion;
  j["warnings"] = r.warnings;
  return j;
}

std::string format_predictions_csv(const EvaluationReport& r, const LabeledEmbeddingSet& dictionary) {
  std::string out = "index,label,predicted,margin";
  for (long id : dictionary.label_ids()) out += ",r_" + std::to_string(id);
  out += '\n';
  for (std::size_t i = 0; i < r.predicted.size(); ++i) {
    out += std::to_string(i) + ',' + std::to_string(r.class_ids[r.true_labels[i]]) + ',' +
           std::to_string(r.class_ids[r.predicted[i]]) + ',' + format_number(r.margins[i]);
    for (double v : r.residuals[i]) out += ',' + format_number(v);
    out += '\n';
  }
  return out;
}

Diagnostics diagnose(const LabeledEmbeddingSet& set, std::optional<Index> dim) {
  const Mat z = l2_normalize_columns(set.embeddings());
  const ClassPartition part = partition_by_class(set);
  const int classes = set.class_count();

  Diagnostics d;
  d.class_ids = set.label_ids();
  std::vector<Mat> members;
  for (int k = 1; k <= classes; ++k) {
    members.push_back(gather_columns(z, part.of(k)));
    d.centered_ranks.push_back(centered_rank(members.back()));
    const bool defined = d.centered_ranks.back() > 0;
    d.effective_ranks.push_back(defined ? effective_rank(members.back()) : kNaN);
  }
  double sum = 0.0;
  int defined = 0;
  for (double e : d.effective_ranks)
    if (!std::isnan(e)) sum += e, ++defined;
  d.effective_rank_mean = defined ? sum / defined : kNaN;

  const Index min_rank = *std::min_element(d.centered_ranks.begin(), d.centered_ranks.end());
  if (dim) {
    if (*dim < 1) throw Error(ErrorCode::invalid_argument, "diagnostic d must be >= 1");
    if (*dim > min_rank)
      throw Error(ErrorCode::degenerate_embedding,
                  "diagnostic d = " + std::to_string(*dim) + " exceeds the smallest centered class rank " +
                      std::to_string(min_rank));
    d.dim = *dim;
  } else {
    d.dim = min_rank;
  }

  d.min_angles = Mat::Zero(classes, classes);
  d.cohesion_max = kNaN;
  if (d.dim < 1) {
    // some class has a single distinct point: no centered subspace at all
    d.min_angles.setConstant(kNaN);
    d.min_angles.diagonal().setZero();
    return d;
  }
  std::vector<SubspaceBasis> bases;
  for (int k = 1; k <= classes; ++k)
    bases.push_back(span_basis(members[k - 1], BasisMode::centered_top_d, d.dim, false, k));
  for (int k = 0; k < classes; ++k)
    for (int l = k + 1; l < classes; ++l)
      d.min_angles(k, l) = d.min_angles(l, k) = principal_angles(bases[k], bases[l]).min_angle();
  if (classes >= 2) d.cohesion_max = cohesion_max(bases);
  return d;
}

nlohmann::json diagnostics_json(const Diagnostics& d) {
  nlohmann::json j;
  j["class_ids"] = d.class_ids;
  j["centered_rank"] = d.centered_ranks;
  nlohmann::json er = nlohmann::json::array();
  for (double e : d.effective_ranks) er.push_back(number(e));
  j["effective_rank"] = er;
  j["effective_rank_mean"] = number(d.effective_rank_mean);
  j["d"] = d.dim;
  j["cohesion_max"] = number(d.cohesion_max);
  nlohmann::json angles = nlohmann::json::array();
  for (Index k = 0; k < d.min_angles.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (Index l = 0; l < d.min_angles.cols(); ++l) row.push_back(number(d.min_angles(k, l)));
    angles.push_back(std::move(row));
  }
  j["theta_min"] = angles;
  return j;
}

std::vector<SweepRow> run_sweep(const LabeledEmbeddingSet& train, const LabeledEmbeddingSet& test,
                                const SweepSpec& grid) {
  if (grid.mus.empty() || grid.lambdas.empty() || grid.seeds.empty())
    throw Error(ErrorCode::invalid_argument, "sweep grids and seed list must be non-empty");
  if (train.dim() != test.dim())
    throw Error(ErrorCode::dimension_mismatch, "train and test feature dimensions differ");

  std::vector<SweepRow> rows;
  for (double mu : grid.mus)
    for (double lambda : grid.lambdas)
      for (std::uint64_t seed : grid.seeds) {
        SweepRow r;
        r.mu = mu;
        r.lambda = lambda;
        r.seed = seed;
        rows.push_back(r);
      }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.mu, a.lambda, a.seed) < std::tie(b.mu, b.lambda, b.seed);
  });

  parallel_for(rows.size(), [&](std::size_t i) {
    SweepRow& r = rows[i];
    TrainConfig config = grid.base;
    config.geometry.inner_mu = r.mu;
    config.geometry.inner_lambda = r.lambda;
    config.seed = r.seed;
    try {
      const TrainResult trained = train_linear_encoder(train, config);
      const LabeledEmbeddingSet dict = trained.encoder.embed(train);
      const LabeledEmbeddingSet held_out = trained.encoder.embed(test);
      const int s = resolve_sparsity(grid.sparsity, dict.dim(), dict.size());
      const EvaluationReport eval = evaluate(dict, held_out, s);
      const Diagnostics diag = diagnose(dict, std::nullopt);
      r.accuracy = eval.accuracy;
      r.balanced_accuracy = eval.balanced_accuracy;
      r.margin_mean = eval.margin_mean;
      r.margin_median = eval.margin_median;
      r.effrank_mean = diag.effective_rank_mean;
      r.cohesion_max = diag.cohesion_max;
    } catch (const Error& e) {
      r.error = std::string(to_string(e.code())) + ": " + e.what();
      r.accuracy = r.balanced_accuracy = r.margin_mean = r.margin_median = kNaN;
      r.effrank_mean = r.cohesion_max = kNaN;
    }
  });
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "mu,lambda,seed,accuracy,balanced_accuracy,margin_mean,margin_median,effrank_mean,cohesion_max\n";
  for (const auto& r : rows) {
    out += format_number(r.mu) + ',' + format_number(r.lambda) + ',' + std::to_string(r.seed) + ',' +
           format_number(r.accuracy) + ',' + format_number(r.balanced_accuracy) + ',' +
           format_number(r.margin_mean) + ',' + format_number(r.margin_median) + ',' +
           format_number(r.effrank_mean) + ',' + format_number(r.cohesion_max) + '\n';
  }
  return out;
}

}  // namespace srcgeo

#pragma once

// Report formatting and the run drivers behind the command-line tool.

#include "srcgeo/embedding.hpp"
#include "srcgeo/src.hpp"
#include "srcgeo/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace srcgeo {

inline constexpr int kDefaultSparsity = 30;

/// Explicit s is used as given (OMP rejects s > min(p, N)); the default 30
/// is clamped to min(p, N).
int resolve_sparsity(std::optional<int> requested, Index dim, Index atoms);

/// x rounded to 9 significant digits, so JSON output is stable across
/// platforms.
double round9(double x);

nlohmann::json evaluation_json(const EvaluationReport& report);

/// index,label,predicted,margin,r_<class>... with original label values.
std::string format_predictions_csv(const EvaluationReport& report,
                                   const LabeledEmbeddingSet& dictionary);

struct Diagnostics {
  std::vector<long> class_ids;
  std::vector<Index> centered_ranks;
  std::vector<double> effective_ranks;  // nan when the centered class matrix is zero
  Index dim = 0;                        // d used for the centered top-d bases
  double cohesion_max = 0;              // nan with fewer than two classes
  Mat min_angles;                       // K x K theta_min, zero diagonal
  double effective_rank_mean = 0;       // over classes with a defined value
};

/// Per-class effective rank, Cohesion_max and pairwise theta_min on
/// unit-normalized embeddings. Default d is the smallest centered rank.
Diagnostics diagnose(const LabeledEmbeddingSet& embeddings, std::optional<Index> dim);
nlohmann::json diagnostics_json(const Diagnostics& diag);

struct SweepRow {
  double mu = 0;
  double lambda = 0;
  std::uint64_t seed = 0;
  double accuracy = 0;
  double balanced_accuracy = 0;
  double margin_mean = 0;
  double margin_median = 0;
  double effrank_mean = 0;
  double cohesion_max = 0;
  std::string error;  // non-empty when the cell failed; metrics are nan
};

struct SweepSpec {
  std::vector<double> mus;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  std::optional<int> sparsity;
  TrainConfig base;
};

/// One geometry-trained encoder per (mu, lambda, seed) cell, evaluated with
/// the fixed SRC rule on the held-out set. Rows come back sorted by
/// (mu, lambda, seed) whatever order the workers finish in.
std::vector<SweepRow> run_sweep(const LabeledEmbeddingSet& train, const LabeledEmbeddingSet& test,
                                const SweepSpec& grid);
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace srcgeo

#pragma once

// Desk-scale geometry-shaping trainer. Depends on the geometry losses only;
// the sparse coder and SRC inference are never reachable from here.

#include "srcgeo/common.hpp"
#include "srcgeo/embedding.hpp"
#include "srcgeo/losses.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace srcgeo {

/// z = normalize(W x + b).
struct LinearEncoder {
  Mat weight;  // p x D
  Vec bias;    // p

  Index input_dim() const noexcept { return weight.cols(); }
  Index output_dim() const noexcept { return weight.rows(); }

  Mat pre_activation(const Mat& raw) const;
  /// Unit-norm embeddings, one per column. Throws numerical_failure if an
  /// affine output is (numerically) zero.
  Mat embed(const Mat& raw) const;
  LabeledEmbeddingSet embed(const LabeledEmbeddingSet& raw) const;
};

enum class GradientMode { analytic_stop_grad, finite_difference };
enum class EncoderInit { random, identity };

struct TrainConfig {
  int epochs = 60;
  int steps_per_epoch = 50;
  int per_class_batch = 12;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  Index embed_dim = 0;  // 0: same as the input dimension
  EncoderInit init = EncoderInit::random;
  double init_scale = 1.0;  // random init draws N(0, init_scale^2 / D)
  GradientMode gradient_mode = GradientMode::analytic_stop_grad;
  GeometryConfig geometry;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

/// Class-balanced index batches: exactly `per_class` indices of every class
/// (labels 1..K) per batch, without replacement when the class is large
/// enough and with replacement otherwise.
std::vector<std::vector<Index>> balanced_batches(const std::vector<int>& labels, int per_class,
                                                 int steps, std::uint64_t seed);

/// Geometry objective with the masked-ridge coefficients C* and the
/// repulsion SVD factors frozen at construction.
///
/// Each class basis is replaced by its frozen tangent model
///   U_k(Z) = U0_k + (I - U0_k U0_k^T) center(Z_k) A_k,
/// with U0_k and A_k = V_k diag(1 / sigma_k) taken from the SVD at the freeze
/// point. Only components leaving the frozen span move the basis, so the
/// repulsion term keeps a gradient through Z while the decomposition itself
/// is held fixed; rescaling a class in place leaves it unchanged. At the
/// freeze point the value equals the live objective.
class FrozenGeometryObjective {
 public:
  FrozenGeometryObjective(const Mat& batch, const std::vector<int>& labels,
                          const GeometryConfig& config);

  double value(const Mat& batch) const;

  struct Gradient {
    Mat se;
    Mat anchor;
    Mat repulsion;
    Mat total;
  };
  Gradient gradient(const Mat& batch) const;

  /// Components at the freeze point, computed by the live loss functions.
  const GeometryLossReport& report() const noexcept { return report_; }
  const Mat& coefficients() const noexcept { return coefficients_; }

 private:
  struct ClassFactor {
    std::vector<Index> members;
    Mat coeff;  // A_k
    Mat basis;  // U0_k
  };

  double anchor_value(const Mat& batch) const;
  Mat anchor_gradient(const Mat& batch) const;
  double repulsion_value(const Mat& batch) const;
  Mat repulsion_gradient(const Mat& batch) const;
  Mat class_basis(const Mat& batch, const ClassFactor& f) const;

  GeometryConfig config_;
  Mat coefficients_;
  std::vector<ClassFactor> factors_;
  GeometryLossReport report_;
};

struct EncoderGradient {
  Mat weight;
  Vec bias;
  GeometryLossReport report;  // loss at the evaluation point
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Gradient of the frozen objective with respect to (W, b), through the
/// normalization map. `raw_batch` is D x n.
EncoderGradient objective_gradient(const LinearEncoder& encoder, const Mat& raw_batch,
                                   const std::vector<int>& labels, const GeometryConfig& geometry,
                                   GradientMode mode);

LinearEncoder initial_encoder(Index input_dim, const TrainConfig& config);

struct TrainResult {
  LinearEncoder encoder;
  std::vector<GeometryLossReport> trace;  // one per step, before the update
};

/// Raised when the objective leaves the finite range or exceeds 1e6.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<GeometryLossReport> trace)
      : Error(ErrorCode::divergence, what), trace_(std::move(trace)) {}
  const std::vector<GeometryLossReport>& trace() const noexcept { return trace_; }

 private:
  std::vector<GeometryLossReport> trace_;
};

inline constexpr double kDivergenceLimit = 1e6;

/// Plain gradient descent on the geometry objective over balanced batches;
/// the returned encoder is frozen.
TrainResult train_linear_encoder(const LabeledEmbeddingSet& data, const TrainConfig& config);

struct CeResult {
  LinearEncoder encoder;  // the softmax head is discarded
  double head_train_accuracy = 0;
  std::vector<double> loss_trace;
};

/// Cross-entropy reference: affine encoder + normalization + linear softmax
/// head trained jointly on the same balanced batches.
CeResult train_ce_reference(const LabeledEmbeddingSet& data, const TrainConfig& config);

/// Checkpoint: weight/bias as row-major nested arrays, config echo, final loss.
nlohmann::json checkpoint_json(const LinearEncoder& encoder, const TrainConfig& config,
                               double final_loss, const std::string& kind);
LinearEncoder encoder_from_checkpoint(const nlohmann::json& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& checkpoint);
nlohmann::json load_checkpoint(const std::filesystem::path& path);

/// CSV with columns step,L_SE,L_anch,L_rep,total.
std::string format_loss_trace(const std::vector<GeometryLossReport>& trace);

}  // namespace srcgeo

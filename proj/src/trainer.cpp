#include "srcgeo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace srcgeo {

namespace {

void require_finite(const Mat& m, const char* component) {
  if (!m.allFinite())
    throw Error(ErrorCode::numerical_failure, std::string("non-finite gradient in ") + component);
}

/// Pull a gradient with respect to normalized outputs back through
/// z = v / ||v||.
Mat normalization_backward(const Mat& pre, const Mat& z, const Mat& grad_z) {
  Mat grad_v(grad_z.rows(), grad_z.cols());
  for (Index i = 0; i < z.cols(); ++i) {
    const double norm = pre.col(i).norm();
    grad_v.col(i) = (grad_z.col(i) - z.col(i) * z.col(i).dot(grad_z.col(i))) / norm;
  }
  return grad_v;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<Index>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(labels[i]);
  return out;
}

void check_loss(const GeometryLossReport& r, const std::vector<GeometryLossReport>& trace) {
  if (!std::isfinite(r.total) || r.total > kDivergenceLimit)
    throw DivergenceError("training diverged at step " + std::to_string(trace.size()), trace);
}

const char* to_string(GradientMode mode) {
  return mode == GradientMode::analytic_stop_grad ? "analytic-stop-grad" : "finite-difference";
}

}  // namespace

Mat LinearEncoder::pre_activation(const Mat& raw) const {
  if (raw.rows() != input_dim())
    throw Error(ErrorCode::dimension_mismatch, "encoder input dimension differs from data");
  Mat v = weight * raw;
  v.colwise() += bias;
  return v;
}

Mat LinearEncoder::embed(const Mat& raw) const {
  Mat v = pre_activation(raw);
  for (Index i = 0; i < v.cols(); ++i) {
    const double norm = v.col(i).norm();
    if (!(norm > 1e-12) || !std::isfinite(norm))
      throw Error(ErrorCode::numerical_failure,
                  "encoder output " + std::to_string(i + 1) + " cannot be normalized");
    v.col(i) /= norm;
  }
  return v;
}

LabeledEmbeddingSet LinearEncoder::embed(const LabeledEmbeddingSet& raw) const {
  return LabeledEmbeddingSet(embed(raw.embeddings()), raw.original_labels());
}

void TrainConfig::validate() const {
  if (epochs < 0 || steps_per_epoch < 0)
    throw Error(ErrorCode::invalid_argument, "epochs and steps_per_epoch must be >= 0");
  if (per_class_batch < 2)
    throw Error(ErrorCode::invalid_argument, "per_class_batch must be >= 2");
  if (!(learning_rate >= 0)) throw Error(ErrorCode::invalid_argument, "learning_rate must be >= 0");
  if (embed_dim < 0) throw Error(ErrorCode::invalid_argument, "embed_dim must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"steps_per_epoch", c.steps_per_epoch},
                     {"per_class_batch", c.per_class_batch},
                     {"learning_rate", c.learning_rate},
                     {"seed", c.seed},
                     {"embed_dim", c.embed_dim},
                     {"init", c.init == EncoderInit::identity ? "identity" : "random"},
                     {"init_scale", c.init_scale},
                     {"gradient_mode", to_string(c.gradient_mode)},
                     {"geometry", c.geometry}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const char* known[] = {"epochs",    "steps_per_epoch", "per_class_batch",
                                "learning_rate", "seed",        "embed_dim",
                                "init",      "init_scale",      "gradient_mode",
                                "geometry"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw Error(ErrorCode::invalid_argument, "unknown train config key '" + key + "'");
  }
  c.epochs = j.value("epochs", c.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.per_class_batch = j.value("per_class_batch", c.per_class_batch);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.init_scale = j.value("init_scale", c.init_scale);
  if (j.contains("init")) {
    const auto s = j.at("init").get<std::string>();
    if (s == "random") c.init = EncoderInit::random;
    else if (s == "identity") c.init = EncoderInit::identity;
    else throw Error(ErrorCode::invalid_argument, "init must be 'random' or 'identity'");
  }
  if (j.contains("gradient_mode")) {
    const auto s = j.at("gradient_mode").get<std::string>();
    if (s == "analytic-stop-grad") c.gradient_mode = GradientMode::analytic_stop_grad;
    else if (s == "finite-difference") c.gradient_mode = GradientMode::finite_difference;
    else throw Error(ErrorCode::invalid_argument, "unknown gradient_mode '" + s + "'");
  }
  if (j.contains("geometry")) c.geometry = j.at("geometry").get<GeometryConfig>();
}

std::vector<std::vector<Index>> balanced_batches(const std::vector<int>& labels, int per_class,
                                                 int steps, std::uint64_t seed) {
  if (per_class < 1) throw Error(ErrorCode::invalid_argument, "per-class batch count must be >= 1");
  const int classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  const ClassPartition part = partition_labels(labels, classes);
  for (int k = 1; k <= classes; ++k)
    if (part.of(k).empty())
      throw Error(ErrorCode::empty_input, "class " + std::to_string(k) + " has no samples");
  if (classes == 0) throw Error(ErrorCode::empty_input, "no labels to batch");

  Rng rng(seed);
  std::vector<std::vector<Index>> batches(static_cast<std::size_t>(std::max(steps, 0)));
  std::vector<Index> pool;
  for (auto& batch : batches) {
    batch.reserve(static_cast<std::size_t>(per_class) * classes);
    for (int k = 1; k <= classes; ++k) {
      const auto& members = part.of(k);
      const std::size_t m = static_cast<std::size_t>(per_class);
      if (members.size() >= m) {
        // partial Fisher-Yates
        pool = members;
        for (std::size_t i = 0; i < m; ++i) {
          std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
          batch.push_back(pool[i]);
        }
      } else {
        for (std::size_t i = 0; i < m; ++i) batch.push_back(members[rng.index(members.size())]);
      }
    }
  }
  return batches;
}

FrozenGeometryObjective::FrozenGeometryObjective(const Mat& batch, const std::vector<int>& labels,
                                                 const GeometryConfig& config)
    : config_(config) {
  const auto problem =
      MaskedRidgeProblem::from_labels(batch, labels, config.inner_lambda, config.inner_mu);
  coefficients_ = masked_ridge_solve(problem);
  if (config.rep_dim < 1) throw Error(ErrorCode::invalid_argument, "rep_dim must be >= 1");

  std::map<int, std::vector<Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Index>(i));
  for (auto& [label, idx] : members) {
    if (idx.size() < 2) continue;
    const Mat centered = center_columns(gather_columns(batch, idx));
    Eigen::JacobiSVD<Mat> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    Index rank = 0;
    if (sv.size() && sv(0) > 0)
      while (rank < sv.size() && sv(rank) > kRankTol * sv(0)) ++rank;
    const Index start = config.rep_drop_top ? 1 : 0;
    const Index keep = std::min(config.rep_dim, std::max<Index>(0, rank - start));
    if (keep == 0) continue;
    Mat coeff = svd.matrixV().middleCols(start, keep);
    for (Index c = 0; c < keep; ++c) coeff.col(c) /= sv(start + c);
    factors_.push_back({idx, std::move(coeff), svd.matrixU().middleCols(start, keep)});
  }

  report_ = combine_geometry_loss(se_loss(batch, coefficients_),
                                  variance_anchor_loss(batch, config.anchor_c),
                                  repulsion(batch, labels, config.rep_dim, config.rep_drop_top),
                                  config);
}

Mat FrozenGeometryObjective::class_basis(const Mat& batch, const ClassFactor& f) const {
  const Mat moved = center_columns(gather_columns(batch, f.members)) * f.coeff;
  return f.basis + moved - f.basis * (f.basis.transpose() * moved);
}

double FrozenGeometryObjective::anchor_value(const Mat& batch) const {
  return variance_anchor_loss(batch, config_.anchor_c);
}

Mat FrozenGeometryObjective::anchor_gradient(const Mat& batch) const {
  const Index p = batch.rows();
  const Index n = batch.cols();
  const double floor = config_.anchor_c / std::sqrt(static_cast<double>(p));
  Mat grad = Mat::Zero(p, n);
  for (Index j = 0; j < p; ++j) {
    const double mean = batch.row(j).mean();
    const double sd =
        std::sqrt((batch.row(j).array() - mean).square().sum() / static_cast<double>(n));
    // hinge inactive, or kink at sd = 0 where the subgradient 0 is used
    if (!(floor - sd > 0) || sd == 0.0) continue;
    grad.row(j) = -(batch.row(j).array() - mean) / (static_cast<double>(p * n) * sd);
  }
  return grad;
}

double FrozenGeometryObjective::repulsion_value(const Mat& batch) const {
  std::vector<Mat> bases;
  for (const auto& f : factors_) bases.push_back(class_basis(batch, f));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < bases.size(); ++k)
    for (std::size_t l = k + 1; l < bases.size(); ++l, ++pairs)
      sum += (bases[k].transpose() * bases[l]).squaredNorm();
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

Mat FrozenGeometryObjective::repulsion_gradient(const Mat& batch) const {
  Mat grad = Mat::Zero(batch.rows(), batch.cols());
  const std::size_t count = factors_.size();
  if (count < 2) return grad;
  const double pairs = static_cast<double>(count * (count - 1) / 2);

  std::vector<Mat> bases;
  for (const auto& f : factors_) bases.push_back(class_basis(batch, f));
  for (std::size_t k = 0; k < count; ++k) {
    Mat grad_u = Mat::Zero(batch.rows(), bases[k].cols());
    for (std::size_t l = 0; l < count; ++l)
      if (l != k) grad_u += bases[l] * (bases[l].transpose() * bases[k]);
    grad_u *= 2.0 / pairs;
    grad_u -= factors_[k].basis * (factors_[k].basis.transpose() * grad_u);
    Mat grad_centered = grad_u * factors_[k].coeff.transpose();
    grad_centered = center_columns(grad_centered);  // adjoint of centering
    const auto& members = factors_[k].members;
    for (std::size_t j = 0; j < members.size(); ++j)
      grad.col(members[j]) += grad_centered.col(static_cast<Index>(j));
  }
  return grad;
}

double FrozenGeometryObjective::value(const Mat& batch) const {
  const Index n = batch.cols();
  const Mat residual = batch * (Mat::Identity(n, n) - coefficients_);
  return config_.lambda_se * residual.squaredNorm() + config_.beta_anchor * anchor_value(batch) +
         config_.lambda_rep * repulsion_value(batch);
}

FrozenGeometryObjective::Gradient FrozenGeometryObjective::gradient(const Mat& batch) const {
  const Index n = batch.cols();
  const Mat complement = Mat::Identity(n, n) - coefficients_;
  Gradient g;
  g.se = 2.0 * (batch * complement) * complement.transpose();
  g.anchor = anchor_gradient(batch);
  g.repulsion = repulsion_gradient(batch);
  require_finite(g.se, "self-expressiveness");
  require_finite(g.anchor, "variance anchor");
  require_finite(g.repulsion, "repulsion");
  g.total = config_.lambda_se * g.se + config_.beta_anchor * g.anchor +
            config_.lambda_rep * g.repulsion;
  return g;
}

EncoderGradient objective_gradient(const LinearEncoder& encoder, const Mat& raw_batch,
                                   const std::vector<int>& labels, const GeometryConfig& geometry,
                                   GradientMode mode) {
  const Mat pre = encoder.pre_activation(raw_batch);
  const Mat z = encoder.embed(raw_batch);
  const FrozenGeometryObjective objective(z, labels, geometry);

  EncoderGradient out;
  out.report = objective.report();

  if (mode == GradientMode::analytic_stop_grad) {
    const Mat grad_v = normalization_backward(pre, z, objective.gradient(z).total);
    out.weight = grad_v * raw_batch.transpose();
    out.bias = grad_v.rowwise().sum();
  } else {
    const double h = kFiniteDifferenceStep;
    LinearEncoder probe = encoder;
    out.weight.resize(encoder.weight.rows(), encoder.weight.cols());
    out.bias.resize(encoder.bias.size());
    auto central = [&](double& param) {
      const double saved = param;
      param = saved + h;
      const double up = objective.value(probe.embed(raw_batch));
      param = saved - h;
      const double down = objective.value(probe.embed(raw_batch));
      param = saved;
      return (up - down) / (2.0 * h);
    };
    for (Index c = 0; c < probe.weight.cols(); ++c)
      for (Index r = 0; r < probe.weight.rows(); ++r) out.weight(r, c) = central(probe.weight(r, c));
    for (Index r = 0; r < probe.bias.size(); ++r) out.bias(r) = central(probe.bias(r));
  }
  require_finite(out.weight, "encoder weight");
  require_finite(out.bias, "encoder bias");
  return out;
}

LinearEncoder initial_encoder(Index input_dim, const TrainConfig& config) {
  const Index p = config.embed_dim > 0 ? config.embed_dim : input_dim;
  LinearEncoder enc;
  enc.bias = Vec::Zero(p);
  if (config.init == EncoderInit::identity) {
    enc.weight = Mat::Identity(p, input_dim);
  } else {
    Rng rng(derive_seed(config.seed, 0));
    enc.weight = rng.normal_matrix(p, input_dim) *
                 (config.init_scale / std::sqrt(static_cast<double>(input_dim)));
  }
  return enc;
}

TrainResult train_linear_encoder(const LabeledEmbeddingSet& data, const TrainConfig& config) {
  config.validate();
  TrainResult result;
  result.encoder = initial_encoder(data.dim(), config);
  const auto batches = balanced_batches(data.labels(), config.per_class_batch,
                                        config.epochs * config.steps_per_epoch,
                                        derive_seed(config.seed, 1));
  result.trace.reserve(batches.size());
  for (const auto& batch : batches) {
    const Mat raw = gather_columns(data.embeddings(), batch);
    const auto labels = gather_labels(data.labels(), batch);
    EncoderGradient grad;
    try {
      grad = objective_gradient(result.encoder, raw, labels, config.geometry, config.gradient_mode);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numerical_failure) throw;
      throw DivergenceError(std::string("training aborted: ") + e.what(), result.trace);
    }
    check_loss(grad.report, result.trace);
    result.trace.push_back(grad.report);
    result.encoder.weight -= config.learning_rate * grad.weight;
    result.encoder.bias -= config.learning_rate * grad.bias;
  }
  return result;
}

CeResult train_ce_reference(const LabeledEmbeddingSet& data, const TrainConfig& config) {
  config.validate();
  const int classes = data.class_count();
  if (classes < 2) throw Error(ErrorCode::invalid_argument, "CE reference needs >= 2 classes");

  CeResult result;
  LinearEncoder enc = initial_encoder(data.dim(), config);
  const Index p = enc.output_dim();
  Rng head_rng(derive_seed(config.seed, 2));
  Mat head = head_rng.normal_matrix(classes, p) * 0.01;
  Vec head_bias = Vec::Zero(classes);

  const auto batches = balanced_batches(data.labels(), config.per_class_batch,
                                        config.epochs * config.steps_per_epoch,
                                        derive_seed(config.seed, 1));
  for (const auto& batch : batches) {
    const Mat raw = gather_columns(data.embeddings(), batch);
    const Index n = raw.cols();
    const Mat pre = enc.pre_activation(raw);
    const Mat z = enc.embed(raw);
    Mat logits = head * z;
    logits.colwise() += head_bias;

    Mat grad_logits(classes, n);
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double top = logits.col(i).maxCoeff();
      const Vec e = (logits.col(i).array() - top).exp().matrix();
      const double sum = e.sum();
      const int y = data.labels()[batch[i]] - 1;
      loss -= logits(y, i) - top - std::log(sum);
      grad_logits.col(i) = e / sum;
      grad_logits(y, i) -= 1.0;
    }
    loss /= static_cast<double>(n);
    grad_logits /= static_cast<double>(n);
    if (!std::isfinite(loss) || loss > kDivergenceLimit)
      throw Error(ErrorCode::divergence,
                  "CE training diverged at step " + std::to_string(result.loss_trace.size()));
    result.loss_trace.push_back(loss);

    const Mat grad_head = grad_logits * z.transpose();
    const Vec grad_head_bias = grad_logits.rowwise().sum();
    const Mat grad_v = normalization_backward(pre, z, head.transpose() * grad_logits);
    require_finite(grad_v, "cross-entropy");

    head -= config.learning_rate * grad_head;
    head_bias -= config.learning_rate * grad_head_bias;
    enc.weight -= config.learning_rate * grad_v * raw.transpose();
    enc.bias -= config.learning_rate * grad_v.rowwise().sum();
  }

  Mat logits = head * enc.embed(data.embeddings());
  logits.colwise() += head_bias;
  int correct = 0;
  for (Index i = 0; i < logits.cols(); ++i) {
    Index arg = 0;
    logits.col(i).maxCoeff(&arg);
    if (static_cast<int>(arg) + 1 == data.labels()[i]) ++correct;
  }
  result.head_train_accuracy = static_cast<double>(correct) / static_cast<double>(logits.cols());
  result.encoder = std::move(enc);
  return result;
}

nlohmann::json checkpoint_json(const LinearEncoder& encoder, const TrainConfig& config,
                               double final_loss, const std::string& kind) {
  nlohmann::json weight = nlohmann::json::array();
  for (Index r = 0; r < encoder.weight.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < encoder.weight.cols(); ++c) row.push_back(encoder.weight(r, c));
    weight.push_back(std::move(row));
  }
  nlohmann::json bias = nlohmann::json::array();
  for (Index r = 0; r < encoder.bias.size(); ++r) bias.push_back(encoder.bias(r));
  return {{"kind", kind}, {"weight", weight}, {"bias", bias}, {"config", config},
          {"final_loss", final_loss}};
}

LinearEncoder encoder_from_checkpoint(const nlohmann::json& checkpoint) {
  try {
    const auto& w = checkpoint.at("weight");
    const auto& b = checkpoint.at("bias");
    const Index rows = static_cast<Index>(w.size());
    const Index cols = rows ? static_cast<Index>(w.at(0).size()) : 0;
    if (rows == 0 || cols == 0 || static_cast<Index>(b.size()) != rows)
      throw Error(ErrorCode::parse, "checkpoint weight/bias shapes are inconsistent");
    LinearEncoder enc;
    enc.weight.resize(rows, cols);
    enc.bias.resize(rows);
    for (Index r = 0; r < rows; ++r) {
      if (static_cast<Index>(w.at(r).size()) != cols)
        throw Error(ErrorCode::parse, "checkpoint weight rows differ in length");
      for (Index c = 0; c < cols; ++c) enc.weight(r, c) = w.at(r).at(c).get<double>();
      enc.bias(r) = b.at(r).get<double>();
    }
    return enc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << checkpoint.dump(2) << '\n';
}

nlohmann::json load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed checkpoint: ") + e.what());
  }
}

std::string format_loss_trace(const std::vector<GeometryLossReport>& trace) {
  std::string out = "step,L_SE,L_anch,L_rep,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    out += std::to_string(i) + ',' + format_number(r.se_loss) + ',' + format_number(r.anchor_loss) +
           ',' + format_number(r.repulsion_loss) + ',' + format_number(r.total) + '\n';
  }
  return out;
}

}  // namespace srcgeo

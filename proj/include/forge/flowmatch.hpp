#pragma once

#include "forge/geometry.hpp"
#include "forge/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace forge::flow {

using Matrix = Eigen::MatrixXd;  // one sample per row
using Vector = Eigen::VectorXd;

struct FlowBatch {
  Matrix x0;
  Matrix x1;
  Vector t;
  Matrix cond;  // B x C, C may be 0

  Eigen::Index size() const { return x0.rows(); }
  void validate() const {
    if (x0.rows() != x1.rows() || x0.cols() != x1.cols() || t.size() != x0.rows() || cond.rows() != x0.rows())
      throw Error("flow batch fields disagree on batch size or dimension");
    if ((t.array() < 0.0).any() || (t.array() > 1.0).any()) throw Error("flow batch time outside [0, 1]");
  }
};

inline Matrix interpolate_path(const Matrix& x0, const Matrix& x1, const Vector& t) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols() || t.size() != x0.rows())
    throw Error("interpolate_path: dimension mismatch");
  return (1.0 - t.array()).matrix().asDiagonal() * x0 + t.asDiagonal() * x1;
}

inline Matrix interpolate_path(const Matrix& x0, const Matrix& x1, double t) {
  return interpolate_path(x0, x1, Vector::Constant(x0.rows(), t));
}

inline Matrix target_velocity(const Matrix& x0, const Matrix& x1) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) throw Error("target_velocity: dimension mismatch");
  return x1 - x0;
}

/// Mean squared velocity error. `field(x, t, cond)` returns one velocity per row.
template <typename Field>
double fm_loss(const Field& field, const FlowBatch& batch) {
  batch.validate();
  const Matrix v = field(interpolate_path(batch.x0, batch.x1, batch.t), batch.t, batch.cond);
  if (!v.allFinite()) throw Error("fm_loss: model produced non-finite velocity");
  return (v - target_velocity(batch.x0, batch.x1)).rowwise().squaredNorm().mean();
}

template <typename Field>
Matrix euler_sample(const Field& field, const Matrix& x0, const Matrix& cond, int steps) {
  if (steps < 1) throw Error("euler_sample needs at least one step");
  Matrix x = x0;
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    x += dt * field(x, Vector::Constant(x.rows(), k * dt), cond);
    if (!x.allFinite()) throw Error("euler_sample: state became non-finite at step " + std::to_string(k));
  }
  return x;
}

template <typename Field>
Matrix euler_sample(const Field& field, const Matrix& x0, int steps) {
  return euler_sample(field, x0, Matrix(x0.rows(), 0), steps);
}

/// KL(N(mean, exp(logvar)) || N(0, I)) for a diagonal Gaussian.
inline double kl_diag_gaussian(const Vector& mean, const Vector& logvar) {
  if (mean.size() != logvar.size()) throw Error("kl_diag_gaussian: dimension mismatch");
  return 0.5 * (mean.array().square() + logvar.array().exp() - logvar.array() - 1.0).sum();
}

struct GaussianLatentStats {
  Vector mean;
  Vector logvar;
};

inline double kl_diag_gaussian(const GaussianLatentStats& s) { return kl_diag_gaussian(s.mean, s.logvar); }

inline double vae_loss(const Vector& pred_sdf, const Vector& gt_sdf, const GaussianLatentStats& stats,
                       double gamma = 1e-3) {
  if (pred_sdf.size() != gt_sdf.size() || pred_sdf.size() == 0) throw Error("vae_loss: length mismatch");
  if (gamma < 0.0) throw Error("vae_loss: gamma must be non-negative");
  return (pred_sdf - gt_sdf).squaredNorm() / static_cast<double>(pred_sdf.size()) + gamma * kl_diag_gaussian(stats);
}

enum class Architecture { kAffine, kTanhMlp };

/// Velocity u(x, t, c) over the input z = [x, t, c]. Affine: W z + b. Tanh
/// MLP: W2 tanh(W1 z + b1) + b2. Parameters live in one flat vector.
class VelocityModel {
 public:
  VelocityModel(Architecture arch, int dim, int cond_dim = 0, int hidden = 32)
      : arch_(arch), dim_(dim), cond_dim_(cond_dim), hidden_(arch == Architecture::kAffine ? 0 : hidden) {
    if (dim < 1 || cond_dim < 0 || (arch == Architecture::kTanhMlp && hidden < 1))
      throw Error("velocity model: invalid dimensions");
    params_ = Vector::Zero(parameter_count());
  }

  Architecture architecture() const { return arch_; }
  int dim() const { return dim_; }
  int input_dim() const { return dim_ + 1 + cond_dim_; }
  Eigen::Index parameter_count() const {
    const Eigen::Index in = input_dim();
    if (arch_ == Architecture::kAffine) return dim_ * in + dim_;
    return hidden_ * in + hidden_ + dim_ * hidden_ + dim_;
  }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }

  /// Gaussian weights scaled by fan-in, zero biases.
  void randomize(const RngStream& rng) {
    Draws d = rng.at(0);
    const int in = input_dim();
    if (arch_ == Architecture::kAffine) {
      for (Eigen::Index i = 0; i < dim_ * in; ++i) params_[i] = d.normal() / std::sqrt(in);
      params_.tail(dim_).setZero();
      return;
    }
    Eigen::Index p = 0;
    for (int i = 0; i < hidden_ * in; ++i) params_[p++] = d.normal() / std::sqrt(in);
    for (int i = 0; i < hidden_; ++i) params_[p++] = 0.0;
    for (int i = 0; i < dim_ * hidden_; ++i) params_[p++] = d.normal() / std::sqrt(hidden_);
    for (int i = 0; i < dim_; ++i) params_[p++] = 0.0;
  }

  Matrix inputs(const Matrix& x, const Vector& t, const Matrix& cond) const {
    if (x.cols() != dim_ || t.size() != x.rows() || cond.rows() != x.rows() || cond.cols() != cond_dim_)
      throw Error("velocity model: input dimension mismatch");
    Matrix z(x.rows(), input_dim());
    z << x, t, cond;
    return z;
  }

  Matrix operator()(const Matrix& x, const Vector& t, const Matrix& cond) const {
    const Matrix z = inputs(x, t, cond);
    if (arch_ == Architecture::kAffine) {
      const auto [w, b] = affine_view();
      return (z * w.transpose()).rowwise() + b.transpose();
    }
    const auto [w1, b1, w2, b2] = mlp_view();
    const Matrix h = ((z * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
    return (h * w2.transpose()).rowwise() + b2.transpose();
  }

  /// fm_loss and its gradient with respect to the parameters.
  double loss_and_gradient(const FlowBatch& batch, Vector& grad) const {
    batch.validate();
    const auto n = static_cast<double>(batch.size());
    const Matrix z = inputs(interpolate_path(batch.x0, batch.x1, batch.t), batch.t, batch.cond);
    const Matrix u = target_velocity(batch.x0, batch.x1);
    grad = Vector::Zero(parameter_count());
    if (arch_ == Architecture::kAffine) {
      const auto [w, b] = affine_view();
      const Matrix r = (z * w.transpose()).rowwise() + b.transpose() - u;
      const Matrix g = 2.0 / n * r;
      Eigen::Map<Matrix> gw(grad.data(), dim_, input_dim());
      gw = g.transpose() * z;
      grad.tail(dim_) = g.colwise().sum().transpose();
      return r.rowwise().squaredNorm().mean();
    }
    const auto [w1, b1, w2, b2] = mlp_view();
    const Matrix h = ((z * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
    const Matrix r = (h * w2.transpose()).rowwise() + b2.transpose() - u;
    const Matrix g = 2.0 / n * r;
    const Matrix dh = g * w2;
    const Matrix da = (dh.array() * (1.0 - h.array().square())).matrix();
    Eigen::Index p = 0;
    Eigen::Map<Matrix>(grad.data() + p, hidden_, input_dim()) = da.transpose() * z;
    p += hidden_ * input_dim();
    grad.segment(p, hidden_) = da.colwise().sum().transpose();
    p += hidden_;
    Eigen::Map<Matrix>(grad.data() + p, dim_, hidden_) = g.transpose() * h;
    p += dim_ * hidden_;
    grad.segment(p, dim_) = g.colwise().sum().transpose();
    return r.rowwise().squaredNorm().mean();
  }

 private:
  using ConstMap = Eigen::Map<const Matrix>;
  using ConstVecMap = Eigen::Map<const Vector>;

  std::pair<ConstMap, ConstVecMap> affine_view() const {
    return {ConstMap(params_.data(), dim_, input_dim()), ConstVecMap(params_.data() + dim_ * input_dim(), dim_)};
  }

  std::tuple<ConstMap, ConstVecMap, ConstMap, ConstVecMap> mlp_view() const {
    const double* p = params_.data();
    const Eigen::Index in = input_dim();
    return {ConstMap(p, hidden_, in), ConstVecMap(p + hidden_ * in, hidden_),
            ConstMap(p + hidden_ * in + hidden_, dim_, hidden_),
            ConstVecMap(p + hidden_ * in + hidden_ + dim_ * hidden_, dim_)};
  }

  Architecture arch_;
  int dim_;
  int cond_dim_;
  int hidden_;
  Vector params_;
};

/// Largest relative disagreement between analytic and central-difference
/// gradients of fm_loss on one batch.
inline double gradient_check(const VelocityModel& model, const FlowBatch& batch, double step = 1e-5) {
  Vector analytic;
  model.loss_and_gradient(batch, analytic);
  VelocityModel probe = model;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double base = model.parameters()[i];
    const double h = step * std::max(1.0, std::abs(base));
    probe.parameters()[i] = base + h;
    const double up = fm_loss(probe, batch);
    probe.parameters()[i] = base - h;
    const double down = fm_loss(probe, batch);
    probe.parameters()[i] = base;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

enum class Coupling { kIndependent, kOptimalTransport };

/// Pairs N(mean0, diag(std0^2)) noise with N(mean1, diag(std1^2)) data. The
/// optimal-transport coupling uses the closed-form map between the two
/// Gaussians; the independent coupling draws x1 separately.
struct GaussianPairSampler {
  Vector mean0, std0, mean1, std1;
  Coupling coupling = Coupling::kOptimalTransport;

  static GaussianPairSampler standard_to(const Vector& target_mean, Coupling coupling = Coupling::kOptimalTransport) {
    const auto d = target_mean.size();
    return {Vector::Zero(d), Vector::Ones(d), target_mean, Vector::Ones(d), coupling};
  }

  int dim() const { return static_cast<int>(mean0.size()); }

  /// Item b of the batch uses counter first_item + b.
  FlowBatch sample(Eigen::Index batch, const RngStream& rng, std::uint64_t first_item) const {
    const int d = dim();
    FlowBatch out{Matrix(batch, d), Matrix(batch, d), Vector(batch), Matrix(batch, 0)};
    for (Eigen::Index b = 0; b < batch; ++b) {
      Draws draw = rng.at(first_item + static_cast<std::uint64_t>(b));
      out.t[b] = draw.uniform();
      for (int k = 0; k < d; ++k) {
        const double e0 = draw.normal();
        const double e1 = coupling == Coupling::kOptimalTransport ? e0 : draw.normal();
        out.x0(b, k) = mean0[k] + std0[k] * e0;
        out.x1(b, k) = mean1[k] + std1[k] * e1;
      }
    }
    return out;
  }

  Matrix noise(Eigen::Index n, const RngStream& rng, std::uint64_t first_item) const {
    return sample(n, rng, first_item).x0;
  }
};

struct TrainConfig {
  double lr = 0.05;
  int steps = 500;
  Eigen::Index batch = 256;
  Eigen::Index eval_batch = 4096;
  std::uint64_t seed = 0;
  double gradient_tolerance = 1e-4;
};

struct TrainResult {
  VelocityModel model;
  std::vector<double> trace;  // loss on a fixed evaluation batch, before step 0 and after each step
  double gradient_check_error = 0.0;
};

struct TrainingDiverged : Error {
  int step;
  TrainingDiverged(int s, const std::string& what) : Error(what), step(s) {}
};

/// Plain gradient descent on fm_loss with fresh minibatches every step.
inline TrainResult train_toy(VelocityModel model, const GaussianPairSampler& data, const TrainConfig& config) {
  if (config.steps < 0 || config.batch < 1 || config.eval_batch < 1) throw Error("train_toy: invalid config");
  const RngStream train_rng(config.seed, StreamId::kFlow);
  const RngStream eval_rng(config.seed ^ 0x5eed5eed5eed5eedull, StreamId::kFlow);
  const FlowBatch eval = data.sample(config.eval_batch, eval_rng, 0);

  TrainResult result{model, {}, 0.0};
  result.gradient_check_error = gradient_check(model, data.sample(config.batch, train_rng, 0));
  if (!(result.gradient_check_error < config.gradient_tolerance))
    throw Error("train_toy: analytic gradient disagrees with finite differences (relative error " +
                std::to_string(result.gradient_check_error) + ")");

  result.trace.reserve(static_cast<std::size_t>(config.steps) + 1);
  result.trace.push_back(fm_loss(result.model, eval));
  Vector grad;
  for (int step = 0; step < config.steps; ++step) {
    const FlowBatch batch =
        data.sample(config.batch, train_rng, static_cast<std::uint64_t>(step + 1) * static_cast<std::uint64_t>(config.batch));
    const double loss = result.model.loss_and_gradient(batch, grad);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw TrainingDiverged(step, "training diverged at step " + std::to_string(step));
    result.model.parameters() -= config.lr * grad;
    double eval_loss = 0.0;
    try {
      eval_loss = fm_loss(result.model, eval);
    } catch (const Error&) {
      eval_loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(eval_loss)) throw TrainingDiverged(step, "training diverged at step " + std::to_string(step));
    result.trace.push_back(eval_loss);
  }
  return result;
}

}  // namespace forge::flow

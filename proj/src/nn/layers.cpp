#include "weldad/nn/layers.hpp"

#include <cmath>
#include <string>

#include "weldad/error.hpp"

namespace weldad::nn {

namespace {

void require_cache(bool has_cache, std::string_view layer) {
  if (!has_cache) {
    throw StateError(std::string(layer) + ": backward called before forward");
  }
}

void require_batch_size(const Batch& a, const Batch& b,
                        std::string_view layer) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(layer) + ": batch size mismatch in backward");
  }
}

void uniform_fill(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = static_cast<double>(
          static_cast<float>(rng.uniform(-bound, bound)));
    }
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kBatchNorm1d: return "BatchNorm1D";
    case LayerKind::kConv1d: return "Conv1D";
    case LayerKind::kConvTranspose1d: return "ConvTranspose1D";
    case LayerKind::kLinear: return "Linear";
    case LayerKind::kDropout: return "Dropout";
    case LayerKind::kLeakyReLU: return "LeakyReLU";
    case LayerKind::kPReLU: return "PReLU";
    case LayerKind::kReLU: return "ReLU";
  }
  return "?";
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int in_channels, int out_channels, int kernel_size,
               std::string name)
    : weight(name + ".weight", out_channels,
             static_cast<Eigen::Index>(kernel_size) * in_channels),
      bias(name + ".bias", out_channels, 1),
      in_(in_channels),
      out_(out_channels),
      k_(kernel_size) {
  if (in_channels <= 0 || out_channels <= 0 || kernel_size <= 0) {
    throw ConfigError("Conv1d: channels and kernel size must be positive");
  }
}

void Conv1d::reset_parameters(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * k_));
  uniform_fill(weight.value, bound, rng);
  uniform_fill(bias.value, bound, rng);
}

Matrix Conv1d::stack_taps(const Matrix& x) const {
  if (x.rows() != in_) {
    throw ShapeError("Conv1d: expected " + std::to_string(in_) +
                     " input channels, got " + std::to_string(x.rows()));
  }
  if (x.cols() < k_) {
    throw ShapeError("Conv1d: input length " + std::to_string(x.cols()) +
                     " shorter than kernel " + std::to_string(k_));
  }
  check_finite(x, "Conv1d input");
  const Eigen::Index t_out = x.cols() - k_ + 1;
  Matrix stacked(static_cast<Eigen::Index>(k_) * in_, t_out);
  for (int k = 0; k < k_; ++k) {
    stacked.middleRows(static_cast<Eigen::Index>(k) * in_, in_) =
        x.middleCols(k, t_out);
  }
  return stacked;
}

Matrix Conv1d::forward(const Matrix& x) const {
  Matrix y = weight.value * stack_taps(x);
  y.colwise() += bias.value.col(0);
  return y;
}

Batch Conv1d::forward(const Batch& x) {
  Batch y;
  y.reserve(x.size());
  stacked_cache_.clear();
  stacked_cache_.reserve(x.size());
  for (const Matrix& xi : x) {
    Matrix stacked = stack_taps(xi);
    Matrix yi = weight.value * stacked;
    yi.colwise() += bias.value.col(0);
    y.push_back(std::move(yi));
    stacked_cache_.push_back(std::move(stacked));
  }
  has_cache_ = true;
  return y;
}

Batch Conv1d::backward(const Batch& grad_out) {
  require_cache(has_cache_, "Conv1d");
  require_batch_size(grad_out, stacked_cache_, "Conv1d");
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const Matrix& g = grad_out[b];
    const Matrix& stacked = stacked_cache_[b];
    if (g.rows() != out_ || g.cols() != stacked.cols()) {
      throw ShapeError("Conv1d: gradient shape mismatch");
    }
    weight.grad.noalias() += g * stacked.transpose();
    bias.grad.col(0) += g.rowwise().sum();
    const Matrix d_stacked = weight.value.transpose() * g;
    const Eigen::Index t_out = g.cols();
    Matrix dx = Matrix::Zero(in_, t_out + k_ - 1);
    for (int k = 0; k < k_; ++k) {
      dx.middleCols(k, t_out) +=
          d_stacked.middleRows(static_cast<Eigen::Index>(k) * in_, in_);
    }
    grad_in.push_back(std::move(dx));
  }
  stacked_cache_.clear();
  has_cache_ = false;
  return grad_in;
}

void Conv1d::forward_frame(const Vector& stacked, Vector& out) const {
  out.noalias() = weight.value * stacked;
  out += bias.value.col(0);
}

LayerSpec Conv1d::spec() const {
  return {LayerKind::kConv1d, in_, out_, k_, 1, 0.0, 0.0};
}

// ------------------------------------------------------- ConvTranspose1d

ConvTranspose1d::ConvTranspose1d(int in_channels, int out_channels,
                                 int kernel_size, std::string name)
    : weight(name + ".weight", out_channels,
             static_cast<Eigen::Index>(kernel_size) * in_channels),
      bias(name + ".bias", out_channels, 1),
      in_(in_channels),
      out_(out_channels),
      k_(kernel_size) {
  if (in_channels <= 0 || out_channels <= 0 || kernel_size <= 0) {
    throw ConfigError(
        "ConvTranspose1d: channels and kernel size must be positive");
  }
}

void ConvTranspose1d::reset_parameters(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(out_ * k_));
  uniform_fill(weight.value, bound, rng);
  uniform_fill(bias.value, bound, rng);
}

Matrix ConvTranspose1d::forward(const Matrix& x) const {
  if (x.rows() != in_) {
    throw ShapeError("ConvTranspose1d: expected " + std::to_string(in_) +
                     " input channels, got " + std::to_string(x.rows()));
  }
  if (x.cols() < 1) throw ShapeError("ConvTranspose1d: empty input");
  check_finite(x, "ConvTranspose1d input");
  const Eigen::Index t_in = x.cols();
  Matrix y(out_, t_in + k_ - 1);
  y.colwise() = bias.value.col(0);
  for (int k = 0; k < k_; ++k) {
    y.middleCols(k, t_in).noalias() +=
        weight.value.middleCols(static_cast<Eigen::Index>(k) * in_, in_) * x;
  }
  return y;
}

Batch ConvTranspose1d::forward(const Batch& x) {
  Batch y;
  y.reserve(x.size());
  for (const Matrix& xi : x) y.push_back(forward(xi));
  input_cache_ = x;
  has_cache_ = true;
  return y;
}

Batch ConvTranspose1d::backward(const Batch& grad_out) {
  require_cache(has_cache_, "ConvTranspose1d");
  require_batch_size(grad_out, input_cache_, "ConvTranspose1d");
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const Matrix& g = grad_out[b];
    const Matrix& x = input_cache_[b];
    const Eigen::Index t_in = x.cols();
    if (g.rows() != out_ || g.cols() != t_in + k_ - 1) {
      throw ShapeError("ConvTranspose1d: gradient shape mismatch");
    }
    bias.grad.col(0) += g.rowwise().sum();
    Matrix dx = Matrix::Zero(in_, t_in);
    for (int k = 0; k < k_; ++k) {
      auto w_k = weight.value.middleCols(static_cast<Eigen::Index>(k) * in_, in_);
      weight.grad.middleCols(static_cast<Eigen::Index>(k) * in_, in_).noalias() +=
          g.middleCols(k, t_in) * x.transpose();
      dx.noalias() += w_k.transpose() * g.middleCols(k, t_in);
    }
    grad_in.push_back(std::move(dx));
  }
  input_cache_.clear();
  has_cache_ = false;
  return grad_in;
}

void ConvTranspose1d::forward_frame(const Vector& stacked, Vector& out) const {
  out.noalias() = weight.value * stacked;
  out += bias.value.col(0);
}

LayerSpec ConvTranspose1d::spec() const {
  return {LayerKind::kConvTranspose1d, in_, out_, k_, 1, 0.0, 0.0};
}

// ----------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(int channels, bool affine, std::string name,
                         double eps, double momentum)
    : gamma(name + ".weight", channels, 1),
      beta(name + ".bias", channels, 1),
      running_mean(name + ".running_mean", channels, 1, false),
      running_var(name + ".running_var", channels, 1, false),
      channels_(channels),
      affine_(affine),
      eps_(eps),
      momentum_(momentum) {
  if (channels <= 0) throw ConfigError("BatchNorm1d: channels must be positive");
  gamma.value.setOnes();
  beta.value.setZero();
  running_mean.value.setZero();
  running_var.value.setOnes();
}

std::vector<Parameter*> BatchNorm1d::parameters() {
  if (affine_) return {&gamma, &beta, &running_mean, &running_var};
  return {&running_mean, &running_var};
}

std::vector<const Parameter*> BatchNorm1d::parameters() const {
  if (affine_) return {&gamma, &beta, &running_mean, &running_var};
  return {&running_mean, &running_var};
}

Batch BatchNorm1d::forward(const Batch& x, Mode mode) {
  if (x.empty()) throw ShapeError("BatchNorm1d: empty batch");
  Eigen::Index population = 0;
  for (const Matrix& xi : x) {
    if (xi.rows() != channels_) {
      throw ShapeError("BatchNorm1d: expected " + std::to_string(channels_) +
                       " channels, got " + std::to_string(xi.rows()));
    }
    check_finite(xi, "BatchNorm1d input");
    population += xi.cols();
  }

  Vector mean(channels_);
  Vector inv_std(channels_);
  if (mode == Mode::kTrain) {
    if (population <= 1) {
      throw ShapeError(
          "BatchNorm1d: train mode needs more than one value per channel");
    }
    const double n = static_cast<double>(population);
    mean.setZero();
    for (const Matrix& xi : x) mean += xi.rowwise().sum();
    mean /= n;
    Vector var = Vector::Zero(channels_);
    for (const Matrix& xi : x) {
      var += (xi.colwise() - mean).array().square().matrix().rowwise().sum();
    }
    var /= n;
    inv_std = (var.array() + eps_).rsqrt().matrix();
    running_mean.value.col(0) =
        (1.0 - momentum_) * running_mean.value.col(0) + momentum_ * mean;
    running_var.value.col(0) = (1.0 - momentum_) * running_var.value.col(0) +
                               momentum_ * var * (n / (n - 1.0));
  } else {
    mean = running_mean.value.col(0);
    inv_std = (running_var.value.col(0).array() + eps_).rsqrt().matrix();
  }

  Batch y;
  y.reserve(x.size());
  xhat_cache_.clear();
  xhat_cache_.reserve(x.size());
  for (const Matrix& xi : x) {
    Matrix xhat = (xi.colwise() - mean).array().colwise() * inv_std.array();
    if (affine_) {
      Matrix yi = (xhat.array().colwise() * gamma.value.col(0).array())
                      .colwise() +
                  beta.value.col(0).array();
      y.push_back(std::move(yi));
    } else {
      y.push_back(xhat);
    }
    xhat_cache_.push_back(std::move(xhat));
  }
  inv_std_cache_ = inv_std;
  cache_mode_ = mode;
  has_cache_ = true;
  return y;
}

Batch BatchNorm1d::backward(const Batch& grad_out) {
  require_cache(has_cache_, "BatchNorm1d");
  require_batch_size(grad_out, xhat_cache_, "BatchNorm1d");
  Eigen::Index population = 0;
  for (const Matrix& g : grad_out) population += g.cols();
  const double n = static_cast<double>(population);

  Vector sum_g = Vector::Zero(channels_);
  Vector sum_g_xhat = Vector::Zero(channels_);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    sum_g += grad_out[b].rowwise().sum();
    sum_g_xhat +=
        (grad_out[b].array() * xhat_cache_[b].array()).matrix().rowwise().sum();
  }
  if (affine_) {
    gamma.grad.col(0) += sum_g_xhat;
    beta.grad.col(0) += sum_g;
  }
  const Vector g_scale =
      affine_ ? Vector(gamma.value.col(0)) : Vector::Ones(channels_);

  Batch grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const Matrix& g = grad_out[b];
    if (cache_mode_ == Mode::kTrain) {
      // dx = inv_std/N * (N dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
      const Vector sum_dxhat = (g_scale.array() * sum_g.array()).matrix();
      const Vector sum_dxhat_xhat =
          (g_scale.array() * sum_g_xhat.array()).matrix();
      Matrix dx = (g.array().colwise() * g_scale.array()) * n;
      dx.colwise() -= sum_dxhat;
      dx -= (xhat_cache_[b].array().colwise() * sum_dxhat_xhat.array())
                .matrix();
      dx = (dx.array().colwise() * (inv_std_cache_.array() / n)).matrix();
      grad_in.push_back(std::move(dx));
    } else {
      Matrix dx =
          g.array().colwise() * (g_scale.array() * inv_std_cache_.array());
      grad_in.push_back(std::move(dx));
    }
  }
  xhat_cache_.clear();
  has_cache_ = false;
  return grad_in;
}

void BatchNorm1d::eval_frame(Vector& x) const {
  const auto inv_std = (running_var.value.col(0).array() + eps_).rsqrt();
  x = ((x - running_mean.value.col(0)).array() * inv_std).matrix();
  if (affine_) {
    x = (x.array() * gamma.value.col(0).array() + beta.value.col(0).array())
            .matrix();
  }
}

LayerSpec BatchNorm1d::spec() const {
  return {LayerKind::kBatchNorm1d, channels_, channels_, 0, 0, 0.0, 0.0};
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, std::string name)
    : weight(name + ".weight", out_features, in_features),
      bias(name + ".bias", out_features, 1),
      in_(in_features),
      out_(out_features) {
  if (in_features <= 0 || out_features <= 0) {
    throw ConfigError("Linear: dimensions must be positive");
  }
}

void Linear::reset_parameters(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  uniform_fill(weight.value, bound, rng);
  uniform_fill(bias.value, bound, rng);
}

Matrix Linear::forward_eval(const Matrix& x) const {
  if (x.rows() != in_) {
    throw ShapeError("Linear: expected " + std::to_string(in_) +
                     " input features, got " + std::to_string(x.rows()));
  }
  check_finite(x, "Linear input");
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Linear::forward(const Matrix& x) {
  Matrix y = forward_eval(x);
  input_cache_ = x;
  has_cache_ = true;
  return y;
}

Matrix Linear::backward(const Matrix& grad_out) {
  require_cache(has_cache_, "Linear");
  if (grad_out.rows() != out_ || grad_out.cols() != input_cache_.cols()) {
    throw ShapeError("Linear: gradient shape mismatch");
  }
  weight.grad.noalias() += grad_out * input_cache_.transpose();
  bias.grad.col(0) += grad_out.rowwise().sum();
  Matrix dx = weight.value.transpose() * grad_out;
  has_cache_ = false;
  input_cache_.resize(0, 0);
  return dx;
}

LayerSpec Linear::spec() const {
  return {LayerKind::kLinear, in_, out_, 0, 0, 0.0, 0.0};
}

// --------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("Dropout: p must lie in [0, 1), got " + std::to_string(p));
  }
}

Matrix Dropout::forward(const Matrix& x, Mode mode, Rng& rng) {
  if (mode == Mode::kEval || p_ == 0.0) {
    mask_cache_ = Matrix::Ones(x.rows(), x.cols());
    has_cache_ = true;
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - p_);
  mask_cache_.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      mask_cache_(i, j) = rng.bernoulli(p_) ? 0.0 : keep_scale;
    }
  }
  has_cache_ = true;
  return (x.array() * mask_cache_.array()).matrix();
}

Matrix Dropout::backward(const Matrix& grad_out) {
  require_cache(has_cache_, "Dropout");
  if (grad_out.rows() != mask_cache_.rows() ||
      grad_out.cols() != mask_cache_.cols()) {
    throw ShapeError("Dropout: gradient shape mismatch");
  }
  has_cache_ = false;
  return (grad_out.array() * mask_cache_.array()).matrix();
}

LayerSpec Dropout::spec() const {
  return {LayerKind::kDropout, 0, 0, 0, 0, p_, 0.0};
}

// ----------------------------------------------------------- activations

Batch LeakyReLU::forward(const Batch& x) {
  Batch y;
  y.reserve(x.size());
  for (const Matrix& xi : x) {
    y.push_back(xi.unaryExpr([s = slope_](double v) { return leaky_relu(v, s); }));
  }
  input_cache_ = x;
  has_cache_ = true;
  return y;
}

Batch LeakyReLU::backward(const Batch& grad_out) {
  require_cache(has_cache_, "LeakyReLU");
  require_batch_size(grad_out, input_cache_, "LeakyReLU");
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const Matrix& x = input_cache_[b];
    Matrix d = grad_out[b];
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(x.data()[i] > 0.0)) d.data()[i] *= slope_;
    }
    grad_in.push_back(std::move(d));
  }
  input_cache_.clear();
  has_cache_ = false;
  return grad_in;
}

Matrix LeakyReLU::forward(const Matrix& x) { return forward(Batch{x}).front(); }

Matrix LeakyReLU::backward(const Matrix& grad_out) {
  return backward(Batch{grad_out}).front();
}

void LeakyReLU::apply_inplace(Vector& x) const {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = leaky_relu(x[i], slope_);
}

LayerSpec LeakyReLU::spec() const {
  return {LayerKind::kLeakyReLU, 0, 0, 0, 0, 0.0, slope_};
}

Matrix ReLU::forward_eval(const Matrix& x) const {
  return x.unaryExpr([](double v) { return relu(v); });
}

Matrix ReLU::forward(const Matrix& x) {
  input_cache_ = x;
  has_cache_ = true;
  return forward_eval(x);
}

Matrix ReLU::backward(const Matrix& grad_out) {
  require_cache(has_cache_, "ReLU");
  if (grad_out.rows() != input_cache_.rows() ||
      grad_out.cols() != input_cache_.cols()) {
    throw ShapeError("ReLU: gradient shape mismatch");
  }
  Matrix d = grad_out;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(input_cache_.data()[i] > 0.0)) d.data()[i] = 0.0;
  }
  has_cache_ = false;
  return d;
}

LayerSpec ReLU::spec() const { return {LayerKind::kReLU, 0, 0, 0, 0, 0.0, 0.0}; }

PReLU::PReLU(std::string name, double init) : slope(name + ".weight", 1, 1) {
  slope.value(0, 0) = init;
}

Batch PReLU::forward(const Batch& x) {
  const double a = this->a();
  Batch y;
  y.reserve(x.size());
  for (const Matrix& xi : x) {
    y.push_back(xi.unaryExpr([a](double v) { return prelu(v, a); }));
  }
  input_cache_ = x;
  has_cache_ = true;
  return y;
}

Batch PReLU::backward(const Batch& grad_out) {
  require_cache(has_cache_, "PReLU");
  require_batch_size(grad_out, input_cache_, "PReLU");
  const double a = this->a();
  double da = 0.0;
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const Matrix& x = input_cache_[b];
    Matrix d = grad_out[b];
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double xv = x.data()[i];
      if (!(xv > 0.0)) {
        da += d.data()[i] * xv;
        d.data()[i] *= a;
      }
    }
    grad_in.push_back(std::move(d));
  }
  slope.grad(0, 0) += da;
  input_cache_.clear();
  has_cache_ = false;
  return grad_in;
}

void PReLU::apply_inplace(Vector& x) const {
  const double a = this->a();
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = prelu(x[i], a);
}

LayerSpec PReLU::spec() const {
  return {LayerKind::kPReLU, 0, 0, 0, 0, 0.0, a()};
}

// ------------------------------------------------------------------- MSE

double mse(const Matrix& pred, const Matrix& target) {
  return mse(Batch{pred}, Batch{target});
}

double mse(const Batch& pred, const Batch& target) {
  if (pred.size() != target.size()) throw ShapeError("mse: batch size mismatch");
  double sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t b = 0; b < pred.size(); ++b) {
    if (pred[b].rows() != target[b].rows() || pred[b].cols() != target[b].cols()) {
      throw ShapeError("mse: shape mismatch");
    }
    sum += (pred[b] - target[b]).squaredNorm();
    count += pred[b].size();
  }
  if (count == 0) throw ShapeError("mse: empty input");
  return sum / static_cast<double>(count);
}

Batch mse_grad(const Batch& pred, const Batch& target) {
  if (pred.size() != target.size()) throw ShapeError("mse: batch size mismatch");
  Eigen::Index count = 0;
  for (const Matrix& p : pred) count += p.size();
  if (count == 0) throw ShapeError("mse: empty input");
  const double scale = 2.0 / static_cast<double>(count);
  Batch g;
  g.reserve(pred.size());
  for (std::size_t b = 0; b < pred.size(); ++b) {
    g.push_back(scale * (pred[b] - target[b]));
  }
  return g;
}

Matrix mse_grad(const Matrix& pred, const Matrix& target) {
  return mse_grad(Batch{pred}, Batch{target}).front();
}

}  // namespace weldad::nn

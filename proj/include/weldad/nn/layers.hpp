#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "weldad/nn/tensor.hpp"
#include "weldad/rng.hpp"

namespace weldad::nn {

enum class LayerKind {
  kBatchNorm1d,
  kConv1d,
  kConvTranspose1d,
  kLinear,
  kDropout,
  kLeakyReLU,
  kPReLU,
  kReLU,
};

std::string_view to_string(LayerKind kind);

/// Static description of one layer in an architecture listing.
struct LayerSpec {
  LayerKind kind;
  int in = 0;   // channels or features
  int out = 0;
  int kernel_size = 0;
  int stride = 0;
  double dropout_p = 0.0;
  double slope = 0.0;

  bool operator==(const LayerSpec&) const = default;
};

// Valid (unpadded) 1-D convolution with stride 1:
//   y[o, t] = b[o] + sum_{k,i} w[o, i, k] * x[i, t + k],  T_out = T - K + 1.
// The weight is stored as out x (K * in); tap k occupies columns
// [k * in, (k + 1) * in).
class Conv1d {
 public:
  Conv1d(int in_channels, int out_channels, int kernel_size,
         std::string name);

  /// Kaiming-uniform with a = sqrt(5), i.e. U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void reset_parameters(Rng& rng);

  /// Pure forward of one sequence.
  Matrix forward(const Matrix& x) const;
  /// Forward with cache for a subsequent backward().
  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);

  /// y = b + W * stacked, where stacked = [x_t; x_{t+1}; ...; x_{t+K-1}].
  void forward_frame(const Vector& stacked, Vector& out) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel_size() const { return k_; }
  LayerSpec spec() const;
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;

 private:
  Matrix stack_taps(const Matrix& x) const;

  int in_, out_, k_;
  Batch stacked_cache_;
  bool has_cache_ = false;
};

// Transposed 1-D convolution with stride 1, no padding:
//   y[o, t] = b[o] + sum_{k,i} w[i, o, k] * x[i, t - k],  T_out = T + K - 1.
// Stored as out x (K * in); tap k occupies columns [k * in, (k + 1) * in).
class ConvTranspose1d {
 public:
  ConvTranspose1d(int in_channels, int out_channels, int kernel_size,
                  std::string name);

  /// Same bound rule as PyTorch, which takes fan_in from out_channels * K.
  void reset_parameters(Rng& rng);

  Matrix forward(const Matrix& x) const;
  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);

  /// y = b + W * stacked, where stacked = [x_t; x_{t-1}; ...; x_{t-K+1}]
  /// with out-of-range frames set to zero.
  void forward_frame(const Vector& stacked, Vector& out) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel_size() const { return k_; }
  LayerSpec spec() const;
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;

 private:
  int in_, out_, k_;
  Batch input_cache_;
  bool has_cache_ = false;
};

// Per-channel normalization over batch and time. Train mode uses the
// population statistics of the batch and updates running estimates
// (unbiased variance, exponential momentum); eval mode uses the running
// estimates.
class BatchNorm1d {
 public:
  BatchNorm1d(int channels, bool affine, std::string name, double eps = 1e-5,
              double momentum = 0.1);

  Batch forward(const Batch& x, Mode mode);
  Batch backward(const Batch& grad_out);

  /// Eval-mode transform of a single frame, in place.
  void eval_frame(Vector& x) const;

  int channels() const { return channels_; }
  bool affine() const { return affine_; }
  double eps() const { return eps_; }
  LayerSpec spec() const;
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Parameter gamma;         // channels x 1
  Parameter beta;          // channels x 1
  Parameter running_mean;  // buffer
  Parameter running_var;   // buffer

 private:
  int channels_;
  bool affine_;
  double eps_;
  double momentum_;
  Batch xhat_cache_;
  Vector inv_std_cache_;
  Mode cache_mode_ = Mode::kEval;
  bool has_cache_ = false;
};

// Fully connected layer over feature columns: Y = W X + b.
class Linear {
 public:
  Linear(int in_features, int out_features, std::string name);

  void reset_parameters(Rng& rng);

  Matrix forward_eval(const Matrix& x) const;
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& grad_out);

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  LayerSpec spec() const;
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }

  Parameter weight;  // out x in
  Parameter bias;    // out x 1

 private:
  int in_, out_;
  Matrix input_cache_;
  bool has_cache_ = false;
};

// Inverted dropout. Train mode zeroes each unit with probability p and
// scales survivors by 1/(1-p); eval mode is the identity.
class Dropout {
 public:
  explicit Dropout(double p);

  Matrix forward(const Matrix& x, Mode mode, Rng& rng);
  Matrix backward(const Matrix& grad_out);

  double p() const { return p_; }
  LayerSpec spec() const;

 private:
  double p_;
  Matrix mask_cache_;
  bool has_cache_ = false;
};

inline double leaky_relu(double x, double slope) {
  return x > 0.0 ? x : slope * x;
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double prelu(double x, double a) { return x > 0.0 ? x : a * x; }

class LeakyReLU {
 public:
  explicit LeakyReLU(double slope = 0.01) : slope_(slope) {}

  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& grad_out);
  void apply_inplace(Vector& x) const;

  double slope() const { return slope_; }
  LayerSpec spec() const;

 private:
  double slope_;
  Batch input_cache_;
  bool has_cache_ = false;
};

class ReLU {
 public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& grad_out);
  Matrix forward_eval(const Matrix& x) const;
  LayerSpec spec() const;

 private:
  Matrix input_cache_;
  bool has_cache_ = false;
};

/// PReLU with one learnable slope shared across all channels.
class PReLU {
 public:
  explicit PReLU(std::string name, double init = 0.25);

  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);
  void apply_inplace(Vector& x) const;

  double a() const { return slope.value(0, 0); }
  LayerSpec spec() const;
  std::vector<Parameter*> parameters() { return {&slope}; }
  std::vector<const Parameter*> parameters() const { return {&slope}; }

  Parameter slope;  // 1 x 1

 private:
  Batch input_cache_;
  bool has_cache_ = false;
};

/// Mean squared error over every element of the batch.
double mse(const Batch& pred, const Batch& target);
double mse(const Matrix& pred, const Matrix& target);
/// d mse / d pred.
Batch mse_grad(const Batch& pred, const Batch& target);
Matrix mse_grad(const Matrix& pred, const Matrix& target);

}  // namespace weldad::nn

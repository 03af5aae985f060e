#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace weldad::nn {

// Layers compute in double precision. Sequence tensors are channels x time
// (one column per frame); dense tensors are features x batch.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Batch = std::vector<Matrix>;

enum class Mode { kTrain, kEval };

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;  // false for running statistics

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols,
            bool is_trainable = true)
      : name(std::move(n)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)),
        trainable(is_trainable) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

/// Throws NumericError if any entry is NaN or infinite.
void check_finite(const Matrix& m, std::string_view where);
void check_finite(const Batch& b, std::string_view where);

/// Rounds every entry to the nearest float32. Parameters are kept
/// float-representable so checkpoints round-trip losslessly.
void round_to_float(Matrix& m);

}  // namespace weldad::nn

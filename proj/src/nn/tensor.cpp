#include "weldad/nn/tensor.hpp"

#include <string>

#include "weldad/error.hpp"

namespace weldad::nn {

void check_finite(const Matrix& m, std::string_view where) {
  if (!m.allFinite()) {
    throw NumericError("non-finite value in " + std::string(where));
  }
}

void check_finite(const Batch& b, std::string_view where) {
  for (const Matrix& m : b) check_finite(m, where);
}

void round_to_float(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

}  // namespace weldad::nn

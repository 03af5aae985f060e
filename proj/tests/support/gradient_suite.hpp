#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace weldad::testing {

struct LayerGradReport {
  std::string layer;
  int instances = 0;
  double max_rel_error = 0.0;  // over every parameter and input entry
};

/// Analytic vs central-difference gradients for every layer type on
/// `instances` random small configurations each.
std::vector<LayerGradReport> run_gradient_suite(int instances, std::uint64_t seed,
                                                double h = 1e-5);

}  // namespace weldad::testing

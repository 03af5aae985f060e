#include "weldad/scoring/fusion.hpp"

#include <cmath>

#include "weldad/error.hpp"
#include "weldad/evaluation/metrics.hpp"
#include "weldad/json_util.hpp"
#include "weldad/log.hpp"

namespace weldad::scoring {

std::vector<double> Standardizer::apply(std::span<const double> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(apply(x));
  return out;
}

Standardizer fit_standardizer(std::span<const double> training_scores) {
  if (training_scores.size() < 2) {
    throw DataError("standardizer needs at least two training scores, got " +
                    std::to_string(training_scores.size()));
  }
  const double n = static_cast<double>(training_scores.size());
  double sum = 0.0;
  for (double x : training_scores) {
    if (!std::isfinite(x)) throw NumericError("standardizer: non-finite training score");
    sum += x;
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : training_scores) ss += (x - mean) * (x - mean);
  Standardizer s;
  s.mean = mean;
  s.std = std::sqrt(ss / n);
  if (s.std == 0.0) {
    s.degenerate = true;
    log().warn("standardizer: training scores are all equal; standardized scores will be 0");
  }
  return s;
}

void to_json(nlohmann::json& j, const Standardizer& s) {
  j = nlohmann::json{{"mean", s.mean}, {"std", s.std}, {"degenerate", s.degenerate}};
}

void from_json(const nlohmann::json& j, Standardizer& s) {
  require_keys_subset(j, {"mean", "std", "degenerate"}, "standardizer");
  read_optional(j, "mean", s.mean);
  read_optional(j, "std", s.std);
  read_optional(j, "degenerate", s.degenerate);
  if (!s.degenerate && !(s.std > 0.0)) throw ConfigError("standardizer: std must be positive");
}

double fuse(double z_audio, double z_video, double w_audio) {
  if (!(w_audio >= 0.0 && w_audio <= 1.0)) {
    throw ConfigError("fusion weight must lie in [0, 1], got " + std::to_string(w_audio));
  }
  return w_audio * z_audio + (1.0 - w_audio) * z_video;
}

std::vector<double> fused_scores(std::span<const FusionSample> samples, double w_audio) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(fuse(s.z_audio, s.z_video, w_audio));
  return out;
}

std::vector<data::Label> labels_of(std::span<const FusionSample> samples) {
  std::vector<data::Label> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

FusionSearch grid_search_weight(std::span<const FusionSample> validation, double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("fusion grid step must lie in (0, 1]");
  const long n = std::lround(1.0 / step);
  if (std::abs(static_cast<double>(n) * step - 1.0) > 1e-9) {
    throw ConfigError("fusion grid step must divide 1");
  }
  const auto labels = labels_of(validation);
  FusionSearch result;
  for (long i = 0; i <= n; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(n);
    const double a = evaluation::auc(fused_scores(validation, w), labels);
    result.trace.emplace_back(w, a);
    if (i == 0 || a > result.auc) {
      result.w_audio = w;
      result.auc = a;
    }
  }
  result.auc_video = result.trace.front().second;
  result.auc_audio = result.trace.back().second;
  return result;
}

}  // namespace weldad::scoring

#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "weldad/data/labels.hpp"

namespace weldad::scoring {

// z = (x - mean) / std with the population std of the training scores.
struct Standardizer {
  double mean = 0.0;
  double std = 1.0;
  /// All training scores were equal; apply() then returns 0 for every input.
  bool degenerate = false;

  double apply(double x) const { return degenerate ? 0.0 : (x - mean) / std; }
  std::vector<double> apply(std::span<const double> xs) const;
};

/// Needs at least two scores (DataError otherwise). A zero spread yields a
/// degenerate standardizer and logs a warning.
Standardizer fit_standardizer(std::span<const double> training_scores);

void to_json(nlohmann::json& j, const Standardizer& s);
void from_json(const nlohmann::json& j, Standardizer& s);

/// w * z_audio + (1 - w) * z_video; ConfigError unless 0 <= w <= 1.
double fuse(double z_audio, double z_video, double w_audio);

struct FusionSample {
  std::string sample_id;
  double z_audio = 0.0;
  double z_video = 0.0;
  data::Label label = data::Label::kGood;
  std::string category;
};

struct FusionSearch {
  double w_audio = 0.0;
  double auc = 0.0;        // at w_audio
  double auc_audio = 0.0;  // w = 1
  double auc_video = 0.0;  // w = 0
  std::vector<std::pair<double, double>> trace;  // (w, AUC) over the grid
};

/// Scans w = 0, 1/n, ..., 1 with n = round(1 / step); the first weight with
/// the highest AUC wins, so ties resolve to the smallest w.
FusionSearch grid_search_weight(std::span<const FusionSample> validation, double step = 0.01);

std::vector<double> fused_scores(std::span<const FusionSample> samples, double w_audio);
std::vector<data::Label> labels_of(std::span<const FusionSample> samples);

}  // namespace weldad::scoring

#pragma once

#include <span>
#include <string>
#include <vector>

#include "weldad/data/labels.hpp"

namespace weldad::evaluation {

// Defects are the positive class; a higher score means more anomalous.
// Every function here throws DataError unless both classes are present and
// NumericError on non-finite scores.

/// Mann-Whitney AUC from integer pair counts: (2 * wins + ties) / (2 * P * N),
/// where wins counts (defect, good) pairs with the defect scored higher.
double auc(std::span<const double> scores, std::span<const data::Label> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predicted defect iff score >= threshold; +inf first
};

/// Staircase over every distinct score, from (0, 0) to (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const data::Label> labels);

/// Trapezoidal area under roc_curve(); equals auc() (ties form diagonal steps).
double auc_trapezoid(std::span<const double> scores, std::span<const data::Label> labels);

struct DetPoint {
  double fpr = 0.0;
  double fnr = 0.0;
  double threshold = 0.0;
};

/// FNR = 1 - TPR along the ROC staircase.
std::vector<DetPoint> det_curve(std::span<const double> scores,
                                std::span<const data::Label> labels);

struct EerResult {
  double eer = 0.0;
  DetPoint lower;  // last curve point with FNR > FPR
  DetPoint upper;  // first curve point with FNR <= FPR
};

/// Rate where FPR = FNR, interpolated linearly between the bracketing points.
EerResult eer(std::span<const double> scores, std::span<const data::Label> labels);

}  // namespace weldad::evaluation

#include "weldad/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "weldad/error.hpp"

namespace weldad::evaluation {

namespace {

struct ClassCounts {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const data::Label> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("evaluation: " + std::to_string(scores.size()) + " scores but " +
                    std::to_string(labels.size()) + " labels");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("evaluation: non-finite score");
    (labels[i] == data::Label::kDefect ? c.pos : c.neg) += 1;
  }
  if (c.pos == 0 || c.neg == 0) {
    throw DataError("evaluation: both good and defect samples are required (got " +
                    std::to_string(c.neg) + " good, " + std::to_string(c.pos) + " defect)");
  }
  return c;
}

// Indices ordered by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const data::Label> labels) {
  const ClassCounts c = check_inputs(scores, labels);
  // Walk tie groups from the highest score down; every good in a group
  // loses to the defects seen in earlier groups and ties the group's defects.
  const auto idx = descending(scores);
  std::int64_t wins2 = 0;  // 2 * wins + ties
  std::int64_t pos_above = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::int64_t pos = 0, neg = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == data::Label::kDefect ? pos : neg) += 1;
      ++j;
    }
    wins2 += neg * (2 * pos_above + pos);
    pos_above += pos;
    i = j;
  }
  return static_cast<double>(wins2) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const data::Label> labels) {
  const ClassCounts c = check_inputs(scores, labels);
  const auto idx = descending(scores);
  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double thr = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == thr) {
      (labels[idx[i]] == data::Label::kDefect ? tp : fp) += 1;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(c.neg),
                     static_cast<double>(tp) / static_cast<double>(c.pos), thr});
  }
  return curve;
}

double auc_trapezoid(std::span<const double> scores, std::span<const data::Label> labels) {
  const auto curve = roc_curve(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

std::vector<DetPoint> det_curve(std::span<const double> scores,
                                std::span<const data::Label> labels) {
  std::vector<DetPoint> det;
  for (const RocPoint& p : roc_curve(scores, labels)) {
    det.push_back({p.fpr, 1.0 - p.tpr, p.threshold});
  }
  return det;
}

EerResult eer(std::span<const double> scores, std::span<const data::Label> labels) {
  const auto det = det_curve(scores, labels);
  // FNR - FPR falls from +1 at the first point to -1 at the last.
  for (std::size_t i = 1; i < det.size(); ++i) {
    const double d = det[i].fnr - det[i].fpr;
    if (d > 0.0) continue;
    const DetPoint& lo = det[i - 1];
    const DetPoint& hi = det[i];
    const double d_lo = lo.fnr - lo.fpr;
    const double t = d_lo / (d_lo - d);
    return {lo.fpr + t * (hi.fpr - lo.fpr), lo, hi};
  }
  throw NumericError("eer: curve never crosses FPR = FNR");
}

}  // namespace weldad::evaluation

#pragma once

#include <span>
#include <string>
#include <vector>

#include "weldad/scoring/score_series.hpp"

namespace weldad::scoring {

enum class AggregationKind { kMean, kMax, kMaxOverMa };

struct AggregationMethod {
  AggregationKind kind = AggregationKind::kMean;
  double ma_window_s = 1.0;  // max_over_ma only

  void validate() const;
  bool operator==(const AggregationMethod&) const = default;
};

/// "mean", "max", or "max_over_ma:<seconds>" (e.g. "max_over_ma:1").
std::string to_string(const AggregationMethod& m);
AggregationMethod aggregation_from_string(std::string_view s);

/// Moving-average window in frames: round(window_s / frame_period), at least 1.
int ma_window_frames(double window_s, double frame_period);

/// Valid-mode moving average: n - window + 1 values. A window longer than
/// the series is truncated to the series, giving its mean.
std::vector<double> moving_average(std::span<const double> x, int window);

/// Sample-level score. Throws DataError for an empty series.
double aggregate(std::span<const double> scores, double frame_period,
                 const AggregationMethod& method);
double aggregate(const ScoreSeries& series, const AggregationMethod& method);

}  // namespace weldad::scoring

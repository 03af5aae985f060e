#include "weldad/scoring/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "weldad/error.hpp"

namespace weldad::scoring {

namespace {

// Mean taken about the first element: a constant window returns its value
// exactly, and large offsets lose less precision.
double shifted_mean(std::span<const double> x) {
  const double x0 = x.front();
  double s = 0.0;
  for (double v : x) s += v - x0;
  return x0 + s / static_cast<double>(x.size());
}

}  // namespace

void AggregationMethod::validate() const {
  if (kind == AggregationKind::kMaxOverMa && !(ma_window_s > 0.0 && std::isfinite(ma_window_s))) {
    throw ConfigError("aggregation: moving-average window must be positive");
  }
}

std::string to_string(const AggregationMethod& m) {
  switch (m.kind) {
    case AggregationKind::kMean: return "mean";
    case AggregationKind::kMax: return "max";
    case AggregationKind::kMaxOverMa: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "max_over_ma:%g", m.ma_window_s);
      return buf;
    }
  }
  return "?";
}

AggregationMethod aggregation_from_string(std::string_view s) {
  if (s == "mean") return {AggregationKind::kMean};
  if (s == "max") return {AggregationKind::kMax};
  constexpr std::string_view prefix = "max_over_ma";
  if (s.substr(0, prefix.size()) == prefix) {
    AggregationMethod m{AggregationKind::kMaxOverMa, 1.0};
    if (s.size() > prefix.size()) {
      if (s[prefix.size()] != ':') throw ConfigError("bad aggregation: " + std::string(s));
      const std::string value(s.substr(prefix.size() + 1));
      std::size_t used = 0;
      try {
        m.ma_window_s = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size()) {
        throw ConfigError("bad moving-average window: " + value);
      }
    }
    m.validate();
    return m;
  }
  throw ConfigError("unknown aggregation \"" + std::string(s) +
                    "\" (expected mean, max or max_over_ma:<seconds>)");
}

int ma_window_frames(double window_s, double frame_period) {
  if (!(frame_period > 0.0)) throw ConfigError("aggregation: frame period must be positive");
  const double frames = std::round(window_s / frame_period);
  return frames < 1.0 ? 1 : static_cast<int>(std::min(frames, 1e9));
}

std::vector<double> moving_average(std::span<const double> x, int window) {
  if (x.empty()) throw DataError("moving average of an empty series");
  if (window < 1) throw ConfigError("moving average window must be >= 1");
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), x.size());
  std::vector<double> out(x.size() - w + 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = shifted_mean(x.subspan(i, w));
  return out;
}

double aggregate(std::span<const double> scores, double frame_period,
                 const AggregationMethod& method) {
  method.validate();
  if (scores.empty()) throw DataError("cannot aggregate an empty score series");
  switch (method.kind) {
    case AggregationKind::kMean:
      return shifted_mean(scores);
    case AggregationKind::kMax:
      return *std::max_element(scores.begin(), scores.end());
    case AggregationKind::kMaxOverMa: {
      const auto ma = moving_average(scores, ma_window_frames(method.ma_window_s, frame_period));
      return *std::max_element(ma.begin(), ma.end());
    }
  }
  return 0.0;
}

double aggregate(const ScoreSeries& series, const AggregationMethod& method) {
  series.validate();
  return aggregate(series.scores, series.frame_period, method);
}

}  // namespace weldad::scoring

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace weldad::scoring {

enum class Modality { kAudio, kVideo, kFused };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

/// Per-frame anomaly scores of one sample.
struct ScoreSeries {
  std::string sample_id;
  Modality modality = Modality::kAudio;
  std::vector<double> scores;
  double frame_period = 1.0;  // seconds between frames

  /// Throws DataError if empty, negative or non-finite.
  void validate() const;
};

}  // namespace weldad::scoring

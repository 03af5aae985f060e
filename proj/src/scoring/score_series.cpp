#include "weldad/scoring/score_series.hpp"

#include <cmath>

#include "weldad/error.hpp"

namespace weldad::scoring {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kAudio: return "audio";
    case Modality::kVideo: return "video";
    case Modality::kFused: return "fused";
  }
  return "?";
}

Modality modality_from_string(std::string_view s) {
  if (s == "audio") return Modality::kAudio;
  if (s == "video") return Modality::kVideo;
  if (s == "fused") return Modality::kFused;
  throw DataError("unknown modality: \"" + std::string(s) + "\"");
}

void ScoreSeries::validate() const {
  if (scores.empty()) throw DataError("score series \"" + sample_id + "\" is empty");
  if (!(frame_period > 0.0) || !std::isfinite(frame_period)) {
    throw DataError("score series \"" + sample_id + "\": frame period must be positive");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw DataError("score series \"" + sample_id + "\": non-finite score at frame " +
                      std::to_string(i));
    }
    if (scores[i] < 0.0) {
      throw DataError("score series \"" + sample_id + "\": negative score at frame " +
                      std::to_string(i));
    }
  }
}

}  // namespace weldad::scoring

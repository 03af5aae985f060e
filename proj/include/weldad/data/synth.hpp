#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "weldad/audio/wav.hpp"
#include "weldad/data/manifest.hpp"
#include "weldad/nn/tensor.hpp"
#include "weldad/video/embedding.hpp"

namespace weldad::data {

// Synthetic stand-in for a welding corpus. Defects are injected per category
// family, not per weld physics.
enum class DefectFamily { kNone, kBursts, kBandAttenuation, kF0Drift, kLevelJump };

std::string_view to_string(DefectFamily f);
/// Throws DataError for unknown categories.
DefectFamily defect_family(std::string_view category);

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_good = 10;
  std::map<std::string, int> defect_counts;  // category -> count
  double duration_s = 2.0;
  double sample_rate = 192000.0;
  double fps = 30.0;
  /// Scales every defect effect; the separability dial.
  double intensity = 1.0;

  // audio
  double f0_hz = 110.0;
  int harmonics = 24;
  double f0_jitter = 0.02;   // relative std of the per-sample fundamental
  double noise_level = 0.3;  // pink noise rms relative to the harmonic stack
  audio::SampleFormat audio_format = audio::SampleFormat::kFloat32;

  // video
  int embedding_rank = 4;
  double embedding_noise = 0.05;
  double video_shift = 1.0;  // per-dimension shift std at intensity 1

  void validate() const;
  int total() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

struct SynthSample {
  std::string sample_id;
  std::string category;
  std::vector<float> audio;
  video::EmbeddingSequence embeddings;
  // Defect event, shared by both modalities; empty for good samples.
  double event_start_s = 0.0;
  double event_end_s = 0.0;
  std::vector<double> burst_onsets_s;
};

// Normal video cluster mu + B z + noise, fixed by the corpus seed.
struct VideoCluster {
  nn::Vector mean;
  nn::Matrix basis;
};
VideoCluster make_video_cluster(const SynthSpec& spec);

/// One sample, reproducible from (spec.seed, sample_id) alone.
SynthSample synthesize_sample(const SynthSpec& spec, const VideoCluster& cluster,
                              const std::string& sample_id, const std::string& category);

/// Ids in generation order: goods first, then defect categories in vocabulary order.
std::vector<std::pair<std::string, std::string>> synth_plan(const SynthSpec& spec);

/// Writes audio/<id>.wav, video/<id>.emb and manifest.jsonl under out_dir.
DatasetManifest generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace weldad::data

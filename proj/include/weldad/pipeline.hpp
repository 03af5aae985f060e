#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "weldad/audio/autoencoder.hpp"
#include "weldad/audio/stft.hpp"
#include "weldad/data/manifest.hpp"
#include "weldad/evaluation/report.hpp"
#include "weldad/evaluation/split.hpp"
#include "weldad/scoring/aggregate.hpp"
#include "weldad/scoring/fusion.hpp"
#include "weldad/scoring/score_file.hpp"
#include "weldad/video/autoencoder.hpp"
#include "weldad/video/embedding.hpp"

namespace weldad::pipeline {

// One experiment's settings. The top-level seed drives the split, model
// initialisation and training; seeds inside the training sections are
// overwritten with values derived from it.
struct PipelineConfig {
  std::uint64_t seed = 0;
  audio::StftConfig stft;
  std::optional<int> audio_channel;  // required for multichannel WAVs
  audio::AudioAeConfig audio_model;  // n_bins follows stft unless given
  audio::AudioTrainRecipe audio_training;
  video::VideoAeConfig video_model;
  video::VideoTrainRecipe video_training;
  /// Select the video checkpoint by validation AUC (needs both classes in val).
  bool video_select_on_val = true;
  scoring::AggregationMethod audio_aggregation;
  scoring::AggregationMethod video_aggregation;
  double fusion_step = 0.01;

  void validate() const;
  audio::AudioTrainRecipe audio_recipe() const;  // with the derived seed
  video::VideoTrainRecipe video_recipe() const;
  std::uint64_t audio_model_seed() const;
  std::uint64_t video_model_seed() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);
/// FNV-1a over the canonical (sorted-key, compact) JSON of the config.
std::string config_hash(const PipelineConfig& c);

audio::Spectrogram load_spectrogram(const data::DatasetManifest& manifest,
                                    const data::ManifestEntry& entry, const PipelineConfig& c);
video::EmbeddingSequence load_entry_embeddings(const data::DatasetManifest& manifest,
                                               const data::ManifestEntry& entry);

struct AudioTraining {
  audio::AudioAutoencoder model;
  audio::AudioTrainResult result;
};
/// Trains on the partition's train ids (goods only).
AudioTraining train_audio(const data::DatasetManifest& manifest,
                          const evaluation::Partition& partition, const PipelineConfig& c);

struct VideoTraining {
  video::VideoAutoencoder model;
  video::VideoTrainResult result;
};
VideoTraining train_video(const data::DatasetManifest& manifest,
                          const evaluation::Partition& partition, const PipelineConfig& c);

struct ModalityScores {
  std::vector<scoring::ScoreRecord> records;  // manifest order
  scoring::Standardizer standardizer;         // fitted on the train split
};

/// Aggregated per-sample scores for every manifest entry; z-scores use the
/// train-split statistics.
ModalityScores score_audio(const audio::AudioAutoencoder& model,
                           const data::DatasetManifest& manifest,
                           const evaluation::Partition& partition, const PipelineConfig& c);
ModalityScores score_video(const video::VideoAutoencoder& model,
                           const data::DatasetManifest& manifest,
                           const evaluation::Partition& partition, const PipelineConfig& c);

/// Fills z_score from raw scores of the train-split records.
scoring::Standardizer standardize(std::vector<scoring::ScoreRecord>& records);

struct FusionReport {
  double step = 0.01;
  scoring::FusionSearch validation;  // weight chosen here
  double test_auc = 0.0;
  double test_auc_audio = 0.0;
  double test_auc_video = 0.0;
  int n_val = 0;
  int n_test = 0;
};
nlohmann::json to_json(const FusionReport& r);

struct FusionOutcome {
  FusionReport report;
  std::vector<scoring::ScoreRecord> fused;  // modality "fused"; raw = z = fused score
};
/// Joins audio and video z-scores by sample id; searches the weight on the
/// validation split and evaluates it on the test split.
FusionOutcome fuse_records(const std::vector<scoring::ScoreRecord>& audio,
                           const std::vector<scoring::ScoreRecord>& video, double step = 0.01);

struct ExperimentResult {
  ModalityScores audio;
  ModalityScores video;
  FusionOutcome fusion;
  double audio_val_auc = 0.0, audio_test_auc = 0.0;
  double video_val_auc = 0.0, video_test_auc = 0.0;
  AudioTraining audio_training;
  VideoTraining video_training;
};
/// Split, train both models, score, fuse. With an output directory, writes
/// checkpoints, score files, the fusion report and per-modality eval reports.
ExperimentResult run_experiment(const data::DatasetManifest& manifest, const PipelineConfig& c,
                                const std::optional<std::filesystem::path>& out_dir = {});

struct GridTrial {
  int fft_window = 0;
  int bottleneck = 0;
  double latency_ms = 0.0;
  double val_auc = 0.0;
  double test_auc = 0.0;
  double final_probe_mse = 0.0;
  std::string checkpoint;  // relative to the grid directory
};

struct GridOptions {
  std::vector<int> fft_windows{audio::kGridFftWindows.begin(), audio::kGridFftWindows.end()};
  std::vector<int> bottlenecks{audio::kGridBottlenecks.begin(), audio::kGridBottlenecks.end()};
  int jobs = 1;
};

/// Audio sweep over fft_windows x bottlenecks with hop = fft / 2. Writes
/// fft<F>_b<B>/audio_ae.ckpt, grid_report.json and grid_table.txt under
/// out_dir. Trials run in `jobs` worker threads; each is deterministic and
/// the report is assembled in grid order.
std::vector<GridTrial> run_grid(const data::DatasetManifest& manifest, const PipelineConfig& c,
                                const GridOptions& options, const std::filesystem::path& out_dir);
nlohmann::json grid_report_json(const std::vector<GridTrial>& trials, const PipelineConfig& c);
std::string format_grid_table(const std::vector<GridTrial>& trials);

/// Offline per-frame scores of a signal.
std::vector<double> offline_wav_scores(const audio::AudioAutoencoder& model,
                                       const audio::StftConfig& stft,
                                       std::span<const float> signal);

struct StreamOptions {
  std::size_t chunk = 4096;  // samples per push
  /// Playback speed relative to real time; 0 runs as fast as possible.
  double realtime_speed = 0.0;
};
/// Replays a signal through the streaming STFT and frame scorer, calling
/// on_score(frame_index, score) as scores become final.
std::vector<double> stream_wav_scores(
    const audio::AudioAutoencoder& model, const audio::StftConfig& stft,
    std::span<const float> signal, const StreamOptions& options = {},
    const std::function<void(std::int64_t, double)>& on_score = {});

}  // namespace weldad::pipeline

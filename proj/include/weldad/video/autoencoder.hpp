#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "weldad/data/labels.hpp"
#include "weldad/nn/checkpoint.hpp"
#include "weldad/nn/layers.hpp"
#include "weldad/nn/optim.hpp"
#include "weldad/scoring/score_series.hpp"
#include "weldad/video/embedding.hpp"

namespace weldad::video {

inline constexpr int kWindowFrames = 64;

struct VideoAeConfig {
  /// Feature widths along the linear chain; dims[i] -> dims[i + 1].
  std::vector<int> dims = {2304, 512, 256, 128, 64, 64, 64, 128, 256, 512, 2304};
  /// Linear layers (0-based) whose activation is followed by dropout.
  std::vector<int> dropout_after = {1, 2, 3, 8};
  double dropout_p = 0.5;

  /// Throws ConfigError unless the chain maps dims.front() back onto itself,
  /// every width is positive and dropout positions name hidden layers.
  void validate() const;
  int input_dim() const { return dims.front(); }
  int n_linear() const { return static_cast<int>(dims.size()) - 1; }
  bool operator==(const VideoAeConfig&) const = default;
};

void to_json(nlohmann::json& j, const VideoAeConfig& c);
void from_json(const nlohmann::json& j, VideoAeConfig& c);

/// Closed-form count: sum of in * out + out over the chain.
std::int64_t video_ae_param_count(const VideoAeConfig& config);

// MLP autoencoder over embedding frames. ReLU after every linear layer except
// the last; dropout after the ReLUs listed in dropout_after. Inputs are
// dim x batch (one column per frame).
class VideoAutoencoder {
 public:
  VideoAutoencoder(const VideoAeConfig& config, std::uint64_t seed);

  const VideoAeConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<nn::LayerSpec> architecture() const;
  std::int64_t param_count() const;
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;

  /// Train-mode forward (dropout active, masks drawn from `rng`); caches.
  nn::Matrix forward(const nn::Matrix& x, nn::Mode mode, Rng& rng);
  nn::Matrix backward(const nn::Matrix& grad_out);

  /// Eval-mode forward; pure, safe for concurrent use on a frozen model.
  nn::Matrix reconstruct(const nn::Matrix& x) const;

  nn::Checkpoint to_checkpoint() const;
  static VideoAutoencoder from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  bool has_dropout(int layer) const;

  VideoAeConfig config_;
  std::uint64_t seed_;
  std::vector<nn::Linear> linear_;
  std::vector<nn::ReLU> relu_;        // after linear 0..n-2
  std::vector<nn::Dropout> dropout_;  // one slot per linear, used where listed
};

/// One score per frame: mean squared error over features between each
/// embedding and its reconstruction.
scoring::ScoreSeries video_frame_scores(const VideoAutoencoder& model,
                                        const EmbeddingSequence& embeddings);

// Centered 64-frame windows, one per frame. Near the edges the window is
// shifted inward so it stays inside the video.
struct WindowPlan {
  struct Window {
    int center = 0;
    int start = 0;  // first frame; the window covers [start, start + length)
    bool clamped = false;
  };
  int length = kWindowFrames;
  double fps = 30.0;
  std::vector<Window> windows;

  /// Half a window of look-ahead, in seconds.
  double latency_s() const { return (length / 2) / fps; }
};

/// Throws ShapeError if n_frames < window length.
WindowPlan sliding_window_spec(int n_frames, double fps, int length = kWindowFrames);

struct VideoTrainRecipe {
  int epochs = 1000;
  double lr = 5e-4;
  int batch_size = 64;
  /// Frames drawn per sample each epoch; 0 uses every frame.
  int frames_per_sample = 0;
  /// Run validation every this many epochs (early stopping keeps the best).
  int eval_every = 1;
  /// Stop after this many validations without improvement; 0 disables.
  int patience = 0;
  std::uint64_t seed = 0;
  nn::AdamConfig adam;

  void validate() const;
};

void to_json(nlohmann::json& j, const VideoTrainRecipe& r);
void from_json(const nlohmann::json& j, VideoTrainRecipe& r);

struct VideoTrainingItem {
  std::string sample_id;
  data::Label label = data::Label::kGood;
  const EmbeddingSequence* embeddings = nullptr;
};

/// Validation hook for model selection, typically the validation AUC.
using VideoValidator = std::function<double(const VideoAutoencoder&)>;

struct VideoTrainResult {
  std::vector<double> epoch_loss;
  std::vector<std::pair<int, double>> validation;  // (epoch, score)
  int best_epoch = -1;  // 1-based; -1 without a validator
  double best_validation = 0.0;
  double initial_probe_mse = 0.0;
  double final_probe_mse = 0.0;
  std::int64_t steps = 0;
};

/// Eval-mode MSE on a fixed probe batch drawn from the recipe seed.
double video_probe_mse(const VideoAutoencoder& model,
                       std::span<const VideoTrainingItem> corpus,
                       const VideoTrainRecipe& recipe);

/// Trains on normal samples only; defect-labeled items throw DataError.
/// With a validator, the returned model is the best-scoring checkpoint
/// (ties keep the earlier epoch). Embeddings are never modified.
VideoTrainResult train_video_ae(VideoAutoencoder& model,
                                std::span<const VideoTrainingItem> corpus,
                                const VideoTrainRecipe& recipe,
                                const VideoValidator& validator = {});

}  // namespace weldad::video

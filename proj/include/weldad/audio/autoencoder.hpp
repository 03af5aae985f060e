#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "weldad/audio/stft.hpp"
#include "weldad/data/labels.hpp"
#include "weldad/nn/checkpoint.hpp"
#include "weldad/nn/layers.hpp"
#include "weldad/nn/optim.hpp"
#include "weldad/scoring/score_series.hpp"

namespace weldad::audio {

/// Number of valid k=3 convolutions in the encoder; each removes two frames.
inline constexpr int kEncoderDepth = 5;
/// Inputs need more than 2 * kEncoderDepth frames.
inline constexpr int kMinInputFrames = 2 * kEncoderDepth + 1;

inline constexpr std::array<int, 4> kGridBottlenecks = {16, 32, 48, 64};

struct AudioAeConfig {
  int n_bins = 8193;
  int width = 1024;
  int bottleneck = 48;
  int kernel_size = 3;
  int stride = 1;
  double leaky_slope = 0.01;
  double prelu_init = 0.25;
  /// Learnable gamma/beta on the input BatchNorm.
  bool input_norm_affine = true;

  void validate() const;
  bool operator==(const AudioAeConfig&) const = default;
};

void to_json(nlohmann::json& j, const AudioAeConfig& c);
void from_json(const nlohmann::json& j, AudioAeConfig& c);

/// Closed-form trainable parameter count.
std::int64_t audio_ae_param_count(const AudioAeConfig& config);

// 1-D convolutional autoencoder over spectrogram frames:
//   BatchNorm1D(n_bins)
//   Conv1D(n_bins -> w), 3 x Conv1D(w -> w), Conv1D(w -> bottleneck)
//   ConvTranspose1D(bottleneck -> w), 3 x ConvTranspose1D(w -> w),
//   ConvTranspose1D(w -> n_bins)
// LeakyReLU after every convolution except the last two; the activation
// feeding the output layer is a PReLU and the output is linear.
class AudioAutoencoder {
 public:
  AudioAutoencoder(const AudioAeConfig& config, std::uint64_t seed);

  const AudioAeConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  nn::Mode mode() const { return mode_; }
  void set_mode(nn::Mode mode) { mode_ = mode; }

  std::vector<nn::LayerSpec> architecture() const;
  /// Trainable parameter count by enumeration.
  std::int64_t param_count() const;
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;

  /// Training forward over a batch of n_bins x T segments; caches for backward.
  nn::Batch forward(const nn::Batch& x);
  nn::Batch backward(const nn::Batch& grad_out);

  struct Trace {
    nn::Matrix bottleneck;
    nn::Matrix output;
  };
  /// Eval-mode forward of one spectrogram, no caching. Requires T > 10.
  Trace trace(const nn::Matrix& x) const;
  nn::Matrix reconstruct(const nn::Matrix& x) const { return trace(x).output; }

  nn::Checkpoint to_checkpoint() const;
  static AudioAutoencoder from_checkpoint(const nn::Checkpoint& ckpt);

  // Layer access for the frame-incremental scorer.
  const nn::BatchNorm1d& input_norm() const { return input_norm_; }
  const std::vector<nn::Conv1d>& encoder() const { return encoder_; }
  const std::vector<nn::ConvTranspose1d>& decoder() const { return decoder_; }
  const nn::PReLU& output_activation() const { return prelu_; }

 private:
  AudioAeConfig config_;
  std::uint64_t seed_;
  nn::Mode mode_ = nn::Mode::kTrain;
  nn::BatchNorm1d input_norm_;
  std::vector<nn::Conv1d> encoder_;
  std::vector<nn::ConvTranspose1d> decoder_;
  std::vector<nn::LeakyReLU> leaky_;  // 8: after encoder 0-4, decoder 0-2
  nn::PReLU prelu_;                   // after decoder 3
};

// Frame-incremental eval-mode inference. Each output frame t depends on
// input frames t-10..t+10, so the score for frame t is emitted once frame
// t+10 has been pushed; finish() flushes the trailing frames. Offline
// scoring runs through this same path, which makes streaming and offline
// scores bit-identical. Holds a reference to a frozen model; one scorer
// per stream.
class AudioFrameScorer {
 public:
  explicit AudioFrameScorer(const AudioAutoencoder& model);

  /// Appends scores that became final to `out`.
  void push(const nn::Vector& frame, std::vector<double>& out);
  /// Flushes the remaining scores. Throws ShapeError if fewer than
  /// kMinInputFrames frames were pushed in total.
  void finish(std::vector<double>& out);

  std::int64_t frames_pushed() const { return frames_pushed_; }
  std::int64_t scores_emitted() const { return scores_emitted_; }

 private:
  void feed(std::size_t stage, nn::Vector frame, std::vector<double>& out);
  void flush_decoder(std::size_t layer, std::vector<double>& out);
  void emit(const nn::Vector& reconstruction, std::vector<double>& out);

  const AudioAutoencoder& model_;
  std::vector<std::deque<nn::Vector>> conv_inputs_;    // last k inputs per encoder layer
  std::vector<std::deque<nn::Vector>> deconv_inputs_;  // last k-1 inputs per decoder layer
  std::deque<nn::Vector> pending_inputs_;              // raw frames awaiting reconstruction
  nn::Vector stacked_;
  std::int64_t frames_pushed_ = 0;
  std::int64_t scores_emitted_ = 0;
  bool finished_ = false;
};

/// Mean squared reconstruction error over bins for every frame; length
/// equals n_frames. Requires n_frames > 10 and a matching n_bins.
scoring::ScoreSeries audio_frame_scores(const AudioAutoencoder& model,
                                        const Spectrogram& spectrogram,
                                        std::string sample_id = {});

struct AudioTrainRecipe {
  int epochs = 50;
  double peak_lr = 1e-4;
  int batch_size = 16;
  int segment_frames = 32;
  /// Random crops drawn per sample each epoch; 0 means
  /// max(1, n_frames / segment_frames).
  int crops_per_sample = 0;
  std::uint64_t seed = 0;
  double warmup_fraction = 0.3;
  double initial_divisor = 25.0;
  double final_divisor = 1e4;
  nn::AdamConfig adam;

  void validate() const;
};

void to_json(nlohmann::json& j, const AudioTrainRecipe& r);
void from_json(const nlohmann::json& j, AudioTrainRecipe& r);

struct AudioTrainingItem {
  std::string sample_id;
  data::Label label = data::Label::kGood;
  const Spectrogram* spectrogram = nullptr;
};

struct AudioTrainResult {
  std::vector<double> epoch_loss;  // mean batch MSE per epoch
  double initial_probe_mse = 0.0;
  double final_probe_mse = 0.0;
  std::int64_t steps = 0;
};

/// MSE on a fixed probe batch (first crop positions drawn from the recipe
/// seed), using batch statistics for the input norm without updating them.
double audio_probe_mse(AudioAutoencoder& model,
                       std::span<const AudioTrainingItem> corpus,
                       const AudioTrainRecipe& recipe);

/// Trains on normal samples only; a defect-labeled item throws DataError.
/// Leaves the model in eval mode.
AudioTrainResult train_audio_ae(AudioAutoencoder& model,
                                std::span<const AudioTrainingItem> corpus,
                                const AudioTrainRecipe& recipe);

}  // namespace weldad::audio

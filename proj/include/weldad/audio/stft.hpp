#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "weldad/nn/tensor.hpp"

namespace weldad::audio {

enum class WindowKind { kHann, kRectangular };

std::string_view to_string(WindowKind kind);
WindowKind window_from_string(std::string_view name);

/// FFT window sizes swept by the standard hyperparameter grid.
inline constexpr std::array<int, 4> kGridFftWindows = {4096, 16384, 32768, 65536};

struct StftConfig {
  double sample_rate = 192000.0;
  int fft_window = 16384;
  int hop_length = 8192;
  WindowKind window = WindowKind::kHann;
  /// log1p-compress magnitudes.
  bool log_magnitude = false;

  /// Throws ConfigError unless hop divides fft_window and all fields are positive.
  void validate() const;
  /// True when fft_window is one of kGridFftWindows.
  bool on_grid() const;
  int n_bins() const { return fft_window / 2 + 1; }
  int frames_per_window() const { return fft_window / hop_length; }
  /// Seconds between consecutive frames.
  double frame_period() const { return hop_length / sample_rate; }

  bool operator==(const StftConfig&) const = default;
};

void to_json(nlohmann::json& j, const StftConfig& c);
void from_json(const nlohmann::json& j, StftConfig& c);

/// Magnitude spectrogram, n_bins x n_frames (one column per frame).
struct Spectrogram {
  StftConfig config;
  nn::Matrix magnitudes;

  int n_bins() const { return static_cast<int>(magnitudes.rows()); }
  int n_frames() const { return static_cast<int>(magnitudes.cols()); }
};

/// floor((n_samples - fft) / hop) + 1, or 0 when n_samples < fft.
std::int64_t frame_count(std::int64_t n_samples, const StftConfig& config);

/// Samples needed before the autoencoder can emit one frame score:
/// hop * (10 + fft / hop). Throws ConfigError unless hop divides fft.
std::int64_t buffer_size(std::int64_t hop_length, std::int64_t fft_window);

/// Model latency in milliseconds, 1000 * hop / sample_rate.
double model_latency_ms(std::int64_t hop_length, double sample_rate);

// Magnitude of the windowed real DFT of one frame, bins 0..fft/2. Owns its
// FFT plan and buffers; one instance per thread.
class FrameTransform {
 public:
  explicit FrameTransform(const StftConfig& config);
  ~FrameTransform();
  FrameTransform(const FrameTransform&) = delete;
  FrameTransform& operator=(const FrameTransform&) = delete;
  FrameTransform(FrameTransform&&) noexcept;
  FrameTransform& operator=(FrameTransform&&) noexcept;

  /// frame.size() must equal fft_window.
  void compute(std::span<const float> frame, nn::Vector& out);

  const StftConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Frame f covers samples [f * hop, f * hop + fft).
Spectrogram stft_magnitude(std::span<const float> signal,
                           const StftConfig& config);

// Single-producer/single-consumer STFT over a bounded ring buffer. Frames
// are bit-identical to stft_magnitude() on the concatenated input. push()
// never drops samples: when the buffer is full it accepts what fits and
// reports an overrun; the caller must drain frames and push the rest.
class StreamingStft {
 public:
  struct PushResult {
    std::size_t accepted = 0;
    bool overrun = false;
  };

  /// capacity == 0 selects buffer_size(hop, fft). Smaller capacities are
  /// rejected.
  explicit StreamingStft(const StftConfig& config, std::size_t capacity = 0);

  PushResult push(std::span<const float> samples);
  /// Next frame if enough samples have arrived.
  std::optional<nn::Vector> next_frame();

  std::size_t frames_ready() const;
  std::int64_t frames_emitted() const { return next_frame_index_; }
  std::size_t buffered() const { return static_cast<std::size_t>(end_ - base_); }
  std::size_t capacity() const { return ring_.size(); }
  const StftConfig& config() const { return config_; }

 private:
  StftConfig config_;
  FrameTransform transform_;
  std::vector<float> ring_;
  std::vector<float> scratch_;
  std::int64_t base_ = 0;  // absolute index of the oldest retained sample
  std::int64_t end_ = 0;   // absolute index one past the newest sample
  std::int64_t next_frame_index_ = 0;
};

// Spectrogram cache file (little-endian):
//   char[8] "WELDSPEC", u32 version (1), f64 sample_rate, u32 fft_window,
//   u32 hop_length, u8 window (0 Hann, 1 rectangular), u8 log_magnitude,
//   u32 n_bins, u32 n_frames, then f32 magnitudes column-major
//   (frame 0 bins 0..n_bins-1, frame 1, ...).
void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s);
Spectrogram load_spectrogram(const std::filesystem::path& path);

}  // namespace weldad::audio

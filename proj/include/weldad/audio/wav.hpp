#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace weldad::audio {

enum class SampleFormat { kPcm16, kPcm24, kPcm32, kFloat32 };

/// One channel of a RIFF/WAVE file, normalized to [-1, 1).
struct WavData {
  double sample_rate = 0.0;
  int source_channels = 1;
  SampleFormat source_format = SampleFormat::kFloat32;
  std::vector<float> samples;
};

/// Reads PCM (16/24/32-bit integer) or IEEE float32 WAV, including
/// WAVE_FORMAT_EXTENSIBLE. Multichannel files require `channel`; reading a
/// multichannel file without one throws DataError.
WavData read_wav(const std::filesystem::path& path,
                 std::optional<int> channel = std::nullopt);

/// Writes a mono WAV. kPcm16/kPcm24 clip to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               std::uint32_t sample_rate,
               SampleFormat format = SampleFormat::kFloat32);

}  // namespace weldad::audio

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "weldad/nn/tensor.hpp"

namespace weldad::video {

/// Feature width of the fixed stage-one video backbone.
inline constexpr int kEmbeddingDim = 2304;

/// Per-frame embeddings of one video, dim x n_frames (one column per frame).
struct EmbeddingSequence {
  std::string sample_id;
  double fps = 30.0;
  nn::Matrix frames;

  int dim() const { return static_cast<int>(frames.rows()); }
  int n_frames() const { return static_cast<int>(frames.cols()); }
};

// Embedding file (little-endian):
//   char[8] "WELDEMBD", u32 version (1), u32 len + sample id bytes,
//   u32 n_frames, u32 dim, f64 fps, then f32[n_frames * dim] row-major
//   (frame 0 features 0..dim-1, frame 1, ...).
inline constexpr std::uint32_t kEmbeddingVersion = 1;

void save_embeddings(const std::filesystem::path& path, const EmbeddingSequence& e);
/// Throws DataError on bad magic/version, truncation or non-finite values.
/// `expected_dim` > 0 also enforces the feature width.
EmbeddingSequence load_embeddings(const std::filesystem::path& path,
                                  int expected_dim = kEmbeddingDim);

}  // namespace weldad::video

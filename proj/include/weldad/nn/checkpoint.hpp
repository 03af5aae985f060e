#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "weldad/nn/tensor.hpp"

namespace weldad::nn {

// Checkpoint container. Byte layout (all integers little-endian):
//
//   char[8]  magic "WELDADCK"
//   u32      format version (kCheckpointVersion)
//   u32 len, bytes   architecture id ("audio_ae" | "video_ae")
//   u32 len, bytes   architecture config, compact JSON with sorted keys
//   u64      RNG seed used to initialise the model
//   u32      tensor count
//   per tensor, in declaration order:
//     u32 len, bytes   name
//     u8               1 = trainable parameter, 0 = buffer
//     u32              rank, then u32 dims[rank]
//     f32[prod(dims)]  values, row-major over dims
//
// Convolution weights use [out, in, k], transposed-convolution weights use
// [in, out, k], linear weights use [out, in]; vectors are rank 1.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorBlob {
  std::string name;
  bool trainable = true;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;

  bool operator==(const TensorBlob&) const = default;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::string architecture;
  std::string config_json;
  std::uint64_t seed = 0;
  std::vector<TensorBlob> tensors;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// How a Parameter's storage maps onto the checkpoint's row-major dims.
enum class BlobLayout {
  kVector,         // rows x 1 -> [rows]
  kMatrix,         // rows x cols -> [rows, cols]
  kConv,           // out x (k*in) -> [out, in, k]
  kConvTranspose,  // out x (k*in) -> [in, out, k]
};

TensorBlob pack(const Parameter& p, BlobLayout layout, int kernel_size = 1);
/// Copies blob values into p, validating name and shape.
void unpack(const TensorBlob& blob, Parameter& p, BlobLayout layout,
            int kernel_size = 1);

}  // namespace weldad::nn

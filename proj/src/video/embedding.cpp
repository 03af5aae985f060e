#include "weldad/video/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "weldad/error.hpp"

namespace weldad::video {

namespace {

static_assert(std::endian::native == std::endian::little,
              "embedding files are little-endian; big-endian hosts need byte swaps");

constexpr char kMagic[8] = {'W', 'E', 'L', 'D', 'E', 'M', 'B', 'D'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError(where + ": truncated embedding file");
  }
  return v;
}

}  // namespace

void save_embeddings(const std::filesystem::path& path, const EmbeddingSequence& e) {
  if (e.frames.size() == 0) throw ShapeError("embeddings: empty sequence");
  if (!(e.fps > 0.0)) throw ConfigError("embeddings: fps must be positive");
  nn::check_finite(e.frames, "embeddings");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kEmbeddingVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(e.sample_id.size()));
  out.write(e.sample_id.data(), static_cast<std::streamsize>(e.sample_id.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(e.n_frames()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dim()));
  put<double>(out, e.fps);
  // Column-major dim x n is exactly the row-major n x dim file layout.
  std::vector<float> values(static_cast<std::size_t>(e.frames.size()));
  for (Eigen::Index i = 0; i < e.frames.size(); ++i) {
    values[static_cast<std::size_t>(i)] = static_cast<float>(e.frames.data()[i]);
  }
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw DataError("write failed: " + path.string());
}

EmbeddingSequence load_embeddings(const std::filesystem::path& path, int expected_dim) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file " + where);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError(where + ": not an embedding file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, where);
  if (version != kEmbeddingVersion) {
    throw DataError(where + ": unsupported embedding version " + std::to_string(version));
  }
  EmbeddingSequence e;
  const auto id_len = get<std::uint32_t>(in, where);
  if (id_len > (1u << 20)) throw DataError(where + ": implausible sample id length");
  e.sample_id.resize(id_len);
  if (!in.read(e.sample_id.data(), id_len)) throw DataError(where + ": truncated embedding file");
  const auto n_frames = get<std::uint32_t>(in, where);
  const auto dim = get<std::uint32_t>(in, where);
  e.fps = get<double>(in, where);
  if (n_frames == 0 || dim == 0) throw DataError(where + ": empty embedding matrix");
  if (!(e.fps > 0.0) || !std::isfinite(e.fps)) throw DataError(where + ": invalid fps");
  if (expected_dim > 0 && dim != static_cast<std::uint32_t>(expected_dim)) {
    throw DataError(where + ": embedding dim " + std::to_string(dim) + ", expected " +
                    std::to_string(expected_dim));
  }
  std::vector<float> values(static_cast<std::size_t>(n_frames) * dim);
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(float)))) {
    throw DataError(where + ": truncated embedding file");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(where + ": trailing bytes after embedding matrix");
  }
  e.frames.resize(dim, n_frames);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError(where + ": non-finite value at frame " + std::to_string(i / dim));
    }
    e.frames.data()[i] = values[i];
  }
  return e;
}

}  // namespace weldad::video

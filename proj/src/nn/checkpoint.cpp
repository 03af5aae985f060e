#include "weldad/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "weldad/error.hpp"

namespace weldad::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'W', 'E', 'L', 'D', 'A', 'D', 'C', 'K'};
constexpr std::uint32_t kMaxStringBytes = 1u << 24;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f32(std::ostream& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw DataError("checkpoint: unexpected end of file");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, b, 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

std::string get_string(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > kMaxStringBytes) throw DataError("checkpoint: string field too long");
  std::string s(n, '\0');
  if (n > 0) read_exact(in, s.data(), n);
  return s;
}

std::vector<std::uint32_t> expected_shape(const Parameter& p, BlobLayout layout,
                                          int k) {
  const auto rows = static_cast<std::uint32_t>(p.value.rows());
  const auto cols = static_cast<std::uint32_t>(p.value.cols());
  switch (layout) {
    case BlobLayout::kVector: return {rows};
    case BlobLayout::kMatrix: return {rows, cols};
    case BlobLayout::kConv:
      return {rows, cols / static_cast<std::uint32_t>(k),
              static_cast<std::uint32_t>(k)};
    case BlobLayout::kConvTranspose:
      return {cols / static_cast<std::uint32_t>(k), rows,
              static_cast<std::uint32_t>(k)};
  }
  return {};
}

// Row-major flat index of Parameter entry (r, c) under the given layout.
std::size_t flat_index(BlobLayout layout, Eigen::Index r, Eigen::Index c,
                       Eigen::Index rows, Eigen::Index cols, int k) {
  switch (layout) {
    case BlobLayout::kVector: return static_cast<std::size_t>(r);
    case BlobLayout::kMatrix: return static_cast<std::size_t>(r * cols + c);
    case BlobLayout::kConv: {
      const Eigen::Index in = cols / k;
      const Eigen::Index tap = c / in;
      const Eigen::Index i = c % in;
      return static_cast<std::size_t>((r * in + i) * k + tap);
    }
    case BlobLayout::kConvTranspose: {
      const Eigen::Index in = cols / k;
      const Eigen::Index tap = c / in;
      const Eigen::Index i = c % in;
      return static_cast<std::size_t>((i * rows + r) * k + tap);
    }
  }
  return 0;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, ckpt.format_version);
  put_string(out, ckpt.architecture);
  put_string(out, ckpt.config_json);
  put_u64(out, ckpt.seed);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const TensorBlob& t : ckpt.tensors) {
    std::size_t count = 1;
    for (std::uint32_t d : t.shape) count *= d;
    if (count != t.values.size()) {
      throw DataError("checkpoint: tensor " + t.name + " shape/value mismatch");
    }
    put_string(out, t.name);
    const char kind = t.trainable ? 1 : 0;
    out.write(&kind, 1);
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::uint32_t d : t.shape) put_u32(out, d);
    for (float v : t.values) put_f32(out, v);
  }
  if (!out) throw DataError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  read_exact(in, magic.data(), magic.size());
  if (magic != kMagic) throw DataError("checkpoint: bad magic");
  Checkpoint ckpt;
  ckpt.format_version = get_u32(in);
  if (ckpt.format_version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " +
                    std::to_string(ckpt.format_version));
  }
  ckpt.architecture = get_string(in);
  ckpt.config_json = get_string(in);
  ckpt.seed = get_u64(in);
  const std::uint32_t n = get_u32(in);
  for (std::uint32_t t = 0; t < n; ++t) {
    TensorBlob blob;
    blob.name = get_string(in);
    char kind = 0;
    read_exact(in, &kind, 1);
    if (kind != 0 && kind != 1) throw DataError("checkpoint: bad tensor kind");
    blob.trainable = kind == 1;
    const std::uint32_t rank = get_u32(in);
    if (rank == 0 || rank > 8) throw DataError("checkpoint: bad tensor rank");
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      blob.shape.push_back(get_u32(in));
      count *= blob.shape.back();
      if (count > (1ull << 34)) throw DataError("checkpoint: tensor too large");
    }
    blob.values.resize(count);
    for (float& v : blob.values) v = std::bit_cast<float>(get_u32(in));
    ckpt.tensors.push_back(std::move(blob));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

TensorBlob pack(const Parameter& p, BlobLayout layout, int kernel_size) {
  TensorBlob blob;
  blob.name = p.name;
  blob.trainable = p.trainable;
  blob.shape = expected_shape(p, layout, kernel_size);
  blob.values.resize(static_cast<std::size_t>(p.value.size()));
  for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      blob.values[flat_index(layout, r, c, p.value.rows(), p.value.cols(),
                             kernel_size)] = static_cast<float>(p.value(r, c));
    }
  }
  return blob;
}

void unpack(const TensorBlob& blob, Parameter& p, BlobLayout layout,
            int kernel_size) {
  if (blob.name != p.name) {
    throw DataError("checkpoint: expected tensor " + p.name + ", found " +
                    blob.name);
  }
  if (blob.shape != expected_shape(p, layout, kernel_size) ||
      blob.values.size() != static_cast<std::size_t>(p.value.size())) {
    throw DataError("checkpoint: shape mismatch for tensor " + p.name);
  }
  for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      p.value(r, c) = static_cast<double>(blob.values[flat_index(
          layout, r, c, p.value.rows(), p.value.cols(), kernel_size)]);
    }
  }
  check_finite(p.value, "checkpoint tensor " + p.name);
}

}  // namespace weldad::nn

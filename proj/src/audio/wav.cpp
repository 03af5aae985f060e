#include "weldad/audio/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "weldad/error.hpp"

namespace weldad::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put16(std::ofstream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

WavData read_wav(const std::filesystem::path& path, std::optional<int> channel) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = "wav " + path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError(where + "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(hdr, "data", 4) != 0) {
      throw DataError(where + "truncated chunk");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(where + "short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw DataError(where + "short extensible fmt chunk");
        format = le16(f + 24);  // first two bytes of the subformat GUID
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }

  if (channels == 0 || rate == 0) throw DataError(where + "missing fmt chunk");
  if (data == nullptr) throw DataError(where + "missing data chunk");

  SampleFormat sf;
  if (format == kFormatPcm && bits == 16) {
    sf = SampleFormat::kPcm16;
  } else if (format == kFormatPcm && bits == 24) {
    sf = SampleFormat::kPcm24;
  } else if (format == kFormatPcm && bits == 32) {
    sf = SampleFormat::kPcm32;
  } else if (format == kFormatFloat && bits == 32) {
    sf = SampleFormat::kFloat32;
  } else {
    throw DataError(where + "unsupported sample format (format " +
                    std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }

  int ch = 0;
  if (channels > 1) {
    if (!channel) {
      throw DataError(where + std::to_string(channels) +
                      " channels; select one channel explicitly");
    }
    ch = *channel;
  } else if (channel) {
    ch = *channel;
  }
  if (ch < 0 || ch >= channels) {
    throw DataError(where + "channel " + std::to_string(ch) + " out of range");
  }

  const std::size_t width = bits / 8;
  const std::size_t frame_bytes = width * channels;
  const std::size_t n = data_size / frame_bytes;

  WavData wav;
  wav.sample_rate = static_cast<double>(rate);
  wav.source_channels = channels;
  wav.source_format = sf;
  wav.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* s = data + i * frame_bytes + static_cast<std::size_t>(ch) * width;
    float v = 0.0f;
    switch (sf) {
      case SampleFormat::kPcm16:
        v = static_cast<float>(static_cast<std::int16_t>(le16(s))) / 32768.0f;
        break;
      case SampleFormat::kPcm24: {
        std::int32_t x = static_cast<std::int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
        if (x & 0x800000) x -= 0x1000000;
        v = static_cast<float>(x) / 8388608.0f;
        break;
      }
      case SampleFormat::kPcm32:
        v = static_cast<float>(static_cast<double>(static_cast<std::int32_t>(le32(s))) /
                               2147483648.0);
        break;
      case SampleFormat::kFloat32:
        v = std::bit_cast<float>(le32(s));
        break;
    }
    wav.samples[i] = v;
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               std::uint32_t sample_rate, SampleFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("wav: cannot open " + path.string() + " for writing");
  std::uint16_t bits = 32;
  std::uint16_t tag = kFormatFloat;
  switch (format) {
    case SampleFormat::kPcm16: bits = 16; tag = kFormatPcm; break;
    case SampleFormat::kPcm24: bits = 24; tag = kFormatPcm; break;
    case SampleFormat::kPcm32: bits = 32; tag = kFormatPcm; break;
    case SampleFormat::kFloat32: bits = 32; tag = kFormatFloat; break;
  }
  const std::uint32_t width = bits / 8u;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * width);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(out, 16);
  put16(out, tag);
  put16(out, 1);
  put32(out, sample_rate);
  put32(out, sample_rate * width);
  put16(out, static_cast<std::uint16_t>(width));
  put16(out, bits);
  out.write("data", 4);
  put32(out, data_bytes);
  for (float v : samples) {
    const double c = std::clamp(static_cast<double>(v), -1.0, 1.0);
    switch (format) {
      case SampleFormat::kPcm16:
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(
                       std::lround(std::min(c * 32768.0, 32767.0)))));
        break;
      case SampleFormat::kPcm24: {
        const auto x = static_cast<std::int32_t>(std::lround(std::min(c * 8388608.0, 8388607.0)));
        const auto u = static_cast<std::uint32_t>(x);
        const unsigned char b[3] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                    static_cast<unsigned char>(u >> 16)};
        out.write(reinterpret_cast<const char*>(b), 3);
        break;
      }
      case SampleFormat::kPcm32:
        put32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(
                       std::llround(std::min(c * 2147483648.0, 2147483647.0)))));
        break;
      case SampleFormat::kFloat32:
        put32(out, std::bit_cast<std::uint32_t>(v));
        break;
    }
  }
  if (!out) throw DataError("wav: write failed for " + path.string());
}

}  // namespace weldad::audio

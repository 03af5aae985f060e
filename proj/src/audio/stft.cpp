#include "weldad/audio/stft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <string>

#include "weldad/error.hpp"
#include "weldad/json_util.hpp"

namespace weldad::audio {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::string_view to_string(WindowKind kind) {
  return kind == WindowKind::kHann ? "hann" : "rectangular";
}

WindowKind window_from_string(std::string_view name) {
  if (name == "hann") return WindowKind::kHann;
  if (name == "rectangular" || name == "rect") return WindowKind::kRectangular;
  throw ConfigError("unknown window function: " + std::string(name));
}

void to_json(nlohmann::json& j, const StftConfig& c) {
  j = {{"sample_rate", c.sample_rate},
       {"fft_window", c.fft_window},
       {"hop_length", c.hop_length},
       {"window", to_string(c.window)},
       {"log_magnitude", c.log_magnitude}};
}

void from_json(const nlohmann::json& j, StftConfig& c) {
  require_keys_subset(j, {"sample_rate", "fft_window", "hop_length", "window", "log_magnitude"},
                      "stft");
  read_optional(j, "sample_rate", c.sample_rate);
  read_optional(j, "fft_window", c.fft_window);
  read_optional(j, "hop_length", c.hop_length);
  std::string window(to_string(c.window));
  read_optional(j, "window", window);
  c.window = window_from_string(window);
  read_optional(j, "log_magnitude", c.log_magnitude);
}

void StftConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("stft: sample_rate must be positive");
  if (fft_window <= 0 || hop_length <= 0) {
    throw ConfigError("stft: fft_window and hop_length must be positive");
  }
  if (fft_window % hop_length != 0) {
    throw ConfigError("stft: fft_window " + std::to_string(fft_window) +
                      " is not an integer multiple of hop_length " +
                      std::to_string(hop_length));
  }
}

bool StftConfig::on_grid() const {
  return std::find(kGridFftWindows.begin(), kGridFftWindows.end(),
                   fft_window) != kGridFftWindows.end();
}

std::int64_t frame_count(std::int64_t n_samples, const StftConfig& config) {
  config.validate();
  if (n_samples < config.fft_window) return 0;
  return (n_samples - config.fft_window) / config.hop_length + 1;
}

std::int64_t buffer_size(std::int64_t hop_length, std::int64_t fft_window) {
  if (hop_length <= 0 || fft_window <= 0) {
    throw ConfigError("buffer_size: hop and fft window must be positive");
  }
  if (fft_window % hop_length != 0) {
    throw ConfigError("buffer_size: fft window must be an integer multiple of hop");
  }
  return hop_length * (10 + fft_window / hop_length);
}

double model_latency_ms(std::int64_t hop_length, double sample_rate) {
  if (hop_length <= 0 || !(sample_rate > 0.0)) {
    throw ConfigError("model_latency_ms: inputs must be positive");
  }
  return 1000.0 * static_cast<double>(hop_length) / sample_rate;
}

// ---------------------------------------------------------- FrameTransform

struct FrameTransform::Impl {
  StftConfig config;
  std::vector<double> window;
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  explicit Impl(const StftConfig& c) : config(c) {
    config.validate();
    const int n = config.fft_window;
    window.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      window[static_cast<std::size_t>(i)] =
          config.window == WindowKind::kHann
              ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n)
              : 1.0;
    }
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    in = fftw_alloc_real(static_cast<std::size_t>(n));
    out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    if (in == nullptr || out == nullptr) throw std::bad_alloc();
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    if (plan == nullptr) throw Error("stft: FFT planning failed");
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (plan != nullptr) fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

FrameTransform::FrameTransform(const StftConfig& config)
    : impl_(std::make_unique<Impl>(config)) {}
FrameTransform::~FrameTransform() = default;
FrameTransform::FrameTransform(FrameTransform&&) noexcept = default;
FrameTransform& FrameTransform::operator=(FrameTransform&&) noexcept = default;

const StftConfig& FrameTransform::config() const { return impl_->config; }

void FrameTransform::compute(std::span<const float> frame, nn::Vector& out) {
  const int n = impl_->config.fft_window;
  if (frame.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("stft: frame length " + std::to_string(frame.size()) +
                     " != fft window " + std::to_string(n));
  }
  for (int i = 0; i < n; ++i) {
    const double v = static_cast<double>(frame[static_cast<std::size_t>(i)]);
    impl_->in[i] = v * impl_->window[static_cast<std::size_t>(i)];
  }
  fftw_execute(impl_->plan);
  const int bins = n / 2 + 1;
  out.resize(bins);
  for (int k = 0; k < bins; ++k) {
    const double re = impl_->out[k][0];
    const double im = impl_->out[k][1];
    const double mag = std::sqrt(re * re + im * im);
    out[k] = impl_->config.log_magnitude ? std::log1p(mag) : mag;
  }
}

Spectrogram stft_magnitude(std::span<const float> signal,
                           const StftConfig& config) {
  config.validate();
  const auto n = static_cast<std::int64_t>(signal.size());
  if (n < config.fft_window) {
    throw ShapeError("stft: signal of " + std::to_string(n) +
                     " samples is shorter than one window (" +
                     std::to_string(config.fft_window) + ")");
  }
  for (float v : signal) {
    if (!std::isfinite(v)) throw NumericError("stft: non-finite sample");
  }
  const std::int64_t frames = frame_count(n, config);
  FrameTransform transform(config);
  Spectrogram spec;
  spec.config = config;
  spec.magnitudes.resize(config.n_bins(), frames);
  nn::Vector column;
  for (std::int64_t f = 0; f < frames; ++f) {
    transform.compute(
        signal.subspan(static_cast<std::size_t>(f * config.hop_length),
                       static_cast<std::size_t>(config.fft_window)),
        column);
    spec.magnitudes.col(f) = column;
  }
  return spec;
}

// ---------------------------------------------------------- StreamingStft

StreamingStft::StreamingStft(const StftConfig& config, std::size_t capacity)
    : config_(config), transform_(config) {
  const auto required = static_cast<std::size_t>(
      buffer_size(config.hop_length, config.fft_window));
  if (capacity == 0) capacity = required;
  if (capacity < required) {
    throw ConfigError("stream: ring capacity " + std::to_string(capacity) +
                      " below required buffer size " + std::to_string(required));
  }
  ring_.assign(capacity, 0.0f);
  scratch_.resize(static_cast<std::size_t>(config.fft_window));
}

StreamingStft::PushResult StreamingStft::push(std::span<const float> samples) {
  const std::size_t free_space = ring_.size() - buffered();
  const std::size_t take = std::min(free_space, samples.size());
  for (std::size_t i = 0; i < take; ++i) {
    if (!std::isfinite(samples[i])) throw NumericError("stream: non-finite sample");
    ring_[static_cast<std::size_t>(end_ % static_cast<std::int64_t>(ring_.size()))] =
        samples[i];
    ++end_;
  }
  return {take, take < samples.size()};
}

std::size_t StreamingStft::frames_ready() const {
  const std::int64_t next_start = next_frame_index_ * config_.hop_length;
  const std::int64_t available = end_ - next_start;
  if (available < config_.fft_window) return 0;
  return static_cast<std::size_t>((available - config_.fft_window) /
                                  config_.hop_length + 1);
}

std::optional<nn::Vector> StreamingStft::next_frame() {
  if (frames_ready() == 0) return std::nullopt;
  const std::int64_t start = next_frame_index_ * config_.hop_length;
  const auto cap = static_cast<std::int64_t>(ring_.size());
  for (std::int64_t i = 0; i < config_.fft_window; ++i) {
    scratch_[static_cast<std::size_t>(i)] =
        ring_[static_cast<std::size_t>((start + i) % cap)];
  }
  nn::Vector out;
  transform_.compute(scratch_, out);
  ++next_frame_index_;
  base_ = std::max(base_, next_frame_index_ * config_.hop_length);
  base_ = std::min(base_, end_);
  return out;
}

// ------------------------------------------------------- spectrogram cache

namespace {

constexpr char kSpecMagic[8] = {'W', 'E', 'L', 'D', 'S', 'P', 'E', 'C'};

template <typename T>
void put_le(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::uint8_t>>;
  U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const auto byte = static_cast<char>(static_cast<unsigned char>(u & 0xFF));
    out.put(byte);
    if constexpr (sizeof(T) > 1) u >>= 8;
  }
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::uint8_t>>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw DataError("spectrogram cache: unexpected end of file");
    u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(c)) << (8 * i));
  }
  return std::bit_cast<T>(u);
}

}  // namespace

void save_spectrogram(const std::filesystem::path& path, const Spectrogram& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("spectrogram cache: cannot open " + path.string());
  out.write(kSpecMagic, 8);
  put_le<std::uint32_t>(out, 1);
  put_le<double>(out, s.config.sample_rate);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.config.fft_window));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.config.hop_length));
  put_le<std::uint8_t>(out, s.config.window == WindowKind::kHann ? 0 : 1);
  put_le<std::uint8_t>(out, s.config.log_magnitude ? 1 : 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.n_bins()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.n_frames()));
  for (Eigen::Index f = 0; f < s.magnitudes.cols(); ++f) {
    for (Eigen::Index b = 0; b < s.magnitudes.rows(); ++b) {
      put_le<float>(out, static_cast<float>(s.magnitudes(b, f)));
    }
  }
  if (!out) throw DataError("spectrogram cache: write failed");
}

Spectrogram load_spectrogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("spectrogram cache: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kSpecMagic, 8) != 0) {
    throw DataError("spectrogram cache: bad magic in " + path.string());
  }
  if (get_le<std::uint32_t>(in) != 1) {
    throw DataError("spectrogram cache: unsupported version");
  }
  Spectrogram s;
  s.config.sample_rate = get_le<double>(in);
  s.config.fft_window = static_cast<int>(get_le<std::uint32_t>(in));
  s.config.hop_length = static_cast<int>(get_le<std::uint32_t>(in));
  const auto window = get_le<std::uint8_t>(in);
  if (window > 1) throw DataError("spectrogram cache: bad window id");
  s.config.window = window == 0 ? WindowKind::kHann : WindowKind::kRectangular;
  s.config.log_magnitude = get_le<std::uint8_t>(in) != 0;
  s.config.validate();
  const auto bins = get_le<std::uint32_t>(in);
  const auto frames = get_le<std::uint32_t>(in);
  if (bins != static_cast<std::uint32_t>(s.config.n_bins())) {
    throw DataError("spectrogram cache: bin count does not match fft window");
  }
  s.magnitudes.resize(bins, frames);
  for (std::uint32_t f = 0; f < frames; ++f) {
    for (std::uint32_t b = 0; b < bins; ++b) {
      s.magnitudes(b, f) = static_cast<double>(get_le<float>(in));
    }
  }
  return s;
}

}  // namespace weldad::audio

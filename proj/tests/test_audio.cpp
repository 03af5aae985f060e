#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "weldad/audio/autoencoder.hpp"
#include "weldad/audio/stft.hpp"
#include "weldad/audio/wav.hpp"
#include "weldad/error.hpp"

using namespace weldad;
using namespace weldad::audio;
using nn::Matrix;

namespace fs = std::filesystem;

namespace {

std::vector<float> random_signal(Rng& rng, std::size_t n) {
  std::vector<float> s(n);
  for (float& v : s) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return s;
}

// O(n^2) DFT magnitude of one rectangular-window frame.
std::vector<double> naive_dft(const std::vector<float>& x) {
  const std::size_t n = x.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc;
    for (std::size_t t = 0; t < n; ++t) {
      acc += static_cast<double>(x[t]) *
             std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / n);
    }
    mag[k] = std::abs(acc);
  }
  return mag;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("weldad_test_" + name);
}

AudioAeConfig tiny_config() {
  AudioAeConfig c;
  c.n_bins = 5;
  c.width = 7;
  c.bottleneck = 2;
  return c;
}

}  // namespace

TEST_CASE("frame count, buffer size, latency") {
  StftConfig cfg;
  CHECK(frame_count(192000, cfg) == 22);
  CHECK(frame_count(16383, cfg) == 0);
  CHECK(buffer_size(8192, 16384) == 12 * 8192);
  CHECK(buffer_size(512, 512) == 11 * 512);
  CHECK(buffer_size(32768, 65536) == 393216);
  CHECK_THROWS_AS(buffer_size(3000, 16384), ConfigError);
  CHECK(model_latency_ms(8192, 192000) == doctest::Approx(42.6667).epsilon(1e-4));
  CHECK(model_latency_ms(48000, 48000) == 1000.0);
  CHECK(model_latency_ms(2048, 192000) == doctest::Approx(10.6667).epsilon(1e-4));

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    StftConfig c;
    c.hop_length = 1 + static_cast<int>(rng.below(64));
    c.fft_window = c.hop_length * (1 + static_cast<int>(rng.below(8)));
    const auto n = static_cast<std::int64_t>(rng.below(5000));
    std::int64_t brute = 0;
    while (brute * c.hop_length + c.fft_window <= n) ++brute;
    CHECK(frame_count(n, c) == brute);
  }
  StftConfig bad;
  bad.hop_length = 5000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("stft against a naive DFT") {
  StftConfig cfg;
  cfg.sample_rate = 1024;
  cfg.fft_window = 64;
  cfg.hop_length = 32;
  cfg.window = WindowKind::kRectangular;

  SUBCASE("zero signal") {
    const std::vector<float> zeros(300, 0.0f);
    CHECK(stft_magnitude(zeros, cfg).magnitudes.isZero());
  }
  SUBCASE("on-bin sine concentrates in one bin") {
    const int k = 5;
    std::vector<float> s(64);
    for (int t = 0; t < 64; ++t) {
      s[t] = static_cast<float>(std::sin(2.0 * std::numbers::pi * k * t / 64.0));
    }
    const Spectrogram spec = stft_magnitude(s, cfg);
    const double peak = spec.magnitudes(k, 0);
    CHECK(peak == doctest::Approx(32.0).epsilon(1e-6));
    for (int b = 0; b < spec.n_bins(); ++b) {
      if (b != k) CHECK(spec.magnitudes(b, 0) < 1e-6 * peak);
    }
  }
  SUBCASE("random frames and Parseval") {
    Rng rng(1);
    const std::vector<float> s = random_signal(rng, 64 + 3 * 32);
    const Spectrogram spec = stft_magnitude(s, cfg);
    REQUIRE(spec.n_frames() == 4);
    for (int f = 0; f < 4; ++f) {
      const std::vector<float> frame(s.begin() + f * 32, s.begin() + f * 32 + 64);
      const std::vector<double> ref = naive_dft(frame);
      double energy = 0.0, spectral = 0.0;
      for (float v : frame) energy += static_cast<double>(v) * v;
      for (int b = 0; b < spec.n_bins(); ++b) {
        CHECK(spec.magnitudes(b, f) == doctest::Approx(ref[b]).epsilon(1e-10));
        const double m2 = spec.magnitudes(b, f) * spec.magnitudes(b, f);
        spectral += (b == 0 || b == 32) ? m2 : 2.0 * m2;
      }
      CHECK(std::abs(spectral / 64.0 - energy) < 1e-9 * energy);
    }
  }
  SUBCASE("errors") {
    const std::vector<float> short_signal(63, 0.0f);
    CHECK_THROWS_AS(stft_magnitude(short_signal, cfg), ShapeError);
    std::vector<float> nan_signal(64, 0.0f);
    nan_signal[3] = std::nanf("");
    CHECK_THROWS_AS(stft_magnitude(nan_signal, cfg), NumericError);
  }
}

TEST_CASE("streaming stft equals offline stft") {
  StftConfig cfg;
  cfg.sample_rate = 8000;
  cfg.fft_window = 128;
  cfg.hop_length = 64;
  Rng rng(2);
  const std::vector<float> s = random_signal(rng, 128 + 3 * 64 + 17);
  const Spectrogram offline = stft_magnitude(s, cfg);
  REQUIRE(offline.n_frames() == 4);

  StreamingStft stream(cfg);
  CHECK(stream.capacity() == static_cast<std::size_t>(buffer_size(64, 128)));
  std::vector<nn::Vector> frames;
  for (float v : s) {
    const auto r = stream.push(std::span<const float>(&v, 1));
    CHECK(r.accepted == 1);
    while (auto f = stream.next_frame()) frames.push_back(*f);
  }
  REQUIRE(frames.size() == 4);
  for (int f = 0; f < 4; ++f) CHECK(frames[f] == offline.magnitudes.col(f));

  SUBCASE("one window gives one frame") {
    StreamingStft one(cfg);
    one.push(std::span<const float>(s.data(), 128));
    CHECK(one.frames_ready() == 1);
  }
  SUBCASE("overrun is reported, never silent") {
    const std::vector<float> long_signal = random_signal(rng, 128 + 30 * 64);
    const Spectrogram ref = stft_magnitude(long_signal, cfg);
    StreamingStft small(cfg);
    auto r = small.push(long_signal);
    CHECK(r.overrun);
    CHECK(r.accepted == small.capacity());
    std::size_t offset = r.accepted;
    std::vector<nn::Vector> got;
    while (offset < long_signal.size()) {
      while (auto f = small.next_frame()) got.push_back(*f);
      r = small.push(std::span<const float>(long_signal).subspan(offset));
      offset += r.accepted;
    }
    while (auto f = small.next_frame()) got.push_back(*f);
    REQUIRE(static_cast<int>(got.size()) == ref.n_frames());
    for (int f = 0; f < ref.n_frames(); ++f) CHECK(got[f] == ref.magnitudes.col(f));
  }
  CHECK_THROWS_AS(StreamingStft(cfg, 64), ConfigError);
}

TEST_CASE("wav round trip") {
  Rng rng(3);
  const std::vector<float> s = random_signal(rng, 1000);
  for (auto fmt : {SampleFormat::kFloat32, SampleFormat::kPcm16, SampleFormat::kPcm24,
                   SampleFormat::kPcm32}) {
    const fs::path p = temp_path("rt.wav");
    write_wav(p, s, 48000, fmt);
    const WavData w = read_wav(p);
    CHECK(w.sample_rate == 48000.0);
    CHECK(w.source_format == fmt);
    REQUIRE(w.samples.size() == s.size());
    const double tol = fmt == SampleFormat::kPcm16 ? 1.0 / 32768 : 1e-6;
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(w.samples[i] - s[i]) <= tol);
    fs::remove(p);
  }
  CHECK_THROWS_AS(read_wav(temp_path("missing.wav")), DataError);
}

TEST_CASE("spectrogram cache round trip") {
  Rng rng(4);
  StftConfig cfg;
  cfg.fft_window = 256;
  cfg.hop_length = 128;
  cfg.log_magnitude = true;
  const Spectrogram spec = stft_magnitude(random_signal(rng, 2000), cfg);
  const fs::path p = temp_path("spec.bin");
  save_spectrogram(p, spec);
  const Spectrogram back = load_spectrogram(p);
  CHECK(back.config == cfg);
  CHECK(back.magnitudes.cast<float>() == spec.magnitudes.cast<float>());
  fs::remove(p);
}

TEST_CASE("audio autoencoder structure") {
  CHECK(audio_ae_param_count(tiny_config()) == 1250);
  AudioAutoencoder model(tiny_config(), 1);
  CHECK(model.param_count() == 1250);

  const auto arch = model.architecture();
  REQUIRE(arch.size() == 20);
  CHECK(arch.front().kind == nn::LayerKind::kBatchNorm1d);
  CHECK(arch[arch.size() - 2].kind == nn::LayerKind::kPReLU);
  CHECK(arch.back().kind == nn::LayerKind::kConvTranspose1d);
  for (const auto& l : arch) {
    if (l.kind == nn::LayerKind::kConv1d || l.kind == nn::LayerKind::kConvTranspose1d) {
      CHECK(l.kernel_size == 3);
      CHECK(l.stride == 1);
    }
  }

  AudioAeConfig no_affine = tiny_config();
  no_affine.input_norm_affine = false;
  CHECK(audio_ae_param_count(no_affine) == 1240);

  AudioAeConfig bad = tiny_config();
  bad.bottleneck = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(AudioAutoencoder(bad, 0), ConfigError);
}

TEST_CASE("audio autoencoder shape contract") {
  AudioAutoencoder model(tiny_config(), 2);
  model.set_mode(nn::Mode::kEval);
  Rng rng(6);
  for (int t : {11, 12, 32, 64}) {
    const auto tr = model.trace(testing::random_matrix(rng, 5, t));
    CHECK(tr.output.cols() == t);
    CHECK(tr.output.rows() == 5);
    CHECK(tr.bottleneck.cols() == t - 10);
    CHECK(tr.bottleneck.rows() == 2);
  }
  CHECK_THROWS_AS(model.trace(testing::random_matrix(rng, 5, 10)), ShapeError);
  CHECK_THROWS_AS(model.forward({testing::random_matrix(rng, 5, 10)}), ShapeError);
  CHECK_THROWS_AS(model.trace(testing::random_matrix(rng, 4, 20)), ShapeError);
}

TEST_CASE("audio autoencoder gradient") {
  AudioAeConfig c = tiny_config();
  c.n_bins = 3;
  c.width = 4;
  AudioAutoencoder model(c, 3);
  Rng rng(7);
  nn::Batch x = testing::random_batch(rng, 2, 3, 12);
  nn::Batch w;
  const nn::Batch y = model.forward(x);
  for (const Matrix& m : y) w.push_back(testing::random_matrix(rng, m.rows(), m.cols()));
  for (auto* p : model.parameters()) p->zero_grad();
  model.backward(w);
  auto loss = [&] { return testing::probe(model.forward(x), w); };
  double worst = 0.0;
  for (auto* p : model.parameters()) {
    if (!p->trainable) continue;
    const Matrix analytic = p->grad;
    worst = std::max(worst, testing::max_rel_error(analytic, testing::numeric_grad(p->value, loss)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("frame scorer matches the batched reconstruction") {
  AudioAeConfig c = tiny_config();
  AudioAutoencoder model(c, 4);
  model.set_mode(nn::Mode::kEval);
  Rng rng(8);
  model.parameters()[2]->value = testing::random_matrix(rng, 5, 1) * 0.1;  // running mean
  model.parameters()[3]->value = testing::random_matrix(rng, 5, 1).cwiseAbs().array() + 0.5;

  for (int t : {11, 12, 25, 64}) {
    Spectrogram spec;
    spec.config.fft_window = 8;
    spec.config.hop_length = 4;
    spec.magnitudes = testing::random_matrix(rng, 5, t).cwiseAbs();
    const scoring::ScoreSeries s = audio_frame_scores(model, spec, "x");
    REQUIRE(static_cast<int>(s.scores.size()) == t);
    const Matrix rec = model.reconstruct(spec.magnitudes);
    for (int f = 0; f < t; ++f) {
      const double ref = (rec.col(f) - spec.magnitudes.col(f)).squaredNorm() / 5.0;
      CHECK(s.scores[f] == doctest::Approx(ref).epsilon(1e-9));
      CHECK(s.scores[f] >= 0.0);
    }
  }

  SUBCASE("scores become final ten frames late") {
    AudioFrameScorer scorer(model);
    std::vector<double> out;
    for (int f = 0; f < 15; ++f) {
      scorer.push(testing::random_matrix(rng, 5, 1).col(0), out);
      CHECK(static_cast<int>(out.size()) == std::max(0, f + 1 - 10));
    }
    scorer.finish(out);
    CHECK(out.size() == 15);
    CHECK_THROWS_AS(scorer.finish(out), StateError);
  }
  SUBCASE("too short") {
    Spectrogram spec;
    spec.magnitudes = Matrix::Ones(5, 10);
    CHECK_THROWS_AS(audio_frame_scores(model, spec), ShapeError);
  }
}

TEST_CASE("zero reconstruction of a zero spectrogram scores zero") {
  AudioAutoencoder model(tiny_config(), 5);
  for (auto* p : model.parameters()) {
    if (p->name.rfind("input_norm.running_var", 0) == 0) continue;
    if (p->name == "input_norm.weight") continue;
    p->value.setZero();
  }
  model.set_mode(nn::Mode::kEval);
  Spectrogram spec;
  spec.magnitudes = Matrix::Zero(5, 20);
  for (double v : audio_frame_scores(model, spec).scores) CHECK(v == 0.0);
}

TEST_CASE("checkpoint round trip keeps scores bit-identical") {
  AudioAutoencoder model(tiny_config(), 6);
  model.set_mode(nn::Mode::kEval);
  const nn::Checkpoint ckpt = model.to_checkpoint();
  const AudioAutoencoder back = AudioAutoencoder::from_checkpoint(ckpt);
  CHECK(back.config() == model.config());
  CHECK(back.to_checkpoint() == ckpt);
  Rng rng(9);
  Spectrogram spec;
  spec.magnitudes = testing::random_matrix(rng, 5, 30).cwiseAbs();
  CHECK(audio_frame_scores(back, spec).scores == audio_frame_scores(model, spec).scores);
}

namespace {

std::vector<Spectrogram> tone_corpus(int n, Rng& rng) {
  StftConfig cfg;
  cfg.sample_rate = 8000;
  cfg.fft_window = 64;
  cfg.hop_length = 32;
  std::vector<Spectrogram> out;
  for (int i = 0; i < n; ++i) {
    const double f0 = 500.0 + 20.0 * rng.uniform();
    std::vector<float> s(32 * 40 + 64);
    for (std::size_t t = 0; t < s.size(); ++t) {
      s[t] = static_cast<float>(0.5 * std::sin(2 * std::numbers::pi * f0 * t / 8000.0) +
                                0.01 * rng.normal());
    }
    out.push_back(stft_magnitude(s, cfg));
  }
  return out;
}

}  // namespace

TEST_CASE("audio training") {
  Rng rng(10);
  const std::vector<Spectrogram> corpus = tone_corpus(8, rng);
  std::vector<AudioTrainingItem> items;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    items.push_back({"s" + std::to_string(i), data::Label::kGood, &corpus[i]});
  }
  AudioAeConfig c;
  c.n_bins = 33;
  c.width = 16;
  c.bottleneck = 4;
  AudioTrainRecipe recipe;
  recipe.epochs = 50;
  recipe.peak_lr = 3e-3;
  recipe.batch_size = 8;
  recipe.seed = 77;

  AudioAutoencoder a(c, 1), b(c, 1);
  const AudioTrainResult ra = train_audio_ae(a, items, recipe);
  const AudioTrainResult rb = train_audio_ae(b, items, recipe);
  CHECK(ra.final_probe_mse <= 0.5 * ra.initial_probe_mse);
  CHECK(ra.epoch_loss.size() == 50);
  CHECK(a.mode() == nn::Mode::kEval);
  CHECK(a.to_checkpoint() == b.to_checkpoint());
  CHECK(ra.epoch_loss == rb.epoch_loss);

  SUBCASE("zero epochs leaves the model unchanged") {
    AudioAutoencoder m(c, 2);
    const nn::Checkpoint before = m.to_checkpoint();
    AudioTrainRecipe zero = recipe;
    zero.epochs = 0;
    train_audio_ae(m, items, zero);
    CHECK(m.to_checkpoint() == before);
  }
  SUBCASE("defect-labeled data is refused") {
    std::vector<AudioTrainingItem> tainted = items;
    tainted[3].label = data::Label::kDefect;
    AudioAutoencoder m(c, 2);
    CHECK_THROWS_AS(train_audio_ae(m, tainted, recipe), DataError);
  }
  SUBCASE("recipe validation") {
    AudioTrainRecipe r = recipe;
    r.segment_frames = 10;
    CHECK_THROWS_AS(r.validate(), ConfigError);
  }
}

#include "weldad/audio/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "weldad/error.hpp"
#include "weldad/json_util.hpp"
#include "weldad/rng.hpp"

namespace weldad::audio {

using nn::Batch;
using nn::Matrix;
using nn::Vector;

void AudioAeConfig::validate() const {
  if (n_bins <= 0 || width <= 0 || bottleneck <= 0) {
    throw ConfigError("audio ae: n_bins, width and bottleneck must be positive");
  }
  if (bottleneck >= width) {
    throw ConfigError("audio ae: bottleneck " + std::to_string(bottleneck) +
                      " must be smaller than width " + std::to_string(width));
  }
  if (kernel_size != 3 || stride != 1) {
    throw ConfigError("audio ae: kernel_size must be 3 and stride 1");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw ConfigError("audio ae: leaky_slope must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const AudioAeConfig& c) {
  j = nlohmann::json{{"n_bins", c.n_bins},
                     {"width", c.width},
                     {"bottleneck", c.bottleneck},
                     {"kernel_size", c.kernel_size},
                     {"stride", c.stride},
                     {"leaky_slope", c.leaky_slope},
                     {"prelu_init", c.prelu_init},
                     {"input_norm_affine", c.input_norm_affine}};
}

void from_json(const nlohmann::json& j, AudioAeConfig& c) {
  require_keys_subset(j,
                      {"n_bins", "width", "bottleneck", "kernel_size", "stride",
                       "leaky_slope", "prelu_init", "input_norm_affine"},
                      "audio_ae");
  read_optional(j, "n_bins", c.n_bins);
  read_optional(j, "width", c.width);
  read_optional(j, "bottleneck", c.bottleneck);
  read_optional(j, "kernel_size", c.kernel_size);
  read_optional(j, "stride", c.stride);
  read_optional(j, "leaky_slope", c.leaky_slope);
  read_optional(j, "prelu_init", c.prelu_init);
  read_optional(j, "input_norm_affine", c.input_norm_affine);
}

std::int64_t audio_ae_param_count(const AudioAeConfig& c) {
  c.validate();
  const std::int64_t n = c.n_bins, w = c.width, b = c.bottleneck, k = c.kernel_size;
  auto conv = [k](std::int64_t in, std::int64_t out) { return in * out * k + out; };
  const std::int64_t norm = c.input_norm_affine ? 2 * n : 0;
  return norm + conv(n, w) + 3 * conv(w, w) + conv(w, b) + conv(b, w) +
         3 * conv(w, w) + conv(w, n) + 1;
}

// ------------------------------------------------------- AudioAutoencoder

AudioAutoencoder::AudioAutoencoder(const AudioAeConfig& config,
                                   std::uint64_t seed)
    : config_((config.validate(), config)),
      seed_(seed),
      input_norm_(config.n_bins, config.input_norm_affine, "input_norm"),
      prelu_("prelu", config.prelu_init) {
  const int n = config_.n_bins, w = config_.width, b = config_.bottleneck,
            k = config_.kernel_size;
  const int enc_in[kEncoderDepth] = {n, w, w, w, w};
  const int enc_out[kEncoderDepth] = {w, w, w, w, b};
  const int dec_in[kEncoderDepth] = {b, w, w, w, w};
  const int dec_out[kEncoderDepth] = {w, w, w, w, n};
  for (int i = 0; i < kEncoderDepth; ++i) {
    encoder_.emplace_back(enc_in[i], enc_out[i], k, "encoder." + std::to_string(i));
  }
  for (int i = 0; i < kEncoderDepth; ++i) {
    decoder_.emplace_back(dec_in[i], dec_out[i], k, "decoder." + std::to_string(i));
  }
  leaky_.assign(kEncoderDepth + kEncoderDepth - 2, nn::LeakyReLU(config_.leaky_slope));

  Rng rng(derive_seed(seed, "audio_ae.init"));
  for (auto& layer : encoder_) layer.reset_parameters(rng);
  for (auto& layer : decoder_) layer.reset_parameters(rng);
}

std::vector<nn::LayerSpec> AudioAutoencoder::architecture() const {
  std::vector<nn::LayerSpec> specs;
  specs.push_back(input_norm_.spec());
  for (int i = 0; i < kEncoderDepth; ++i) {
    specs.push_back(encoder_[i].spec());
    specs.push_back(leaky_[i].spec());
  }
  for (int i = 0; i < kEncoderDepth; ++i) {
    specs.push_back(decoder_[i].spec());
    if (i < kEncoderDepth - 2) specs.push_back(leaky_[kEncoderDepth + i].spec());
    if (i == kEncoderDepth - 2) specs.push_back(prelu_.spec());
  }
  return specs;
}

std::vector<nn::Parameter*> AudioAutoencoder::parameters() {
  std::vector<nn::Parameter*> out = input_norm_.parameters();
  for (auto& layer : encoder_) {
    for (auto* p : layer.parameters()) out.push_back(p);
  }
  for (auto& layer : decoder_) {
    for (auto* p : layer.parameters()) out.push_back(p);
  }
  out.push_back(&prelu_.slope);
  return out;
}

std::vector<const nn::Parameter*> AudioAutoencoder::parameters() const {
  std::vector<const nn::Parameter*> out;
  for (nn::Parameter* p : const_cast<AudioAutoencoder*>(this)->parameters()) {
    out.push_back(p);
  }
  return out;
}

std::int64_t AudioAutoencoder::param_count() const {
  std::int64_t count = 0;
  for (const nn::Parameter* p : parameters()) {
    if (p->trainable) count += p->size();
  }
  return count;
}

Batch AudioAutoencoder::forward(const Batch& x) {
  for (const Matrix& xi : x) {
    if (xi.cols() < kMinInputFrames) {
      throw ShapeError("audio ae: inputs must have more than " +
                       std::to_string(kMinInputFrames - 1) + " frames, got " +
                       std::to_string(xi.cols()));
    }
  }
  Batch h = input_norm_.forward(x, mode_);
  for (int i = 0; i < kEncoderDepth; ++i) {
    h = leaky_[i].forward(encoder_[i].forward(h));
  }
  for (int i = 0; i < kEncoderDepth; ++i) {
    h = decoder_[i].forward(h);
    if (i < kEncoderDepth - 2) h = leaky_[kEncoderDepth + i].forward(h);
    if (i == kEncoderDepth - 2) h = prelu_.forward(h);
  }
  return h;
}

Batch AudioAutoencoder::backward(const Batch& grad_out) {
  Batch g = grad_out;
  for (int i = kEncoderDepth - 1; i >= 0; --i) {
    if (i == kEncoderDepth - 2) g = prelu_.backward(g);
    if (i < kEncoderDepth - 2) g = leaky_[kEncoderDepth + i].backward(g);
    g = decoder_[i].backward(g);
  }
  for (int i = kEncoderDepth - 1; i >= 0; --i) {
    g = encoder_[i].backward(leaky_[i].backward(g));
  }
  return input_norm_.backward(g);
}

AudioAutoencoder::Trace AudioAutoencoder::trace(const Matrix& x) const {
  if (x.rows() != config_.n_bins) {
    throw ShapeError("audio ae: expected " + std::to_string(config_.n_bins) +
                     " bins, got " + std::to_string(x.rows()));
  }
  if (x.cols() < kMinInputFrames) {
    throw ShapeError("audio ae: inputs must have more than " +
                     std::to_string(kMinInputFrames - 1) + " frames, got " +
                     std::to_string(x.cols()));
  }
  const double slope = config_.leaky_slope;
  auto leaky = [slope](const Matrix& m) {
    return Matrix(m.unaryExpr([slope](double v) { return nn::leaky_relu(v, slope); }));
  };
  Matrix h = x;
  for (Eigen::Index t = 0; t < h.cols(); ++t) {
    Vector col = h.col(t);
    input_norm_.eval_frame(col);
    h.col(t) = col;
  }
  for (int i = 0; i < kEncoderDepth; ++i) h = leaky(encoder_[i].forward(h));
  Trace out;
  out.bottleneck = h;
  const double a = prelu_.a();
  for (int i = 0; i < kEncoderDepth; ++i) {
    h = decoder_[i].forward(h);
    if (i < kEncoderDepth - 2) h = leaky(h);
    if (i == kEncoderDepth - 2) {
      h = h.unaryExpr([a](double v) { return nn::prelu(v, a); });
    }
  }
  out.output = std::move(h);
  return out;
}

nn::Checkpoint AudioAutoencoder::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.architecture = "audio_ae";
  ckpt.config_json = nlohmann::json(config_).dump();
  ckpt.seed = seed_;
  const int k = config_.kernel_size;
  for (const nn::Parameter* p : input_norm_.parameters()) {
    ckpt.tensors.push_back(nn::pack(*p, nn::BlobLayout::kVector));
  }
  for (const auto& layer : encoder_) {
    ckpt.tensors.push_back(nn::pack(layer.weight, nn::BlobLayout::kConv, k));
    ckpt.tensors.push_back(nn::pack(layer.bias, nn::BlobLayout::kVector));
  }
  for (const auto& layer : decoder_) {
    ckpt.tensors.push_back(nn::pack(layer.weight, nn::BlobLayout::kConvTranspose, k));
    ckpt.tensors.push_back(nn::pack(layer.bias, nn::BlobLayout::kVector));
  }
  ckpt.tensors.push_back(nn::pack(prelu_.slope, nn::BlobLayout::kVector));
  return ckpt;
}

AudioAutoencoder AudioAutoencoder::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.architecture != "audio_ae") {
    throw DataError("checkpoint holds \"" + ckpt.architecture +
                    "\", expected \"audio_ae\"");
  }
  AudioAeConfig config;
  try {
    config = nlohmann::json::parse(ckpt.config_json).get<AudioAeConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad architecture config: ") + e.what());
  }
  AudioAutoencoder model(config, ckpt.seed);
  const int k = config.kernel_size;
  std::size_t next = 0;
  auto take = [&]() -> const nn::TensorBlob& {
    if (next >= ckpt.tensors.size()) throw DataError("checkpoint: missing tensors");
    return ckpt.tensors[next++];
  };
  for (nn::Parameter* p : model.input_norm_.parameters()) {
    nn::unpack(take(), *p, nn::BlobLayout::kVector);
  }
  for (auto& layer : model.encoder_) {
    nn::unpack(take(), layer.weight, nn::BlobLayout::kConv, k);
    nn::unpack(take(), layer.bias, nn::BlobLayout::kVector);
  }
  for (auto& layer : model.decoder_) {
    nn::unpack(take(), layer.weight, nn::BlobLayout::kConvTranspose, k);
    nn::unpack(take(), layer.bias, nn::BlobLayout::kVector);
  }
  nn::unpack(take(), model.prelu_.slope, nn::BlobLayout::kVector);
  if (next != ckpt.tensors.size()) throw DataError("checkpoint: trailing tensors");
  model.set_mode(nn::Mode::kEval);
  return model;
}

// -------------------------------------------------------- AudioFrameScorer

AudioFrameScorer::AudioFrameScorer(const AudioAutoencoder& model)
    : model_(model),
      conv_inputs_(kEncoderDepth),
      deconv_inputs_(kEncoderDepth) {}

void AudioFrameScorer::push(const Vector& frame, std::vector<double>& out) {
  if (finished_) throw StateError("audio scorer: push after finish");
  if (frame.size() != model_.config().n_bins) {
    throw ShapeError("audio scorer: expected " +
                     std::to_string(model_.config().n_bins) + " bins, got " +
                     std::to_string(frame.size()));
  }
  nn::check_finite(frame, "audio scorer input");
  pending_inputs_.push_back(frame);
  ++frames_pushed_;
  Vector h = frame;
  model_.input_norm().eval_frame(h);
  feed(0, std::move(h), out);
}

void AudioFrameScorer::feed(std::size_t stage, Vector frame,
                            std::vector<double>& out) {
  const double slope = model_.config().leaky_slope;
  if (stage < static_cast<std::size_t>(kEncoderDepth)) {
    const nn::Conv1d& conv = model_.encoder()[stage];
    auto& window = conv_inputs_[stage];
    window.push_back(std::move(frame));
    if (window.size() < static_cast<std::size_t>(conv.kernel_size())) return;
    const Eigen::Index c = conv.in_channels();
    stacked_.resize(c * conv.kernel_size());
    for (int k = 0; k < conv.kernel_size(); ++k) {
      stacked_.segment(k * c, c) = window[static_cast<std::size_t>(k)];
    }
    window.pop_front();
    Vector y;
    conv.forward_frame(stacked_, y);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = nn::leaky_relu(y[i], slope);
    feed(stage + 1, std::move(y), out);
    return;
  }

  const std::size_t layer = stage - kEncoderDepth;
  const nn::ConvTranspose1d& deconv = model_.decoder()[layer];
  auto& history = deconv_inputs_[layer];  // most recent at back
  const Eigen::Index c = deconv.in_channels();
  const int k = deconv.kernel_size();
  stacked_.resize(c * k);
  stacked_.segment(0, c) = frame;
  for (int tap = 1; tap < k; ++tap) {
    const auto back = static_cast<std::ptrdiff_t>(history.size()) - tap;
    if (back >= 0) {
      stacked_.segment(tap * c, c) = history[static_cast<std::size_t>(back)];
    } else {
      stacked_.segment(tap * c, c).setZero();
    }
  }
  history.push_back(std::move(frame));
  while (history.size() > static_cast<std::size_t>(k - 1)) history.pop_front();

  Vector y;
  deconv.forward_frame(stacked_, y);
  if (layer < static_cast<std::size_t>(kEncoderDepth - 2)) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = nn::leaky_relu(y[i], slope);
  } else if (layer == static_cast<std::size_t>(kEncoderDepth - 2)) {
    model_.output_activation().apply_inplace(y);
  }
  if (layer + 1 < static_cast<std::size_t>(kEncoderDepth)) {
    feed(stage + 1, std::move(y), out);
  } else {
    emit(y, out);
  }
}

void AudioFrameScorer::flush_decoder(std::size_t layer, std::vector<double>& out) {
  const nn::ConvTranspose1d& deconv = model_.decoder()[layer];
  // The transposed convolution's tail: k-1 outputs past the last input.
  for (int i = 0; i < deconv.kernel_size() - 1; ++i) {
    feed(kEncoderDepth + layer, Vector::Zero(deconv.in_channels()), out);
  }
}

void AudioFrameScorer::emit(const Vector& reconstruction,
                            std::vector<double>& out) {
  if (pending_inputs_.empty()) throw StateError("audio scorer: output without input");
  const Vector& target = pending_inputs_.front();
  out.push_back((reconstruction - target).squaredNorm() /
                static_cast<double>(target.size()));
  pending_inputs_.pop_front();
  ++scores_emitted_;
}

void AudioFrameScorer::finish(std::vector<double>& out) {
  if (finished_) throw StateError("audio scorer: finish called twice");
  if (frames_pushed_ < kMinInputFrames) {
    throw ShapeError("audio scorer: inputs must have more than " +
                     std::to_string(kMinInputFrames - 1) + " frames, got " +
                     std::to_string(frames_pushed_));
  }
  finished_ = true;
  for (std::size_t layer = 0; layer < static_cast<std::size_t>(kEncoderDepth); ++layer) {
    flush_decoder(layer, out);
  }
}

scoring::ScoreSeries audio_frame_scores(const AudioAutoencoder& model,
                                        const Spectrogram& spectrogram,
                                        std::string sample_id) {
  if (spectrogram.n_bins() != model.config().n_bins) {
    throw ShapeError("audio scores: spectrogram has " +
                     std::to_string(spectrogram.n_bins()) + " bins, model expects " +
                     std::to_string(model.config().n_bins));
  }
  if (spectrogram.n_frames() < kMinInputFrames) {
    throw ShapeError("audio scores: inputs must have more than " +
                     std::to_string(kMinInputFrames - 1) + " frames, got " +
                     std::to_string(spectrogram.n_frames()));
  }
  scoring::ScoreSeries series;
  series.sample_id = std::move(sample_id);
  series.modality = scoring::Modality::kAudio;
  series.frame_period = spectrogram.config.frame_period();
  series.scores.reserve(static_cast<std::size_t>(spectrogram.n_frames()));
  AudioFrameScorer scorer(model);
  for (Eigen::Index f = 0; f < spectrogram.magnitudes.cols(); ++f) {
    scorer.push(spectrogram.magnitudes.col(f), series.scores);
  }
  scorer.finish(series.scores);
  return series;
}

// ---------------------------------------------------------------- training

void AudioTrainRecipe::validate() const {
  if (epochs < 0) throw ConfigError("audio recipe: epochs must be >= 0");
  if (!(peak_lr > 0.0)) throw ConfigError("audio recipe: peak_lr must be positive");
  if (batch_size <= 0) throw ConfigError("audio recipe: batch_size must be positive");
  if (segment_frames < kMinInputFrames) {
    throw ConfigError("audio recipe: segment_frames must exceed " +
                      std::to_string(kMinInputFrames - 1));
  }
  if (crops_per_sample < 0) throw ConfigError("audio recipe: crops_per_sample must be >= 0");
}

void to_json(nlohmann::json& j, const AudioTrainRecipe& r) {
  j = nlohmann::json{{"epochs", r.epochs},
                     {"peak_lr", r.peak_lr},
                     {"batch_size", r.batch_size},
                     {"segment_frames", r.segment_frames},
                     {"crops_per_sample", r.crops_per_sample},
                     {"seed", r.seed},
                     {"warmup_fraction", r.warmup_fraction},
                     {"initial_divisor", r.initial_divisor},
                     {"final_divisor", r.final_divisor},
                     {"adam_beta1", r.adam.beta1},
                     {"adam_beta2", r.adam.beta2},
                     {"adam_eps", r.adam.eps}};
}

void from_json(const nlohmann::json& j, AudioTrainRecipe& r) {
  require_keys_subset(j,
                      {"epochs", "peak_lr", "batch_size", "segment_frames",
                       "crops_per_sample", "seed", "warmup_fraction",
                       "initial_divisor", "final_divisor", "adam_beta1",
                       "adam_beta2", "adam_eps"},
                      "audio_train");
  read_optional(j, "epochs", r.epochs);
  read_optional(j, "peak_lr", r.peak_lr);
  read_optional(j, "batch_size", r.batch_size);
  read_optional(j, "segment_frames", r.segment_frames);
  read_optional(j, "crops_per_sample", r.crops_per_sample);
  read_optional(j, "seed", r.seed);
  read_optional(j, "warmup_fraction", r.warmup_fraction);
  read_optional(j, "initial_divisor", r.initial_divisor);
  read_optional(j, "final_divisor", r.final_divisor);
  read_optional(j, "adam_beta1", r.adam.beta1);
  read_optional(j, "adam_beta2", r.adam.beta2);
  read_optional(j, "adam_eps", r.adam.eps);
}

namespace {

void check_corpus(const AudioAutoencoder& model,
                  std::span<const AudioTrainingItem> corpus) {
  for (const AudioTrainingItem& item : corpus) {
    if (item.label != data::Label::kGood) {
      throw DataError("audio training corpus contains defect-labeled sample \"" +
                      item.sample_id + "\"; training uses good welds only");
    }
    if (item.spectrogram == nullptr) {
      throw DataError("audio training item \"" + item.sample_id + "\" has no spectrogram");
    }
    if (item.spectrogram->n_bins() != model.config().n_bins) {
      throw ShapeError("audio training item \"" + item.sample_id + "\" has " +
                       std::to_string(item.spectrogram->n_bins()) +
                       " bins, model expects " + std::to_string(model.config().n_bins));
    }
    if (item.spectrogram->n_frames() < kMinInputFrames) {
      throw ShapeError("audio training item \"" + item.sample_id +
                       "\" is shorter than " + std::to_string(kMinInputFrames) + " frames");
    }
  }
}

int segment_length(const AudioTrainingItem& item, const AudioTrainRecipe& recipe) {
  return std::min(recipe.segment_frames, item.spectrogram->n_frames());
}

Matrix crop(const AudioTrainingItem& item, int start, int length) {
  return item.spectrogram->magnitudes.middleCols(start, length);
}

}  // namespace

double audio_probe_mse(AudioAutoencoder& model,
                       std::span<const AudioTrainingItem> corpus,
                       const AudioTrainRecipe& recipe) {
  recipe.validate();
  check_corpus(model, corpus);
  if (corpus.empty()) throw DataError("audio probe: empty corpus");
  Rng rng(derive_seed(recipe.seed, "audio_train.probe"));
  Batch probe;
  const std::size_t n = std::min<std::size_t>(corpus.size(),
                                              static_cast<std::size_t>(recipe.batch_size));
  for (std::size_t i = 0; i < n; ++i) {
    const int len = segment_length(corpus[i], recipe);
    const auto start = static_cast<int>(
        rng.below(static_cast<std::uint64_t>(corpus[i].spectrogram->n_frames() - len + 1)));
    probe.push_back(crop(corpus[i], start, len));
  }
  const nn::Mode saved_mode = model.mode();
  auto params = model.parameters();
  std::vector<Matrix> saved;
  for (const nn::Parameter* p : params) {
    if (!p->trainable) saved.push_back(p->value);
  }
  model.set_mode(nn::Mode::kTrain);
  const double loss = nn::mse(model.forward(probe), probe);
  std::size_t s = 0;
  for (nn::Parameter* p : params) {
    if (!p->trainable) p->value = saved[s++];
  }
  model.set_mode(saved_mode);
  return loss;
}

AudioTrainResult train_audio_ae(AudioAutoencoder& model,
                                std::span<const AudioTrainingItem> corpus,
                                const AudioTrainRecipe& recipe) {
  recipe.validate();
  check_corpus(model, corpus);
  AudioTrainResult result;
  if (recipe.epochs == 0) {
    model.set_mode(nn::Mode::kEval);
    return result;
  }
  if (corpus.empty()) throw DataError("audio training: empty corpus");

  result.initial_probe_mse = audio_probe_mse(model, corpus, recipe);

  struct Crop {
    std::size_t item;
    int start;
  };
  std::vector<int> crops_per_item(corpus.size());
  std::size_t crops_per_epoch = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    crops_per_item[i] =
        recipe.crops_per_sample > 0
            ? recipe.crops_per_sample
            : std::max(1, corpus[i].spectrogram->n_frames() / recipe.segment_frames);
    crops_per_epoch += static_cast<std::size_t>(crops_per_item[i]);
  }
  const std::size_t batch = static_cast<std::size_t>(recipe.batch_size);
  const std::int64_t batches_per_epoch =
      static_cast<std::int64_t>((crops_per_epoch + batch - 1) / batch);
  const std::int64_t total_steps = recipe.epochs * batches_per_epoch;
  const nn::OneCycleSchedule schedule(std::max<std::int64_t>(total_steps, 2),
                                      recipe.peak_lr, recipe.warmup_fraction,
                                      recipe.initial_divisor, recipe.final_divisor);

  auto params = model.parameters();
  nn::Adam adam(params, recipe.adam);
  Rng rng(derive_seed(recipe.seed, "audio_train.crops"));
  model.set_mode(nn::Mode::kTrain);

  std::int64_t step = 0;
  for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
    std::vector<Crop> crops;
    crops.reserve(crops_per_epoch);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const int len = segment_length(corpus[i], recipe);
      const int span = corpus[i].spectrogram->n_frames() - len + 1;
      for (int c = 0; c < crops_per_item[i]; ++c) {
        crops.push_back({i, static_cast<int>(rng.below(static_cast<std::uint64_t>(span)))});
      }
    }
    rng.shuffle(crops);

    double loss_sum = 0.0;
    std::int64_t n_batches = 0;
    for (std::size_t offset = 0; offset < crops.size(); offset += batch) {
      Batch x;
      for (std::size_t c = offset; c < std::min(crops.size(), offset + batch); ++c) {
        const AudioTrainingItem& item = corpus[crops[c].item];
        x.push_back(crop(item, crops[c].start, segment_length(item, recipe)));
      }
      adam.zero_grad();
      const Batch y = model.forward(x);
      const double loss = nn::mse(y, x);
      if (!std::isfinite(loss)) {
        throw NumericError("audio training diverged at step " + std::to_string(step));
      }
      model.backward(nn::mse_grad(y, x));
      adam.step(schedule.lr(std::min(step, schedule.total_steps())));
      for (nn::Parameter* p : params) nn::round_to_float(p->value);
      loss_sum += loss;
      ++n_batches;
      ++step;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(n_batches));
  }
  result.steps = step;
  result.final_probe_mse = audio_probe_mse(model, corpus, recipe);
  model.set_mode(nn::Mode::kEval);
  return result;
}

}  // namespace weldad::audio

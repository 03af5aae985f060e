#include "weldad/video/autoencoder.hpp"

#include <algorithm>
#include <cmath>

#include "weldad/error.hpp"
#include "weldad/json_util.hpp"
#include "weldad/rng.hpp"

namespace weldad::video {

using nn::Matrix;

void VideoAeConfig::validate() const {
  if (dims.size() < 2) throw ConfigError("video ae: dims needs at least two entries");
  for (int d : dims) {
    if (d <= 0) throw ConfigError("video ae: every width in dims must be positive");
  }
  if (dims.front() != dims.back()) {
    throw ConfigError("video ae: chain maps " + std::to_string(dims.front()) + " to " +
                      std::to_string(dims.back()) + "; an autoencoder must restore its input dim");
  }
  for (int l : dropout_after) {
    if (l < 0 || l >= n_linear() - 1) {
      throw ConfigError("video ae: dropout position " + std::to_string(l) +
                        " is not a hidden layer");
    }
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("video ae: dropout_p must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const VideoAeConfig& c) {
  j = nlohmann::json{{"dims", c.dims}, {"dropout_after", c.dropout_after},
                     {"dropout_p", c.dropout_p}};
}

void from_json(const nlohmann::json& j, VideoAeConfig& c) {
  require_keys_subset(j, {"dims", "dropout_after", "dropout_p"}, "video_ae");
  read_optional(j, "dims", c.dims);
  read_optional(j, "dropout_after", c.dropout_after);
  read_optional(j, "dropout_p", c.dropout_p);
}

std::int64_t video_ae_param_count(const VideoAeConfig& config) {
  config.validate();
  std::int64_t count = 0;
  for (std::size_t i = 0; i + 1 < config.dims.size(); ++i) {
    count += static_cast<std::int64_t>(config.dims[i]) * config.dims[i + 1] + config.dims[i + 1];
  }
  return count;
}

// ------------------------------------------------------- VideoAutoencoder

VideoAutoencoder::VideoAutoencoder(const VideoAeConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)), seed_(seed) {
  const int n = config_.n_linear();
  Rng rng(derive_seed(seed, "video_ae.init"));
  for (int i = 0; i < n; ++i) {
    linear_.emplace_back(config_.dims[i], config_.dims[i + 1], "linear." + std::to_string(i));
    linear_.back().reset_parameters(rng);
  }
  relu_.resize(static_cast<std::size_t>(n - 1));
  dropout_.assign(static_cast<std::size_t>(n), nn::Dropout(config_.dropout_p));
}

bool VideoAutoencoder::has_dropout(int layer) const {
  return std::find(config_.dropout_after.begin(), config_.dropout_after.end(), layer) !=
         config_.dropout_after.end();
}

std::vector<nn::LayerSpec> VideoAutoencoder::architecture() const {
  std::vector<nn::LayerSpec> specs;
  for (int i = 0; i < config_.n_linear(); ++i) {
    specs.push_back(linear_[i].spec());
    if (i + 1 < config_.n_linear()) specs.push_back(relu_[i].spec());
    if (has_dropout(i)) specs.push_back(dropout_[i].spec());
  }
  return specs;
}

std::vector<nn::Parameter*> VideoAutoencoder::parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& l : linear_) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const nn::Parameter*> VideoAutoencoder::parameters() const {
  std::vector<const nn::Parameter*> out;
  for (const auto& l : linear_) {
    for (const auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

std::int64_t VideoAutoencoder::param_count() const {
  std::int64_t count = 0;
  for (const auto* p : parameters()) count += p->size();
  return count;
}

Matrix VideoAutoencoder::forward(const Matrix& x, nn::Mode mode, Rng& rng) {
  if (x.rows() != config_.input_dim()) {
    throw ShapeError("video ae: expected dim " + std::to_string(config_.input_dim()) +
                     ", got " + std::to_string(x.rows()));
  }
  Matrix h = x;
  for (int i = 0; i < config_.n_linear(); ++i) {
    h = linear_[i].forward(h);
    if (i + 1 < config_.n_linear()) h = relu_[i].forward(h);
    if (has_dropout(i)) h = dropout_[i].forward(h, mode, rng);
  }
  return h;
}

Matrix VideoAutoencoder::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (int i = config_.n_linear() - 1; i >= 0; --i) {
    if (has_dropout(i)) g = dropout_[i].backward(g);
    if (i + 1 < config_.n_linear()) g = relu_[i].backward(g);
    g = linear_[i].backward(g);
  }
  return g;
}

Matrix VideoAutoencoder::reconstruct(const Matrix& x) const {
  if (x.rows() != config_.input_dim()) {
    throw ShapeError("video ae: expected dim " + std::to_string(config_.input_dim()) +
                     ", got " + std::to_string(x.rows()));
  }
  Matrix h = x;
  for (int i = 0; i < config_.n_linear(); ++i) {
    h = linear_[i].forward_eval(h);
    if (i + 1 < config_.n_linear()) h = relu_[i].forward_eval(h);
  }
  return h;
}

nn::Checkpoint VideoAutoencoder::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.architecture = "video_ae";
  ckpt.config_json = nlohmann::json(config_).dump();
  ckpt.seed = seed_;
  for (const auto& l : linear_) {
    ckpt.tensors.push_back(nn::pack(l.weight, nn::BlobLayout::kMatrix));
    ckpt.tensors.push_back(nn::pack(l.bias, nn::BlobLayout::kVector));
  }
  return ckpt;
}

VideoAutoencoder VideoAutoencoder::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.architecture != "video_ae") {
    throw DataError("checkpoint holds \"" + ckpt.architecture + "\", expected \"video_ae\"");
  }
  VideoAeConfig config;
  try {
    config = nlohmann::json::parse(ckpt.config_json).get<VideoAeConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad architecture config: ") + e.what());
  }
  VideoAutoencoder model(config, ckpt.seed);
  if (ckpt.tensors.size() != 2 * model.linear_.size()) {
    throw DataError("checkpoint: expected " + std::to_string(2 * model.linear_.size()) +
                    " tensors, found " + std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < model.linear_.size(); ++i) {
    nn::unpack(ckpt.tensors[2 * i], model.linear_[i].weight, nn::BlobLayout::kMatrix);
    nn::unpack(ckpt.tensors[2 * i + 1], model.linear_[i].bias, nn::BlobLayout::kVector);
  }
  return model;
}

scoring::ScoreSeries video_frame_scores(const VideoAutoencoder& model,
                                        const EmbeddingSequence& embeddings) {
  if (embeddings.dim() != model.config().input_dim()) {
    throw ShapeError("video scores: embedding dim " + std::to_string(embeddings.dim()) +
                     " != model dim " + std::to_string(model.config().input_dim()));
  }
  if (embeddings.n_frames() == 0) throw ShapeError("video scores: no frames");
  nn::check_finite(embeddings.frames, "video scores input");
  const Matrix rec = model.reconstruct(embeddings.frames);
  scoring::ScoreSeries series;
  series.sample_id = embeddings.sample_id;
  series.modality = scoring::Modality::kVideo;
  series.frame_period = 1.0 / embeddings.fps;
  series.scores.resize(static_cast<std::size_t>(embeddings.n_frames()));
  const double dim = static_cast<double>(embeddings.dim());
  for (Eigen::Index f = 0; f < rec.cols(); ++f) {
    series.scores[static_cast<std::size_t>(f)] =
        (rec.col(f) - embeddings.frames.col(f)).squaredNorm() / dim;
  }
  return series;
}

WindowPlan sliding_window_spec(int n_frames, double fps, int length) {
  if (length <= 0) throw ConfigError("window length must be positive");
  if (!(fps > 0.0)) throw ConfigError("fps must be positive");
  if (n_frames < length) {
    throw ShapeError("video of " + std::to_string(n_frames) + " frames is shorter than the " +
                     std::to_string(length) + "-frame window");
  }
  WindowPlan plan;
  plan.length = length;
  plan.fps = fps;
  plan.windows.reserve(static_cast<std::size_t>(n_frames));
  for (int c = 0; c < n_frames; ++c) {
    const int centered = c - length / 2;
    const int start = std::clamp(centered, 0, n_frames - length);
    plan.windows.push_back({c, start, start != centered});
  }
  return plan;
}

// ---------------------------------------------------------------- training

void VideoTrainRecipe::validate() const {
  if (epochs < 0) throw ConfigError("video recipe: epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("video recipe: lr must be positive");
  if (batch_size <= 0) throw ConfigError("video recipe: batch_size must be positive");
  if (frames_per_sample < 0) throw ConfigError("video recipe: frames_per_sample must be >= 0");
  if (eval_every <= 0) throw ConfigError("video recipe: eval_every must be positive");
  if (patience < 0) throw ConfigError("video recipe: patience must be >= 0");
}

void to_json(nlohmann::json& j, const VideoTrainRecipe& r) {
  j = nlohmann::json{{"epochs", r.epochs},
                     {"lr", r.lr},
                     {"batch_size", r.batch_size},
                     {"frames_per_sample", r.frames_per_sample},
                     {"eval_every", r.eval_every},
                     {"patience", r.patience},
                     {"seed", r.seed},
                     {"adam_beta1", r.adam.beta1},
                     {"adam_beta2", r.adam.beta2},
                     {"adam_eps", r.adam.eps}};
}

void from_json(const nlohmann::json& j, VideoTrainRecipe& r) {
  require_keys_subset(j,
                      {"epochs", "lr", "batch_size", "frames_per_sample", "eval_every",
                       "patience", "seed", "adam_beta1", "adam_beta2", "adam_eps"},
                      "video_train");
  read_optional(j, "epochs", r.epochs);
  read_optional(j, "lr", r.lr);
  read_optional(j, "batch_size", r.batch_size);
  read_optional(j, "frames_per_sample", r.frames_per_sample);
  read_optional(j, "eval_every", r.eval_every);
  read_optional(j, "patience", r.patience);
  read_optional(j, "seed", r.seed);
  read_optional(j, "adam_beta1", r.adam.beta1);
  read_optional(j, "adam_beta2", r.adam.beta2);
  read_optional(j, "adam_eps", r.adam.eps);
}

namespace {

void check_corpus(const VideoAutoencoder& model, std::span<const VideoTrainingItem> corpus) {
  for (const auto& item : corpus) {
    if (item.label != data::Label::kGood) {
      throw DataError("video training corpus contains defect-labeled sample \"" +
                      item.sample_id + "\"; training uses good welds only");
    }
    if (item.embeddings == nullptr) {
      throw DataError("video training item \"" + item.sample_id + "\" has no embeddings");
    }
    if (item.embeddings->dim() != model.config().input_dim()) {
      throw ShapeError("video training item \"" + item.sample_id + "\" has dim " +
                       std::to_string(item.embeddings->dim()));
    }
    if (item.embeddings->n_frames() == 0) {
      throw DataError("video training item \"" + item.sample_id + "\" has no frames");
    }
  }
}

struct FrameRef {
  std::size_t item;
  int frame;
};

Matrix gather(std::span<const VideoTrainingItem> corpus, std::span<const FrameRef> refs,
              int dim) {
  Matrix x(dim, static_cast<Eigen::Index>(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = corpus[refs[i].item].embeddings->frames.col(refs[i].frame);
  }
  return x;
}

}  // namespace

double video_probe_mse(const VideoAutoencoder& model,
                       std::span<const VideoTrainingItem> corpus,
                       const VideoTrainRecipe& recipe) {
  recipe.validate();
  check_corpus(model, corpus);
  if (corpus.empty()) throw DataError("video probe: empty corpus");
  Rng rng(derive_seed(recipe.seed, "video_train.probe"));
  std::vector<FrameRef> refs;
  for (int i = 0; i < recipe.batch_size; ++i) {
    const auto item = static_cast<std::size_t>(rng.below(corpus.size()));
    const auto frame = static_cast<int>(
        rng.below(static_cast<std::uint64_t>(corpus[item].embeddings->n_frames())));
    refs.push_back({item, frame});
  }
  const Matrix x = gather(corpus, refs, model.config().input_dim());
  return nn::mse(model.reconstruct(x), x);
}

VideoTrainResult train_video_ae(VideoAutoencoder& model,
                                std::span<const VideoTrainingItem> corpus,
                                const VideoTrainRecipe& recipe,
                                const VideoValidator& validator) {
  recipe.validate();
  check_corpus(model, corpus);
  VideoTrainResult result;
  if (recipe.epochs == 0) return result;
  if (corpus.empty()) throw DataError("video training: empty corpus");
  result.initial_probe_mse = video_probe_mse(model, corpus, recipe);

  const int dim = model.config().input_dim();
  auto params = model.parameters();
  nn::Adam adam(params, recipe.adam);
  Rng order_rng(derive_seed(recipe.seed, "video_train.order"));
  Rng dropout_rng(derive_seed(recipe.seed, "video_train.dropout"));
  nn::Checkpoint best;
  int stale = 0;

  for (int epoch = 1; epoch <= recipe.epochs; ++epoch) {
    std::vector<FrameRef> refs;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const int n = corpus[i].embeddings->n_frames();
      if (recipe.frames_per_sample == 0) {
        for (int f = 0; f < n; ++f) refs.push_back({i, f});
      } else {
        for (int k = 0; k < recipe.frames_per_sample; ++k) {
          refs.push_back({i, static_cast<int>(order_rng.below(static_cast<std::uint64_t>(n)))});
        }
      }
    }
    order_rng.shuffle(refs);

    double loss_sum = 0.0;
    int batches = 0;
    const auto bs = static_cast<std::size_t>(recipe.batch_size);
    for (std::size_t off = 0; off < refs.size(); off += bs) {
      const std::size_t len = std::min(bs, refs.size() - off);
      const Matrix x = gather(corpus, std::span<const FrameRef>(refs).subspan(off, len), dim);
      adam.zero_grad();
      const Matrix y = model.forward(x, nn::Mode::kTrain, dropout_rng);
      const double loss = nn::mse(y, x);
      if (!std::isfinite(loss)) {
        throw NumericError("video training diverged in epoch " + std::to_string(epoch));
      }
      model.backward(nn::mse_grad(y, x));
      adam.step(recipe.lr);
      for (nn::Parameter* p : params) nn::round_to_float(p->value);
      loss_sum += loss;
      ++batches;
      ++result.steps;
    }
    result.epoch_loss.push_back(loss_sum / batches);

    if (validator && (epoch % recipe.eval_every == 0 || epoch == recipe.epochs)) {
      const double score = validator(model);
      result.validation.emplace_back(epoch, score);
      if (result.best_epoch < 0 || score > result.best_validation) {
        result.best_epoch = epoch;
        result.best_validation = score;
        best = model.to_checkpoint();
        stale = 0;
      } else if (recipe.patience > 0 && ++stale >= recipe.patience) {
        break;
      }
    }
  }
  if (result.best_epoch > 0) model = VideoAutoencoder::from_checkpoint(best);
  result.final_probe_mse = video_probe_mse(model, corpus, recipe);
  return result;
}

}  // namespace weldad::video

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "weldad/error.hpp"
#include "weldad/video/autoencoder.hpp"
#include "weldad/video/embedding.hpp"

using namespace weldad;
using namespace weldad::video;
using nn::Matrix;

namespace fs = std::filesystem;

namespace {

// Low-rank Gaussian cluster: mu + A z + sigma e.
struct Cluster {
  Matrix mu, basis;
  double sigma = 0.05;

  Cluster(Rng& rng, int dim, int rank)
      : mu(testing::random_matrix(rng, dim, 1)), basis(testing::random_matrix(rng, dim, rank, 0.5)) {}

  Matrix sample(Rng& rng, int n, const Matrix& shift) const {
    Matrix z = testing::random_matrix(rng, basis.cols(), n);
    Matrix x = basis * z + testing::random_matrix(rng, mu.rows(), n, sigma);
    x.colwise() += (mu + shift).col(0);
    return x;
  }
};

}  // namespace

TEST_CASE("video autoencoder structure") {
  // Table rows summed by hand: (in*out + out) per linear layer.
  const std::int64_t table_sum = (2304 * 512 + 512) + (512 * 256 + 256) + (256 * 128 + 128) +
                                 (128 * 64 + 64) + (64 * 64 + 64) + (64 * 64 + 64) +
                                 (64 * 128 + 128) + (128 * 256 + 256) + (256 * 512 + 512) +
                                 (512 * 2304 + 2304);
  CHECK(table_sum == 2715840);
  VideoAeConfig config;
  CHECK(video_ae_param_count(config) == table_sum);
  VideoAutoencoder model(config, 1);
  CHECK(model.param_count() == table_sum);

  const auto arch = model.architecture();
  std::vector<nn::LayerKind> kinds;
  for (const auto& l : arch) kinds.push_back(l.kind);
  using K = nn::LayerKind;
  const std::vector<K> expected = {
      K::kLinear, K::kReLU, K::kLinear, K::kReLU, K::kDropout, K::kLinear, K::kReLU,
      K::kDropout, K::kLinear, K::kReLU, K::kDropout, K::kLinear, K::kReLU, K::kLinear,
      K::kReLU, K::kLinear, K::kReLU, K::kLinear, K::kReLU, K::kLinear, K::kReLU,
      K::kDropout, K::kLinear};
  CHECK(kinds == expected);
  for (const auto& l : arch) {
    if (l.kind == K::kDropout) CHECK(l.dropout_p == 0.5);
  }

  VideoAeConfig bad;
  bad.dims.back() = 2000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = VideoAeConfig{};
  bad.dropout_after = {9};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("video autoencoder forward") {
  VideoAeConfig config;
  VideoAutoencoder model(config, 2);
  Rng rng(3);
  const Matrix x = testing::random_matrix(rng, 2304, 5);
  const Matrix y = model.reconstruct(x);
  CHECK(y.rows() == 2304);
  CHECK(y.cols() == 5);

  // Eval mode ignores any earlier train-mode dropout draws.
  model.forward(x, nn::Mode::kTrain, rng);
  CHECK(model.reconstruct(x) == y);
  Rng other(99);
  CHECK(model.forward(x, nn::Mode::kEval, other) == y);

  for (auto* p : model.parameters()) {
    if (p->name.find("bias") != std::string::npos) p->value.setZero();
  }
  CHECK(model.reconstruct(Matrix::Zero(2304, 2)).isZero());
  CHECK_THROWS_AS(model.reconstruct(Matrix::Zero(100, 1)), ShapeError);
}

TEST_CASE("video autoencoder gradient") {
  VideoAeConfig config;
  config.dims = {6, 5, 4, 3, 4, 5, 6};
  config.dropout_after = {1, 4};
  VideoAutoencoder model(config, 4);
  Rng rng(5);
  Matrix x = testing::random_matrix(rng, 6, 4);
  const std::uint64_t mask_seed = 77;
  Rng r0(mask_seed);
  const Matrix y = model.forward(x, nn::Mode::kTrain, r0);
  const Matrix w = testing::random_matrix(rng, y.rows(), y.cols());
  for (auto* p : model.parameters()) p->zero_grad();
  const Matrix gx = model.backward(w);
  auto loss = [&] {
    Rng r(mask_seed);
    return model.forward(x, nn::Mode::kTrain, r).cwiseProduct(w).sum();
  };
  double worst = testing::max_rel_error(gx, testing::numeric_grad(x, loss));
  for (auto* p : model.parameters()) {
    const Matrix analytic = p->grad;
    worst = std::max(worst, testing::max_rel_error(analytic, testing::numeric_grad(p->value, loss)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("video frame scores") {
  VideoAeConfig config;
  config.dims = {4, 4};
  config.dropout_after = {};
  VideoAutoencoder model(config, 6);
  model.parameters()[0]->value.setIdentity();
  model.parameters()[1]->value.setZero();
  Rng rng(7);
  EmbeddingSequence e{"s", 30.0, testing::random_matrix(rng, 4, 9)};
  const auto s = video_frame_scores(model, e);
  CHECK(s.scores.size() == 9);
  for (double v : s.scores) CHECK(v == 0.0);
  CHECK(s.frame_period == doctest::Approx(1.0 / 30));
  EmbeddingSequence wrong{"w", 30.0, Matrix::Zero(3, 2)};
  CHECK_THROWS_AS(video_frame_scores(model, wrong), ShapeError);
}

TEST_CASE("sliding windows") {
  const WindowPlan p30 = sliding_window_spec(100, 30.0);
  CHECK(p30.latency_s() == doctest::Approx(32.0 / 30.0));
  REQUIRE(p30.windows.size() == 100);
  for (int c = 0; c < 100; ++c) {
    const auto& w = p30.windows[c];
    CHECK(w.center == c);
    CHECK(w.start >= 0);
    CHECK(w.start + 64 <= 100);
    CHECK(w.clamped == (c < 32 || c > 100 - 32));
    if (!w.clamped) CHECK(w.start == c - 32);
  }
  const WindowPlan p64 = sliding_window_spec(64, 30.0);
  CHECK(p64.windows.size() == 64);
  for (const auto& w : p64.windows) CHECK(w.start == 0);
  CHECK_THROWS_AS(sliding_window_spec(63, 30.0), ShapeError);
}

TEST_CASE("embedding file round trip") {
  Rng rng(8);
  EmbeddingSequence e{"weld_0001", 29.7, testing::random_matrix(rng, 2304, 6)};
  e.frames = e.frames.cast<float>().cast<double>();
  const fs::path p = fs::temp_directory_path() / "weldad_test_emb.bin";
  save_embeddings(p, e);
  const EmbeddingSequence back = load_embeddings(p);
  CHECK(back.sample_id == e.sample_id);
  CHECK(back.fps == e.fps);
  CHECK(back.frames == e.frames);
  CHECK(fs::file_size(p) == 8 + 4 + 4 + 9 + 4 + 4 + 8 + 6 * 2304 * 4);
  CHECK_THROWS_AS(load_embeddings(p, 512), DataError);

  fs::resize_file(p, fs::file_size(p) - 4);
  CHECK_THROWS_AS(load_embeddings(p), DataError);
  {
    std::ofstream out(p, std::ios::binary);
    out << "NOTEMBED";
  }
  CHECK_THROWS_AS(load_embeddings(p), DataError);
  fs::remove(p);
}

namespace {

struct TrainedFixture {
  Rng rng{9};
  Cluster cluster{rng, 2304, 4};
  std::vector<EmbeddingSequence> seqs;
  std::vector<VideoTrainingItem> items;
  VideoTrainRecipe recipe;
  VideoAutoencoder model{VideoAeConfig{}, 1};
  VideoTrainResult result;

  TrainedFixture() {
    for (int i = 0; i < 8; ++i) {
      seqs.push_back({"g" + std::to_string(i), 30.0, cluster.sample(rng, 32, Matrix::Zero(2304, 1))});
    }
    for (const auto& s : seqs) items.push_back({s.sample_id, data::Label::kGood, &s});
    recipe.epochs = 200;
    recipe.seed = 10;
    result = train_video_ae(model, items, recipe);
  }
};

// Full-size training is the slow part of this suite; do it once.
TrainedFixture& trained() {
  static TrainedFixture f;
  return f;
}

}  // namespace

TEST_CASE("video training reduces probe error") {
  auto& f = trained();
  CHECK(f.result.epoch_loss.size() == 200);
  CHECK(f.result.final_probe_mse <= 0.5 * f.result.initial_probe_mse);
}

TEST_CASE("trained video model flags shifted frames") {
  auto& f = trained();
  Rng rng(11);
  const Matrix shift = testing::random_matrix(rng, 2304, 1);
  int wins = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const EmbeddingSequence normal{"n", 30.0, f.cluster.sample(rng, 1, Matrix::Zero(2304, 1))};
    const EmbeddingSequence shifted{"s", 30.0, f.cluster.sample(rng, 1, shift)};
    if (video_frame_scores(f.model, shifted).scores[0] >
        video_frame_scores(f.model, normal).scores[0]) {
      ++wins;
    }
  }
  CHECK(wins >= 0.95 * trials);
}

TEST_CASE("video training is deterministic and leaves embeddings untouched") {
  Rng rng(12);
  VideoAeConfig small;
  small.dims = {32, 16, 8, 16, 32};
  small.dropout_after = {0, 2};
  const Cluster cluster(rng, 32, 3);
  std::vector<EmbeddingSequence> seqs;
  for (int i = 0; i < 3; ++i) {
    seqs.push_back({"g" + std::to_string(i), 30.0, cluster.sample(rng, 20, Matrix::Zero(32, 1))});
  }
  std::vector<VideoTrainingItem> items;
  for (const auto& s : seqs) items.push_back({s.sample_id, data::Label::kGood, &s});
  std::vector<Matrix> before;
  for (const auto& s : seqs) before.push_back(s.frames);

  VideoTrainRecipe recipe;
  recipe.epochs = 30;
  recipe.batch_size = 16;
  recipe.frames_per_sample = 8;
  recipe.seed = 5;
  VideoAutoencoder a(small, 1), b(small, 1);
  const auto ra = train_video_ae(a, items, recipe);
  const auto rb = train_video_ae(b, items, recipe);
  CHECK(a.to_checkpoint() == b.to_checkpoint());
  CHECK(ra.epoch_loss == rb.epoch_loss);
  for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(seqs[i].frames == before[i]);

  SUBCASE("validator keeps the best epoch") {
    VideoAutoencoder m(small, 3);
    VideoTrainRecipe r = recipe;
    r.epochs = 6;
    int calls = 0;
    const std::vector<double> trace = {0.1, 0.5, 0.3, 0.5, 0.2, 0.4};
    nn::Checkpoint at_best;
    const auto res = train_video_ae(m, items, r, [&](const VideoAutoencoder& cur) {
      if (calls == 1) at_best = cur.to_checkpoint();
      return trace[static_cast<std::size_t>(calls++)];
    });
    CHECK(res.best_epoch == 2);
    CHECK(res.validation.size() == 6);
    CHECK(m.to_checkpoint() == at_best);
  }
  SUBCASE("patience stops early") {
    VideoAutoencoder m(small, 3);
    VideoTrainRecipe r = recipe;
    r.patience = 2;
    const auto res = train_video_ae(m, items, r, [](const VideoAutoencoder&) { return 0.5; });
    CHECK(res.epoch_loss.size() == 3);
    CHECK(res.best_epoch == 1);
  }
  SUBCASE("zero epochs and defect guard") {
    VideoAutoencoder m(small, 4);
    const auto ckpt = m.to_checkpoint();
    VideoTrainRecipe r = recipe;
    r.epochs = 0;
    train_video_ae(m, items, r);
    CHECK(m.to_checkpoint() == ckpt);
    auto tainted = items;
    tainted[0].label = data::Label::kDefect;
    CHECK_THROWS_AS(train_video_ae(m, tainted, recipe), DataError);
  }
}

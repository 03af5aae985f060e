#include "weldad/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "weldad/audio/wav.hpp"
#include "weldad/error.hpp"
#include "weldad/evaluation/metrics.hpp"
#include "weldad/json_util.hpp"
#include "weldad/log.hpp"
#include "weldad/nn/checkpoint.hpp"
#include "weldad/rng.hpp"

namespace weldad::pipeline {

namespace fs = std::filesystem;
using data::Label;
using data::Split;
using scoring::Modality;
using scoring::ScoreRecord;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<double> column(const std::vector<ScoreRecord>& records, std::optional<Split> split,
                           bool use_z, std::vector<Label>* labels) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (split && r.split != split) continue;
    out.push_back(use_z ? r.z_score : r.raw_score);
    if (labels) labels->push_back(r.label);
  }
  return out;
}

double split_auc(const std::vector<ScoreRecord>& records, Split split) {
  std::vector<Label> labels;
  const auto scores = column(records, split, false, &labels);
  return evaluation::auc(scores, labels);
}

ScoreRecord make_record(const data::ManifestEntry& e, Modality m,
                        const std::map<std::string, Split>& assignment, double raw) {
  ScoreRecord r;
  r.sample_id = e.sample_id;
  r.modality = m;
  r.label = e.label();
  r.category = e.category;
  if (auto it = assignment.find(e.sample_id); it != assignment.end()) r.split = it->second;
  r.raw_score = raw;
  return r;
}

}  // namespace

void PipelineConfig::validate() const {
  stft.validate();
  audio_model.validate();
  if (audio_model.n_bins != stft.n_bins()) {
    throw ConfigError("audio_model.n_bins (" + std::to_string(audio_model.n_bins) +
                      ") does not match the STFT (" + std::to_string(stft.n_bins()) + " bins)");
  }
  audio_training.validate();
  video_model.validate();
  video_training.validate();
  audio_aggregation.validate();
  video_aggregation.validate();
  if (!(fusion_step > 0.0 && fusion_step <= 1.0)) {
    throw ConfigError("fusion_step must be in (0, 1]");
  }
  if (audio_channel && *audio_channel < 0) throw ConfigError("audio_channel must be >= 0");
}

audio::AudioTrainRecipe PipelineConfig::audio_recipe() const {
  auto r = audio_training;
  r.seed = derive_seed(seed, "pipeline/audio_train");
  return r;
}

video::VideoTrainRecipe PipelineConfig::video_recipe() const {
  auto r = video_training;
  r.seed = derive_seed(seed, "pipeline/video_train");
  return r;
}

std::uint64_t PipelineConfig::audio_model_seed() const {
  return derive_seed(seed, "pipeline/audio_model");
}

std::uint64_t PipelineConfig::video_model_seed() const {
  return derive_seed(seed, "pipeline/video_model");
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"seed", c.seed},
       {"stft", c.stft},
       {"audio_model", c.audio_model},
       {"audio_training", c.audio_training},
       {"video_model", c.video_model},
       {"video_training", c.video_training},
       {"video_select_on_val", c.video_select_on_val},
       {"aggregation",
        {{"audio", scoring::to_string(c.audio_aggregation)},
         {"video", scoring::to_string(c.video_aggregation)}}},
       {"fusion_step", c.fusion_step}};
  j["audio_channel"] = c.audio_channel ? nlohmann::json(*c.audio_channel) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  require_keys_subset(j,
                      {"seed", "stft", "audio_channel", "audio_model", "audio_training",
                       "video_model", "video_training", "video_select_on_val", "aggregation",
                       "fusion_step"},
                      "pipeline config");
  read_optional(j, "seed", c.seed);
  if (j.contains("stft")) c.stft = j["stft"].get<audio::StftConfig>();
  if (j.contains("audio_channel") && !j["audio_channel"].is_null()) {
    c.audio_channel = j["audio_channel"].get<int>();
  }
  c.audio_model.n_bins = c.stft.n_bins();
  if (j.contains("audio_model")) {
    auto model = j["audio_model"];
    if (model.is_object() && !model.contains("n_bins")) model["n_bins"] = c.stft.n_bins();
    c.audio_model = model.get<audio::AudioAeConfig>();
  }
  if (j.contains("audio_training")) c.audio_training = j["audio_training"].get<audio::AudioTrainRecipe>();
  if (j.contains("video_model")) c.video_model = j["video_model"].get<video::VideoAeConfig>();
  if (j.contains("video_training")) c.video_training = j["video_training"].get<video::VideoTrainRecipe>();
  read_optional(j, "video_select_on_val", c.video_select_on_val);
  if (j.contains("aggregation")) {
    const auto& a = j["aggregation"];
    require_keys_subset(a, {"audio", "video"}, "aggregation");
    if (a.contains("audio")) c.audio_aggregation = scoring::aggregation_from_string(a["audio"].get<std::string>());
    if (a.contains("video")) c.video_aggregation = scoring::aggregation_from_string(a["video"].get<std::string>());
  }
  read_optional(j, "fusion_step", c.fusion_step);
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  PipelineConfig c;
  try {
    c = j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const PipelineConfig& c) {
  return fnv1a_hex(nlohmann::json(c).dump());
}

audio::Spectrogram load_spectrogram(const data::DatasetManifest& manifest,
                                    const data::ManifestEntry& entry, const PipelineConfig& c) {
  const auto wav = audio::read_wav(manifest.resolve(entry.audio_path), c.audio_channel);
  if (wav.sample_rate != c.stft.sample_rate) {
    throw DataError("sample \"" + entry.sample_id + "\": WAV sample rate " +
                    std::to_string(wav.sample_rate) + " differs from the configured " +
                    std::to_string(c.stft.sample_rate));
  }
  return audio::stft_magnitude(wav.samples, c.stft);
}

video::EmbeddingSequence load_entry_embeddings(const data::DatasetManifest& manifest,
                                               const data::ManifestEntry& entry) {
  auto e = video::load_embeddings(manifest.resolve(entry.embedding_path));
  if (e.sample_id != entry.sample_id) {
    log().warn("embedding file for \"{}\" carries id \"{}\"", entry.sample_id, e.sample_id);
  }
  return e;
}

AudioTraining train_audio(const data::DatasetManifest& manifest,
                          const evaluation::Partition& partition, const PipelineConfig& c) {
  c.validate();
  std::vector<audio::Spectrogram> specs;
  specs.reserve(partition.train.size());
  for (const auto& id : partition.train) specs.push_back(load_spectrogram(manifest, manifest.find(id), c));
  std::vector<audio::AudioTrainingItem> items;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    items.push_back({partition.train[i], manifest.find(partition.train[i]).label(), &specs[i]});
  }
  AudioTraining t{audio::AudioAutoencoder(c.audio_model, c.audio_model_seed()), {}};
  t.result = audio::train_audio_ae(t.model, items, c.audio_recipe());
  return t;
}

VideoTraining train_video(const data::DatasetManifest& manifest,
                          const evaluation::Partition& partition, const PipelineConfig& c) {
  c.validate();
  std::vector<video::EmbeddingSequence> train;
  for (const auto& id : partition.train) train.push_back(load_entry_embeddings(manifest, manifest.find(id)));
  std::vector<video::VideoTrainingItem> items;
  for (std::size_t i = 0; i < train.size(); ++i) {
    items.push_back({partition.train[i], manifest.find(partition.train[i]).label(), &train[i]});
  }

  video::VideoValidator validator;
  std::vector<video::EmbeddingSequence> val;
  std::vector<Label> val_labels;
  if (c.video_select_on_val) {
    for (const auto& id : partition.val) {
      val.push_back(load_entry_embeddings(manifest, manifest.find(id)));
      val_labels.push_back(manifest.find(id).label());
    }
    const bool both = std::count(val_labels.begin(), val_labels.end(), Label::kGood) > 0 &&
                      std::count(val_labels.begin(), val_labels.end(), Label::kDefect) > 0;
    if (both) {
      validator = [&](const video::VideoAutoencoder& m) {
        std::vector<double> scores;
        for (const auto& e : val) {
          scores.push_back(scoring::aggregate(video::video_frame_scores(m, e), c.video_aggregation));
        }
        return evaluation::auc(scores, val_labels);
      };
    } else {
      log().warn("validation split lacks one class; video model selection disabled");
    }
  }
  VideoTraining t{video::VideoAutoencoder(c.video_model, c.video_model_seed()), {}};
  t.result = video::train_video_ae(t.model, items, c.video_recipe(), validator);
  return t;
}

scoring::Standardizer standardize(std::vector<ScoreRecord>& records) {
  const auto train = column(records, Split::kTrain, false, nullptr);
  const auto st = scoring::fit_standardizer(train);
  for (auto& r : records) r.z_score = st.apply(r.raw_score);
  return st;
}

ModalityScores score_audio(const audio::AudioAutoencoder& model,
                           const data::DatasetManifest& manifest,
                           const evaluation::Partition& partition, const PipelineConfig& c) {
  const auto assignment = partition.assignment();
  ModalityScores out;
  for (const auto& e : manifest.entries) {
    const auto spec = load_spectrogram(manifest, e, c);
    const auto series = audio::audio_frame_scores(model, spec, e.sample_id);
    out.records.push_back(make_record(e, Modality::kAudio, assignment,
                                      scoring::aggregate(series, c.audio_aggregation)));
  }
  out.standardizer = standardize(out.records);
  return out;
}

ModalityScores score_video(const video::VideoAutoencoder& model,
                           const data::DatasetManifest& manifest,
                           const evaluation::Partition& partition, const PipelineConfig& c) {
  const auto assignment = partition.assignment();
  ModalityScores out;
  for (const auto& e : manifest.entries) {
    const auto emb = load_entry_embeddings(manifest, e);
    out.records.push_back(make_record(e, Modality::kVideo, assignment,
                                      scoring::aggregate(video::video_frame_scores(model, emb),
                                                         c.video_aggregation)));
  }
  out.standardizer = standardize(out.records);
  return out;
}

nlohmann::json to_json(const FusionReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [w, a] : r.validation.trace) trace.push_back({{"w_audio", w}, {"auc", a}});
  return {{"schema", "weldad.fusion_report/1"},
          {"w_audio", r.validation.w_audio},
          {"w_video", 1.0 - r.validation.w_audio},
          {"step", r.step},
          {"validation",
           {{"n", r.n_val},
            {"auc", r.validation.auc},
            {"auc_audio", r.validation.auc_audio},
            {"auc_video", r.validation.auc_video}}},
          {"test",
           {{"n", r.n_test},
            {"auc", r.test_auc},
            {"auc_audio", r.test_auc_audio},
            {"auc_video", r.test_auc_video}}},
          {"trace", trace}};
}

FusionOutcome fuse_records(const std::vector<ScoreRecord>& audio,
                           const std::vector<ScoreRecord>& video, double step) {
  std::map<std::string, const ScoreRecord*> video_by_id;
  for (const auto& r : video) {
    if (r.modality != Modality::kVideo) {
      throw DataError("fusion: record \"" + r.sample_id + "\" in the video set has modality " +
                      std::string(scoring::to_string(r.modality)));
    }
    if (!video_by_id.emplace(r.sample_id, &r).second) {
      throw DataError("fusion: duplicate video record \"" + r.sample_id + "\"");
    }
  }
  std::vector<scoring::FusionSample> val, test;
  std::vector<ScoreRecord> joined_audio;
  std::vector<const ScoreRecord*> joined_video;
  for (const auto& a : audio) {
    if (a.modality != Modality::kAudio) {
      throw DataError("fusion: record \"" + a.sample_id + "\" in the audio set has modality " +
                      std::string(scoring::to_string(a.modality)));
    }
    auto it = video_by_id.find(a.sample_id);
    if (it == video_by_id.end()) {
      throw DataError("fusion: no video score for \"" + a.sample_id + "\"");
    }
    const ScoreRecord& v = *it->second;
    if (v.label != a.label || v.category != a.category || v.split != a.split) {
      throw DataError("fusion: audio and video records of \"" + a.sample_id + "\" disagree");
    }
    if (!a.split) throw DataError("fusion: record \"" + a.sample_id + "\" has no split");
    scoring::FusionSample s{a.sample_id, a.z_score, v.z_score, a.label, a.category};
    if (*a.split == Split::kVal) val.push_back(s);
    if (*a.split == Split::kTest) test.push_back(s);
    joined_audio.push_back(a);
    joined_video.push_back(&v);
  }
  if (audio.size() != video.size()) {
    throw DataError("fusion: audio and video score sets cover different samples");
  }
  FusionOutcome out;
  out.report.step = step;
  out.report.validation = scoring::grid_search_weight(val, step);
  const double w = out.report.validation.w_audio;
  const auto test_labels = scoring::labels_of(test);
  out.report.test_auc = evaluation::auc(scoring::fused_scores(test, w), test_labels);
  out.report.test_auc_audio = evaluation::auc(scoring::fused_scores(test, 1.0), test_labels);
  out.report.test_auc_video = evaluation::auc(scoring::fused_scores(test, 0.0), test_labels);
  out.report.n_val = static_cast<int>(val.size());
  out.report.n_test = static_cast<int>(test.size());
  for (std::size_t i = 0; i < joined_audio.size(); ++i) {
    ScoreRecord r = joined_audio[i];
    r.modality = Modality::kFused;
    r.raw_score = r.z_score = scoring::fuse(joined_audio[i].z_score, joined_video[i]->z_score, w);
    out.fused.push_back(std::move(r));
  }
  return out;
}

namespace {

void write_eval(const fs::path& dir, const std::string& name,
                const std::vector<ScoreRecord>& records, const std::string& title) {
  const auto set = scoring::to_labeled_set(records, std::nullopt, Split::kTest, true);
  const auto report = evaluation::evaluate(set, title);
  write_text(dir / ("eval_" + name + ".json"), evaluation::to_json(report).dump(2) + "\n");
  write_text(dir / ("eval_" + name + ".txt"), evaluation::format_table(report));
  write_text(dir / ("eval_" + name + ".svg"), evaluation::render_svg(report));
}

}  // namespace

ExperimentResult run_experiment(const data::DatasetManifest& manifest, const PipelineConfig& c,
                                const std::optional<fs::path>& out_dir) {
  c.validate();
  const auto partition = evaluation::partition_of(manifest, c.seed);
  log().info("split: {} train, {} val, {} test", partition.train.size(), partition.val.size(),
             partition.test.size());
  auto audio_training = train_audio(manifest, partition, c);
  log().info("audio model trained: probe mse {:.4g} -> {:.4g}",
             audio_training.result.initial_probe_mse, audio_training.result.final_probe_mse);
  auto video_training = train_video(manifest, partition, c);
  log().info("video model trained: probe mse {:.4g} -> {:.4g}, best epoch {}",
             video_training.result.initial_probe_mse, video_training.result.final_probe_mse,
             video_training.result.best_epoch);
  ExperimentResult r{score_audio(audio_training.model, manifest, partition, c),
                     score_video(video_training.model, manifest, partition, c),
                     {},
                     0, 0, 0, 0,
                     std::move(audio_training),
                     std::move(video_training)};
  r.fusion = fuse_records(r.audio.records, r.video.records, c.fusion_step);
  r.audio_val_auc = split_auc(r.audio.records, Split::kVal);
  r.audio_test_auc = split_auc(r.audio.records, Split::kTest);
  r.video_val_auc = split_auc(r.video.records, Split::kVal);
  r.video_test_auc = split_auc(r.video.records, Split::kTest);
  if (out_dir) {
    fs::create_directories(*out_dir);
    nn::save_checkpoint(*out_dir / "audio_ae.ckpt", r.audio_training.model.to_checkpoint());
    nn::save_checkpoint(*out_dir / "video_ae.ckpt", r.video_training.model.to_checkpoint());
    scoring::save_scores(*out_dir / "scores_audio.csv", r.audio.records);
    scoring::save_scores(*out_dir / "scores_video.csv", r.video.records);
    scoring::save_scores(*out_dir / "scores_fused.csv", r.fusion.fused);
    write_text(*out_dir / "fusion_report.json", to_json(r.fusion.report).dump(2) + "\n");
    write_eval(*out_dir, "audio", r.audio.records, "audio (test)");
    write_eval(*out_dir, "video", r.video.records, "video (test)");
    write_eval(*out_dir, "fused", r.fusion.fused, "fused (test)");
  }
  return r;
}

std::vector<GridTrial> run_grid(const data::DatasetManifest& manifest, const PipelineConfig& base,
                                const GridOptions& options, const fs::path& out_dir) {
  if (options.jobs < 1) throw ConfigError("grid: jobs must be >= 1");
  if (options.fft_windows.empty() || options.bottlenecks.empty()) {
    throw ConfigError("grid: empty sweep");
  }
  const auto partition = evaluation::partition_of(manifest, base.seed);
  const auto assignment = partition.assignment();
  fs::create_directories(out_dir);
  std::vector<GridTrial> trials;
  for (int fft : options.fft_windows) {
    PipelineConfig c = base;
    c.stft.fft_window = fft;
    c.stft.hop_length = fft / 2;
    c.audio_model.n_bins = c.stft.n_bins();
    c.stft.validate();

    // Spectrograms are shared by every bottleneck at this window size.
    std::map<std::string, audio::Spectrogram> specs;
    for (const auto& e : manifest.entries) specs.emplace(e.sample_id, load_spectrogram(manifest, e, c));

    const std::size_t first = trials.size();
    for (int b : options.bottlenecks) {
      GridTrial t;
      t.fft_window = fft;
      t.bottleneck = b;
      t.latency_ms = audio::model_latency_ms(c.stft.hop_length, c.stft.sample_rate);
      char dir[64];
      std::snprintf(dir, sizeof dir, "fft%d_b%d", fft, b);
      t.checkpoint = std::string(dir) + "/audio_ae.ckpt";
      trials.push_back(t);
    }

    auto run_trial = [&](std::size_t i) {
      GridTrial& t = trials[i];
      PipelineConfig tc = c;
      tc.audio_model.bottleneck = t.bottleneck;
      tc.validate();
      std::vector<audio::AudioTrainingItem> items;
      for (const auto& id : partition.train) items.push_back({id, Label::kGood, &specs.at(id)});
      audio::AudioAutoencoder model(tc.audio_model, tc.audio_model_seed());
      const auto result = audio::train_audio_ae(model, items, tc.audio_recipe());
      t.final_probe_mse = result.final_probe_mse;
      std::vector<ScoreRecord> records;
      for (const auto& e : manifest.entries) {
        const auto series = audio::audio_frame_scores(model, specs.at(e.sample_id), e.sample_id);
        records.push_back(make_record(e, Modality::kAudio, assignment,
                                      scoring::aggregate(series, tc.audio_aggregation)));
      }
      t.val_auc = split_auc(records, Split::kVal);
      t.test_auc = split_auc(records, Split::kTest);
      fs::create_directories((out_dir / t.checkpoint).parent_path());
      nn::save_checkpoint(out_dir / t.checkpoint, model.to_checkpoint());
    };

    const std::size_t n = trials.size() - first;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), n);
    if (workers <= 1) {
      for (std::size_t i = first; i < trials.size(); ++i) run_trial(i);
    } else {
      std::mutex mu;
      std::size_t next = first;
      std::exception_ptr failure;
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (;;) {
            std::size_t i;
            {
              std::lock_guard lock(mu);
              if (failure || next >= trials.size()) return;
              i = next++;
            }
            try {
              run_trial(i);
            } catch (...) {
              std::lock_guard lock(mu);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
      for (auto& th : pool) th.join();
      if (failure) std::rethrow_exception(failure);
    }
    for (std::size_t i = first; i < trials.size(); ++i) {
      log().info("grid fft {} bottleneck {}: val AUC {:.4f}, test AUC {:.4f}",
                 trials[i].fft_window, trials[i].bottleneck, trials[i].val_auc, trials[i].test_auc);
    }
  }
  write_text(out_dir / "grid_report.json", grid_report_json(trials, base).dump(2) + "\n");
  write_text(out_dir / "grid_table.txt", format_grid_table(trials));
  return trials;
}

nlohmann::json grid_report_json(const std::vector<GridTrial>& trials, const PipelineConfig& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : trials) {
    rows.push_back({{"fft_window", t.fft_window},
                    {"bottleneck", t.bottleneck},
                    {"latency_ms", t.latency_ms},
                    {"val_auc", t.val_auc},
                    {"test_auc", t.test_auc},
                    {"final_probe_mse", t.final_probe_mse},
                    {"checkpoint", t.checkpoint}});
  }
  return {{"schema", "weldad.grid_report/1"},
          {"seed", c.seed},
          {"config_hash", config_hash(c)},
          {"trials", rows}};
}

std::string format_grid_table(const std::vector<GridTrial>& trials) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%8s %10s %12s %8s %8s\n", "fft", "bottleneck", "latency_ms",
                "val_AUC", "test_AUC");
  out += line;
  for (const auto& t : trials) {
    std::snprintf(line, sizeof line, "%8d %10d %12.1f %8.4f %8.4f\n", t.fft_window, t.bottleneck,
                  t.latency_ms, t.val_auc, t.test_auc);
    out += line;
  }
  return out;
}

std::vector<double> offline_wav_scores(const audio::AudioAutoencoder& model,
                                       const audio::StftConfig& stft,
                                       std::span<const float> signal) {
  return audio::audio_frame_scores(model, audio::stft_magnitude(signal, stft)).scores;
}

std::vector<double> stream_wav_scores(const audio::AudioAutoencoder& model,
                                      const audio::StftConfig& stft,
                                      std::span<const float> signal,
                                      const StreamOptions& options,
                                      const std::function<void(std::int64_t, double)>& on_score) {
  if (options.chunk == 0) throw ConfigError("stream: chunk must be positive");
  if (options.realtime_speed < 0.0) throw ConfigError("stream: realtime speed must be >= 0");
  audio::StreamingStft stream(stft);
  audio::AudioFrameScorer scorer(model);
  std::vector<double> scores;
  std::size_t reported = 0;
  auto report = [&] {
    for (; reported < scores.size(); ++reported) {
      if (on_score) on_score(static_cast<std::int64_t>(reported), scores[reported]);
    }
  };
  auto drain = [&] {
    while (auto frame = stream.next_frame()) scorer.push(*frame, scores);
    report();
  };
  const auto start = std::chrono::steady_clock::now();
  std::size_t pos = 0;
  while (pos < signal.size()) {
    const std::size_t n = std::min(options.chunk, signal.size() - pos);
    pos += stream.push(signal.subspan(pos, n)).accepted;
    drain();
    if (options.realtime_speed > 0.0) {
      const double due = static_cast<double>(pos) / stft.sample_rate / options.realtime_speed;
      std::this_thread::sleep_until(start + std::chrono::duration<double>(due));
    }
  }
  scorer.finish(scores);
  report();
  return scores;
}

}  // namespace weldad::pipeline

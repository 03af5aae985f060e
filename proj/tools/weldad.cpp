// weldad: command-line front end. Logs go to stderr; data to files/stdout.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "weldad/audio/wav.hpp"
#include "weldad/data/synth.hpp"
#include "weldad/error.hpp"
#include "weldad/evaluation/report.hpp"
#include "weldad/json_util.hpp"
#include "weldad/log.hpp"
#include "weldad/nn/checkpoint.hpp"
#include "weldad/pipeline.hpp"
#include "weldad/version.hpp"

using namespace weldad;
namespace fs = std::filesystem;

namespace {

// Exit codes; documented in docs/formats.md.
enum ExitCode {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kNumeric = 5,
  kShapeState = 6,
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Accumulates what a subcommand read and wrote; written as run_manifest.json.
struct RunRecord {
  std::string subcommand;
  std::vector<std::string> argv;
  nlohmann::json config = nullptr;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::string started_at = utc_now();

  void write(const fs::path& dir) const {
    auto files = [](const std::vector<fs::path>& paths) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& p : paths) {
        nlohmann::json f = {{"path", p.string()}};
        if (fs::is_regular_file(p)) {
          f["fnv1a"] = fnv1a_hex(read_file(p));
          f["bytes"] = fs::file_size(p);
        }
        out.push_back(f);
      }
      return out;
    };
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::json j = {{"schema", "weldad.run_manifest/1"},
                        {"tool", "weldad"},
                        {"version", kVersion},
                        {"subcommand", subcommand},
                        {"argv", argv},
                        {"config", config},
                        {"config_hash", config_hash},
                        {"seed", seed},
                        {"inputs", files(inputs)},
                        {"outputs", files(outputs)},
                        {"started_at", started_at},
                        {"wall_time_s", wall}};
    fs::create_directories(dir);
    write_file(dir / "run_manifest.json", j.dump(2) + "\n");
  }
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int verbose = 0;
  bool quiet = false;
};

pipeline::PipelineConfig resolve_config(const Common& common, RunRecord& run) {
  pipeline::PipelineConfig c;
  if (!common.config_path.empty()) {
    c = pipeline::load_config(common.config_path);
    run.inputs.push_back(common.config_path);
  }
  if (common.seed) c.seed = *common.seed;  // flags override the file
  c.validate();
  run.config = c;
  run.config_hash = pipeline::config_hash(c);
  run.seed = c.seed;
  return c;
}

data::DatasetManifest open_manifest(const std::string& path, RunRecord& run) {
  run.inputs.push_back(path);
  return data::load_manifest(path);
}

audio::AudioAutoencoder open_audio_model(const std::string& path, RunRecord& run) {
  run.inputs.push_back(path);
  return audio::AudioAutoencoder::from_checkpoint(nn::load_checkpoint(path));
}

video::VideoAutoencoder open_video_model(const std::string& path, RunRecord& run) {
  run.inputs.push_back(path);
  return video::VideoAutoencoder::from_checkpoint(nn::load_checkpoint(path));
}

void check_audio_model(const audio::AudioAutoencoder& m, const pipeline::PipelineConfig& c) {
  if (m.config().n_bins != c.stft.n_bins()) {
    throw ConfigError("audio checkpoint expects " + std::to_string(m.config().n_bins) +
                      " bins but the STFT config yields " + std::to_string(c.stft.n_bins()));
  }
}

std::string score_line(std::int64_t frame, double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld\t%.17g\n", static_cast<long long>(frame), score);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised weld-defect detection from audio and video embeddings"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common common;
  RunRecord run;
  for (int i = 0; i < argc; ++i) run.argv.emplace_back(argv[i]);

  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) {
      sub->add_option("-c,--config", common.config_path, "Pipeline config (JSON)")
          ->check(CLI::ExistingFile);
      sub->add_option("--seed", common.seed, "Override the config seed");
    }
    sub->add_flag("-v,--verbose", common.verbose, "More logging (repeatable)");
    sub->add_flag("-q,--quiet", common.quiet, "Warnings and errors only");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  data::SynthSpec spec;
  std::string synth_out, spec_path, audio_format = "float32";
  std::vector<std::string> defect_flags;
  int per_category = -1;
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--spec", spec_path, "SynthSpec JSON; flags override it")->check(CLI::ExistingFile);
  auto* o_seed = synth->add_option("--seed", spec.seed, "Corpus seed");
  auto* o_good = synth->add_option("--n-good", spec.n_good, "Good samples");
  synth->add_option("--defect", defect_flags, "Defect count as \"Category=N\" (repeatable)");
  synth->add_option("--defects-per-category", per_category, "N samples of every defect category");
  auto* o_dur = synth->add_option("--duration", spec.duration_s, "Seconds per sample");
  auto* o_sr = synth->add_option("--sample-rate", spec.sample_rate, "Audio sample rate (Hz)");
  auto* o_fps = synth->add_option("--fps", spec.fps, "Embedding frames per second");
  auto* o_int = synth->add_option("--intensity", spec.intensity, "Defect intensity");
  auto* o_f0 = synth->add_option("--f0", spec.f0_hz, "Fundamental (Hz)");
  auto* o_h = synth->add_option("--harmonics", spec.harmonics, "Harmonic count");
  auto* o_jit = synth->add_option("--f0-jitter", spec.f0_jitter, "Relative f0 std per sample");
  auto* o_noise = synth->add_option("--noise-level", spec.noise_level, "Pink noise level");
  auto* o_fmt = synth->add_option("--audio-format", audio_format, "float32|pcm16|pcm24|pcm32");
  auto* o_rank = synth->add_option("--embedding-rank", spec.embedding_rank, "Normal cluster rank");
  auto* o_en = synth->add_option("--embedding-noise", spec.embedding_noise, "Embedding noise std");
  auto* o_vs = synth->add_option("--video-shift", spec.video_shift, "Defect shift scale");
  add_common(synth, false);

  // train-audio / train-video
  std::string manifest_path, out_dir;
  auto* train_audio = app.add_subcommand("train-audio", "Train the audio autoencoder");
  train_audio->add_option("-m,--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train_audio->add_option("-o,--out", out_dir, "Output directory")->required();
  add_common(train_audio);
  auto* train_video = app.add_subcommand("train-video", "Train the video autoencoder");
  train_video->add_option("-m,--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train_video->add_option("-o,--out", out_dir, "Output directory")->required();
  add_common(train_video);

  // score
  std::string audio_ckpt, video_ckpt, wav_path, format = "csv";
  std::optional<int> channel;
  auto* score = app.add_subcommand("score", "Score a corpus, or one WAV frame by frame");
  score->add_option("-m,--manifest", manifest_path, "Dataset manifest")->check(CLI::ExistingFile);
  score->add_option("--audio-ckpt", audio_ckpt, "Audio checkpoint")->check(CLI::ExistingFile);
  score->add_option("--video-ckpt", video_ckpt, "Video checkpoint")->check(CLI::ExistingFile);
  score->add_option("--wav", wav_path, "Score one WAV; frame scores go to stdout")->check(CLI::ExistingFile);
  score->add_option("--channel", channel, "Channel of a multichannel WAV");
  score->add_option("-o,--out", out_dir, "Output directory (corpus mode)");
  score->add_option("--format", format, "Score file format")->check(CLI::IsMember({"csv", "jsonl"}));
  add_common(score);

  // fuse
  std::string audio_scores, video_scores;
  std::optional<double> step;
  auto* fuse = app.add_subcommand("fuse", "Choose the fusion weight on val, evaluate on test");
  fuse->add_option("--audio", audio_scores, "Audio score file")->required()->check(CLI::ExistingFile);
  fuse->add_option("--video", video_scores, "Video score file")->required()->check(CLI::ExistingFile);
  fuse->add_option("-o,--out", out_dir, "Output directory")->required();
  fuse->add_option("--step", step, "Weight grid step (default from config, 0.01)");
  add_common(fuse);

  // eval
  std::string scores_path, split_name = "test", modality_name, title;
  bool use_raw = false;
  auto* eval = app.add_subcommand("eval", "Per-category AUC, ROC/DET and EER report");
  eval->add_option("-s,--scores", scores_path, "Score file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split_name, "train|val|test|all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval->add_option("--modality", modality_name, "audio|video|fused (required if mixed)");
  eval->add_flag("--raw", use_raw, "Use raw instead of z scores");
  eval->add_option("--title", title, "Report title");
  eval->add_option("-o,--out", out_dir, "Write eval_report.json/.txt/.svg here");
  add_common(eval, false);

  // stream
  pipeline::StreamOptions stream_opts;
  stream_opts.realtime_speed = 1.0;
  auto* stream = app.add_subcommand("stream", "Replay a WAV through the streaming scorer");
  stream->add_option("--wav", wav_path, "Input WAV")->required()->check(CLI::ExistingFile);
  stream->add_option("--audio-ckpt", audio_ckpt, "Audio checkpoint")->required()->check(CLI::ExistingFile);
  stream->add_option("--channel", channel, "Channel of a multichannel WAV");
  stream->add_option("--chunk", stream_opts.chunk, "Samples per push")->check(CLI::PositiveNumber);
  stream->add_option("--speed", stream_opts.realtime_speed, "Playback speed; 0 = as fast as possible")
      ->check(CLI::NonNegativeNumber);
  add_common(stream);

  // grid
  pipeline::GridOptions grid_opts;
  auto* grid = app.add_subcommand("grid", "Audio sweep over FFT window x bottleneck");
  grid->add_option("-m,--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  grid->add_option("-o,--out", out_dir, "Output directory")->required();
  grid->add_option("--fft", grid_opts.fft_windows, "FFT windows (default 4096 16384 32768 65536)");
  grid->add_option("--bottleneck", grid_opts.bottlenecks, "Bottlenecks (default 16 32 48 64)");
  grid->add_option("-j,--jobs", grid_opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_common(grid);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  log().set_level(common.quiet         ? spdlog::level::warn
                  : common.verbose > 0 ? spdlog::level::debug
                                       : spdlog::level::info);

  try {
    if (synth->parsed()) {
      run.subcommand = "synth";
      if (!spec_path.empty()) {
        const auto j = nlohmann::json::parse(read_file(spec_path));
        data::SynthSpec file_spec = j.get<data::SynthSpec>();
        // flags given explicitly win over the file
        auto keep = [](CLI::Option* o, auto& dst, const auto& src) {
          if (o->count() == 0) dst = src;
        };
        keep(o_seed, spec.seed, file_spec.seed);
        keep(o_good, spec.n_good, file_spec.n_good);
        keep(o_dur, spec.duration_s, file_spec.duration_s);
        keep(o_sr, spec.sample_rate, file_spec.sample_rate);
        keep(o_fps, spec.fps, file_spec.fps);
        keep(o_int, spec.intensity, file_spec.intensity);
        keep(o_f0, spec.f0_hz, file_spec.f0_hz);
        keep(o_h, spec.harmonics, file_spec.harmonics);
        keep(o_jit, spec.f0_jitter, file_spec.f0_jitter);
        keep(o_noise, spec.noise_level, file_spec.noise_level);
        keep(o_rank, spec.embedding_rank, file_spec.embedding_rank);
        keep(o_en, spec.embedding_noise, file_spec.embedding_noise);
        keep(o_vs, spec.video_shift, file_spec.video_shift);
        if (o_fmt->count() == 0) spec.audio_format = file_spec.audio_format;
        spec.defect_counts = file_spec.defect_counts;
        run.inputs.push_back(spec_path);
      }
      if (o_fmt->count() > 0) {
        spec.audio_format = nlohmann::json{{"audio_format", audio_format}}.get<data::SynthSpec>().audio_format;
      }
      if (per_category >= 0) {
        for (auto c : data::kCategories) {
          if (c != data::kGoodCategory) spec.defect_counts[std::string(c)] = per_category;
        }
      }
      for (const auto& d : defect_flags) {
        const auto eq = d.rfind('=');
        if (eq == std::string::npos) throw ConfigError("--defect expects \"Category=N\", got \"" + d + "\"");
        int n = 0;
        try {
          n = std::stoi(d.substr(eq + 1));
        } catch (const std::exception&) {
          throw ConfigError("--defect count is not an integer: \"" + d + "\"");
        }
        spec.defect_counts[d.substr(0, eq)] = n;
      }
      spec.validate();
      run.config = spec;
      run.config_hash = fnv1a_hex(run.config.dump());
      run.seed = spec.seed;
      const auto manifest = data::generate_corpus(spec, synth_out);
      log().info("wrote {} samples to {}", manifest.entries.size(), synth_out);
      run.outputs.push_back(fs::path(synth_out) / "manifest.jsonl");
      run.write(synth_out);
    } else if (train_audio->parsed() || train_video->parsed()) {
      const bool is_audio = train_audio->parsed();
      run.subcommand = is_audio ? "train-audio" : "train-video";
      const auto c = resolve_config(common, run);
      const auto manifest = open_manifest(manifest_path, run);
      const auto partition = evaluation::partition_of(manifest, c.seed);
      fs::create_directories(out_dir);
      nlohmann::json summary;
      fs::path ckpt;
      if (is_audio) {
        const auto t = pipeline::train_audio(manifest, partition, c);
        ckpt = fs::path(out_dir) / "audio_ae.ckpt";
        nn::save_checkpoint(ckpt, t.model.to_checkpoint());
        summary = {{"epoch_loss", t.result.epoch_loss},
                   {"initial_probe_mse", t.result.initial_probe_mse},
                   {"final_probe_mse", t.result.final_probe_mse},
                   {"steps", t.result.steps}};
      } else {
        const auto t = pipeline::train_video(manifest, partition, c);
        ckpt = fs::path(out_dir) / "video_ae.ckpt";
        nn::save_checkpoint(ckpt, t.model.to_checkpoint());
        summary = {{"epoch_loss", t.result.epoch_loss},
                   {"validation", t.result.validation},
                   {"best_epoch", t.result.best_epoch},
                   {"best_validation", t.result.best_validation},
                   {"initial_probe_mse", t.result.initial_probe_mse},
                   {"final_probe_mse", t.result.final_probe_mse},
                   {"steps", t.result.steps}};
      }
      summary["schema"] = "weldad.train_summary/1";
      summary["n_train"] = partition.train.size();
      const auto summary_path = fs::path(out_dir) / (is_audio ? "train_audio.json" : "train_video.json");
      write_file(summary_path, summary.dump(2) + "\n");
      run.outputs = {ckpt, summary_path};
      run.write(out_dir);
      log().info("wrote {}", ckpt.string());
    } else if (score->parsed()) {
      run.subcommand = "score";
      const auto c = resolve_config(common, run);
      if (!wav_path.empty()) {
        if (audio_ckpt.empty()) throw ConfigError("score --wav needs --audio-ckpt");
        const auto model = open_audio_model(audio_ckpt, run);
        check_audio_model(model, c);
        const auto wav = audio::read_wav(wav_path, channel ? channel : c.audio_channel);
        if (wav.sample_rate != c.stft.sample_rate) {
          throw DataError("WAV sample rate " + std::to_string(wav.sample_rate) +
                          " differs from the configured " + std::to_string(c.stft.sample_rate));
        }
        const auto scores = pipeline::offline_wav_scores(model, c.stft, wav.samples);
        std::string out;
        for (std::size_t i = 0; i < scores.size(); ++i) out += score_line(static_cast<std::int64_t>(i), scores[i]);
        std::cout << out << std::flush;
        if (!out_dir.empty()) run.write(out_dir);
      } else {
        if (manifest_path.empty()) throw ConfigError("score needs --manifest or --wav");
        if (out_dir.empty()) throw ConfigError("score needs --out in corpus mode");
        if (audio_ckpt.empty() && video_ckpt.empty()) {
          throw ConfigError("score needs --audio-ckpt and/or --video-ckpt");
        }
        const auto manifest = open_manifest(manifest_path, run);
        const auto partition = evaluation::partition_of(manifest, c.seed);
        fs::create_directories(out_dir);
        if (!audio_ckpt.empty()) {
          const auto model = open_audio_model(audio_ckpt, run);
          check_audio_model(model, c);
          const auto s = pipeline::score_audio(model, manifest, partition, c);
          const auto path = fs::path(out_dir) / ("scores_audio." + format);
          scoring::save_scores(path, s.records);
          run.outputs.push_back(path);
        }
        if (!video_ckpt.empty()) {
          const auto model = open_video_model(video_ckpt, run);
          const auto s = pipeline::score_video(model, manifest, partition, c);
          const auto path = fs::path(out_dir) / ("scores_video." + format);
          scoring::save_scores(path, s.records);
          run.outputs.push_back(path);
        }
        run.write(out_dir);
      }
    } else if (fuse->parsed()) {
      run.subcommand = "fuse";
      const auto c = resolve_config(common, run);
      run.inputs.push_back(audio_scores);
      run.inputs.push_back(video_scores);
      const auto outcome = pipeline::fuse_records(scoring::load_scores(audio_scores),
                                                  scoring::load_scores(video_scores),
                                                  step.value_or(c.fusion_step));
      fs::create_directories(out_dir);
      const auto report = fs::path(out_dir) / "fusion_report.json";
      const auto fused = fs::path(out_dir) / "scores_fused.csv";
      write_file(report, pipeline::to_json(outcome.report).dump(2) + "\n");
      scoring::save_scores(fused, outcome.fused);
      run.outputs = {report, fused};
      run.write(out_dir);
      std::printf("w_audio %.2f  w_video %.2f  val AUC %.4f  test AUC %.4f\n",
                  outcome.report.validation.w_audio, 1.0 - outcome.report.validation.w_audio,
                  outcome.report.validation.auc, outcome.report.test_auc);
    } else if (eval->parsed()) {
      run.subcommand = "eval";
      run.inputs.push_back(scores_path);
      const auto records = scoring::load_scores(scores_path);
      std::optional<scoring::Modality> modality;
      if (!modality_name.empty()) {
        modality = scoring::modality_from_string(modality_name);
      } else {
        for (const auto& r : records) {
          if (r.modality != records.front().modality) {
            throw ConfigError("score file mixes modalities; pass --modality");
          }
        }
      }
      std::optional<data::Split> split;
      if (split_name != "all") split = data::split_from_string(split_name);
      const auto set = scoring::to_labeled_set(records, modality, split, !use_raw);
      if (title.empty()) {
        title = (modality ? std::string(scoring::to_string(*modality))
                          : records.empty() ? std::string("scores")
                                            : std::string(scoring::to_string(records.front().modality))) +
                " (" + split_name + ")";
      }
      const auto report = evaluation::evaluate(set, title);
      std::cout << evaluation::format_table(report) << std::flush;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_file(dir / "eval_report.json", evaluation::to_json(report).dump(2) + "\n");
        write_file(dir / "eval_report.txt", evaluation::format_table(report));
        write_file(dir / "eval_report.svg", evaluation::render_svg(report));
        run.outputs = {dir / "eval_report.json", dir / "eval_report.txt", dir / "eval_report.svg"};
        run.write(out_dir);
      }
    } else if (stream->parsed()) {
      run.subcommand = "stream";
      const auto c = resolve_config(common, run);
      const auto model = open_audio_model(audio_ckpt, run);
      check_audio_model(model, c);
      const auto wav = audio::read_wav(wav_path, channel ? channel : c.audio_channel);
      if (wav.sample_rate != c.stft.sample_rate) {
        throw DataError("WAV sample rate " + std::to_string(wav.sample_rate) +
                        " differs from the configured " + std::to_string(c.stft.sample_rate));
      }
      log().info("buffer {} samples, frame latency {:.1f} ms",
                 audio::buffer_size(c.stft.hop_length, c.stft.fft_window),
                 audio::model_latency_ms(c.stft.hop_length, c.stft.sample_rate));
      pipeline::stream_wav_scores(model, c.stft, wav.samples, stream_opts,
                                  [](std::int64_t frame, double s) {
                                    std::fputs(score_line(frame, s).c_str(), stdout);
                                    std::fflush(stdout);
                                  });
    } else if (grid->parsed()) {
      run.subcommand = "grid";
      const auto c = resolve_config(common, run);
      const auto manifest = open_manifest(manifest_path, run);
      const auto trials = pipeline::run_grid(manifest, c, grid_opts, out_dir);
      std::cout << pipeline::format_grid_table(trials) << std::flush;
      run.outputs = {fs::path(out_dir) / "grid_report.json", fs::path(out_dir) / "grid_table.txt"};
      for (const auto& t : trials) run.outputs.push_back(fs::path(out_dir) / t.checkpoint);
      run.write(out_dir);
    }
  } catch (const ConfigError& e) {
    log().error("config error: {}", e.what());
    return kConfig;
  } catch (const DataError& e) {
    log().error("data error: {}", e.what());
    return kData;
  } catch (const NumericError& e) {
    log().error("numeric error: {}", e.what());
    return kNumeric;
  } catch (const ShapeError& e) {
    log().error("shape error: {}", e.what());
    return kShapeState;
  } catch (const StateError& e) {
    log().error("state error: {}", e.what());
    return kShapeState;
  } catch (const nlohmann::json::exception& e) {
    log().error("config error: {}", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    log().error("internal error: {}", e.what());
    return kInternal;
  }
  return kOk;
}

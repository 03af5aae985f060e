#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "weldad/audio/wav.hpp"
#include "weldad/error.hpp"
#include "weldad/evaluation/metrics.hpp"
#include "weldad/pipeline.hpp"
#include "weldad/rng.hpp"

using namespace weldad;
using namespace weldad::scoring;
using data::Label;
using data::Split;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("weldad_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Audio/video record pairs over val and test; video separates, audio is noise.
std::pair<std::vector<ScoreRecord>, std::vector<ScoreRecord>> constructed_records(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ScoreRecord> audio, video;
  for (int i = 0; i < 120; ++i) {
    const bool defect = i % 3 == 0;
    ScoreRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.label = defect ? Label::kDefect : Label::kGood;
    r.category = defect ? "Porosity w/Excessive Penetration" : "Good";
    r.split = i < 40 ? Split::kTrain : i < 80 ? Split::kVal : Split::kTest;
    r.modality = Modality::kAudio;
    r.raw_score = r.z_score = rng.normal() + (defect ? 0.8 : 0.0);
    audio.push_back(r);
    r.modality = Modality::kVideo;
    r.raw_score = r.z_score = rng.normal() + (defect ? 1.2 : 0.0);
    video.push_back(r);
  }
  return {audio, video};
}

#ifdef WELDAD_CLI
int run_cli(const std::string& args) {
  const int status = std::system((std::string(WELDAD_CLI) + " " + args + " 2>/dev/null >/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_CASE("score files round trip") {
  auto [audio, video] = constructed_records(1);
  audio[0].sample_id = "needs, \"quoting\"";
  audio[1].split.reset();
  audio[2].raw_score = 1.0 / 3.0;
  CHECK(parse_scores_csv(format_scores_csv(audio)) == audio);
  CHECK(parse_scores_jsonl(format_scores_jsonl(audio)) == audio);

  const auto dir = scratch("scores");
  save_scores(dir / "a.csv", audio);
  save_scores(dir / "a.jsonl", audio);
  CHECK(load_scores(dir / "a.csv") == audio);
  CHECK(load_scores(dir / "a.jsonl") == audio);
  CHECK_THROWS_AS(save_scores(dir / "a.txt", audio), ConfigError);

  const std::string header = "sample_id,modality,label,category,split,raw_score,z_score\n";
  CHECK_THROWS_AS(parse_scores_csv("a,b\n"), DataError);
  CHECK_THROWS_AS(parse_scores_csv(header + "x,audio,good,Good,test,nan,0\n"), DataError);
  CHECK_THROWS_AS(parse_scores_csv(header + "x,audio,defect,Good,test,1,0\n"), DataError);
  CHECK_THROWS_AS(parse_scores_csv(header + "x,radar,good,Good,test,1,0\n"), DataError);
  try {
    parse_scores_csv(header + "x,audio,good,Good,test,1,0\ny,audio,good,Goood,test,1,0\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("pipeline config") {
  pipeline::PipelineConfig c;
  c.seed = 9;
  c.stft.fft_window = 4096;
  c.stft.hop_length = 1024;
  c.audio_model.n_bins = 2049;
  c.audio_aggregation = aggregation_from_string("max_over_ma:2");
  c.audio_channel = 1;
  const nlohmann::json j = c;
  const auto back = j.get<pipeline::PipelineConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(pipeline::config_hash(back) == pipeline::config_hash(c));
  c.seed = 10;
  CHECK(pipeline::config_hash(back) != pipeline::config_hash(c));

  // audio_model.n_bins follows the STFT unless given
  const auto derived = nlohmann::json::parse(R"({"stft": {"fft_window": 1024, "hop_length": 512}})")
                           .get<pipeline::PipelineConfig>();
  CHECK(derived.audio_model.n_bins == 513);
  CHECK_NOTHROW(derived.validate());
  auto bad = derived;
  bad.audio_model.n_bins = 100;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"sede": 1})").get<pipeline::PipelineConfig>(), ConfigError);
  CHECK(derived.audio_recipe().seed != derived.video_recipe().seed);
}

TEST_CASE("fusion over score records matches the library") {
  const auto [audio, video] = constructed_records(2);
  const auto out = pipeline::fuse_records(audio, video);
  std::vector<FusionSample> val, test;
  for (std::size_t i = 0; i < audio.size(); ++i) {
    FusionSample s{audio[i].sample_id, audio[i].z_score, video[i].z_score, audio[i].label, audio[i].category};
    if (audio[i].split == Split::kVal) val.push_back(s);
    if (audio[i].split == Split::kTest) test.push_back(s);
  }
  const auto search = grid_search_weight(val);
  CHECK(out.report.validation.w_audio == search.w_audio);
  CHECK(out.report.validation.auc == search.auc);
  CHECK(out.report.test_auc == evaluation::auc(fused_scores(test, search.w_audio), labels_of(test)));
  CHECK(out.report.validation.auc >= std::max(search.auc_audio, search.auc_video));
  CHECK(out.report.n_val == 40);
  CHECK(out.fused.size() == audio.size());
  CHECK(out.fused[5].z_score == fuse(audio[5].z_score, video[5].z_score, search.w_audio));

  const auto j = pipeline::to_json(out.report);
  CHECK(j["trace"].size() == 101);
  CHECK(j["w_audio"].get<double>() + j["w_video"].get<double>() == 1.0);

  auto missing = video;
  missing.pop_back();
  CHECK_THROWS_AS(pipeline::fuse_records(audio, missing), DataError);
  auto swapped = audio;
  CHECK_THROWS_AS(pipeline::fuse_records(swapped, swapped), DataError);
}

TEST_CASE("standardize uses train statistics") {
  auto [audio, video] = constructed_records(3);
  const auto st = pipeline::standardize(audio);
  double sum = 0;
  int n = 0;
  for (const auto& r : audio) {
    if (r.split == Split::kTrain) sum += r.z_score, ++n;
    CHECK(r.z_score == st.apply(r.raw_score));
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("streaming scores equal offline scores") {
  audio::StftConfig stft;
  stft.sample_rate = 8000;
  stft.fft_window = 256;
  stft.hop_length = 64;
  audio::AudioAeConfig mc;
  mc.n_bins = stft.n_bins();
  mc.width = 12;
  mc.bottleneck = 4;
  audio::AudioAutoencoder model(mc, 4);
  model.set_mode(nn::Mode::kEval);
  Rng rng(4);
  std::vector<float> x(4000);
  for (float& v : x) v = static_cast<float>(0.2 * rng.normal());
  const auto offline = pipeline::offline_wav_scores(model, stft, x);
  CHECK(offline.size() == static_cast<std::size_t>(audio::frame_count(4000, stft)));
  for (std::size_t chunk : {std::size_t{1}, std::size_t{63}, std::size_t{1000}, std::size_t{100000}}) {
    CAPTURE(chunk);
    std::vector<std::int64_t> order;
    const auto streamed = pipeline::stream_wav_scores(model, stft, x, {chunk, 0.0},
                                                      [&](std::int64_t f, double) { order.push_back(f); });
    CHECK(streamed == offline);
    REQUIRE(order.size() == offline.size());
    for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == static_cast<std::int64_t>(i));
  }
  std::vector<float> short_signal(256 + 64 * 5);
  CHECK_THROWS_AS(pipeline::stream_wav_scores(model, stft, short_signal), ShapeError);
}

#ifdef WELDAD_CLI
TEST_CASE("cli eval and fuse") {
  const auto dir = scratch("cli");
  // perfectly separating scores -> All AUC 1.0
  auto [audio, video] = constructed_records(5);
  for (auto& r : audio) r.z_score = r.raw_score = r.label == Label::kDefect ? 10.0 + r.raw_score : r.raw_score - 10.0;
  save_scores(dir / "audio.csv", audio);
  save_scores(dir / "video.jsonl", video);
  REQUIRE(run_cli("eval -s " + (dir / "audio.csv").string() + " -o " + (dir / "eval").string()) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "eval/eval_report.json"));
  CHECK(report["categories"].back()["category"] == "All");
  CHECK(report["categories"].back()["auc"].get<double>() == 1.0);
  CHECK(report["eer"]["eer"].get<double>() == 0.0);
  CHECK(fs::exists(dir / "eval/eval_report.svg"));

  REQUIRE(run_cli("fuse --audio " + (dir / "audio.csv").string() + " --video " +
                  (dir / "video.jsonl").string() + " -o " + (dir / "fuse").string()) == 0);
  const auto fused = nlohmann::json::parse(slurp(dir / "fuse/fusion_report.json"));
  const auto lib = pipeline::fuse_records(audio, video);
  CHECK(fused["w_audio"].get<double>() == lib.report.validation.w_audio);
  CHECK(fused["test"]["auc"].get<double>() == lib.report.test_auc);
  CHECK(load_scores(dir / "fuse/scores_fused.csv") == lib.fused);
  const auto run = nlohmann::json::parse(slurp(dir / "fuse/run_manifest.json"));
  CHECK(run["subcommand"] == "fuse");
  CHECK(run["inputs"].size() == 2);

  // exit codes
  CHECK(run_cli("eval") == 2);
  { std::ofstream(dir / "bad.json") << "{\"seed\": \"x\"}"; }
  CHECK(run_cli("fuse -c " + (dir / "bad.json").string() + " --audio " + (dir / "audio.csv").string() +
                " --video " + (dir / "video.jsonl").string() + " -o " + (dir / "x").string()) == 3);
  { std::ofstream(dir / "broken.csv") << "sample_id,modality,label,category,split,raw_score,z_score\nx,audio,good,Good,test,abc,0\n"; }
  CHECK(run_cli("eval -s " + (dir / "broken.csv").string()) == 4);
  fs::remove_all(dir);
}
#endif

#include "weldad/data/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "weldad/error.hpp"
#include "weldad/json_util.hpp"
#include "weldad/rng.hpp"

namespace weldad::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kOutputGain = 0.1;
constexpr double kEdgeRamp_s = 0.005;
constexpr double kBurstRate_hz = 12.0;
constexpr double kBurstLength_s = 0.004;
constexpr double kBurstDecay_s = 0.001;

std::string slug(std::string_view category) {
  std::string out;
  for (char c : category) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

// 0 outside [a, b], 1 inside, raised-cosine edges of width `ramp`.
double window_gain(double t, double a, double b, double ramp) {
  if (t <= a || t >= b) return 0.0;
  const double edge = std::min(t - a, b - t);
  if (edge >= ramp) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp);
}

audio::SampleFormat format_from_string(const std::string& s) {
  if (s == "float32") return audio::SampleFormat::kFloat32;
  if (s == "pcm16") return audio::SampleFormat::kPcm16;
  if (s == "pcm24") return audio::SampleFormat::kPcm24;
  if (s == "pcm32") return audio::SampleFormat::kPcm32;
  throw ConfigError("unknown audio format \"" + s + "\"");
}

const char* format_name(audio::SampleFormat f) {
  switch (f) {
    case audio::SampleFormat::kPcm16: return "pcm16";
    case audio::SampleFormat::kPcm24: return "pcm24";
    case audio::SampleFormat::kPcm32: return "pcm32";
    case audio::SampleFormat::kFloat32: break;
  }
  return "float32";
}

}  // namespace

std::string_view to_string(DefectFamily f) {
  switch (f) {
    case DefectFamily::kNone: return "none";
    case DefectFamily::kBursts: return "bursts";
    case DefectFamily::kBandAttenuation: return "band_attenuation";
    case DefectFamily::kF0Drift: return "f0_drift";
    case DefectFamily::kLevelJump: return "level_jump";
  }
  return "none";
}

DefectFamily defect_family(std::string_view category) {
  label_for_category(category);  // rejects unknown names
  if (category == kGoodCategory) return DefectFamily::kNone;
  if (category == "Spatter" || category == "Crater Cracks" || category == "Porosity" ||
      category == "Porosity w/Excessive Penetration") {
    return DefectFamily::kBursts;
  }
  if (category == "Lack Of Fusion" || category == "Undercut" || category == "Overlap") {
    return DefectFamily::kBandAttenuation;
  }
  if (category == "Warping" || category == "Excessive Convexity") return DefectFamily::kF0Drift;
  return DefectFamily::kLevelJump;  // Burnthrough, Excessive Penetration
}

void SynthSpec::validate() const {
  if (n_good < 0) throw ConfigError("synth: n_good must be >= 0");
  for (const auto& [category, n] : defect_counts) {
    if (!is_known_category(category)) {
      throw DataError("synth: unknown weld category \"" + category + "\"");
    }
    if (category == kGoodCategory) throw ConfigError("synth: use n_good for good samples");
    if (n < 0) throw ConfigError("synth: count for \"" + category + "\" must be >= 0");
  }
  if (!(duration_s > 0.0)) throw ConfigError("synth: duration_s must be positive");
  if (!(sample_rate > 0.0)) throw ConfigError("synth: sample_rate must be positive");
  if (!(fps > 0.0)) throw ConfigError("synth: fps must be positive");
  if (!(intensity > 0.0)) throw ConfigError("synth: intensity must be positive");
  if (!(f0_hz > 0.0)) throw ConfigError("synth: f0_hz must be positive");
  if (harmonics < 1) throw ConfigError("synth: harmonics must be >= 1");
  if (f0_hz * harmonics * 1.2 >= sample_rate / 2) {
    throw ConfigError("synth: harmonic stack reaches the Nyquist frequency");
  }
  if (f0_jitter < 0.0 || noise_level < 0.0 || embedding_noise < 0.0 || video_shift < 0.0) {
    throw ConfigError("synth: jitter, noise and shift scales must be >= 0");
  }
  if (embedding_rank < 1 || embedding_rank > video::kEmbeddingDim) {
    throw ConfigError("synth: embedding_rank out of range");
  }
  if (std::lround(duration_s * fps) < 1) throw ConfigError("synth: no video frames");
}

int SynthSpec::total() const {
  int n = n_good;
  for (const auto& [category, count] : defect_counts) n += count;
  return n;
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"seed", s.seed},
       {"n_good", s.n_good},
       {"defect_counts", s.defect_counts},
       {"duration_s", s.duration_s},
       {"sample_rate", s.sample_rate},
       {"fps", s.fps},
       {"intensity", s.intensity},
       {"f0_hz", s.f0_hz},
       {"harmonics", s.harmonics},
       {"f0_jitter", s.f0_jitter},
       {"noise_level", s.noise_level},
       {"audio_format", format_name(s.audio_format)},
       {"embedding_rank", s.embedding_rank},
       {"embedding_noise", s.embedding_noise},
       {"video_shift", s.video_shift}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  require_keys_subset(j,
                      {"seed", "n_good", "defect_counts", "duration_s", "sample_rate", "fps",
                       "intensity", "f0_hz", "harmonics", "f0_jitter", "noise_level",
                       "audio_format", "embedding_rank", "embedding_noise", "video_shift"},
                      "synth spec");
  read_optional(j, "seed", s.seed);
  read_optional(j, "n_good", s.n_good);
  read_optional(j, "defect_counts", s.defect_counts);
  read_optional(j, "duration_s", s.duration_s);
  read_optional(j, "sample_rate", s.sample_rate);
  read_optional(j, "fps", s.fps);
  read_optional(j, "intensity", s.intensity);
  read_optional(j, "f0_hz", s.f0_hz);
  read_optional(j, "harmonics", s.harmonics);
  read_optional(j, "f0_jitter", s.f0_jitter);
  read_optional(j, "noise_level", s.noise_level);
  std::string format = format_name(s.audio_format);
  read_optional(j, "audio_format", format);
  s.audio_format = format_from_string(format);
  read_optional(j, "embedding_rank", s.embedding_rank);
  read_optional(j, "embedding_noise", s.embedding_noise);
  read_optional(j, "video_shift", s.video_shift);
}

VideoCluster make_video_cluster(const SynthSpec& spec) {
  Rng rng(derive_seed(spec.seed, "synth/video_cluster"));
  VideoCluster c;
  c.mean.resize(video::kEmbeddingDim);
  for (Eigen::Index i = 0; i < c.mean.size(); ++i) c.mean(i) = rng.normal();
  c.basis.resize(video::kEmbeddingDim, spec.embedding_rank);
  for (Eigen::Index k = 0; k < c.basis.cols(); ++k) {
    for (Eigen::Index i = 0; i < c.basis.rows(); ++i) c.basis(i, k) = 0.5 * rng.normal();
  }
  return c;
}

SynthSample synthesize_sample(const SynthSpec& spec, const VideoCluster& cluster,
                              const std::string& sample_id, const std::string& category) {
  const DefectFamily family = defect_family(category);
  Rng rng(derive_seed(spec.seed, "synth/sample/" + sample_id));
  SynthSample s;
  s.sample_id = sample_id;
  s.category = category;

  // Event draws use their own stream so the normal part depends on the id only.
  Rng event_rng(derive_seed(spec.seed, "synth/event/" + sample_id));
  const double dur = spec.duration_s;
  if (family != DefectFamily::kNone) {
    s.event_start_s = dur * event_rng.uniform(0.1, 0.4);
    s.event_end_s = s.event_start_s + dur * event_rng.uniform(0.3, 0.5);
  }
  const double a = s.event_start_s, b = s.event_end_s, k = spec.intensity;

  // Audio: harmonic stack with a jittered fundamental and slow vibrato.
  const double f0 = spec.f0_hz * (1.0 + spec.f0_jitter * rng.normal());
  const double vibrato_hz = rng.uniform(0.3, 1.0), vibrato_phase = rng.uniform(0.0, kTwoPi);
  std::vector<double> amp(spec.harmonics), phase(spec.harmonics);
  double stack_power = 0.0;
  for (int h = 0; h < spec.harmonics; ++h) {
    amp[h] = (1.0 + 0.1 * rng.normal()) / (h + 1);
    phase[h] = rng.uniform(0.0, kTwoPi);
    stack_power += 0.5 * amp[h] * amp[h];
  }
  const double stack_rms = std::sqrt(stack_power);
  std::vector<double> cos_phase(spec.harmonics), sin_phase(spec.harmonics);
  for (int h = 0; h < spec.harmonics; ++h) {
    cos_phase[h] = std::cos(phase[h]);
    sin_phase[h] = std::sin(phase[h]);
  }
  // Band attenuation hits harmonics in [4 f0, 16 f0).
  const double band_gain_db = -24.0 * k;
  const double drift = 0.08 * k;
  const double level_gain = std::pow(10.0, 9.0 * k / 20.0) - 1.0;

  const std::size_t n = static_cast<std::size_t>(std::llround(dur * spec.sample_rate));
  s.audio.resize(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;  // pink filter state
  double theta = 0.0;
  const double inv_sr = 1.0 / spec.sample_rate;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * inv_sr;
    const double g = window_gain(t, a, b, kEdgeRamp_s);
    double f = f0 * (1.0 + 0.005 * std::sin(kTwoPi * vibrato_hz * t + vibrato_phase));
    if (family == DefectFamily::kF0Drift && t > a && t < b) {
      f *= 1.0 + drift * std::sin(std::numbers::pi * (t - a) / (b - a));
    }
    theta += kTwoPi * f * inv_sr;
    if (theta > kTwoPi) theta -= kTwoPi;
    // sin((h+1) theta + phase_h) via powers of e^{i theta}
    const double c1 = std::cos(theta), s1 = std::sin(theta);
    const double band = family == DefectFamily::kBandAttenuation && g > 0.0
                            ? std::pow(10.0, g * band_gain_db / 20.0)
                            : 1.0;
    double ck = c1, sk = s1, v = 0.0;
    for (int h = 0; h < spec.harmonics; ++h) {
      const double ah = (h >= 3 && h < 15) ? amp[h] * band : amp[h];
      v += ah * (sk * cos_phase[h] + ck * sin_phase[h]);
      const double cn = ck * c1 - sk * s1;
      sk = sk * c1 + ck * s1;
      ck = cn;
    }
    // Paul Kellet's pink filter over unit white noise; output rms ~ 1.
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    const double pink = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362) * 0.2;
    b6 = w * 0.115926;
    v += spec.noise_level * stack_rms * pink;
    if (family == DefectFamily::kLevelJump) v *= 1.0 + g * level_gain;
    x[i] = v;
  }
  if (family == DefectFamily::kBursts) {
    const int n_bursts = std::max(1, static_cast<int>(std::lround(kBurstRate_hz * (b - a))));
    const std::size_t burst_len = static_cast<std::size_t>(kBurstLength_s * spec.sample_rate);
    for (int j = 0; j < n_bursts; ++j) {
      const double onset = event_rng.uniform(a, std::max(a, b - kBurstLength_s));
      s.burst_onsets_s.push_back(onset);
      const std::size_t i0 = static_cast<std::size_t>(onset * spec.sample_rate);
      const double peak = 6.0 * k * stack_rms;
      for (std::size_t m = 0; m < burst_len && i0 + m < n; ++m) {
        x[i0 + m] += peak * std::exp(-static_cast<double>(m) * inv_sr / kBurstDecay_s) * event_rng.normal();
      }
    }
    std::sort(s.burst_onsets_s.begin(), s.burst_onsets_s.end());
  }
  const double gain = kOutputGain / stack_rms;
  for (std::size_t i = 0; i < n; ++i) {
    s.audio[i] = static_cast<float>(std::clamp(x[i] * gain, -1.0, 1.0));
  }

  // Video: temporally smooth latent walk inside the normal cluster.
  const int n_frames = static_cast<int>(std::lround(dur * spec.fps));
  const int dim = video::kEmbeddingDim, rank = spec.embedding_rank;
  nn::Vector shift = nn::Vector::Zero(dim);
  if (family != DefectFamily::kNone) {
    Rng dir(derive_seed(spec.seed, "synth/direction/" + category));
    for (int i = 0; i < dim; ++i) shift(i) = spec.video_shift * k * dir.normal();
  }
  s.embeddings.sample_id = sample_id;
  s.embeddings.fps = spec.fps;
  s.embeddings.frames.resize(dim, n_frames);
  nn::Vector z(rank);
  for (int r = 0; r < rank; ++r) z(r) = rng.normal();
  constexpr double kRho = 0.9;
  const double innovation = std::sqrt(1.0 - kRho * kRho);
  for (int f = 0; f < n_frames; ++f) {
    if (f > 0) {
      for (int r = 0; r < rank; ++r) z(r) = kRho * z(r) + innovation * rng.normal();
    }
    nn::Vector col = cluster.mean + cluster.basis * z;
    for (int i = 0; i < dim; ++i) col(i) += spec.embedding_noise * rng.normal();
    const double t = (f + 0.5) / spec.fps;
    if (family != DefectFamily::kNone && t > a && t < b) col += shift;
    // stored as float32 on disk; round here so memory and file agree
    for (int i = 0; i < dim; ++i) col(i) = static_cast<float>(col(i));
    s.embeddings.frames.col(f) = col;
  }
  return s;
}

std::vector<std::pair<std::string, std::string>> synth_plan(const SynthSpec& spec) {
  spec.validate();
  std::vector<std::pair<std::string, std::string>> plan;
  auto add = [&](std::string_view category, int count) {
    for (int i = 0; i < count; ++i) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "-%04d", i);
      plan.emplace_back(slug(category) + idx, std::string(category));
    }
  };
  add(kGoodCategory, spec.n_good);
  for (std::string_view category : kCategories) {
    auto it = spec.defect_counts.find(std::string(category));
    if (it != spec.defect_counts.end()) add(category, it->second);
  }
  return plan;
}

DatasetManifest generate_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  const auto plan = synth_plan(spec);
  const VideoCluster cluster = make_video_cluster(spec);
  std::filesystem::create_directories(out_dir / "audio");
  std::filesystem::create_directories(out_dir / "video");
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (const auto& [id, category] : plan) {
    const SynthSample s = synthesize_sample(spec, cluster, id, category);
    ManifestEntry e;
    e.sample_id = id;
    e.audio_path = "audio/" + id + ".wav";
    e.embedding_path = "video/" + id + ".emb";
    e.category = category;
    Rng meta(derive_seed(spec.seed, "synth/meta/" + id));
    e.weld_type = std::string(kWeldTypes[meta.below(kWeldTypes.size())]);
    e.material = std::string(kMaterials[meta.below(kMaterials.size())]);
    e.duration_s = static_cast<double>(s.audio.size()) / spec.sample_rate;
    audio::write_wav(out_dir / e.audio_path, s.audio,
                     static_cast<std::uint32_t>(std::lround(spec.sample_rate)), spec.audio_format);
    video::save_embeddings(out_dir / e.embedding_path, s.embeddings);
    manifest.entries.push_back(std::move(e));
  }
  save_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace weldad::data

// Python bindings. Configs and specs are passed as dicts (JSON-shaped).
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "weldad/audio/autoencoder.hpp"
#include "weldad/audio/stft.hpp"
#include "weldad/audio/wav.hpp"
#include "weldad/data/synth.hpp"
#include "weldad/error.hpp"
#include "weldad/evaluation/metrics.hpp"
#include "weldad/nn/checkpoint.hpp"
#include "weldad/pipeline.hpp"
#include "weldad/scoring/aggregate.hpp"
#include "weldad/scoring/fusion.hpp"
#include "weldad/version.hpp"
#include "weldad/video/autoencoder.hpp"
#include "weldad/video/embedding.hpp"

namespace py = pybind11;
using namespace weldad;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

nlohmann::json to_json(const py::object& o) {
  if (o.is_none()) return nlohmann::json::object();
  const auto text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<double> as_vector(const DoubleArray& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

// Labels as booleans (True = defect) or "good"/"defect" strings.
std::vector<data::Label> as_labels(const py::sequence& labels) {
  std::vector<data::Label> out;
  for (const auto& item : labels) {
    if (py::isinstance<py::str>(item)) {
      out.push_back(data::label_from_string(item.cast<std::string>()));
    } else {
      out.push_back(item.cast<bool>() ? data::Label::kDefect : data::Label::kGood);
    }
  }
  return out;
}

py::array_t<double> matrix_to_numpy(const nn::Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  auto r = out.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
  return out;
}

audio::StftConfig stft_config(const py::object& o) { return to_json(o).get<audio::StftConfig>(); }

std::vector<float> as_signal(const FloatArray& a) {
  if (a.ndim() != 1) throw ShapeError("expected a mono 1-d signal");
  return {a.data(), a.data() + a.size()};
}

py::dict experiment_summary(const pipeline::ExperimentResult& r) {
  py::dict d;
  d["audio_val_auc"] = r.audio_val_auc;
  d["audio_test_auc"] = r.audio_test_auc;
  d["video_val_auc"] = r.video_val_auc;
  d["video_test_auc"] = r.video_test_auc;
  d["fusion"] = to_py(pipeline::to_json(r.fusion.report));
  return d;
}

}  // namespace

PYBIND11_MODULE(weldad, m) {
  m.doc() = "Unsupervised weld-defect detection from audio and video embeddings";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  // evaluation
  m.def("auc", [](const DoubleArray& s, const py::sequence& l) {
    return evaluation::auc(as_vector(s), as_labels(l));
  }, py::arg("scores"), py::arg("labels"), "Pair-counting AUC; defects are positive.");
  m.def("auc_trapezoid", [](const DoubleArray& s, const py::sequence& l) {
    return evaluation::auc_trapezoid(as_vector(s), as_labels(l));
  }, py::arg("scores"), py::arg("labels"));
  m.def("roc_curve", [](const DoubleArray& s, const py::sequence& l) {
    py::list out;
    for (const auto& p : evaluation::roc_curve(as_vector(s), as_labels(l)))
      out.append(py::make_tuple(p.fpr, p.tpr, p.threshold));
    return out;
  }, py::arg("scores"), py::arg("labels"), "List of (fpr, tpr, threshold).");
  m.def("eer", [](const DoubleArray& s, const py::sequence& l) {
    return evaluation::eer(as_vector(s), as_labels(l)).eer;
  }, py::arg("scores"), py::arg("labels"));

  // scoring
  m.def("aggregate", [](const DoubleArray& s, double period, const std::string& method) {
    return scoring::aggregate(as_vector(s), period, scoring::aggregation_from_string(method));
  }, py::arg("scores"), py::arg("frame_period"), py::arg("method") = "mean",
     "method: mean | max | max_over_ma:<seconds>");
  m.def("fit_standardizer", [](const DoubleArray& s) {
    const auto st = scoring::fit_standardizer(as_vector(s));
    return py::make_tuple(st.mean, st.std, st.degenerate);
  }, py::arg("training_scores"), "(mean, std, degenerate)");
  m.def("fuse", &scoring::fuse, py::arg("z_audio"), py::arg("z_video"), py::arg("w_audio"));
  m.def("grid_search_weight", [](const DoubleArray& za, const DoubleArray& zv,
                                 const py::sequence& l, double step) {
    const auto a = as_vector(za), v = as_vector(zv);
    const auto labels = as_labels(l);
    if (a.size() != v.size() || a.size() != labels.size()) throw ShapeError("length mismatch");
    std::vector<scoring::FusionSample> samples;
    for (std::size_t i = 0; i < a.size(); ++i) {
      samples.push_back({std::to_string(i), a[i], v[i], labels[i],
                         labels[i] == data::Label::kGood ? "Good" : "Porosity"});
    }
    const auto r = scoring::grid_search_weight(samples, step);
    py::dict d;
    d["w_audio"] = r.w_audio;
    d["auc"] = r.auc;
    d["auc_audio"] = r.auc_audio;
    d["auc_video"] = r.auc_video;
    d["trace"] = r.trace;
    return d;
  }, py::arg("z_audio"), py::arg("z_video"), py::arg("labels"), py::arg("step") = 0.01);

  // audio front end
  m.def("buffer_size", &audio::buffer_size, py::arg("hop_length"), py::arg("fft_window"));
  m.def("model_latency_ms", &audio::model_latency_ms, py::arg("hop_length"), py::arg("sample_rate"));
  m.def("stft_magnitude", [](const FloatArray& x, const py::object& config) {
    const auto signal = as_signal(x);
    return matrix_to_numpy(audio::stft_magnitude(signal, stft_config(config)).magnitudes);
  }, py::arg("signal"), py::arg("config") = py::none(), "n_bins x n_frames magnitudes.");
  m.def("read_wav", [](const std::filesystem::path& p, std::optional<int> channel) {
    const auto w = audio::read_wav(p, channel);
    return py::make_tuple(py::array_t<float>(w.samples.size(), w.samples.data()), w.sample_rate);
  }, py::arg("path"), py::arg("channel") = py::none(), "(samples, sample_rate)");
  m.def("write_wav", [](const std::filesystem::path& p, const FloatArray& x, std::uint32_t sr) {
    audio::write_wav(p, as_signal(x), sr);
  }, py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  // models
  m.def("audio_ae_param_count", [](const py::object& config) {
    return audio::audio_ae_param_count(to_json(config).get<audio::AudioAeConfig>());
  }, py::arg("config") = py::none());
  m.def("video_ae_param_count", [](const py::object& config) {
    return video::video_ae_param_count(to_json(config).get<video::VideoAeConfig>());
  }, py::arg("config") = py::none());

  py::class_<audio::AudioAutoencoder>(m, "AudioModel")
      .def(py::init([](const py::object& config, std::uint64_t seed) {
             audio::AudioAutoencoder a(to_json(config).get<audio::AudioAeConfig>(), seed);
             a.set_mode(nn::Mode::kEval);
             return a;
           }), py::arg("config") = py::none(), py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) {
        return audio::AudioAutoencoder::from_checkpoint(nn::load_checkpoint(p));
      }, py::arg("path"))
      .def("save", [](const audio::AudioAutoencoder& a, const std::filesystem::path& p) {
        nn::save_checkpoint(p, a.to_checkpoint());
      }, py::arg("path"))
      .def_property_readonly("param_count", &audio::AudioAutoencoder::param_count)
      .def_property_readonly("config", [](const audio::AudioAutoencoder& a) {
        return to_py(nlohmann::json(a.config()));
      })
      .def("frame_scores", [](const audio::AudioAutoencoder& a, const FloatArray& x,
                              const py::object& stft) {
        const auto signal = as_signal(x);
        return pipeline::offline_wav_scores(a, stft_config(stft), signal);
      }, py::arg("signal"), py::arg("stft") = py::none(), "Offline per-frame MSE.")
      .def("stream_scores", [](const audio::AudioAutoencoder& a, const FloatArray& x,
                               const py::object& stft, std::size_t chunk) {
        const auto signal = as_signal(x);
        return pipeline::stream_wav_scores(a, stft_config(stft), signal, {chunk, 0.0});
      }, py::arg("signal"), py::arg("stft") = py::none(), py::arg("chunk") = 4096,
         "Per-frame MSE through the streaming path.");

  py::class_<video::VideoAutoencoder>(m, "VideoModel")
      .def(py::init([](const py::object& config, std::uint64_t seed) {
             return video::VideoAutoencoder(to_json(config).get<video::VideoAeConfig>(), seed);
           }), py::arg("config") = py::none(), py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) {
        return video::VideoAutoencoder::from_checkpoint(nn::load_checkpoint(p));
      }, py::arg("path"))
      .def_property_readonly("param_count", &video::VideoAutoencoder::param_count)
      .def("frame_scores", [](const video::VideoAutoencoder& v, const DoubleArray& frames, double fps) {
        if (frames.ndim() != 2) throw ShapeError("expected frames x dim");
        video::EmbeddingSequence e;
        e.fps = fps;
        e.frames.resize(frames.shape(1), frames.shape(0));
        auto r = frames.unchecked<2>();
        for (py::ssize_t f = 0; f < frames.shape(0); ++f)
          for (py::ssize_t d = 0; d < frames.shape(1); ++d) e.frames(d, f) = r(f, d);
        return video::video_frame_scores(v, e).scores;
      }, py::arg("frames"), py::arg("fps") = 30.0, "frames: n_frames x 2304 array.");

  // embedding files
  m.def("load_embeddings", [](const std::filesystem::path& p) {
    const auto e = video::load_embeddings(p);
    return py::make_tuple(e.sample_id, e.fps, matrix_to_numpy(e.frames.transpose()));
  }, py::arg("path"), "(sample_id, fps, frames x dim array)");
  m.def("save_embeddings", [](const std::filesystem::path& p, const std::string& id, double fps,
                              const DoubleArray& frames) {
    if (frames.ndim() != 2) throw ShapeError("expected frames x dim");
    video::EmbeddingSequence e{id, fps, nn::Matrix(frames.shape(1), frames.shape(0))};
    auto r = frames.unchecked<2>();
    for (py::ssize_t f = 0; f < frames.shape(0); ++f)
      for (py::ssize_t d = 0; d < frames.shape(1); ++d) e.frames(d, f) = r(f, d);
    video::save_embeddings(p, e);
  }, py::arg("path"), py::arg("sample_id"), py::arg("fps"), py::arg("frames"));

  // corpus + experiments
  m.def("generate_corpus", [](const py::object& spec, const std::filesystem::path& out) {
    const auto manifest = data::generate_corpus(to_json(spec).get<data::SynthSpec>(), out);
    return manifest.entries.size();
  }, py::arg("spec"), py::arg("out_dir"), "Writes a synthetic corpus; returns the sample count.");
  m.def("run_experiment", [](const std::filesystem::path& manifest, const py::object& config,
                             std::optional<std::filesystem::path> out_dir) {
    const auto c = to_json(config).get<pipeline::PipelineConfig>();
    const auto m = data::load_manifest(manifest);
    std::optional<pipeline::ExperimentResult> r;
    {
      py::gil_scoped_release release;
      r.emplace(pipeline::run_experiment(m, c, out_dir));
    }
    return experiment_summary(*r);
  }, py::arg("manifest"), py::arg("config") = py::none(), py::arg("out_dir") = py::none());
}

import json
import math

import numpy as np
import pytest

import weldad


def test_auc_examples():
    assert weldad.auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True]) == pytest.approx(0.75)
    assert weldad.auc([0.0, 1.0], ["good", "defect"]) == 1.0
    assert weldad.auc([0.5, 0.5], [False, True]) == 0.5
    with pytest.raises(weldad.Error):
        weldad.auc([0.1, 0.2], [True, True])


def test_roc_and_eer():
    pts = weldad.roc_curve([0.1, 0.4, 0.35, 0.8], [False, False, True, True])
    assert pts[0][:2] == (0.0, 0.0) and pts[-1][:2] == (1.0, 1.0)
    assert weldad.eer([0.0, 0.1, 0.9, 1.0], [False, False, True, True]) == 0.0


def test_aggregate_and_fusion():
    assert weldad.aggregate([1.0, 2.0, 3.0], 0.01, "mean") == pytest.approx(2.0)
    assert weldad.aggregate([1.0, 5.0, 3.0], 0.01, "max") == 5.0
    assert weldad.fuse(1.0, -1.0, 0.37) == pytest.approx(-0.26)
    mean, std, degenerate = weldad.fit_standardizer([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0) and not degenerate
    r = weldad.grid_search_weight([0.0, 0.0, 1.0, 1.0], [0.0, 1.0, 0.0, 1.0],
                                  [False, True, False, True])
    assert r["w_audio"] == 0.0 and r["auc"] == 1.0 and len(r["trace"]) == 101


def test_frontend_constants():
    assert weldad.buffer_size(8192, 16384) == 12 * 8192
    with pytest.raises(weldad.ConfigError):
        weldad.buffer_size(3000, 16384)
    assert weldad.model_latency_ms(2048, 192000) == pytest.approx(10.666666, rel=1e-5)


def test_stft_and_wav_round_trip(tmp_path):
    sr = 16000
    t = np.arange(sr // 4) / sr
    x = (0.5 * np.sin(2 * math.pi * 1000 * t)).astype(np.float32)
    cfg = {"sample_rate": sr, "fft_window": 512, "hop_length": 256}
    mag = weldad.stft_magnitude(x, cfg)
    assert mag.shape[0] == 257
    assert int(np.argmax(mag[:, mag.shape[1] // 2])) == 32  # 1 kHz bin
    p = tmp_path / "tone.wav"
    weldad.write_wav(p, x, sr)
    y, rate = weldad.read_wav(p)
    assert rate == sr and np.array_equal(x, y)


def test_embedding_file_round_trip(tmp_path):
    frames = np.random.default_rng(0).normal(size=(5, 2304)).astype(np.float32)
    p = tmp_path / "x.emb"
    weldad.save_embeddings(p, "spatter-0001", 30.0, frames)
    sid, fps, back = weldad.load_embeddings(p)
    assert sid == "spatter-0001" and fps == 30.0
    assert np.array_equal(back, frames.astype(np.float64))
    p.write_bytes(b"garbage!")
    with pytest.raises(weldad.DataError):
        weldad.load_embeddings(p)


def test_models(tmp_path):
    cfg = {"n_bins": 33, "width": 16, "bottleneck": 4}
    model = weldad.AudioModel(cfg, seed=3)
    assert model.param_count == weldad.audio_ae_param_count(cfg)
    x = np.random.default_rng(1).normal(scale=0.1, size=16000).astype(np.float32)
    stft = {"sample_rate": 16000, "fft_window": 64, "hop_length": 32}
    offline = model.frame_scores(x, stft)
    streamed = model.stream_scores(x, stft, chunk=333)
    assert len(offline) > 0 and np.allclose(offline, streamed, rtol=1e-9, atol=0)
    model.save(tmp_path / "a.ckpt")
    again = weldad.AudioModel.load(tmp_path / "a.ckpt")
    assert np.array_equal(again.frame_scores(x, stft), offline)
    assert weldad.video_ae_param_count() == weldad.VideoModel().param_count
    v = weldad.VideoModel(seed=1).frame_scores(np.zeros((20, 2304)), 30.0)
    assert len(v) > 0 and min(v) >= 0.0


def test_config_errors():
    with pytest.raises(weldad.ConfigError):
        weldad.AudioModel({"n_bins": 33, "width": 16, "bottleneck": 4, "bogus": 1})


def test_synth_and_experiment(tmp_path):
    spec = {"seed": 5, "n_good": 12, "defect_counts": {"Spatter": 6, "Undercut": 6},
            "duration_s": 1.0, "sample_rate": 16000}
    n = weldad.generate_corpus(spec, tmp_path / "corpus")
    assert n == 24
    cfg = {
        "seed": 1,
        "stft": {"sample_rate": 16000, "fft_window": 512, "hop_length": 256},
        "audio_model": {"width": 16, "bottleneck": 4},
        "audio_training": {"epochs": 1},
        "video_model": {"dims": [2304, 32, 16, 8, 8, 8, 8, 8, 16, 32, 2304]},
        "video_training": {"epochs": 2, "eval_every": 1},
    }
    r = weldad.run_experiment(tmp_path / "corpus" / "manifest.jsonl", cfg, tmp_path / "out")
    assert 0.0 <= r["audio_test_auc"] <= 1.0
    assert r["fusion"]["schema"] == "weldad.fusion_report/1"
    assert (tmp_path / "out" / "fusion_report.json").exists()

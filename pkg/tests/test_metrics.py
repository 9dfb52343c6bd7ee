import json

import numpy as np
import pytest

from ficg.data import FeatureDims, TrainingSample, UtteranceRecord
from ficg.metrics import (MetricReport, evaluate, format_report, mae,
                          report_to_obj, save_report)
from ficg.model import AblationMode, forward, init_model

DIMS = FeatureDims(3, 4, 5, 6)


def make_samples(n, seed=0):
    rng = np.random.default_rng(seed)

    def utt(q):
        return UtteranceRecord(
            speaker_id=int(rng.integers(0, 2)),
            words=tuple(f"w{k}" for k in range(q)),
            word_text_feats=rng.normal(size=(q, DIMS.word_text)),
            word_speech_feats=rng.normal(size=(q, DIMS.word_speech)),
            utt_text_feat=rng.normal(size=DIMS.utt_text),
            utt_speech_feat=rng.normal(size=DIMS.utt_speech),
            pitch_target=float(rng.normal()), energy_target=float(rng.normal()))

    samples = []
    for i in range(n):
        counts = [int(rng.integers(1, 4)) for _ in range(1 + i % 3)]
        samples.append(TrainingSample(
            history=tuple(utt(q) for q in counts), current=utt(2)))
    return samples


def test_mae_frozen_oracle():
    assert mae([1.0, 2.0, 5.0], [0.0, 2.0, 3.0]) == (1.0 + 0.0 + 2.0) / 3.0


def test_mae_rejects_bad_input():
    with pytest.raises(ValueError, match="equal-length 1-D"):
        mae([1.0, 2.0], [1.0])
    with pytest.raises(ValueError, match="equal-length 1-D"):
        mae(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="at least one"):
        mae([], [])


def test_evaluate_report_is_self_consistent():
    samples = make_samples(12)
    params = init_model(DIMS, 6, 5, 2, 0)
    report = evaluate(params, AblationMode.FULL, samples)
    assert report.n_samples == 12
    assert report.residuals_pitch.shape == (12,)
    assert report.mae_pitch == float(report.residuals_pitch.mean())
    assert report.mae_energy == float(report.residuals_energy.mean())
    # residuals line up with per-sample forward passes in sample order
    for i, sample in enumerate(samples):
        pred, _ = forward(sample, params, AblationMode.FULL)
        assert abs(report.residuals_pitch[i]
                   - abs(pred[0] - sample.current.pitch_target)) < 1e-12
        assert abs(report.residuals_energy[i]
                   - abs(pred[1] - sample.current.energy_target)) < 1e-12


def test_evaluate_parallel_matches_serial_bitwise():
    samples = make_samples(20, seed=1)
    params = init_model(DIMS, 6, 5, 2, 0)
    serial = evaluate(params, AblationMode.FULL, samples, jobs=1)
    parallel = evaluate(params, AblationMode.FULL, samples, jobs=4)
    assert np.array_equal(serial.residuals_pitch, parallel.residuals_pitch)
    assert np.array_equal(serial.residuals_energy, parallel.residuals_energy)
    assert serial.mae_pitch == parallel.mae_pitch


def test_evaluate_rejects_empty():
    params = init_model(DIMS, 6, 5, 2, 0)
    with pytest.raises(ValueError, match="no samples"):
        evaluate(params, AblationMode.FULL, [])


def test_report_save_round_trip(tmp_path):
    report = MetricReport(mae_pitch=0.125, mae_energy=0.25, n_samples=2,
                          residuals_pitch=np.array([0.1, 0.15]),
                          residuals_energy=np.array([0.2, 0.3]))
    path = tmp_path / "report.json"
    save_report(report, path)
    obj = json.loads(path.read_text(encoding="utf-8"))
    assert obj == report_to_obj(report)
    assert obj["mae_pitch"] == 0.125
    assert obj["residuals_energy"] == [0.2, 0.3]


def test_format_report_frozen_layout():
    report = MetricReport(mae_pitch=0.5, mae_energy=0.25, n_samples=3,
                          residuals_pitch=np.zeros(3), residuals_energy=np.zeros(3))
    assert format_report(report) == (
        "metric               value\n"
        "mae_pitch         0.500000\n"
        "mae_energy        0.250000\n"
        "n_samples                3\n")

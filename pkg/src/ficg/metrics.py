"""Evaluation: mean absolute error per target and per-sample residuals."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import TrainingSample, quantize
from .encoder import EncoderSettings
from .engine import batch_forward, build_groups
from .model import AblationMode, ModelParams


@dataclass(frozen=True, eq=False)
class MetricReport:
    mae_pitch: float
    mae_energy: float
    n_samples: int
    residuals_pitch: np.ndarray   # absolute residuals, sample order
    residuals_energy: np.ndarray


def mae(predictions, targets) -> float:
    """Mean absolute error between two equal-length 1-D sequences."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError(f"mae expects equal-length 1-D arrays, got {p.shape} and {t.shape}")
    if p.shape[0] == 0:
        raise ValueError("mae needs at least one value")
    return float(np.mean(np.abs(p - t)))


def evaluate(params: ModelParams, mode: AblationMode,
             samples: list[TrainingSample],
             settings: EncoderSettings = EncoderSettings(),
             jobs: int = 1) -> MetricReport:
    """Score samples; the report's MAE fields are exactly the means of its
    residual columns. jobs > 1 parallelizes over shape groups (read-only
    parameters); the output is identical regardless of scheduling because
    every group writes a disjoint slice of the result.
    """
    if not samples:
        raise ValueError("no samples to evaluate")
    groups = build_groups(samples)
    preds = np.zeros((len(samples), 2))
    if jobs > 1:
        def run(group):
            return group, batch_forward(group, params, mode, settings)[0]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for group, p in pool.map(run, groups):
                preds[group.indices] = p
    else:
        for group in groups:
            preds[group.indices] = batch_forward(group, params, mode, settings)[0]
    targets = np.array([[s.current.pitch_target, s.current.energy_target]
                        for s in samples])
    res_p = np.abs(preds[:, 0] - targets[:, 0])
    res_e = np.abs(preds[:, 1] - targets[:, 1])
    return MetricReport(mae_pitch=float(res_p.mean()), mae_energy=float(res_e.mean()),
                        n_samples=len(samples), residuals_pitch=res_p,
                        residuals_energy=res_e)


def report_to_obj(report: MetricReport) -> dict:
    return {"mae_pitch": quantize(report.mae_pitch),
            "mae_energy": quantize(report.mae_energy),
            "n_samples": report.n_samples,
            "residuals_pitch": [quantize(v) for v in report.residuals_pitch],
            "residuals_energy": [quantize(v) for v in report.residuals_energy]}


def save_report(report: MetricReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_obj(report), separators=(",", ":"),
                                     allow_nan=False) + "\n", encoding="utf-8")


def format_report(report: MetricReport) -> str:
    lines = [f"{'metric':<12}{'value':>14}",
             f"{'mae_pitch':<12}{report.mae_pitch:>14.6f}",
             f"{'mae_energy':<12}{report.mae_energy:>14.6f}",
             f"{'n_samples':<12}{report.n_samples:>14d}"]
    return "\n".join(lines) + "\n"

"""Prosody targets: mean log-F0 over voiced frames and mean frame RMS.

A frame counts as voiced when it clears an absolute silence floor, holds a
minimum share of the utterance's loudest frame, and shows a periodic
autocorrelation peak. The floor is the only amplitude-absolute gate, so
rescaling a clearly audible waveform leaves the voiced set, and with it the
raw pitch target, unchanged, while the raw energy target scales.

Raw targets are z-normalized per corpus (population variance) as a second
pass once every utterance has been measured.
"""

from __future__ import annotations

import numpy as np

from .audio import frame_f0, frame_rms

RMS_FLOOR = 1e-4
RMS_RELATIVE = 0.1
MIN_PERIODICITY = 0.4


def prosody_raw(signal: np.ndarray, sample_rate: int) -> tuple[float, float] | None:
    """(mean log F0 over voiced frames, mean RMS), or None if unvoiced."""
    rms = frame_rms(signal, sample_rate)
    f0, periodicity = frame_f0(signal, sample_rate)
    voiced = ((rms > RMS_FLOOR) & (rms > RMS_RELATIVE * float(np.max(rms)))
              & (periodicity > MIN_PERIODICITY) & (f0 > 0.0))
    if not np.any(voiced):
        return None
    return float(np.mean(np.log(f0[voiced]))), float(np.mean(rms))


def z_normalize(values: list[float]) -> list[float]:
    """Corpus-level z-normalization; a zero-variance corpus maps to zeros."""
    arr = np.asarray(values, dtype=np.float64)
    mu = float(arr.mean())
    sigma = float(arr.std(ddof=0))
    if sigma < 1e-12:
        return [0.0] * len(values)
    return [float(v) for v in (arr - mu) / sigma]

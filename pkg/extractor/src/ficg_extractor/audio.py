"""WAV decoding and frame-level signal analysis.

Frames are 25 ms with a 10 ms hop. A signal shorter than one frame is
zero-padded to a single frame; otherwise the trailing part that does not
fill a frame is dropped. Frame features:

- log mel-band power (Hann window, rfft, triangular mel filters),
- root-mean-square amplitude,
- fundamental frequency by normalized autocorrelation over 40-400 Hz,
  with the peak ratio reported as a periodicity score in [0, 1].
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

FRAME_SECONDS = 0.025
HOP_SECONDS = 0.010
F0_MIN_HZ = 40.0
F0_MAX_HZ = 400.0

_SAMPLE_WIDTH_SCALE = {1: 1 << 7, 2: 1 << 15, 4: 1 << 31}
_SAMPLE_WIDTH_DTYPE = {1: np.int8, 2: np.int16, 4: np.int32}


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode PCM audio to float64 in [-1, 1]; channels are averaged."""
    with wave.open(str(path), "rb") as handle:
        width = handle.getsampwidth()
        if width not in _SAMPLE_WIDTH_DTYPE:
            raise ValueError(f"{path}: unsupported sample width {width} bytes "
                             f"(expected one of {sorted(_SAMPLE_WIDTH_DTYPE)})")
        n_channels = handle.getnchannels()
        sample_rate = handle.getframerate()
        raw = handle.readframes(handle.getnframes())
    data = np.frombuffer(raw, dtype=_SAMPLE_WIDTH_DTYPE[width]).astype(np.float64)
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return data / _SAMPLE_WIDTH_SCALE[width], sample_rate


def write_wav(path: str | Path, signal: np.ndarray, sample_rate: int) -> None:
    """Write mono 16-bit PCM; values are clipped to [-1, 1]."""
    clipped = np.clip(np.asarray(signal, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype(np.int16)
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(sample_rate)
        handle.writeframes(pcm.tobytes())


def frame_sizes(sample_rate: int) -> tuple[int, int]:
    return (int(round(FRAME_SECONDS * sample_rate)),
            int(round(HOP_SECONDS * sample_rate)))


def frame_signal(signal: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < frame_len:
        padded = np.zeros(frame_len)
        padded[:signal.size] = signal
        return padded.reshape(1, frame_len)
    n_frames = 1 + (signal.size - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return signal[idx]


def frame_centers(n_frames: int, frame_len: int, hop: int,
                  sample_rate: int) -> np.ndarray:
    """Center time of each frame in seconds."""
    starts = hop * np.arange(n_frames)
    return (starts + frame_len / 2.0) / sample_rate


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters on the mel scale covering 0..Nyquist."""
    def to_mel(hz):
        return 2595.0 * np.log10(1.0 + hz / 700.0)

    def to_hz(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    edges_hz = to_hz(np.linspace(0.0, to_mel(sample_rate / 2.0), n_mels + 2))
    bin_hz = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    bank = np.zeros((n_mels, bin_hz.size))
    for m in range(n_mels):
        lo, mid, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_hz - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_hz) / max(hi - mid, 1e-12)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def mel_frame_features(signal: np.ndarray, sample_rate: int,
                       n_mels: int = 24) -> np.ndarray:
    """(n_frames, n_mels) log mel-band power."""
    frame_len, hop = frame_sizes(sample_rate)
    frames = frame_signal(signal, frame_len, hop)
    window = np.hanning(frame_len)
    spectrum = np.fft.rfft(frames * window, axis=1)
    power = np.abs(spectrum) ** 2
    bank = mel_filterbank(n_mels, frame_len, sample_rate)
    return np.log(power @ bank.T + 1e-10)


def frame_rms(signal: np.ndarray, sample_rate: int) -> np.ndarray:
    frame_len, hop = frame_sizes(sample_rate)
    frames = frame_signal(signal, frame_len, hop)
    return np.sqrt(np.mean(frames * frames, axis=1))


def frame_f0(signal: np.ndarray, sample_rate: int,
             fmin: float = F0_MIN_HZ, fmax: float = F0_MAX_HZ
             ) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (f0_hz, periodicity); unvoiced frames report (0, 0).

    The autocorrelation is normalized by its zero lag, so both outputs are
    invariant to rescaling the waveform.
    """
    frame_len, hop = frame_sizes(sample_rate)
    frames = frame_signal(signal, frame_len, hop)
    frames = frames - frames.mean(axis=1, keepdims=True)
    lag_lo = max(1, int(sample_rate / fmax))
    lag_hi = min(frame_len - 1, int(sample_rate / fmin))
    n = frames.shape[0]
    f0 = np.zeros(n)
    periodicity = np.zeros(n)
    if lag_lo > lag_hi:
        return f0, periodicity
    # autocorrelation of every frame at once via the FFT convolution theorem
    n_fft = 1
    while n_fft < 2 * frame_len:
        n_fft *= 2
    spectrum = np.fft.rfft(frames, n=n_fft, axis=1)
    autocorr = np.fft.irfft(spectrum * np.conj(spectrum), n=n_fft, axis=1)
    zero_lag = autocorr[:, 0]
    live = zero_lag > 0.0
    if not np.any(live):
        return f0, periodicity
    window = autocorr[:, lag_lo:lag_hi + 1]
    best = np.argmax(window, axis=1) + lag_lo
    peak = autocorr[np.arange(n), best]
    ratio = np.where(live, peak / np.where(live, zero_lag, 1.0), 0.0)
    voiced = live & (ratio > 0.0)
    f0[voiced] = sample_rate / best[voiced]
    periodicity[voiced] = ratio[voiced]
    return f0, periodicity

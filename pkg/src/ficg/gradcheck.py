"""Central finite-difference verification of the hand-written gradients.

Instances are drawn from a seeded stream: random feature dims, history
shapes, parameters, and targets. Two preconditions keep the finite-difference
estimate itself trustworthy at the 1e-5 comparison tolerance; instances
violating either are redrawn deterministically:

* kink margin: if any ReLU pre-activation lies within 1e-4 of zero, a
  central difference can straddle the kink and no longer estimates the
  one-sided derivative the reverse pass computes. The margin is far larger
  than any shift a 1e-6 parameter perturbation can cause.
* residual scale: the dominant difference-quotient roundoff is
  |residual| * ulp(prediction) / (2 * eps), the residual-weighted rounding
  jitter of the two perturbed forward passes, so O(1) residuals bury
  sub-1e-8 gradient coordinates in noise roughly 1e-10 deep. Targets are
  therefore drawn within ~1e-4 of the instance's own prediction, which
  scales that noise below every comparison denominator; every gradient
  path still sees a nonzero residual.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .data import FeatureDims, TrainingSample, UtteranceRecord
from .encoder import EncoderSettings
from .model import (AblationMode, ModelParams, backward, forward, init_model,
                    mse_loss, param_arrays, params_to_vector, sample_targets,
                    vector_to_params)

KINK_MARGIN = 1e-4
LOSS_CEILING = 1e-6
TARGET_SPREAD = 1e-4
DEFAULT_EPS = 1e-6
DEFAULT_TOLERANCE = 1e-5


def _random_utterance(rng: np.random.Generator, q: int, dims: FeatureDims,
                      speaker: int) -> UtteranceRecord:
    return UtteranceRecord(
        speaker_id=speaker,
        words=tuple(f"w{k}" for k in range(q)),
        word_text_feats=rng.normal(0.0, 1.0, (q, dims.word_text)),
        word_speech_feats=rng.normal(0.0, 1.0, (q, dims.word_speech)),
        utt_text_feat=rng.normal(0.0, 1.0, dims.utt_text),
        utt_speech_feat=rng.normal(0.0, 1.0, dims.utt_speech),
        pitch_target=float(rng.normal(0.0, 1.0)),
        energy_target=float(rng.normal(0.0, 1.0)))


def _draw(rng: np.random.Generator, d_model: int, d_hidden: int,
          mode: AblationMode, settings: EncoderSettings,
          max_history: int, max_words: int
          ) -> tuple[TrainingSample, ModelParams]:
    dims = FeatureDims(*(int(rng.integers(3, 7)) for _ in range(4)))
    n_speakers = 2
    j = int(rng.integers(1, max_history + 1))
    history = tuple(_random_utterance(rng, int(rng.integers(1, max_words + 1)),
                                      dims, t % n_speakers) for t in range(j))
    current = _random_utterance(rng, 1, dims, j % n_speakers)
    sample = TrainingSample(history=history, current=current)
    params = init_model(dims, d_model, d_hidden, n_speakers, rng)
    # nonzero biases and speaker rows so their gradients are exercised
    for name, arr in param_arrays(params):
        if name.endswith(("_b", ".bias", ".b1", ".b2", "speaker_emb")):
            arr[...] = rng.normal(0.0, 0.3, arr.shape)
    # targets near the prediction (see module docstring, residual scale)
    prediction, _ = forward(sample, params, mode, settings)
    current = replace(
        current,
        pitch_target=float(prediction[0] + rng.normal(0.0, TARGET_SPREAD)),
        energy_target=float(prediction[1] + rng.normal(0.0, TARGET_SPREAD)))
    return TrainingSample(history=history, current=current), params


def _instance_ok(sample: TrainingSample, params: ModelParams,
                 mode: AblationMode, settings: EncoderSettings) -> bool:
    prediction, cache = forward(sample, params, mode, settings)
    margins = [float(np.min(np.abs(cache.z1)))]
    for graph_cache in (cache.semantic, cache.prosody):
        if graph_cache is not None:
            for _, _, _, z in graph_cache.events:
                margins.append(float(np.min(np.abs(z))))
    if min(margins) < KINK_MARGIN:
        return False
    loss = mse_loss(prediction.reshape(1, 2), sample_targets(sample).reshape(1, 2))
    return loss <= LOSS_CEILING


def make_instance(rng: np.random.Generator, d_model: int = 8, d_hidden: int = 8,
                  mode: AblationMode = AblationMode.FULL,
                  settings: EncoderSettings = EncoderSettings(),
                  max_history: int = 3, max_words: int = 3
                  ) -> tuple[TrainingSample, ModelParams]:
    """Draw until both preconditions hold (see module docstring)."""
    while True:
        sample, params = _draw(rng, d_model, d_hidden, mode, settings,
                               max_history, max_words)
        if _instance_ok(sample, params, mode, settings):
            return sample, params


def max_relative_error(analytic: np.ndarray, estimate: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(estimate)), 1e-8)
    return float(np.max(np.abs(analytic - estimate) / denom))


def check_instance(sample: TrainingSample, params: ModelParams,
                   mode: AblationMode = AblationMode.FULL,
                   settings: EncoderSettings = EncoderSettings(),
                   eps: float = DEFAULT_EPS) -> float:
    """Max relative error between backward() and central differences."""
    targets = sample_targets(sample).reshape(1, 2)

    def loss_at(vec: np.ndarray) -> float:
        p = vector_to_params(vec, params)
        pred, _ = forward(sample, p, mode, settings)
        return mse_loss(pred.reshape(1, 2), targets)

    _, cache = forward(sample, params, mode, settings)
    analytic = params_to_vector(backward(sample, params, mode, cache))
    base = params_to_vector(params)
    fd = np.zeros_like(base)
    for i in range(base.size):
        up = base.copy()
        up[i] += eps
        down = base.copy()
        down[i] -= eps
        fd[i] = (loss_at(up) - loss_at(down)) / (2.0 * eps)
    return max_relative_error(analytic, fd)


def run_gradient_check(seed: int = 0, d_model: int = 8, instances: int = 20,
                       d_hidden: int = 8, mode: AblationMode = AblationMode.FULL,
                       settings: EncoderSettings = EncoderSettings(),
                       eps: float = DEFAULT_EPS) -> tuple[float, list[float]]:
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(instances):
        sample, params = make_instance(rng, d_model=d_model, d_hidden=d_hidden,
                                       mode=mode, settings=settings)
        errors.append(check_instance(sample, params, mode, settings, eps))
    return max(errors), errors

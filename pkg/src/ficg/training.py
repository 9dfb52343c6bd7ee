"""Deterministic training loop, optimizers, splits, and the ablation suite.

All randomness (initialization and shuffling) flows from TrainConfig.seed.
Batches are drawn group-homogeneous: within every shape group the rows are
shuffled and chunked to batch_size, then the resulting batch list is
shuffled, all from the same seeded stream. Gradients inside a batch are
reduced by the batched matmuls in a fixed order, so a rerun with the same
config and data reproduces the parameters bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import (DialogueRecord, FeatureDims, TrainingSample, count_speakers,
                   dataset_dims, iter_training_samples)
from .encoder import EncoderSettings
from .metrics import MetricReport, evaluate
from .model import (AblationMode, ModelParams, copy_params, init_model,
                    param_arrays, zero_grads_like)
from .engine import SampleGroup, batch_backward, batch_forward, build_groups, \
    predict_samples


class TrainingDiverged(RuntimeError):
    """Loss left the finite range; carries the epoch/batch diagnostic."""


@dataclass(frozen=True)
class TrainConfig:
    d_model: int = 256
    d_hidden: int = 64
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    max_history: int | None = None
    ablation: AblationMode = AblationMode.FULL
    optimizer: str = "adam"        # "adam" or "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    passes: int = 1
    normalize: bool = False
    speaker_to_prosody: bool = False

    def encoder_settings(self) -> EncoderSettings:
        return EncoderSettings(passes=self.passes, normalize=self.normalize,
                               speaker_to_prosody=self.speaker_to_prosody)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["ablation"] = self.ablation.value
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        unknown = set(d) - set(TrainConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training config fields: {sorted(unknown)}")
        if "ablation" in d and not isinstance(d["ablation"], AblationMode):
            try:
                d["ablation"] = AblationMode(d["ablation"])
            except ValueError as exc:
                raise ValueError(f"unknown ablation mode {d['ablation']!r}; expected one "
                                 f"of {[m.value for m in AblationMode]}") from exc
        cfg = TrainConfig(**d)
        if cfg.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {cfg.optimizer!r}")
        return cfg


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    params: ModelParams       # best-validation snapshot
    history: list[EpochStats]
    best_epoch: int


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        for (_, p), (_, g) in zip(param_arrays(params), param_arrays(grads)):
            p -= self.lr * g


class _Adam:
    def __init__(self, params: ModelParams, lr: float, beta1: float, beta2: float,
                 eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(a) for _, a in param_arrays(params)]
        self.v = [np.zeros_like(a) for _, a in param_arrays(params)]

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for i, ((_, p), (_, g)) in enumerate(zip(param_arrays(params),
                                                 param_arrays(grads))):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[i] / b1c) / (np.sqrt(self.v[i] / b2c) + self.eps)


def _make_optimizer(config: TrainConfig, params: ModelParams):
    if config.optimizer == "sgd":
        return _Sgd(config.learning_rate)
    if config.optimizer == "adam":
        return _Adam(params, config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def _batch_loss(preds: np.ndarray, targets: np.ndarray) -> float:
    diff = preds - targets
    return float(np.mean(0.5 * (diff * diff).sum(axis=1)))


def train(train_samples: list[TrainingSample], val_samples: list[TrainingSample],
          dims: FeatureDims, n_speakers: int, config: TrainConfig) -> TrainResult:
    """Train on pre-windowed samples; returns the best-validation parameters.

    Validation loss is measured after every epoch; with an empty validation
    set it falls back to the training loss. Raises TrainingDiverged as soon
    as any loss is non-finite.
    """
    if not train_samples:
        raise ValueError("no training samples")
    rng = np.random.default_rng(config.seed)
    params = init_model(dims, config.d_model, config.d_hidden, n_speakers, rng)
    settings = config.encoder_settings()
    mode = config.ablation
    groups = build_groups(train_samples)
    val_groups = build_groups(val_samples) if val_samples else None
    val_targets = (np.array([[s.current.pitch_target, s.current.energy_target]
                             for s in val_samples]) if val_samples else None)
    optimizer = _make_optimizer(config, params)
    history: list[EpochStats] = []
    best: ModelParams | None = None
    best_val = math.inf
    best_epoch = -1
    for epoch in range(1, config.epochs + 1):
        chunks: list[tuple[int, np.ndarray]] = []
        for g_idx, group in enumerate(groups):
            perm = rng.permutation(group.size)
            for lo in range(0, group.size, config.batch_size):
                chunks.append((g_idx, perm[lo:lo + config.batch_size]))
        order = rng.permutation(len(chunks))
        loss_sum = 0.0
        n_seen = 0
        for chunk_idx in order:
            g_idx, rows = chunks[chunk_idx]
            batch = groups[g_idx].take(rows)
            preds, cache = batch_forward(batch, params, mode, settings)
            loss = _batch_loss(preds, batch.targets)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"training loss became non-finite at epoch {epoch} "
                    f"(batch of {batch.size}, group {batch.key})")
            d_out = (preds - batch.targets) / batch.size
            grads = batch_backward(batch, params, mode, cache, d_out, settings)
            optimizer.step(params, grads)
            loss_sum += loss * batch.size
            n_seen += batch.size
        train_loss = loss_sum / n_seen
        if val_groups is not None:
            val_preds = predict_samples(val_samples, params, mode, settings,
                                        groups=val_groups)
            val_loss = _batch_loss(val_preds, val_targets)
        else:
            val_loss = train_loss
        if not math.isfinite(val_loss):
            raise TrainingDiverged(f"validation loss became non-finite at epoch {epoch}")
        history.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best = copy_params(params)
            best_epoch = epoch
    assert best is not None
    return TrainResult(params=best, history=history, best_epoch=best_epoch)


def split_dialogues(records: list[DialogueRecord], seed: int = 0,
                    val_fraction: float = 0.1, test_fraction: float = 0.1
                    ) -> tuple[list[DialogueRecord], list[DialogueRecord],
                               list[DialogueRecord]]:
    """Deterministic dialogue-level split; within-split dataset order kept."""
    n = len(records)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_fraction))
    n_test = int(round(n * test_fraction))
    val_ids = set(order[:n_val].tolist())
    test_ids = set(order[n_val:n_val + n_test].tolist())
    train = [r for i, r in enumerate(records) if i not in val_ids and i not in test_ids]
    val = [r for i, r in enumerate(records) if i in val_ids]
    test = [r for i, r in enumerate(records) if i in test_ids]
    return train, val, test


ABLATION_ORDER = (AblationMode.FULL, AblationMode.NO_SIG, AblationMode.NO_PIG,
                  AblationMode.NO_BOTH)


def run_ablation_suite(train_records: list[DialogueRecord],
                       val_records: list[DialogueRecord],
                       test_records: list[DialogueRecord],
                       config: TrainConfig) -> dict[AblationMode, MetricReport]:
    """Train all four ablation modes with identical seed/data; evaluate on test.

    The parameter shapes are mode-independent, so every mode starts from the
    same initialization and sees the same shuffling stream.
    """
    dims = dataset_dims(train_records)
    if dims is None:
        raise ValueError("empty training set")
    n_speakers = max(count_speakers(train_records), count_speakers(val_records),
                     count_speakers(test_records))
    train_s = iter_training_samples(train_records, config.max_history)
    val_s = iter_training_samples(val_records, config.max_history)
    test_s = iter_training_samples(test_records, config.max_history)
    results: dict[AblationMode, MetricReport] = {}
    for mode in ABLATION_ORDER:
        cfg = replace(config, ablation=mode)
        outcome = train(train_s, val_s, dims, n_speakers, cfg)
        results[mode] = evaluate(outcome.params, mode, test_s,
                                 settings=cfg.encoder_settings())
    return results


def format_ablation_table(results: dict[AblationMode, MetricReport]) -> str:
    lines = [f"{'mode':<8}{'mae_pitch':>12}{'mae_energy':>12}{'n_samples':>12}"]
    for mode in ABLATION_ORDER:
        r = results[mode]
        lines.append(f"{mode.value:<8}{r.mae_pitch:>12.6f}{r.mae_energy:>12.6f}"
                     f"{r.n_samples:>12d}")
    return "\n".join(lines) + "\n"

import numpy as np
import pytest

from ficg.data import (FeatureDims, SynthConfig, count_speakers, dataset_dims,
                       generate_synthetic, iter_training_samples)
from ficg.model import AblationMode, mse_loss, params_to_vector
from ficg.training import (ABLATION_ORDER, TrainConfig, TrainingDiverged,
                           run_ablation_suite, split_dialogues, train)
from ficg.engine import predict_samples


def make_dataset(seed=0, n_dialogues=12, turns=4, noise=0.05):
    cfg = SynthConfig(n_dialogues=n_dialogues, turns_per_dialogue=turns,
                      words_per_utterance=3,
                      feature_dims=FeatureDims(5, 4, 6, 5),
                      keyword_coefficient=1.0, chain_coefficient=0.5,
                      noise_stddev=noise, seed=seed)
    return generate_synthetic(cfg)


def make_samples(records, max_history=None):
    return iter_training_samples(records, max_history)


def small_config(**overrides):
    base = dict(d_model=8, d_hidden=8, learning_rate=1e-2, epochs=5,
                batch_size=8, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


def train_small(config, records=None):
    records = records if records is not None else make_dataset()
    samples = make_samples(records)
    dims = dataset_dims(records)
    return train(samples[:30], samples[30:40], dims,
                 count_speakers(records), config)


# ---------------------------------------------------------------------------
# determinism


def test_rerun_reproduces_parameters_bitwise():
    records = make_dataset()
    a = train_small(small_config(), records)
    b = train_small(small_config(), records)
    assert np.array_equal(params_to_vector(a.params), params_to_vector(b.params))
    assert a.best_epoch == b.best_epoch
    assert [(s.epoch, s.train_loss, s.val_loss) for s in a.history] == \
           [(s.epoch, s.train_loss, s.val_loss) for s in b.history]


def test_different_seeds_differ():
    records = make_dataset()
    a = train_small(small_config(seed=0), records)
    b = train_small(small_config(seed=1), records)
    assert not np.array_equal(params_to_vector(a.params), params_to_vector(b.params))


@pytest.mark.parametrize("optimizer", ["adam", "sgd"])
def test_zero_learning_rate_freezes_parameters(optimizer):
    records = make_dataset()
    result = train_small(small_config(learning_rate=0.0, optimizer=optimizer),
                         records)
    from ficg.model import init_model
    dims = dataset_dims(records)
    initial = init_model(dims, 8, 8, count_speakers(records),
                         np.random.default_rng(0))
    assert np.array_equal(params_to_vector(result.params),
                          params_to_vector(initial))
    losses = [s.train_loss for s in result.history]
    assert losses == [losses[0]] * len(losses)


# ---------------------------------------------------------------------------
# learning


def test_loss_drops_on_noiseless_data():
    for seed in (0, 1, 2):
        records = make_dataset(seed=seed, n_dialogues=30, noise=0.0)
        samples = make_samples(records)
        dims = dataset_dims(records)
        config = small_config(d_model=12, epochs=40, learning_rate=3e-3,
                              batch_size=16, seed=seed)
        result = train(samples, [], dims, count_speakers(records), config)
        first = result.history[0].train_loss
        final = result.history[-1].train_loss
        assert final < 0.1 * first, f"seed {seed}: {final} vs first {first}"


def test_best_snapshot_matches_reported_val_loss():
    records = make_dataset(n_dialogues=20)
    samples = make_samples(records)
    dims = dataset_dims(records)
    config = small_config(epochs=8)
    tr, va = samples[:40], samples[40:55]
    result = train(tr, va, dims, count_speakers(records), config)
    best_stat = result.history[result.best_epoch - 1]
    assert best_stat.val_loss == min(s.val_loss for s in result.history)
    preds = predict_samples(va, result.params, config.ablation,
                            config.encoder_settings())
    targets = np.array([[s.current.pitch_target, s.current.energy_target]
                        for s in va])
    assert mse_loss(preds, targets) == pytest.approx(best_stat.val_loss,
                                                     rel=1e-12)


def test_divergence_raises_with_diagnostic():
    records = make_dataset()
    # overflow on the way to inf is the point of this test
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDiverged, match="non-finite at epoch"):
            train_small(small_config(optimizer="sgd", learning_rate=1e10,
                                     epochs=3), records)


def test_empty_training_set_rejected():
    records = make_dataset()
    dims = dataset_dims(records)
    with pytest.raises(ValueError, match="no training samples"):
        train([], [], dims, count_speakers(records), small_config())


# ---------------------------------------------------------------------------
# splitting


def test_split_dialogues_partition():
    records = make_dataset(n_dialogues=20)
    tr, va, te = split_dialogues(records, seed=3)
    assert len(va) == 2 and len(te) == 2 and len(tr) == 16
    ids = [r.dialogue_id for r in tr + va + te]
    assert sorted(ids) == sorted(r.dialogue_id for r in records)
    assert len(set(ids)) == len(ids)


def test_split_dialogues_deterministic_and_order_preserving():
    records = make_dataset(n_dialogues=20)
    tr1, va1, te1 = split_dialogues(records, seed=3)
    tr2, va2, te2 = split_dialogues(records, seed=3)
    assert [r.dialogue_id for r in tr1] == [r.dialogue_id for r in tr2]
    assert [r.dialogue_id for r in va1] == [r.dialogue_id for r in va2]
    assert [r.dialogue_id for r in te1] == [r.dialogue_id for r in te2]
    dataset_order = {r.dialogue_id: i for i, r in enumerate(records)}
    for part in (tr1, va1, te1):
        positions = [dataset_order[r.dialogue_id] for r in part]
        assert positions == sorted(positions)


def test_split_seed_changes_membership():
    records = make_dataset(n_dialogues=20)
    _, va_a, _ = split_dialogues(records, seed=0)
    _, va_b, _ = split_dialogues(records, seed=1)
    assert {r.dialogue_id for r in va_a} != {r.dialogue_id for r in va_b}


# ---------------------------------------------------------------------------
# config serialization


def test_train_config_dict_round_trip():
    config = small_config(ablation=AblationMode.NO_PIG, optimizer="sgd",
                          max_history=3, passes=2, normalize=True)
    assert TrainConfig.from_dict(config.to_dict()) == config


def test_train_config_rejects_unknown_field():
    with pytest.raises(ValueError, match="unknown training config fields: \\['momentum'\\]"):
        TrainConfig.from_dict({"momentum": 0.9})


def test_train_config_rejects_unknown_mode_and_optimizer():
    with pytest.raises(ValueError, match="unknown ablation mode 'Half'"):
        TrainConfig.from_dict({"ablation": "Half"})
    with pytest.raises(ValueError, match="unknown optimizer 'lion'"):
        TrainConfig.from_dict({"optimizer": "lion"})


# ---------------------------------------------------------------------------
# ablation suite plumbing


def test_ablation_suite_runs_all_modes_from_shared_setup():
    records = make_dataset(n_dialogues=15)
    tr, va, te = split_dialogues(records, seed=0)
    results = run_ablation_suite(tr, va, te, small_config(epochs=2))
    assert tuple(results) == ABLATION_ORDER
    for report in results.values():
        assert report.n_samples == sum(len(r.utterances) - 1 for r in te)
        assert np.isfinite(report.mae_pitch) and np.isfinite(report.mae_energy)

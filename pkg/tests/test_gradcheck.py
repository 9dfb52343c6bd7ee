import numpy as np

from ficg.gradcheck import (KINK_MARGIN, LOSS_CEILING, make_instance,
                            max_relative_error, run_gradient_check)
from ficg.model import AblationMode, forward, mse_loss, sample_targets


def test_max_relative_error_oracle():
    analytic = np.array([1.0, 2.0, 0.0])
    estimate = np.array([1.1, 2.0, 0.0])
    # |1.0-1.1|/1.1 with the other coordinates exact
    assert abs(max_relative_error(analytic, estimate) - 0.1 / 1.1) < 1e-12


def test_max_relative_error_floors_tiny_denominators():
    # both magnitudes below the 1e-8 floor: error measured against the floor
    got = max_relative_error(np.array([2e-9]), np.array([1e-9]))
    assert abs(got - 1e-9 / 1e-8) < 1e-15


def test_make_instance_respects_preconditions():
    rng = np.random.default_rng(0)
    for _ in range(5):
        sample, params = make_instance(rng, d_model=6, d_hidden=6)
        pred, cache = forward(sample, params, AblationMode.FULL)
        assert float(np.min(np.abs(cache.z1))) >= KINK_MARGIN
        for graph_cache in (cache.semantic, cache.prosody):
            for _, _, _, z in graph_cache.events:
                assert float(np.min(np.abs(z))) >= KINK_MARGIN
        loss = mse_loss(pred.reshape(1, 2), sample_targets(sample).reshape(1, 2))
        assert 0.0 < loss <= LOSS_CEILING


def test_run_gradient_check_is_deterministic_and_tight():
    worst_a, errors_a = run_gradient_check(seed=5, d_model=6, instances=3,
                                           d_hidden=6)
    worst_b, errors_b = run_gradient_check(seed=5, d_model=6, instances=3,
                                           d_hidden=6)
    assert errors_a == errors_b
    assert worst_a == worst_b == max(errors_a)
    assert len(errors_a) == 3
    assert worst_a < 1e-5

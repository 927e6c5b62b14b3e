import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualprobe.domain import FarFieldMatrix, fibonacci_directions, pair_layout
from dualprobe.errors import FitDomainError, LayoutError
from dualprobe.inversion import reconstruct_index_map
from dualprobe.stability import (ADMISSIBLE_FULL, ADMISSIBLE_STEP1, INADMISSIBLE, NoiseModel,
                                 RegimeSpec, ShiftModel, add_noise, convergence_rate,
                                 noisy_reconstruct, regime_check, shift_layout)


@pytest.fixture
def matrix(rng):
    v = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    return FarFieldMatrix(v, fibonacci_directions(6), "double", 1.0)


def test_zero_noise_is_identity(matrix):
    assert add_noise(matrix, 0.0, 1) is matrix


def test_noise_amplitude_statistics(matrix):
    dev = np.abs(add_noise(matrix, 1e-3, 5).values - matrix.values)
    assert dev.max() <= 1e-3
    assert dev.max() >= 0.5e-3


def test_noise_determinism(matrix):
    assert np.array_equal(add_noise(matrix, 1e-3, 9).values, add_noise(matrix, 1e-3, 9).values)
    assert not np.array_equal(add_noise(matrix, 1e-3, 9).values, add_noise(matrix, 1e-3, 10).values)


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(0, 10), seed=st.integers(0, 2 ** 63))
def test_noise_bound_property(delta, seed):
    m = FarFieldMatrix(np.ones((4, 4)), fibonacci_directions(4), "single", 1.0)
    # (1 + noise) - 1 carries rounding of up to one ulp of the unit entries
    rounding = 2 * np.spacing(1.0)
    assert np.abs(add_noise(m, delta, seed).values - m.values).max() <= delta * (1 + 1e-15) + rounding


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(-1.0, 0, 0)
    with pytest.raises(ValueError):
        ShiftModel(-0.1)
    assert RegimeSpec(1.8, 0.9).amplitudes(0.01) == (0.01 ** 1.8, 0.01 ** 0.9)


def test_shift_zero_is_identity():
    lay = pair_layout([(0, 0, 0)], 0.01, 0.25, 0.25)
    assert shift_layout(lay, 0.0, 3) is lay


def test_shift_bounds_and_determinism(ball):
    a, t = 0.02, 0.25
    lay = pair_layout([(0, 0, 0), (0.2, 0.3, 0.1)], a, 0.25, t)
    s1 = shift_layout(lay, a / 2, 11, ball)
    s2 = shift_layout(lay, a / 2, 11, ball)
    for g0, g1, g2 in zip(lay.probes, s1.probes, s2.probes):
        for z0, z1, z2 in zip(g0, g1, g2):
            assert np.linalg.norm(z1 - z0) <= a / 2
            assert np.array_equal(z1, z2)
        d0 = np.linalg.norm(g0[1] - g0[0])
        d1 = np.linalg.norm(g1[1] - g1[0])
        assert abs(d1 - d0) <= a


def test_shift_violating_band_rejected():
    lay = pair_layout([(0, 0, 0)], 0.01, 0.25, 0.25)
    with pytest.raises(LayoutError):
        for seed in range(50):      # a shift of 2 d breaks the band for some seed
            shift_layout(lay, 2.0, seed)


def test_zero_noise_reproduces_noiseless_pipeline(ball_model):
    lay = pair_layout([(0, 0, 0), (0.2, -0.1, 0.3)], 0.01, 0.25, 0.25)
    clean = reconstruct_index_map(ball_model.synthesize(lay), lay, ball_model.medium)
    noisy = noisy_reconstruct(ball_model, lay, NoiseModel(0, 0, 0), ShiftModel(0.0, 0.25))
    for c, n in zip(clean, noisy):
        assert c.estimate.value == n.estimate.value
        assert c.green.value == n.green.value
        assert c.n_error == n.n_error


def test_noisy_reconstruction_is_deterministic(ball_model):
    lay = pair_layout([(0, 0, 0)], 0.01, 0.2, 0.2)
    args = (NoiseModel.uniform(1e-4, 4), ShiftModel(1e-3, 0.2, 4))
    r1 = noisy_reconstruct(ball_model, lay, *args)[0]
    r2 = noisy_reconstruct(ball_model, lay, *args)[0]
    assert r1.estimate.value == r2.estimate.value
    r3 = noisy_reconstruct(ball_model, lay, NoiseModel.uniform(1e-4, 5), args[1])[0]
    assert r3.estimate.value != r1.estimate.value


def test_distinct_noise_amplitudes_are_honoured(ball_model):
    lay = pair_layout([(0, 0, 0)], 0.01, 0.2, 0.2)
    only_w = noisy_reconstruct(ball_model, lay, NoiseModel(0, 0, 1e-3, 1))[0]
    clean = noisy_reconstruct(ball_model, lay)[0]
    assert only_w.v1.values.tolist() == clean.v1.values.tolist()
    assert only_w.green.value != clean.green.value


@pytest.mark.parametrize("args,expected", [
    ((0.2, 0.2, 1.8, 0.9), ADMISSIBLE_FULL),
    ((0.2, 0.2, 1.0, 0.9), ADMISSIBLE_STEP1),
    ((0.2, 0.5, 5, 5), INADMISSIBLE),
    ((0.2, 0.2, 0.5, 5), INADMISSIBLE),
    ((1.2, 0.1, 5, 5), INADMISSIBLE),
    ((0.2, 0.2, 1.8, 0.7), ADMISSIBLE_STEP1),
])
def test_regime_examples(args, expected):
    assert regime_check(*args) == expected


def test_rate_of_exact_power_laws():
    a = np.array([0.04, 0.02, 0.01, 0.005])
    s, c, r = convergence_rate(zip(a, a))
    assert abs(s - 1.0) < 1e-12 and r < 1e-12
    s, c, r = convergence_rate(zip(a, 7 * a ** 0.4))
    assert s == pytest.approx(0.4, abs=1e-12) and c == pytest.approx(np.log(7), abs=1e-12)


def test_rate_fit_domain():
    with pytest.raises(FitDomainError):
        convergence_rate([(0.1, 1), (0.2, 2)])
    with pytest.raises(FitDomainError):
        convergence_rate([(0.1, 1), (0.2, 0), (0.3, 1)])
    with pytest.raises(FitDomainError):
        convergence_rate([(0.1, 1), (-0.2, 1), (0.3, 1)])


def test_pipeline_rate_near_closeness_exponent(ball_model):
    a_values = [0.04, 0.02, 0.01, 0.005]
    errs = []
    for a in a_values:
        lay = pair_layout([(0, 0, 0)], a, 0.2, 0.2)
        errs.append(reconstruct_index_map(ball_model.synthesize(lay), lay,
                                          ball_model.medium)[0].n_error)
    slope = convergence_rate(zip(a_values, errs))[0]
    assert 0.05 <= slope <= 0.35

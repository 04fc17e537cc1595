import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import inclusion_exclusion_hv, monte_carlo_hv
from stopbench.core import ConfigError, DimensionError, NormalizationBounds
from stopbench.indicators import (
    HvConfig,
    additive_epsilon,
    best_so_far,
    best_so_far_hv,
    default_r2_weights,
    hv_series,
    hypervolume,
    r2,
    simplex_lattice,
)
from stopbench.optimizer import EvolverConfig, run
from stopbench.problems import ProblemSpec, reference_bounds

UNIT2 = NormalizationBounds([0, 0], [1, 1])


def test_hv_config_defaults():
    cfg = HvConfig(UNIT2)
    assert cfg.reference_point.tolist() == [1.1, 1.1]
    with pytest.raises(ConfigError):
        HvConfig()
    with pytest.raises(ConfigError):
        HvConfig(UNIT2, reference_point=[1.0, 1.2])
    with pytest.raises(DimensionError):
        HvConfig(UNIT2, reference_point=[1.2, 1.2, 1.2])
    assert HvConfig(reference_point=[5.0, 5.0]).m == 2


def test_hypervolume_normalizes():
    b = NormalizationBounds([0, 0], [2, 2])
    assert hypervolume([[0.0, 0.0]], HvConfig(b)) == pytest.approx(1.21)
    assert hypervolume(np.empty((0, 2)), HvConfig(b)) == 0.0


def test_hypervolume_matches_oracles():
    rng = np.random.default_rng(11)
    P = rng.random((8, 3))
    cfg = HvConfig(NormalizationBounds([0, 0, 0], [1, 1, 1]))
    exact = hypervolume(P, cfg)
    assert exact == pytest.approx(inclusion_exclusion_hv(P, cfg.reference_point), abs=1e-9)
    est, se = monte_carlo_hv(P, cfg.reference_point, 1_000_000, rng)
    assert abs(exact - est) <= 3 * se


def test_best_so_far():
    assert best_so_far([0.3, 0.5, 0.4]).tolist() == [0.3, 0.5, 0.5]
    assert best_so_far([0.2] * 4).tolist() == [0.2] * 4


@given(st.lists(st.floats(0, 10), min_size=1, max_size=50))
def test_best_so_far_monotone(xs):
    b = best_so_far(xs)
    assert np.all(np.diff(b) >= 0) and np.all(b >= xs)


def test_hv_series_on_worked_trace(worked):
    cfg = HvConfig(reference_point=[5.0, 5.0])
    series = hv_series(worked, cfg)
    for t in range(3):
        pts = worked.points[worked.memberships[t] - 1]
        assert series[t] == pytest.approx(inclusion_exclusion_hv(pts, cfg.reference_point), abs=1e-12)


def test_hv_series_raw_non_monotone_on_dtlz2():
    spec = ProblemSpec("dtlz2", 2)
    trace = run(spec, EvolverConfig(mu=20, fe_max=2000, seed=1))
    cfg = HvConfig(reference_bounds(spec))
    hv = hv_series(trace, cfg)
    assert hv.shape == (100,)
    assert np.all(np.diff(best_so_far_hv(trace, cfg)) >= 0)


def test_additive_epsilon_examples():
    assert additive_epsilon([[0.5, 0.5]], [[0.0, 0.0]]) == 0.5
    A = np.array([[0.1, 0.9], [0.5, 0.5]])
    assert additive_epsilon(A, A) <= 0
    with pytest.raises(ValueError):
        additive_epsilon(np.empty((0, 2)), A)
    with pytest.raises(DimensionError):
        additive_epsilon(A, [[1.0, 1.0, 1.0]])


def _eps_oracle(A, R):
    return max(min(max(a[i] - r[i] for i in range(len(a))) for a in A) for r in R)


sets2 = arrays(np.float64, st.tuples(st.integers(1, 6), st.just(2)), elements=st.floats(-2, 2))


@settings(max_examples=80)
@given(sets2, sets2, st.floats(-1, 1))
def test_additive_epsilon_oracle_and_translation(A, R, c):
    v = additive_epsilon(A, R)
    assert v == pytest.approx(_eps_oracle(A.tolist(), R.tolist()))
    assert additive_epsilon(A + c, R) == pytest.approx(v + c, abs=1e-9)


def test_simplex_lattice():
    W = simplex_lattice(3, 4)
    assert W.shape == (15, 3)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    assert len({tuple(r) for r in W.tolist()}) == 15
    assert default_r2_weights(2, 100).shape[0] == 100
    assert default_r2_weights(3, 100).shape[0] >= 100


def test_r2_examples():
    W = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert r2([[0.5, 0.5]], W) == 0.5
    assert r2([[0.0, 0.0]], default_r2_weights(2)) == 0.0
    with pytest.raises(ConfigError):
        r2([[0.5, 0.5]], [[0.6, 0.6]])


@settings(max_examples=50)
@given(arrays(np.float64, (5, 2), elements=st.floats(0, 1)), st.floats(0, 1))
def test_r2_dominated_point_never_helps(A, shift):
    W = default_r2_weights(2, 20)
    worse = A[0] + shift
    assert r2(np.vstack([A, worse]), W) <= r2(A, W) + 1e-15

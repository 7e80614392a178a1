import numpy as np
import pytest

from hcb.complexity import BiasProfile, biased_index_set, m_value, theta, threshold_set
from hcb.verify import brute_force_m


@pytest.mark.parametrize(
    "v, expected",
    [
        ((0.5,), 1.0),
        ((0.5, 0.5), 2.0),
        ((0.1, 0.1, 0.1), 3.0),
        ((0.01, 0.5, 0.5), 2.0),
        ((0.4, 0.4, 0.4), 2.5),
        ((0.1, 0.1, 0.1, 0.1), 4.0),
    ],
)
def test_m_value(v, expected):
    assert m_value(v) == expected


def test_biased_index_set():
    assert biased_index_set((0.5, 0.5), 2) == frozenset()
    assert biased_index_set((0.01, 0.5, 0.5), 2) == {0}
    assert biased_index_set((0.01, 0.5, 0.5), 1.5) == {0, 1, 2}
    with pytest.raises(ValueError):
        biased_index_set((0.5,), 0)


def test_threshold_set():
    assert threshold_set((0.9, 0.9), 2) == frozenset()
    assert threshold_set((0.1, 0.9), 2) == {0}
    v = (0.1, 0.1, 0.1)
    assert threshold_set(v, m_value(v)) == {0, 1, 2}


def test_symmetry():
    rng = np.random.default_rng(9)
    v = rng.uniform(size=12) ** 3
    assert m_value(v) == pytest.approx(m_value(1.0 - v))
    assert m_value(v) == m_value(rng.permutation(v))


def test_matches_brute_force():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        n = int(rng.integers(1, 33))
        v = rng.uniform(size=n) * 10.0 ** rng.uniform(-3, 0, size=n)
        assert m_value(v) == brute_force_m(v)


@pytest.mark.parametrize(
    "v, expected",
    [((0.5,), 1.0), ((0.5, 0.5), 2.0), ((0.1, 0.1, 0.1), 3.0), ((0.4, 0.4, 0.4), 2.5), ((0.0, 1.0, 0.0), 3.0)],
)
def test_brute_force_known_values(v, expected):
    assert brute_force_m(np.array(v)) == expected


def test_breakpoint_reciprocal_roundtrip():
    # fl(1 / fl(1 / t)) lands one ulp above t for this entry
    t = 0.05832742851186475
    v = np.array([t] + [0.01] * 17 + [0.5, 0.5])
    assert m_value(v) == 1.0 / t
    assert brute_force_m(v) == 1.0 / t
    assert m_value(v) < 18.0
    assert threshold_set(v, m_value(v)) == set(range(1, 18))


def test_edge_entries():
    assert m_value((0.0, 1.0, 0.0)) == 3.0
    with pytest.raises(ValueError):
        m_value(())
    with pytest.raises(ValueError):
        m_value((1.2,))


def test_bias_profile():
    profile = BiasProfile([0.2, 0.9])
    np.testing.assert_allclose(profile.theta, theta([0.2, 0.9]))
    assert profile.m == m_value([0.2, 0.9])

"""Hardness measure m(v) and the biased-index sets built on it.

    I_s(v) = {j : min(v_j, 1 - v_j) < 1/s}
    m(v)   = min{s > 0 : s >= |I_s(v)|}
    B(v,z) = {j : v_j < 1/z}

Entries exactly 0 or 1 are allowed here; estimated vectors hit them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class BiasProfile:
    v: np.ndarray
    theta: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        v = _as_probability_vector(self.v)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "theta", theta(v))

    @property
    def m(self) -> float:
        return m_value(self.v)


def _as_probability_vector(v: Sequence[float]) -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("m is undefined for an empty vector")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("entries must be probabilities in [0, 1]")
    return arr


def theta(v: Sequence[float]) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    return np.minimum(arr, 1.0 - arr)


def _biased_counts(th: np.ndarray, s: np.ndarray) -> np.ndarray:
    # |I_s| for every s in the array; strict inequality exactly as defined
    return np.sum(th[None, :] < (1.0 / s)[:, None], axis=1)


def biased_index_set(v: Sequence[float], s: float) -> frozenset[int]:
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    return frozenset(int(j) for j in np.flatnonzero(theta(v) < 1.0 / s))


def threshold_mask(v: Sequence[float], z: float) -> np.ndarray:
    """v_j < 1/z elementwise.

    An entry whose own breakpoint is z (fl(1/v_j) == z, as m_value returns)
    sits exactly on 1/z and is excluded.
    """
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    arr = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        on_break = 1.0 / arr == z
    return (arr < 1.0 / z) & ~on_break


def threshold_set(v: Sequence[float], z: float) -> frozenset[int]:
    return frozenset(int(j) for j in np.flatnonzero(threshold_mask(v, z)))


def m_value(v: Sequence[float]) -> float:
    """Exact m(v).

    f(s) = |I_s(v)| is a non-increasing step function with breakpoints at
    1/theta_j, and on each plateau the smallest feasible s is either the
    plateau start or the plateau's count. So the minimum lies in
    {1/theta_j} U {1..N}; evaluate f there and keep the smallest feasible one.

    At a breakpoint f is counted in theta-space as #{theta_l < theta_j}; going
    through fl(1/fl(1/theta_j)) can land above theta_j and count arm j itself.
    """
    arr = _as_probability_vector(v)
    th = theta(arr)
    positive = th[th > 0.0]
    breaks = 1.0 / positive
    break_counts = np.sum(th[None, :] < positive[:, None], axis=1)
    integers = np.arange(1, arr.size + 1, dtype=float)
    candidates = np.concatenate([breaks, integers])
    counts = np.concatenate([break_counts, _biased_counts(th, integers)])
    # s = N is always feasible, so this is never empty
    return float(candidates[candidates >= counts].min())

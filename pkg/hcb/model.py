"""Hierarchical causal bandit model.

A context S in {0..K-1} drives N conditionally independent binary arms
X_1..X_N, which jointly set the Bernoulli reward Y. Actions are
do(empty), do(X_j = x) and, when the context is manipulable, do(S = s).

Indexing is 0-based everywhere: arm j, context s, and the dense reward table
is indexed little-endian (arm j is bit j).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence, Union

import numpy as np

from hcb.errors import EnumerationCapError, InstanceError

logger = logging.getLogger(__name__)

Mode = Literal["nmc", "mc"]
MODES: tuple[str, ...] = ("nmc", "mc")

ENUMERATION_CAP = 20
SIMPLEX_TOL = 1e-12


# ==================================================
# Actions
# ==================================================
@dataclass(frozen=True)
class Observe:
    def __str__(self) -> str:
        return "do()"


@dataclass(frozen=True)
class DoArm:
    j: int
    x: int

    def __str__(self) -> str:
        return f"do(X{self.j}={self.x})"


@dataclass(frozen=True)
class DoContext:
    s: int

    def __str__(self) -> str:
        return f"do(S={self.s})"


Action = Union[Observe, DoArm, DoContext]


class ActionSet:
    """Canonical action alphabet and its integer codes.

    Order (also the tie-break order): Observe, DoArm by (j, x), DoContext by s.
    Code of DoArm(j, x) is 1 + 2j + x and of DoContext(s) is 1 + 2N + s, so the
    nmc codes are a prefix of the mc codes.
    """

    def __init__(self, n_arms: int, n_contexts: int, mode: str):
        if mode not in MODES:
            raise InstanceError(f"mode must be one of {MODES}, got {mode!r}")
        self.n_arms = n_arms
        self.n_contexts = n_contexts
        self.mode = mode

        actions: list[Action] = [Observe()]
        actions += [DoArm(j, x) for j in range(n_arms) for x in (0, 1)]
        if mode == "mc":
            actions += [DoContext(s) for s in range(n_contexts)]
        self.actions: tuple[Action, ...] = tuple(actions)

        n = len(actions)
        self.forced_arm = np.full(n, -1, dtype=np.int64)
        self.forced_value = np.zeros(n, dtype=np.uint8)
        self.forced_context = np.full(n, -1, dtype=np.int64)
        for code, a in enumerate(actions):
            if isinstance(a, DoArm):
                self.forced_arm[code] = a.j
                self.forced_value[code] = a.x
            elif isinstance(a, DoContext):
                self.forced_context[code] = a.s
        for arr in (self.forced_arm, self.forced_value, self.forced_context):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def code(self, action: Action) -> int:
        if isinstance(action, Observe):
            return 0
        if isinstance(action, DoArm):
            if not (0 <= action.j < self.n_arms) or action.x not in (0, 1):
                raise InstanceError(f"{action} out of range for N={self.n_arms}")
            return 1 + 2 * action.j + action.x
        if isinstance(action, DoContext):
            if self.mode != "mc":
                raise InstanceError(f"{action} is not available with a non-manipulable context")
            if not (0 <= action.s < self.n_contexts):
                raise InstanceError(f"{action} out of range for K={self.n_contexts}")
            return 1 + 2 * self.n_arms + action.s
        raise InstanceError(f"not an action: {action!r}")

    def arm_code(self, j: int, x: int) -> int:
        return 1 + 2 * j + x

    def context_code(self, s: int) -> int:
        return 1 + 2 * self.n_arms + s


@lru_cache(maxsize=256)
def action_set(n_arms: int, n_contexts: int, mode: str) -> ActionSet:
    return ActionSet(n_arms, n_contexts, mode)


# ==================================================
# Rewards
# ==================================================
@lru_cache(maxsize=8)
def configurations(n_arms: int) -> np.ndarray:
    """All 2^N arm vectors, row i holding the bits of i (arm j = bit j)."""
    if n_arms > ENUMERATION_CAP:
        raise EnumerationCapError(f"enumeration needs N <= {ENUMERATION_CAP}, got N={n_arms}")
    idx = np.arange(1 << n_arms, dtype=np.int64)
    out = ((idx[:, None] >> np.arange(n_arms)) & 1).astype(np.uint8)
    out.setflags(write=False)
    return out


def config_index(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    weights = np.left_shift(1, np.arange(x.shape[1], dtype=np.int64))
    return x.astype(np.int64) @ weights


@dataclass(frozen=True)
class ConstantHalf:
    kind: str = field(default="constant-half", init=False)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], 0.5)


@dataclass(frozen=True, eq=False)
class DenseTable:
    values: np.ndarray
    kind: str = field(default="dense", init=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2 or values.size & (values.size - 1):
            raise InstanceError("dense reward table must hold 2^N values")
        n_arms = values.size.bit_length() - 1
        if n_arms > ENUMERATION_CAP:
            raise EnumerationCapError(f"dense reward tables are capped at N={ENUMERATION_CAP}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise InstanceError("dense reward values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_arms(self) -> int:
        return self.values.size.bit_length() - 1

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.values[config_index(x)]


@dataclass(frozen=True)
class TargetBump:
    """r(x) = baseline + epsilon * 1{x_ones = 1, x_zeros = 0}."""

    epsilon: float
    ones: tuple[int, ...]
    zeros: tuple[int, ...] = ()
    baseline: float = 0.5
    kind: str = field(default="target-bump", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ones", tuple(int(i) for i in self.ones))
        object.__setattr__(self, "zeros", tuple(int(i) for i in self.zeros))
        if not (0.0 < self.epsilon < 0.25):
            raise InstanceError(f"bump epsilon must lie in (0, 1/4), got {self.epsilon}")
        if not (0.0 <= self.baseline and self.baseline + self.epsilon <= 1.0):
            raise InstanceError("bumped reward leaves [0, 1]")
        if set(self.ones) & set(self.zeros):
            raise InstanceError("target set requires disjoint ones/zeros coordinates")

    def hits(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        hit = np.ones(x.shape[0], dtype=bool)
        if self.ones:
            hit &= np.all(x[:, list(self.ones)] == 1, axis=1)
        if self.zeros:
            hit &= np.all(x[:, list(self.zeros)] == 0, axis=1)
        return hit

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.baseline + self.epsilon * self.hits(x)


RewardFunction = Union[ConstantHalf, DenseTable, TargetBump]


# ==================================================
# Instance
# ==================================================
@dataclass(frozen=True, eq=False)
class HcbInstance:
    K: int
    N: int
    alpha: np.ndarray
    cond: np.ndarray
    reward: RewardFunction

    def __post_init__(self) -> None:
        if int(self.K) != self.K or self.K < 1:
            raise InstanceError(f"K must be an integer >= 1, got {self.K}")
        if int(self.N) != self.N or self.N < 1:
            raise InstanceError(f"N must be an integer >= 1, got {self.N}")
        alpha = np.array(self.alpha, dtype=float)
        cond = np.array(self.cond, dtype=float)
        if alpha.shape != (self.K,):
            raise InstanceError(f"alpha must have length K={self.K}, got shape {alpha.shape}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
            raise InstanceError("alpha entries must be strictly positive")
        if abs(alpha.sum() - 1.0) > SIMPLEX_TOL:
            raise InstanceError(f"alpha must sum to 1, sums to {alpha.sum():.15g}")
        if cond.shape != (self.K, self.N):
            raise InstanceError(f"cond must be K x N = {self.K} x {self.N}, got shape {cond.shape}")
        if not np.all(np.isfinite(cond)) or np.any(cond <= 0.0) or np.any(cond >= 1.0):
            raise InstanceError("conditional arm probabilities must lie strictly inside (0, 1)")
        self._check_reward()
        alpha.setflags(write=False)
        cond.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "cond", cond)
        cum = np.cumsum(alpha)[:-1]
        cum.setflags(write=False)
        object.__setattr__(self, "_cum_alpha", cum)

    def _check_reward(self) -> None:
        r = self.reward
        if isinstance(r, DenseTable):
            if r.n_arms != self.N:
                raise InstanceError(f"dense table is for N={r.n_arms}, instance has N={self.N}")
        elif isinstance(r, TargetBump):
            coords = r.ones + r.zeros
            if coords and (min(coords) < 0 or max(coords) >= self.N):
                raise InstanceError("target set refers to arms outside [0, N)")
        elif not isinstance(r, ConstantHalf):
            raise InstanceError(f"unsupported reward function {r!r}")

    @property
    def p(self) -> np.ndarray:
        """P(X_j = 1 | S = 1) for the binary-context model."""
        self._require_binary()
        return self.cond[1]

    @property
    def q(self) -> np.ndarray:
        """P(X_j = 1 | S = 0) for the binary-context model."""
        self._require_binary()
        return self.cond[0]

    @property
    def alpha1(self) -> float:
        self._require_binary()
        return float(self.alpha[1])

    def _require_binary(self) -> None:
        if self.K != 2:
            raise InstanceError(f"binary-context accessor used on a K={self.K} instance")

    def actions(self, mode: str) -> ActionSet:
        return action_set(self.N, self.K, mode)

    def with_reward(self, reward: RewardFunction) -> "HcbInstance":
        return HcbInstance(self.K, self.N, self.alpha, self.cond, reward)


def parallel_instance(alpha1: float, v: Sequence[float], reward: RewardFunction) -> HcbInstance:
    """Binary-context instance with p = q = v (the parallel bandit)."""
    v = np.asarray(v, dtype=float)
    return HcbInstance(2, v.size, np.array([1.0 - alpha1, alpha1]), np.vstack([v, v]), reward)


# ==================================================
# Construction & file format
# ==================================================
def reward_from_dict(spec: Mapping[str, Any]) -> RewardFunction:
    kind = spec.get("type")
    if kind in ("constant-half", "constant"):
        return ConstantHalf()
    if kind == "dense":
        return DenseTable(np.asarray(spec["values"], dtype=float))
    if kind == "target-bump":
        return TargetBump(
            epsilon=float(spec["epsilon"]),
            ones=tuple(spec.get("ones", ())),
            zeros=tuple(spec.get("zeros", ())),
            baseline=float(spec.get("baseline", 0.5)),
        )
    raise InstanceError(f"unknown reward type {kind!r}")


def reward_to_dict(reward: RewardFunction) -> dict[str, Any]:
    if isinstance(reward, ConstantHalf):
        return {"type": "constant-half"}
    if isinstance(reward, DenseTable):
        return {"type": "dense", "values": reward.values.tolist()}
    return {
        "type": "target-bump",
        "epsilon": reward.epsilon,
        "ones": list(reward.ones),
        "zeros": list(reward.zeros),
        "baseline": reward.baseline,
    }


def build_instance(spec: Mapping[str, Any]) -> HcbInstance:
    """Validated instance from a raw parameter bundle (the JSON layout)."""
    missing = {"K", "N", "alpha", "cond", "reward"} - set(spec)
    if missing:
        raise InstanceError(f"instance spec is missing {sorted(missing)}")
    reward = spec["reward"]
    if isinstance(reward, Mapping):
        reward = reward_from_dict(reward)
    try:
        alpha = np.asarray(spec["alpha"], dtype=float)
        cond = np.asarray(spec["cond"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"alpha/cond are not numeric arrays: {exc}") from exc
    return HcbInstance(int(spec["K"]), int(spec["N"]), alpha, cond, reward)


def instance_to_dict(instance: HcbInstance) -> dict[str, Any]:
    return {
        "K": instance.K,
        "N": instance.N,
        "alpha": instance.alpha.tolist(),
        "cond": instance.cond.tolist(),
        "reward": reward_to_dict(instance.reward),
    }


def load_instance(path: str | Path) -> HcbInstance:
    with open(path, encoding="utf-8") as fh:
        return build_instance(json.load(fh))


def save_instance(instance: HcbInstance, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n", encoding="utf-8")
    return path


def enumerate_actions(instance: HcbInstance, mode: str) -> list[Action]:
    return list(instance.actions(mode).actions)


# ==================================================
# Sampling
# ==================================================
@dataclass(frozen=True)
class Observation:
    s: int
    x: np.ndarray
    y: int


def sample_rounds(
    instance: HcbInstance, codes: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample one round per entry of ``codes`` (mc action codes).

    Returns (s, x, y) with shapes (n,), (n, N), (n,). Forced coordinates follow
    the mutilated graph: do(S=s) fixes the context, do(X_j=x) fixes arm j and
    leaves the others conditionally independent given S.
    """
    codes = np.asarray(codes, dtype=np.int64).ravel()
    aset = action_set(instance.N, instance.K, "mc")
    if codes.size and (codes.min() < 0 or codes.max() >= len(aset)):
        raise InstanceError("action code out of range")
    n = codes.size

    s = np.searchsorted(instance._cum_alpha, rng.random(n), side="right")
    ctx = aset.forced_context[codes]
    s = np.where(ctx >= 0, ctx, s)

    x = (rng.random((n, instance.N)) < instance.cond[s]).astype(np.uint8)
    arm = aset.forced_arm[codes]
    rows = np.flatnonzero(arm >= 0)
    x[rows, arm[rows]] = aset.forced_value[codes[rows]]

    y = (rng.random(n) < instance.reward.evaluate(x)).astype(np.uint8)
    return s.astype(np.int64), x, y


def sample_round(instance: HcbInstance, action: Action, rng: np.random.Generator) -> Observation:
    code = action_set(instance.N, instance.K, "mc").code(action)
    s, x, y = sample_rounds(instance, np.array([code]), rng)
    return Observation(int(s[0]), x[0], int(y[0]))


# ==================================================
# Exact inference
# ==================================================
def context_weights(instance: HcbInstance, action: Action) -> np.ndarray:
    if isinstance(action, DoContext):
        if not (0 <= action.s < instance.K):
            raise InstanceError(f"{action} out of range for K={instance.K}")
        w = np.zeros(instance.K)
        w[action.s] = 1.0
        return w
    return instance.alpha.copy()


def arm_marginals(instance: HcbInstance, action: Action) -> np.ndarray:
    """K x N matrix of P(X_j = 1 | S = s, action)."""
    probs = instance.cond.copy()
    if isinstance(action, DoArm):
        if not (0 <= action.j < instance.N) or action.x not in (0, 1):
            raise InstanceError(f"{action} out of range for N={instance.N}")
        probs[:, action.j] = float(action.x)
    return probs


def target_probability(
    instance: HcbInstance, action: Action, ones: Sequence[int], zeros: Sequence[int] = ()
) -> float:
    """P(X_ones = 1, X_zeros = 0 | action) from the product form given S."""
    w = context_weights(instance, action)
    probs = arm_marginals(instance, action)
    per_context = np.prod(probs[:, list(ones)], axis=1) * np.prod(1.0 - probs[:, list(zeros)], axis=1)
    return float(w @ per_context)


def joint_distribution(instance: HcbInstance, action: Action) -> np.ndarray:
    """K x 2^N array of P(S = s, X = x | action), x in little-endian order."""
    if instance.N > ENUMERATION_CAP:
        raise EnumerationCapError(f"enumeration needs N <= {ENUMERATION_CAP}, got N={instance.N}")
    w = context_weights(instance, action)
    probs = arm_marginals(instance, action)
    out = np.empty((instance.K, 1 << instance.N))
    for s in range(instance.K):
        dist = np.array([1.0 - probs[s, 0], probs[s, 0]])
        for j in range(1, instance.N):
            # later arms are higher bits, so they vary slowest
            dist = np.kron(np.array([1.0 - probs[s, j], probs[s, j]]), dist)
        out[s] = w[s] * dist
    return out


def reward_table(instance: HcbInstance) -> np.ndarray:
    if isinstance(instance.reward, DenseTable):
        return instance.reward.values
    return instance.reward.evaluate(configurations(instance.N))


def exact_mu_enumerated(instance: HcbInstance, action: Action) -> float:
    return float(np.sum(joint_distribution(instance, action) @ reward_table(instance)))


def exact_mu(instance: HcbInstance, action: Action) -> float:
    """E[Y | action]; closed form for structured rewards, enumeration for dense ones."""
    r = instance.reward
    if isinstance(r, ConstantHalf):
        instance.actions("mc").code(action)
        return 0.5
    if isinstance(r, TargetBump):
        return r.baseline + r.epsilon * target_probability(instance, action, r.ones, r.zeros)
    return exact_mu_enumerated(instance, action)


def exact_mu_vector(instance: HcbInstance, mode: str) -> np.ndarray:
    return np.array([exact_mu(instance, a) for a in instance.actions(mode)])


def conditional_reward(
    instance: HcbInstance,
    action: Action,
    s: int | None = None,
    i: int | None = None,
    x: int | None = None,
) -> float:
    """P(Y = 1 | action, S = s, X_i = x) by enumeration; nan on a null event."""
    joint = joint_distribution(instance, action)
    table = reward_table(instance)
    if s is not None:
        joint = joint[s : s + 1]
    mass = joint.sum(axis=0)
    if i is not None:
        mass = np.where(configurations(instance.N)[:, i] == x, mass, 0.0)
    den = mass.sum()
    if den <= 0.0:
        return float("nan")
    return float(mass @ table / den)


def canonical_argmax(values: Sequence[float]) -> int:
    """Index of the first maximum; ties resolve to the earliest canonical action."""
    return int(np.argmax(np.asarray(values, dtype=float)))


def optimal_action(instance: HcbInstance, mode: str) -> tuple[Action, float]:
    aset = instance.actions(mode)
    mus = exact_mu_vector(instance, mode)
    best = canonical_argmax(mus)
    return aset.actions[best], float(mus[best])

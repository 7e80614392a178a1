"""Policies for best-intervention identification.

Every policy maps the history prefix H_{t-1} to the next action(s) and, after
T rounds, to a final choice A_T. The staged algorithms commit to whole blocks
of actions at their stage boundaries, which lets ``run_episode`` sample a block
of rounds in one vectorised call.

Stage layouts (0-based, half-open round ranges):

* alg_nmc / alg_k nmc: L = T // (2K+1). [0, L) observe, then 2K refine blocks
  of L rounds, ordered by context descending and arm value 1 before 0.
* alg_mc: T' = T // 15, T'' = T // 5. [0, T') observe, [T', 2T') do(S=1),
  [2T', 3T') do(S=0), then four refine blocks of T'' rounds from 3T'.
* alg_k mc: U = T // (7K+1). Observe U, one do(S=s) stage of U per context
  (descending), then 2K refine blocks of 3U.

Leftover rounds at the end of the episode are observation rounds.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from hcb.complexity import m_value, threshold_set
from hcb.errors import InstanceError, PolicyError, ScheduleError
from hcb.model import Action, ActionSet, HcbInstance, action_set, canonical_argmax, sample_rounds

logger = logging.getLogger(__name__)

OBSERVE = 0
POLICY_NAMES = ("alg-nmc", "alg-mc", "alg-k-nmc", "alg-k-mc", "uniform")


# ==================================================
# History
# ==================================================
@dataclass(frozen=True)
class Record:
    s: int
    x: np.ndarray
    y: int
    a: Action


class History:
    """Preallocated per-round arrays; only the first ``len(self)`` rows are filled."""

    def __init__(self, horizon: int, n_arms: int, n_contexts: int):
        self.horizon = horizon
        self.n_arms = n_arms
        self.n_contexts = n_contexts
        self.s = np.zeros(horizon, dtype=np.int64)
        self.x = np.zeros((horizon, n_arms), dtype=np.uint8)
        self.y = np.zeros(horizon, dtype=np.uint8)
        self.a = np.zeros(horizon, dtype=np.int64)
        self._length = 0

    def __len__(self) -> int:
        return self._length

    def extend(self, s: np.ndarray, x: np.ndarray, y: np.ndarray, a: np.ndarray) -> None:
        n = len(a)
        lo, hi = self._length, self._length + n
        if hi > self.horizon:
            raise ScheduleError(f"history overflow: {hi} rounds > horizon {self.horizon}")
        self.s[lo:hi] = s
        self.x[lo:hi] = x
        self.y[lo:hi] = y
        self.a[lo:hi] = a
        self._length = hi

    def records(self, mode: str = "mc") -> Iterator[Record]:
        actions = action_set(self.n_arms, self.n_contexts, mode).actions
        for t in range(self._length):
            yield Record(int(self.s[t]), self.x[t].copy(), int(self.y[t]), actions[self.a[t]])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        n = self._length
        return (
            n == len(other)
            and np.array_equal(self.s[:n], other.s[:n])
            and np.array_equal(self.x[:n], other.x[:n])
            and np.array_equal(self.y[:n], other.y[:n])
            and np.array_equal(self.a[:n], other.a[:n])
        )

    __hash__ = None  # type: ignore[assignment]


# ==================================================
# Helpers
# ==================================================
def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den, with 0 wherever the denominator count is 0."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0)


def error_radius(x: float, y: float, t: float) -> float:
    """sqrt(x log(y t) / t), the recurring concentration radius."""
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if y * t <= 1:
        raise ValueError(f"error radius needs y*t > 1, got y={y}, t={t}")
    return math.sqrt(x * math.log(y * t) / t)


def sample_size_condition(
    alpha: Sequence[float],
    m_values: Sequence[float],
    N: int,
    T: int,
    mode: str = "nmc",
    K: int | None = None,
) -> bool:
    """Large-T condition under which the upper bounds hold.

    ``alpha[s]`` and ``m_values[s]`` are P(S=s) and m(cond[s]). The condition is
    the same in both modes (540 for K = 2, 600(7K+1) otherwise); ``mode`` only
    mirrors the signature of theoretical_upper_bound and is not read.
    """
    alpha = np.asarray(alpha, dtype=float)
    m_values = np.asarray(m_values, dtype=float)
    K = K or alpha.size
    ratio = float(np.max(m_values / alpha))
    factor = 540.0 if K == 2 else 600.0 * (7 * K + 1)
    return T > factor * ratio * math.log(N * T)


def theoretical_upper_bound(
    alpha: Sequence[float], m_values: Sequence[float], N: int, T: int, mode: str = "nmc"
) -> float:
    alpha = np.asarray(alpha, dtype=float)
    m_values = np.asarray(m_values, dtype=float)
    K = alpha.size
    weighted = float(alpha @ m_values)
    log_nt = math.log(N * T)
    if K == 2:
        constant = 122.0 if mode == "nmc" else 116.0
        return constant * math.sqrt(weighted * log_nt / T)
    if mode == "nmc":
        return 27.0 * math.sqrt(K * (2 * K + 1) * weighted * log_nt / T)
    return 7.0 * math.sqrt(K * (7 * K + 1) * weighted * log_nt / T)


def refine_sets(row: np.ndarray) -> tuple[float, tuple[int, ...], tuple[int, ...]]:
    """m(v), B(v, m(v)) and B(1 - v, m(v)) for one context's estimated row."""
    m = m_value(row)
    ones = tuple(sorted(threshold_set(row, m)))
    zeros = tuple(sorted(threshold_set(1.0 - row, m)))
    return m, ones, zeros


# ==================================================
# Refine
# ==================================================
@dataclass(frozen=True)
class Segment:
    start: int
    stop: int
    code: int


@dataclass(frozen=True)
class RefinePlan:
    """Targeted interventions do(X_j = x) for j in B over rounds [tau, tau + d)."""

    arms: tuple[int, ...]
    s: int
    x: int
    tau: int
    d: int
    blocks: tuple[tuple[int, int, int], ...]  # (arm, start, stop)

    def segments(self, aset: ActionSet) -> list[Segment]:
        return [Segment(lo, hi, aset.arm_code(j, self.x)) for j, lo, hi in self.blocks]

    def estimate(self, history: History) -> dict[int, float]:
        """u_j = #{S = s, Y = 1} / #{S = s} over arm j's block (0 if no S = s)."""
        u: dict[int, float] = {}
        for j, lo, hi in self.blocks:
            if hi > len(history):
                raise ScheduleError(f"refine block [{lo}, {hi}) not yet played")
            in_context = history.s[lo:hi] == self.s
            c = int(np.count_nonzero(in_context))
            f = int(np.count_nonzero(in_context & (history.y[lo:hi] == 1)))
            u[j] = f / c if c else 0.0
        return u


def refine_schedule(
    B: Sequence[int], s: int, x: int, tau: int, d: int, horizon: int | None = None
) -> RefinePlan:
    """Split [tau, tau + d) into |B| contiguous blocks of d // |B| rounds.

    The remainder goes to the last block. Arms are served in ascending order.
    """
    arms = tuple(sorted(int(j) for j in B))
    if not arms:
        raise ScheduleError("refine needs a non-empty index set")
    if d < len(arms):
        raise ScheduleError(f"refine budget d={d} is smaller than |B|={len(arms)}")
    if tau < 0 or (horizon is not None and tau + d > horizon):
        raise ScheduleError(f"refine range [{tau}, {tau + d}) outside the episode")
    width = d // len(arms)
    blocks = []
    for i, j in enumerate(arms):
        lo = tau + i * width
        hi = tau + d if i == len(arms) - 1 else lo + width
        blocks.append((j, lo, hi))
    return RefinePlan(arms, s, x, tau, d, tuple(blocks))


# ==================================================
# Estimator state
# ==================================================
@dataclass
class EstimatorState:
    alpha_hat: np.ndarray  # (K,)
    cond_hat: np.ndarray  # (K, N); row 1 is p_hat, row 0 is q_hat when K = 2
    m_hat: np.ndarray  # (K,)
    mu_obs: float
    mu_cell: np.ndarray  # (K, N, 2): mu_hat_{s l j k}
    mu_context: np.ndarray | None = None  # (K,) in manipulable mode
    refine_sets: dict[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)
    refined: dict[tuple[int, int], dict[int, float]] = field(default_factory=dict)
    accepted: np.ndarray | None = None  # (K, N, 2): stage-1 value kept
    mu_cell_initial: np.ndarray | None = None

    @property
    def alpha(self) -> float:
        return float(self.alpha_hat[1])

    @property
    def p_hat(self) -> np.ndarray:
        return self.cond_hat[1]

    @property
    def q_hat(self) -> np.ndarray:
        return self.cond_hat[0]

    def apply_refinement(self, l: int, k: int, u: dict[int, float]) -> None:
        self.refined[(l, k)] = dict(u)
        for j, value in u.items():
            self.mu_cell[l, j, k] = value
            self.accepted[l, j, k] = False

    def mu_do_arm(self) -> np.ndarray:
        """(N, 2) array of sum_s alpha_hat[s] * mu_hat_{s s j k}."""
        total = self.alpha_hat[0] * self.mu_cell[0]
        for s in range(1, self.alpha_hat.size):
            total = total + self.alpha_hat[s] * self.mu_cell[s]
        return total

    def action_values(self, mode: str) -> np.ndarray:
        values = [self.mu_obs, *self.mu_do_arm().ravel()]
        if mode == "mc":
            values += list(self.mu_context)
        return np.array(values, dtype=float)


def observational_estimates(history: History, start: int, stop: int) -> EstimatorState:
    """Ratio estimators over observation rounds [start, stop)."""
    K, N = history.n_contexts, history.n_arms
    s = history.s[start:stop]
    x = history.x[start:stop].astype(float)
    y = history.y[start:stop].astype(float)
    n = stop - start
    onehot = (s[:, None] == np.arange(K)[None, :]).astype(float)

    counts = onehot.sum(axis=0)
    alpha_hat = counts / n if n else np.zeros(K)
    if K == 2:
        alpha_hat[0] = 1.0 - alpha_hat[1]

    hits1 = onehot.T @ x
    hits0 = onehot.T @ (1.0 - x)
    reward1 = (onehot * y[:, None]).T @ x
    reward0 = (onehot * y[:, None]).T @ (1.0 - x)

    cond_hat = _ratio(hits1, counts[:, None])
    mu_cell = np.stack([_ratio(reward0, hits0), _ratio(reward1, hits1)], axis=2)
    mu_obs = float(y.sum() / n) if n else 0.0
    return EstimatorState(
        alpha_hat=alpha_hat,
        cond_hat=cond_hat,
        m_hat=np.array([m_value(row) for row in cond_hat]),
        mu_obs=mu_obs,
        mu_cell=mu_cell,
        accepted=np.ones((K, N, 2), dtype=bool),
    )


def context_estimates(history: History, start: int, stop: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Row of cond_hat, (N, 2) mu_hat cells and mu_hat_do(S=s) over a do(S=s) stage."""
    x = history.x[start:stop].astype(float)
    y = history.y[start:stop].astype(float)
    n = stop - start
    row = x.sum(axis=0) / n if n else np.zeros(history.n_arms)
    cells = np.stack([_ratio(y @ (1.0 - x), (1.0 - x).sum(axis=0)), _ratio(y @ x, x.sum(axis=0))], axis=1)
    return row, cells, float(y.sum() / n) if n else 0.0


# ==================================================
# Policy contract
# ==================================================
class Policy(ABC):
    """next_action(H_{t-1}, t, W) and final_choice(H_T, W).

    ``next_actions`` returns the block of action codes the policy commits to from
    round t on; it may only look at the first t rounds of the history.
    """

    name = "policy"
    mode: str | None = None

    def __init__(self, T: int):
        if T < 1:
            raise ScheduleError(f"T must be >= 1, got {T}")
        self.T = T
        self.actions: ActionSet | None = None

    def begin(self, n_arms: int, n_contexts: int, mode: str) -> None:
        if self.mode is not None and mode != self.mode:
            raise PolicyError(f"{self.name} plays in {self.mode} mode, episode is {mode}")
        self.actions = action_set(n_arms, n_contexts, mode)

    @abstractmethod
    def next_actions(self, history: History, t: int, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def final_choice(self, history: History, rng: np.random.Generator) -> Action: ...

    def next_action(self, history: History, t: int, rng: np.random.Generator) -> Action:
        return self.actions.actions[int(self.next_actions(history, t, rng)[0])]


class StagedPolicy(Policy):
    """A policy whose schedule is a list of constant-action segments.

    Subclasses lay out the first segments in ``_start`` and extend the plan at
    the rounds listed in ``self._checkpoints``.
    """

    def begin(self, n_arms: int, n_contexts: int, mode: str) -> None:
        super().begin(n_arms, n_contexts, mode)
        self.segments: list[Segment] = []
        self._checkpoints: dict[int, Callable[[History], None]] = {}
        self.state: EstimatorState | None = None
        self.plans: dict[tuple[int, int], RefinePlan] = {}
        self._start()

    @abstractmethod
    def _start(self) -> None: ...

    def _observe(self, start: int, stop: int) -> None:
        if stop > start:
            self.segments.append(Segment(start, stop, OBSERVE))

    def _schedule_refines(self, tau: int, block: int, rows: dict[int, np.ndarray]) -> int:
        """Lay out the 2K refine blocks from round ``tau``; returns the next free round."""
        state = self.state
        for l in sorted(rows, reverse=True):
            _, ones, zeros = refine_sets(rows[l])
            for k, arms in ((1, ones), (0, zeros)):
                state.refine_sets[(l, k)] = arms
                if arms and block >= len(arms):
                    plan = refine_schedule(arms, l, k, tau, block, self.T)
                    self.plans[(l, k)] = plan
                    self.segments.extend(plan.segments(self.actions))
                else:
                    if arms:
                        logger.warning(
                            "refine block (S=%d, x=%d) skipped: %d arms, %d rounds", l, k, len(arms), block
                        )
                    self._observe(tau, tau + block)
                tau += block
        return tau

    def _refine_final(self, history: History) -> EstimatorState:
        state = self.state
        for (l, k), plan in self.plans.items():
            state.apply_refinement(l, k, plan.estimate(history))
        return state

    def next_actions(self, history: History, t: int, rng: np.random.Generator) -> np.ndarray:
        if len(history) != t:
            raise PolicyError(f"{self.name} asked for round {t} with {len(history)} rounds of history")
        hook = self._checkpoints.pop(t, None)
        if hook is not None:
            hook(history)
        for seg in self.segments:
            if seg.start <= t < seg.stop:
                return np.full(seg.stop - t, seg.code, dtype=np.int64)
        raise ScheduleError(f"{self.name} has no action scheduled for round {t}")

    def final_choice(self, history: History, rng: np.random.Generator) -> Action:
        if len(history) != self.T:
            raise PolicyError(f"final choice needs {self.T} rounds, history has {len(history)}")
        state = self._refine_final(history)
        values = state.action_values(self.actions.mode)
        return self.actions.actions[canonical_argmax(values)]


class ObserveThenRefine(StagedPolicy):
    """Observe for one stage, then refine the hard cells context by context."""

    mode = "nmc"

    def __init__(self, T: int, K: int = 2, name: str = "alg-nmc"):
        super().__init__(T)
        self.K = K
        self.name = name
        self.stage = T // (2 * K + 1)
        if self.stage < 1:
            raise ScheduleError(f"{name} needs T >= {2 * K + 1}, got T={T}")

    def begin(self, n_arms: int, n_contexts: int, mode: str) -> None:
        if n_contexts != self.K:
            raise PolicyError(f"{self.name} was built for K={self.K}, instance has K={n_contexts}")
        super().begin(n_arms, n_contexts, mode)

    def _start(self) -> None:
        self._observe(0, self.stage)
        self._checkpoints[self.stage] = self._plan_refines

    def _plan_refines(self, history: History) -> None:
        self.state = observational_estimates(history, 0, self.stage)
        self.state.mu_cell_initial = self.state.mu_cell.copy()
        rows = {l: self.state.cond_hat[l] for l in range(self.K)}
        end = self._schedule_refines(self.stage, self.stage, rows)
        self._observe(end, self.T)
        logger.debug("%s refine sets %s", self.name, self.state.refine_sets)


class ContextThenRefine(StagedPolicy):
    """Observe, intervene on every context value, then refine."""

    mode = "mc"

    def __init__(self, T: int, K: int = 2, name: str = "alg-mc", unit: int | None = None, block: int | None = None):
        super().__init__(T)
        self.K = K
        self.name = name
        self.unit = T // (7 * K + 1) if unit is None else unit
        self.block = 3 * self.unit if block is None else block
        if self.unit < 1 or self.block < 1:
            raise ScheduleError(f"{name} stage split infeasible for T={T}, K={K}")

    def begin(self, n_arms: int, n_contexts: int, mode: str) -> None:
        if n_contexts != self.K:
            raise PolicyError(f"{self.name} was built for K={self.K}, instance has K={n_contexts}")
        super().begin(n_arms, n_contexts, mode)

    def _start(self) -> None:
        u = self.unit
        self._observe(0, u)
        for i, s in enumerate(range(self.K - 1, -1, -1)):
            lo = u * (1 + i)
            self.segments.append(Segment(lo, lo + u, self.actions.context_code(s)))
        self._checkpoints[u * (1 + self.K)] = self._plan_refines

    def _context_stage(self, s: int) -> tuple[int, int]:
        i = self.K - 1 - s
        lo = self.unit * (1 + i)
        return lo, lo + self.unit

    def _plan_refines(self, history: History) -> None:
        K, N = self.K, self.actions.n_arms
        base = observational_estimates(history, 0, self.unit)
        cond_hat = np.zeros((K, N))
        mu_cell = np.zeros((K, N, 2))
        mu_context = np.zeros(K)
        for s in range(K):
            lo, hi = self._context_stage(s)
            cond_hat[s], mu_cell[s], mu_context[s] = context_estimates(history, lo, hi)
        self.state = EstimatorState(
            alpha_hat=base.alpha_hat,
            cond_hat=cond_hat,
            m_hat=np.array([m_value(row) for row in cond_hat]),
            mu_obs=base.mu_obs,
            mu_cell=mu_cell,
            mu_context=mu_context,
            accepted=np.ones((K, N, 2), dtype=bool),
            mu_cell_initial=mu_cell.copy(),
        )
        rows = {l: cond_hat[l] for l in range(K)}
        end = self._schedule_refines(self.unit * (1 + K), self.block, rows)
        self._observe(end, self.T)


class UniformBaseline(Policy):
    """Round-robin over the action set; picks the best empirical mean."""

    name = "uniform"

    def __init__(self, T: int, mode: str = "nmc"):
        super().__init__(T)
        self.mode = mode

    def begin(self, n_arms: int, n_contexts: int, mode: str) -> None:
        super().begin(n_arms, n_contexts, mode)
        if self.T < len(self.actions):
            raise ScheduleError(f"uniform baseline needs T >= {len(self.actions)} actions, got T={self.T}")

    def next_actions(self, history: History, t: int, rng: np.random.Generator) -> np.ndarray:
        return np.arange(t, self.T, dtype=np.int64) % len(self.actions)

    def final_choice(self, history: History, rng: np.random.Generator) -> Action:
        n = len(self.actions)
        a = history.a[: len(history)]
        pulls = np.bincount(a, minlength=n)
        wins = np.bincount(a, weights=history.y[: len(history)], minlength=n)
        return self.actions.actions[canonical_argmax(_ratio(wins, pulls))]


# ==================================================
# Factories
# ==================================================
def alg_nmc(T: int) -> ObserveThenRefine:
    if T < 5:
        raise ScheduleError(f"alg-nmc needs T >= 5, got T={T}")
    return ObserveThenRefine(T, K=2, name="alg-nmc")


def alg_mc(T: int) -> ContextThenRefine:
    if T < 15:
        raise ScheduleError(f"alg-mc needs T >= 15, got T={T}")
    return ContextThenRefine(T, K=2, name="alg-mc", unit=T // 15, block=T // 5)


def alg_k(T: int, K: int, mode: str = "nmc") -> StagedPolicy:
    if K < 2:
        raise ScheduleError("K-context algorithms need K >= 2; use alg_nmc with p = q for a single context")
    if mode == "nmc":
        return ObserveThenRefine(T, K=K, name="alg-k-nmc")
    return ContextThenRefine(T, K=K, name="alg-k-mc")


def uniform_baseline(T: int, mode: str = "nmc") -> UniformBaseline:
    return UniformBaseline(T, mode)


def make_policy(name: str, T: int, K: int = 2, mode: str = "nmc") -> Policy:
    if name == "alg-nmc":
        return alg_nmc(T)
    if name == "alg-mc":
        return alg_mc(T)
    if name == "alg-k-nmc":
        return alg_k(T, K, "nmc")
    if name == "alg-k-mc":
        return alg_k(T, K, "mc")
    if name == "uniform":
        return uniform_baseline(T, mode)
    raise PolicyError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")


def policy_mode(name: str, default: str = "nmc") -> str:
    if name in ("alg-nmc", "alg-k-nmc"):
        return "nmc"
    if name in ("alg-mc", "alg-k-mc"):
        return "mc"
    return default


# ==================================================
# Episode
# ==================================================
def run_episode(
    instance: HcbInstance,
    policy: Policy,
    T: int,
    rng: np.random.Generator,
    policy_rng: np.random.Generator | None = None,
    mode: str | None = None,
) -> tuple[Action, History]:
    """Play T rounds of ``policy`` against ``instance`` and return (A_T, H_T)."""
    if T < 1:
        raise ScheduleError(f"T must be >= 1, got {T}")
    if T != policy.T:
        raise ScheduleError(f"policy was built for T={policy.T}, episode has T={T}")
    mode = mode or policy.mode or "nmc"
    if policy_rng is None:
        policy_rng = np.random.Generator(np.random.Philox(int(rng.integers(0, 2**63))))

    policy.begin(instance.N, instance.K, mode)
    n_valid = len(instance.actions(mode))
    history = History(T, instance.N, instance.K)
    t = 0
    while t < T:
        codes = np.asarray(policy.next_actions(history, t, policy_rng), dtype=np.int64)[: T - t]
        if codes.size == 0:
            raise PolicyError(f"{policy.name} returned no action at round {t}")
        if codes.min() < 0 or codes.max() >= n_valid:
            bad = int(codes[(codes < 0) | (codes >= n_valid)][0])
            raise PolicyError(f"{policy.name} emitted action code {bad} at round >= {t}; valid codes are 0..{n_valid - 1}")
        s, x, y = sample_rounds(instance, codes, rng)
        history.extend(s, x, y, codes)
        t += codes.size

    choice = policy.final_choice(history, policy_rng)
    try:
        instance.actions(mode).code(choice)
    except InstanceError as exc:
        raise PolicyError(f"{policy.name} chose {choice}, not in the {mode} action set") from exc
    return choice, history

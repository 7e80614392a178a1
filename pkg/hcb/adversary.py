"""Adversarial reward families and the minimax lower bound.

Each family keeps the arm law (alpha, p, q) fixed and bumps the constant
reward 1/2 by epsilon on a target set X*_i, so that do(X_i = 1) becomes
optimal under member i. Two shapes:

* isolated: X*_i = {x_i = 1, x_l = 0 for the other l < ceil(m)}, members
  i < ceil(m), with m = m(lead row).
* coordinate: X*_i = {x_i = 1}, members i < N.

The lead context is S = 1 by default; a mirrored family leads with S = 0 and
swaps the roles of (alpha, p) and (1 - alpha, q).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import rel_entr

from hcb.agents import Policy, run_episode
from hcb.complexity import m_value
from hcb.errors import AdversaryError
from hcb.harness import RegretReport, estimate_simple_regret
from hcb.model import (
    ConstantHalf,
    HcbInstance,
    TargetBump,
    action_set,
    exact_mu_enumerated,
    joint_distribution,
    configurations,
    target_probability,
)

logger = logging.getLogger(__name__)

SHAPES = ("isolated", "coordinate")
KL_BUDGET = math.log(1.05)
EPSILON_SCALE = math.sqrt(KL_BUDGET) / 4.0
LOWER_BOUND_CONSTANT = 1.0 / 127.0


# ==================================================
# Types
# ==================================================
@dataclass(frozen=True, eq=False)
class AdversarialFamily:
    alpha: float  # P(S = 1)
    p: np.ndarray
    q: np.ndarray
    shape: str
    epsilon: float
    m1: float  # m of the lead row
    members: tuple[int, ...]
    hard_set: tuple[int, ...]
    lead: int = 1
    T: int = 0

    @property
    def N(self) -> int:
        return int(self.p.size)

    @property
    def lead_weight(self) -> float:
        return self.alpha if self.lead == 1 else 1.0 - self.alpha

    def target(self, i: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(ones, zeros) coordinates of X*_i."""
        if i not in self.members:
            raise AdversaryError(f"arm {i} is not a member of this family ({self.members})")
        if self.shape == "coordinate":
            return (i,), ()
        return (i,), tuple(l for l in range(math.ceil(self.m1)) if l != i)

    def reward(self, i: int) -> TargetBump:
        ones, zeros = self.target(i)
        return TargetBump(self.epsilon, ones, zeros)


@dataclass(frozen=True)
class LowerBoundReport:
    regime: int  # 1: both hard, 2: p hard, 3: q hard, 4: neither
    alpha: float
    m_tilde: float
    tau0: float
    tau1: float
    q_max: float
    m_p: float
    m_q: float
    bound: float


@dataclass
class SeparationReport:
    alpha: float
    m1: float
    hard_set: tuple[int, ...]
    probabilities: np.ndarray  # (ceil(m1), |A^mc|)
    nominal_floor: float  # alpha / e
    product_floor: float  # alpha (1 - 1/m1)^(ceil(m1) - 1)
    ceiling: float  # 1 / m1
    max_enumeration_error: float = float("nan")
    violations: list[str] = field(default_factory=list)
    nominal_shortfalls: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations


class KlEstimate(NamedTuple):
    estimate: float
    stderr: float
    mean_hits: float
    mean_target_pulls: float


# ==================================================
# Preconditions
# ==================================================
def _lead_rows(p: Sequence[float], q: Sequence[float], lead: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise AdversaryError("p and q must be vectors of the same length")
    if lead not in (0, 1):
        raise AdversaryError(f"lead context must be 0 or 1, got {lead}")
    return (p, q) if lead == 1 else (q, p)


def _check_sorted_half(v: np.ndarray, name: str) -> None:
    if np.any(np.diff(v) < 0):
        raise AdversaryError(f"{name} must be sorted ascending")
    if v.max() > 0.5:
        raise AdversaryError(f"{name} entries must be <= 1/2, max is {v.max():.6g}")


def _check_isolated(row: np.ndarray, name: str) -> float:
    _check_sorted_half(row, name)
    m = m_value(row)
    if m <= 2:
        raise AdversaryError(f"isolated targets need m({name}) > 2, got {m:.6g}")
    return m


def hard_index_set(p: Sequence[float], q: Sequence[float]) -> tuple[int, ...]:
    """First floor(m(p)/2) arms of [ceil(m(p))] ordered by q, ties by index."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = _check_isolated(p, "p")
    head = math.ceil(m)
    order = np.argsort(q[:head], kind="stable")
    return tuple(int(i) for i in order[: math.floor(m / 2)])


# ==================================================
# Construction
# ==================================================
def build_adversarial_family(
    alpha: float,
    p: Sequence[float],
    q: Sequence[float],
    T: int,
    shape: str = "isolated",
    lead: int = 1,
) -> AdversarialFamily:
    if shape not in SHAPES:
        raise AdversaryError(f"unknown family shape {shape!r}; expected one of {SHAPES}")
    if not (0.0 < alpha < 1.0):
        raise AdversaryError(f"alpha must lie in (0, 1), got {alpha}")
    p = np.array(p, dtype=float)
    q = np.array(q, dtype=float)
    lead_row, other_row = _lead_rows(p, q, lead)
    name = "p" if lead == 1 else "q"

    if shape == "isolated":
        m1 = _check_isolated(lead_row, name)
        if T < m1:
            raise AdversaryError(f"isolated family needs T >= m({name}) = {m1:.6g}, got T={T}")
        epsilon = EPSILON_SCALE * math.sqrt(m1 / T)
        members = tuple(range(math.ceil(m1)))
        hard = hard_index_set(lead_row, other_row)
    else:
        if T < 1:
            raise AdversaryError(f"T must be >= 1, got {T}")
        m1 = m_value(lead_row)
        epsilon = EPSILON_SCALE / math.sqrt(T)
        members = tuple(range(p.size))
        hard = members

    if not (0.0 < epsilon < 0.25):
        raise AdversaryError(f"bump epsilon {epsilon:.6g} outside (0, 1/4)")
    p.setflags(write=False)
    q.setflags(write=False)
    logger.debug("family shape=%s lead=%d eps=%.6g members=%s hard=%s", shape, lead, epsilon, members, hard)
    return AdversarialFamily(float(alpha), p, q, shape, epsilon, m1, members, hard, lead, int(T))


def null_instance(family: AdversarialFamily) -> HcbInstance:
    return HcbInstance(
        2, family.N, np.array([1.0 - family.alpha, family.alpha]), np.vstack([family.q, family.p]), ConstantHalf()
    )


def member_instance(family: AdversarialFamily, i: int) -> HcbInstance:
    return null_instance(family).with_reward(family.reward(i))


def optimality_gap(family: AdversarialFamily) -> float:
    """Guaranteed reward gap between do(X_i = 1) and any other action under member i."""
    if family.shape == "isolated":
        return family.epsilon * (family.lead_weight / math.e - 1.0 / family.m1)
    # do(X_i = 1) pays 1/2 + eps; every other action hits X*_i w.p. at most max(p_i, q_i)
    return family.epsilon * (1.0 - max(float(family.p.max()), float(family.q.max())))


def export_family(family: AdversarialFamily) -> dict:
    return {
        "shape": family.shape,
        "lead": family.lead,
        "alpha": family.alpha,
        "p": family.p.tolist(),
        "q": family.q.tolist(),
        "T": family.T,
        "epsilon": family.epsilon,
        "m1": family.m1,
        "members": list(family.members),
        "hard_set": list(family.hard_set),
    }


# ==================================================
# Separation
# ==================================================
def verify_separation(
    alpha: float, p: Sequence[float], q: Sequence[float], enumerate_check: bool | None = None
) -> SeparationReport:
    """Exact target-set probabilities for every isolated member and every mc action.

    The do(X_i = 1) floor checked is alpha (1 - 1/m)^(ceil(m) - 1), the product
    bound the p ordering guarantees; rows that fall under alpha/e are counted
    in ``nominal_shortfalls``. The ceiling 1/m is checked for i in the hard set.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m1 = _check_isolated(p, "p")
    hard = hard_index_set(p, q)
    head = math.ceil(m1)
    instance = HcbInstance(2, p.size, np.array([1.0 - alpha, alpha]), np.vstack([q, p]), ConstantHalf())
    aset = instance.actions("mc")

    probs = np.zeros((head, len(aset)))
    for i in range(head):
        zeros = [l for l in range(head) if l != i]
        for c, action in enumerate(aset.actions):
            probs[i, c] = target_probability(instance, action, (i,), zeros)

    report = SeparationReport(
        alpha=float(alpha),
        m1=m1,
        hard_set=hard,
        probabilities=probs,
        nominal_floor=alpha / math.e,
        product_floor=alpha * (1.0 - 1.0 / m1) ** (head - 1),
        ceiling=1.0 / m1,
    )
    tol = 1e-12
    for i in range(head):
        best = aset.arm_code(i, 1)
        value = probs[i, best]
        if value < report.product_floor - tol or value > 1.0 + tol:
            report.violations.append(
                f"P(X in X*_{i} | do(X{i}=1)) = {value:.12g} outside [{report.product_floor:.12g}, 1]"
            )
        if value < report.nominal_floor:
            report.nominal_shortfalls += 1
        if i in hard:
            others = np.delete(probs[i], best)
            worst = int(np.argmax(others))
            if others[worst] > report.ceiling + tol:
                action = aset.actions[worst if worst < best else worst + 1]
                report.violations.append(
                    f"P(X in X*_{i} | {action}) = {others[worst]:.12g} > 1/m = {report.ceiling:.12g}"
                )

    if enumerate_check is None:
        enumerate_check = p.size <= 12
    if enumerate_check:
        report.max_enumeration_error = _enumeration_error(instance, probs, head)
        if report.max_enumeration_error > tol:
            report.violations.append(f"closed form vs enumeration differ by {report.max_enumeration_error:.3g}")
    if report.nominal_shortfalls:
        logger.info("%d target rows fall under alpha/e (m=%.6g)", report.nominal_shortfalls, m1)
    return report


def _enumeration_error(instance: HcbInstance, probs: np.ndarray, head: int) -> float:
    grid = configurations(instance.N)
    err = 0.0
    for c, action in enumerate(instance.actions("mc").actions):
        mass = joint_distribution(instance, action).sum(axis=0)
        for i in range(head):
            hit = grid[:, i] == 1
            for l in range(head):
                if l != i:
                    hit &= grid[:, l] == 0
            err = max(err, abs(float(mass[hit].sum()) - probs[i, c]))
    return err


def reward_expansion_error(family: AdversarialFamily, i: int) -> float:
    """max_a |mu_a - (1/2 + eps P_0(X in X*_i | a))| over the mc actions, by enumeration."""
    base = null_instance(family)
    inst = member_instance(family, i)
    ones, zeros = family.target(i)
    err = 0.0
    for action in inst.actions("mc").actions:
        expected = 0.5 + family.epsilon * target_probability(base, action, ones, zeros)
        err = max(err, abs(exact_mu_enumerated(inst, action) - expected))
    return err


# ==================================================
# Lower bound
# ==================================================
def thresholds(alpha: float) -> tuple[float, float]:
    """(tau0, tau1) = (3e / ((1 - alpha)(3 - e)), 3e / (alpha (3 - e)))."""
    c = 3.0 * math.e / (3.0 - math.e)
    return c / (1.0 - alpha), c / alpha


def theoretical_lower_bound(alpha: float, p: Sequence[float], q: Sequence[float], T: int) -> LowerBoundReport:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.size < 4:
        raise AdversaryError(f"lower bound needs N >= 4, got N={p.size}")
    if not (0.0 < alpha < 1.0):
        raise AdversaryError(f"alpha must lie in (0, 1), got {alpha}")
    m_p, m_q = m_value(p), m_value(q)
    if T < max(m_p, m_q):
        raise AdversaryError(f"lower bound needs T >= max(m(p), m(q)) = {max(m_p, m_q):.6g}, got T={T}")
    tau0, tau1 = thresholds(alpha)
    q_max = float(q.max())
    hard_p = m_p >= tau1
    hard_q = m_q >= tau0
    if hard_p and hard_q:
        regime, m_tilde = 1, max(m_p * alpha**2, m_q * (1.0 - alpha) ** 2)
    elif hard_p:
        regime, m_tilde = 2, m_p * alpha**2
    elif hard_q:
        regime, m_tilde = 3, m_q * (1.0 - alpha) ** 2
    else:
        regime, m_tilde = 4, (1.0 - max(q_max, 0.5)) ** 2
    return LowerBoundReport(
        regime=regime,
        alpha=float(alpha),
        m_tilde=m_tilde,
        tau0=tau0,
        tau1=tau1,
        q_max=q_max,
        m_p=m_p,
        m_q=m_q,
        bound=LOWER_BOUND_CONSTANT * math.sqrt(m_tilde / T),
    )


def matching_shape(report: LowerBoundReport) -> tuple[str, int]:
    """Family (shape, lead context) that realises a lower-bound regime."""
    if report.regime == 4:
        return "coordinate", 1
    if report.regime == 3:
        return "isolated", 0
    if report.regime == 1 and report.m_q * (1.0 - report.alpha) ** 2 > report.m_p * report.alpha**2:
        return "isolated", 0
    return "isolated", 1


# ==================================================
# KL
# ==================================================
def kl_per_hit(epsilon: float) -> float:
    """KL(Bern(1/2) || Bern(1/2 + eps)) + KL(Bern(1/2) || Bern(1/2 - eps)), each half-weighted.

    Equals 1/2 ln(1/2 / (1/2 + eps)) + 1/2 ln(1/2 / (1/2 - eps)).
    """
    if not (0.0 <= epsilon < 0.25):
        raise AdversaryError(f"epsilon must lie in [0, 1/4), got {epsilon}")
    return float(rel_entr(0.5, 0.5 + epsilon) + rel_entr(0.5, 0.5 - epsilon))


def estimate_history_kl(
    instance0: HcbInstance,
    family: AdversarialFamily,
    i: int,
    policy: Policy,
    T: int,
    reps: int,
    rng: np.random.Generator,
) -> KlEstimate:
    """Monte Carlo KL(P_0 || P_i) over histories: kl_per_hit(eps) * E_0[#rounds with X in X*_i]."""
    if reps < 2:
        raise AdversaryError(f"KL estimate needs reps >= 2, got {reps}")
    if not isinstance(instance0.reward, ConstantHalf):
        raise AdversaryError("histories must be drawn under the constant null reward")
    bump = family.reward(i)
    target_code = instance0.actions("mc").arm_code(i, 1)
    hits = np.zeros(reps)
    pulls = np.zeros(reps)
    for r, child in enumerate(rng.spawn(reps)):
        env_rng, policy_rng = child.spawn(2)
        _, history = run_episode(instance0, policy, T, env_rng, policy_rng)
        hits[r] = np.count_nonzero(bump.hits(history.x[:T]))
        pulls[r] = np.count_nonzero(history.a[:T] == target_code)
    per_hit = kl_per_hit(family.epsilon)
    logger.debug("member %d: mean hits %.3f, mean do(X%d=1) pulls %.3f", i, hits.mean(), i, pulls.mean())
    return KlEstimate(
        estimate=float(hits.mean() * per_hit),
        stderr=float(hits.std(ddof=1) / math.sqrt(reps) * per_hit),
        mean_hits=float(hits.mean()),
        mean_target_pulls=float(pulls.mean()),
    )


def kl_chain_bound(family: AdversarialFamily, mean_target_pulls: float, T: int) -> float:
    """(16 eps^2 / 3) ((1 - 1/m) E[T_i] + T / m) for isolated members."""
    return 16.0 * family.epsilon**2 / 3.0 * ((1.0 - 1.0 / family.m1) * mean_target_pulls + T / family.m1)


# ==================================================
# Wedge
# ==================================================
@dataclass
class WedgeRow:
    T: int
    regime: int
    shape: str
    bound: float
    worst_member: int
    regret: float
    stderr: float
    member_regret: dict[int, float] = field(default_factory=dict)
    # gap * (1 - f(do(X_i = 1))) per member; regret can't sit below it
    gap_floor: dict[int, float] = field(default_factory=dict)
    gap_shortfalls: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return self.regret + 3.0 * self.stderr >= self.bound and not self.gap_shortfalls


def gap_floor(family: AdversarialFamily, i: int, report: RegretReport) -> float:
    """Regret floor of member i: optimality gap times the rate of missing do(X_i = 1)."""
    code = action_set(family.N, 2, report.mode).arm_code(i, 1)
    missed = 1.0 - report.counts[code] / report.reps
    return max(optimality_gap(family), 0.0) * missed


def adversarial_wedge(
    alpha: float,
    p: Sequence[float],
    q: Sequence[float],
    policy: str,
    t_grid: Sequence[int],
    reps: int,
    seed: int,
    workers: int = 1,
    shape: str = "auto",
    lead: int = 1,
    members: str = "hard",
) -> list[WedgeRow]:
    """Max-over-members measured regret of ``policy`` against the lower bound, per T.

    Each member's regret is also held against its gap floor.
    """
    rows = []
    for t_index, T in enumerate(t_grid):
        report = theoretical_lower_bound(alpha, p, q, T)
        chosen, chosen_lead = matching_shape(report) if shape == "auto" else (shape, lead)
        family = build_adversarial_family(alpha, p, q, T, chosen, chosen_lead)
        indices = family.hard_set if members == "hard" else family.members
        results = {
            i: estimate_simple_regret(member_instance(family, i), policy, T, reps, seed, t_index, workers)
            for i in indices
        }
        floors = {i: gap_floor(family, i, r) for i, r in results.items()}
        short = tuple(i for i, r in results.items() if r.regret_hat + 3.0 * r.stderr < floors[i])
        if short:
            logger.warning("wedge T=%d: members %s below their gap floor", T, short)
        worst = max(results, key=lambda i: (results[i].regret_hat, -i))
        rows.append(
            WedgeRow(
                T=T,
                regime=report.regime,
                shape=chosen,
                bound=report.bound,
                worst_member=worst,
                regret=results[worst].regret_hat,
                stderr=results[worst].stderr,
                member_regret={i: r.regret_hat for i, r in results.items()},
                gap_floor=floors,
                gap_shortfalls=short,
            )
        )
        logger.info(
            "wedge T=%d regime=%d worst member %d regret %.4g (bound %.4g)", T, report.regime, worst,
            results[worst].regret_hat, report.bound,
        )
    return rows

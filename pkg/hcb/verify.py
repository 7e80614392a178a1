"""Verification suites.

Each suite returns a SuiteResult; ``run_all`` is what ``hcb verify-lemmas``
executes. Exact suites compare closed forms against enumeration at 1e-12;
statistical suites use fixed streams and 3-sigma margins.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from hcb import streams
from hcb.adversary import (
    KL_BUDGET,
    adversarial_wedge,
    build_adversarial_family,
    estimate_history_kl,
    kl_chain_bound,
    kl_per_hit,
    member_instance,
    null_instance,
    reward_expansion_error,
    verify_separation,
)
from hcb.agents import (
    History,
    ObserveThenRefine,
    observational_estimates,
    alg_mc,
    alg_nmc,
    refine_schedule,
    run_episode,
    uniform_baseline,
)
from hcb.complexity import m_value
from hcb.config import (
    CONCENTRATION_REPS,
    CONCENTRATION_T_PRIME,
    QUICK_FACTOR,
    SCALING_T_GRID,
    WEDGE_REPS,
    WEDGE_T_GRID,
    GeneratorSpec,
    concentration_generator,
    regime2_generator,
    wedge_generator,
)
from hcb.harness import (
    concentration_suite,
    estimate_simple_regret,
    fit_scaling,
    random_instance,
    upper_bound_check,
)
from hcb.model import (
    DoArm,
    DoContext,
    Observe,
    conditional_reward,
    exact_mu,
    joint_distribution,
    parallel_instance,
)

logger = logging.getLogger(__name__)

TOL = 1e-12


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    failures: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, message: str) -> None:
        if len(self.failures) < 20:
            self.failures.append(message)
        else:
            self.details["suppressed"] = self.details.get("suppressed", 0) + 1


def _rng(seed: int, rep: int, t_index: int = 0) -> np.random.Generator:
    return streams.stream(seed, t_index, rep, "suite")


# ==================================================
# Exact identities
# ==================================================
def identity_suite(seed: int, instances: int = 100, max_arms: int = 10) -> SuiteResult:
    """Normalisation and the intervention identities on random dense instances."""
    result = SuiteResult("identities")
    for k in range(instances):
        rng = _rng(seed, k)
        N = int(rng.integers(1, max_arms + 1))
        inst = random_instance(GeneratorSpec(N=N, low=0.02, high=0.98, reward="dense"), rng)
        alpha = inst.alpha
        for action in inst.actions("mc"):
            total = joint_distribution(inst, action).sum()
            result.checked += 1
            if abs(total - 1.0) > TOL:
                result.fail(f"instance {k}: {action} mass {total:.15g}")
        for i in range(N):
            for x in (0, 1):
                lhs = exact_mu(inst, DoArm(i, x))
                rhs = sum(alpha[s] * conditional_reward(inst, Observe(), s=s, i=i, x=x) for s in range(2))
                result.checked += 1
                if abs(lhs - rhs) > TOL:
                    result.fail(f"instance {k}: do(X{i}={x}) {lhs:.15g} vs context mixture {rhs:.15g}")
        by_context = [exact_mu(inst, DoContext(s)) for s in range(2)]
        for s in range(2):
            observed = conditional_reward(inst, Observe(), s=s)
            result.checked += 1
            if abs(by_context[s] - observed) > TOL:
                result.fail(f"instance {k}: do(S={s}) {by_context[s]:.15g} vs E[Y|S={s}] {observed:.15g}")
        mixture = float(alpha @ np.array(by_context))
        result.checked += 1
        if abs(exact_mu(inst, Observe()) - mixture) > TOL:
            result.fail(f"instance {k}: do() differs from the do(S) mixture")

        flat = parallel_instance(float(alpha[1]), inst.cond[1], inst.reward)
        for i in range(N):
            for x in (0, 1):
                result.checked += 1
                gap = abs(exact_mu(flat, DoArm(i, x)) - conditional_reward(flat, Observe(), i=i, x=x))
                if gap > TOL:
                    result.fail(f"instance {k}: parallel reduction off by {gap:.3g} at do(X{i}={x})")
    return result


# ==================================================
# Complexity
# ==================================================
def brute_force_m(v: np.ndarray, grid: int = 4096) -> float:
    """Minimum feasible s over a dense grid plus every breakpoint and integer.

    Breakpoints and integers are scanned in exact rational arithmetic; the
    grid is a float sweep over [1, N] that must not find anything smaller.
    """
    th = sorted(Fraction(float(t)) for t in np.minimum(v, 1.0 - np.asarray(v, dtype=float)))
    n = len(th)
    candidates = sorted({1 / t for t in th if t > 0} | {Fraction(s) for s in range(1, n + 1)})
    # |I_s| = #{theta < 1/s}; for s = 1/theta_j the bound is theta_j itself
    exact = next(s for s in candidates if s >= bisect_left(th, 1 / s))

    floats = np.array([float(t) for t in th])
    s_grid = np.linspace(1.0, float(n), grid)
    feasible = s_grid >= np.sum(floats[None, :] < (1.0 / s_grid)[:, None], axis=1)
    below = s_grid[feasible & (s_grid < float(exact))]
    return float(below[0]) if below.size else float(exact)


def complexity_suite(seed: int, vectors: int = 1000, max_len: int = 32) -> SuiteResult:
    result = SuiteResult("complexity")
    for k in range(vectors):
        rng = _rng(seed, k, t_index=1)
        N = int(rng.integers(1, max_len + 1))
        # mix heavy tails and middling entries so every plateau shape shows up
        scale = 10.0 ** rng.uniform(-4, 0, size=N)
        v = np.clip(rng.uniform(0, 1, size=N) * scale, 0.0, 1.0)
        v = np.where(rng.random(N) < 0.5, v, 1.0 - v)
        m = m_value(v)
        result.checked += 1
        if m != brute_force_m(v):
            result.fail(f"vector {k}: m={m!r} vs brute force {brute_force_m(v)!r}")
        if not (1.0 <= m <= N):
            result.fail(f"vector {k}: m={m} outside [1, N={N}]")
        if not math.isclose(m, m_value(1.0 - v), rel_tol=1e-9):
            result.fail(f"vector {k}: m(v)={m} but m(1-v)={m_value(1.0 - v)}")

        sorted_half = np.sort(np.minimum(v, 0.5))
        m_sorted = m_value(sorted_half)
        head = sorted_half[: math.ceil(m_sorted)]
        result.checked += 1
        if np.any(head > (1.0 / m_sorted) * (1.0 + TOL)):
            result.fail(f"vector {k}: a leading entry exceeds 1/m = {1.0 / m_sorted:.15g}")
    return result


# ==================================================
# Separation
# ==================================================
def _admissible(rng: np.random.Generator) -> tuple[float, np.ndarray, np.ndarray]:
    N = int(rng.integers(4, 13))
    alpha = float(rng.uniform(0.1, 0.9))
    p = np.sort(rng.uniform(0.005, 0.5, size=N) * 10.0 ** rng.uniform(-1.5, 0, size=N))
    q = rng.uniform(0.01, 0.99, size=N)
    return alpha, p, q


def separation_suite(seed: int, instances: int = 200) -> SuiteResult:
    result = SuiteResult("separation")
    shortfalls = 0
    for k in range(instances):
        alpha, p, q = _admissible(_rng(seed, k, t_index=2))
        report = verify_separation(alpha, p, q)
        result.checked += 1
        shortfalls += report.nominal_shortfalls
        for line in report.violations:
            result.fail(f"instance {k}: {line}")
        family = build_adversarial_family(alpha, p, q, T=10_000)
        for i in family.members:
            err = reward_expansion_error(family, i)
            result.checked += 1
            if err > TOL:
                result.fail(f"instance {k}: member {i} reward expansion off by {err:.3g}")
    result.details["alpha_over_e_shortfalls"] = shortfalls
    return result


# ==================================================
# KL
# ==================================================
def kl_suite(seed: int, reps: int = 200, T: int = 4096) -> SuiteResult:
    """Per-hit bound on a grid, plus the history-KL budget on the wedge instance."""
    result = SuiteResult("kl")
    grid = np.linspace(0.0, 0.25, 1002)[1:-1]
    values = np.array([kl_per_hit(e) for e in grid])
    result.checked += grid.size
    over = np.flatnonzero(values > 16.0 * grid**2 / 3.0)
    for idx in over[:5]:
        result.fail(f"kl_per_hit({grid[idx]:.6g}) = {values[idx]:.6g} > 16 eps^2 / 3")

    base = random_instance(wedge_generator(), streams.stream(seed, purpose="instance"))
    family = build_adversarial_family(base.alpha1, base.p, base.q, T, "isolated")
    null = null_instance(family)
    rng = streams.stream(seed, purpose="kl")
    within = 0
    for i in family.hard_set:
        est = estimate_history_kl(null, family, i, alg_nmc(T), T, reps, rng)
        within += est.estimate <= KL_BUDGET + 3.0 * est.stderr
        chain = estimate_history_kl(null, family, i, uniform_baseline(T), T, reps, rng)
        result.checked += 1
        if chain.estimate > kl_chain_bound(family, chain.mean_target_pulls, T) + 3.0 * chain.stderr:
            result.fail(f"member {i}: uniform-policy KL {chain.estimate:.4g} above the chain bound")
    needed = math.ceil(len(family.hard_set) / 2)
    result.checked += 1
    result.details.update(members=len(family.hard_set), within_budget=within)
    if within < needed:
        result.fail(f"only {within} of {len(family.hard_set)} members within the ln(1.05) budget (need {needed})")
    return result


# ==================================================
# Bookkeeping
# ==================================================
def _oracle_observational(history: History, lo: int, hi: int) -> tuple[float, np.ndarray, np.ndarray, float]:
    """alpha_hat, cond_hat (2, N), mu cells (2, N, 2) and mu_obs by explicit counting."""
    N = history.n_arms
    s, x, y = history.s[lo:hi], history.x[lo:hi], history.y[lo:hi]
    n1 = int(np.sum(s == 1))
    alpha_hat = n1 / (hi - lo)
    cond = np.zeros((2, N))
    cells = np.zeros((2, N, 2))
    for l in (0, 1):
        nl = int(np.sum(s == l))
        for j in range(N):
            ones = int(np.sum((s == l) & (x[:, j] == 1)))
            cond[l, j] = ones / nl if nl else 0.0
            for k in (0, 1):
                mask = (s == l) & (x[:, j] == k)
                c = int(mask.sum())
                cells[l, j, k] = int(y[mask].sum()) / c if c else 0.0
    return alpha_hat, cond, cells, int(y.sum()) / (hi - lo)


def _check_plan(result: SuiteResult, tag: str, policy, tau: int, d: int, order: list[tuple[int, int]]) -> int:
    state = policy.state
    for l, k in order:
        arms = state.refine_sets[(l, k)]
        plan = policy.plans.get((l, k))
        if arms and d >= len(arms):
            width = d // len(arms)
            expected = tuple(
                (j, tau + i * width, tau + d if i == len(arms) - 1 else tau + (i + 1) * width)
                for i, j in enumerate(sorted(arms))
            )
            if plan is None or plan.blocks != expected:
                result.fail(f"{tag}: refine ({l},{k}) blocks {plan and plan.blocks} != {expected}")
        elif plan is not None:
            result.fail(f"{tag}: refine ({l},{k}) scheduled with {len(arms)} arms in {d} rounds")
        tau += d
    return tau


def bookkeeping_suite(seed: int, episodes: int = 50) -> SuiteResult:
    result = SuiteResult("bookkeeping")
    for k in range(episodes):
        rng = _rng(seed, k, t_index=3)
        N = int(rng.integers(2, 9))
        T = int(rng.integers(60, 2001))
        inst = random_instance(GeneratorSpec(N=N, low=0.02, high=0.98, reward="dense"), rng)
        policy = alg_nmc(T) if k % 2 == 0 else alg_mc(T)
        choice, history = run_episode(inst, policy, T, rng, streams.stream(seed, 3, k, "policy"))
        state = policy.state
        tag = f"episode {k} ({policy.name}, T={T})"
        result.checked += 1

        if isinstance(policy, ObserveThenRefine):
            L = T // 5
            alpha_hat, cond, cells, mu_obs = _oracle_observational(history, 0, L)
            if np.any(history.a[:L] != 0):
                result.fail(f"{tag}: non-observe action in [0, {L})")
            order = [(1, 1), (1, 0), (0, 1), (0, 0)]
            end = _check_plan(result, tag, policy, L, L, order)
        else:
            U, D = T // 15, T // 5
            alpha_hat, _, _, mu_obs = _oracle_observational(history, 0, U)
            cond = np.zeros((2, N))
            cells = np.zeros((2, N, 2))
            for s, lo in ((1, U), (0, 2 * U)):
                if np.any(history.a[lo : lo + U] != 1 + 2 * N + s):
                    result.fail(f"{tag}: do(S={s}) stage not at [{lo}, {lo + U})")
                sub = _oracle_observational(history, lo, lo + U)
                cond[s] = sub[1][s]
                cells[s] = sub[2][s]
            order = [(1, 1), (1, 0), (0, 1), (0, 0)]
            end = _check_plan(result, tag, policy, 3 * U, D, order)
        if np.any(history.a[end:T] != 0):
            result.fail(f"{tag}: leftover rounds [{end}, {T}) are not observation rounds")

        if abs(state.alpha - alpha_hat) > TOL or abs(state.mu_obs - mu_obs) > TOL:
            result.fail(f"{tag}: alpha_hat/mu_obs differ from recomputation")
        if np.max(np.abs(state.cond_hat - cond)) > TOL:
            result.fail(f"{tag}: conditional estimates differ from recomputation")
        if np.max(np.abs(state.mu_cell_initial - cells)) > TOL:
            result.fail(f"{tag}: stage-one reward cells differ from recomputation")

        refined = cells.copy()
        kept = np.ones_like(state.accepted)
        for (l, kx), plan in policy.plans.items():
            for j, lo, hi in plan.blocks:
                kept[l, j, kx] = False
                mask = history.s[lo:hi] == l
                c = int(mask.sum())
                refined[l, j, kx] = int(history.y[lo:hi][mask].sum()) / c if c else 0.0
        if np.max(np.abs(state.mu_cell - refined)) > TOL:
            result.fail(f"{tag}: refined reward cells differ from recomputation")
        if not np.array_equal(state.accepted, kept):
            result.fail(f"{tag}: accepted cells do not match the refine blocks")
        mixed = alpha_hat * refined[1] + (1.0 - alpha_hat) * refined[0]
        if np.max(np.abs(state.mu_do_arm() - mixed)) > TOL:
            result.fail(f"{tag}: do(X) estimates are not the alpha mixture of the cells")

    result.checked += 1
    empty = History(4, 3, 2)
    zeros = np.zeros(4, dtype=np.int64)
    empty.extend(zeros, np.zeros((4, 3), dtype=np.uint8), np.ones(4, dtype=np.uint8), zeros)
    state = observational_estimates(empty, 0, 4)
    plan = refine_schedule([0, 2], s=1, x=1, tau=0, d=4)
    nonzero = [state.cond_hat[1].any(), state.mu_cell[1].any(), state.mu_cell[0, :, 1].any()]
    if any(nonzero) or any(plan.estimate(empty).values()):
        result.fail("zero-denominator estimates are not 0")
    return result


# ==================================================
# Streams
# ==================================================
def stream_suite(seed: int, t_count: int = 4, reps: int = 2000) -> SuiteResult:
    result = SuiteResult("streams")
    keys = {
        streams.stream_key(seed, t, r, purpose)
        for t in range(t_count)
        for r in range(reps)
        for purpose in ("env", "policy")
    }
    result.checked = 2 * t_count * reps
    if len(keys) != result.checked:
        result.fail(f"{result.checked - len(keys)} stream key collisions")
    return result


# ==================================================
# Statistical suites
# ==================================================
def concentration_check(seed: int, reps: int = CONCENTRATION_REPS, T_prime: int = CONCENTRATION_T_PRIME) -> SuiteResult:
    result = SuiteResult("concentration")
    inst = random_instance(concentration_generator(), streams.stream(seed, purpose="instance"))
    report = concentration_suite(inst, T_prime, reps, seed)
    for event in report.events:
        result.checked += 1
        result.details[event.name] = f"{event.status} rate={event.rate:.3g} bound={event.bound:.3g}"
        if event.status == "fail":
            result.fail(f"{event.name}: rate {event.rate:.4g} > bound {event.bound:.4g} + {event.margin:.3g}")
    return result


def wedge_suite(seed: int, reps: int = WEDGE_REPS, workers: int = 1, regime2: bool = False) -> SuiteResult:
    result = SuiteResult("wedge-regime2" if regime2 else "wedge")
    gen = regime2_generator() if regime2 else wedge_generator()
    inst = random_instance(gen, streams.stream(seed, purpose="instance"))
    t_grid = (1000,) if regime2 else WEDGE_T_GRID
    rows = adversarial_wedge(
        inst.alpha1, inst.p, inst.q, "alg-nmc", t_grid, reps, seed, workers, members="all" if not regime2 else "hard"
    )
    for row in rows:
        result.checked += 1 + len(row.gap_floor)
        result.details[f"T={row.T}"] = f"regret={row.regret:.4g} stderr={row.stderr:.3g} bound={row.bound:.4g}"
        if row.regret + 3.0 * row.stderr < row.bound:
            result.fail(f"T={row.T}: max regret {row.regret:.4g} + 3*{row.stderr:.3g} < bound {row.bound:.4g}")
        for i in row.gap_shortfalls:
            result.fail(f"T={row.T}: member {i} regret {row.member_regret[i]:.4g} below gap floor {row.gap_floor[i]:.4g}")
    return result


def scaling_suite(seed: int, reps: int = WEDGE_REPS, workers: int = 1, t_grid=SCALING_T_GRID) -> SuiteResult:
    """Worst-member regret of alg-nmc against the upper bound, its slope, and alg-mc at the largest T."""
    result = SuiteResult("scaling")
    inst = random_instance(wedge_generator(), streams.stream(seed, purpose="instance"))
    worst = {"alg-nmc": [], "alg-mc": []}
    for t_index, T in enumerate(t_grid):
        family = build_adversarial_family(inst.alpha1, inst.p, inst.q, T, "coordinate")
        for name in worst:
            reports = [
                estimate_simple_regret(member_instance(family, i), name, T, reps, seed, t_index, workers)
                for i in family.members
            ]
            worst[name].append(max(reports, key=lambda r: r.regret_hat))
    for row in upper_bound_check(worst["alg-nmc"], inst):
        result.checked += 1
        if not row.passed:
            result.fail(f"T={row.T}: regret {row.regret:.4g} above upper bound {row.bound:.4g}")
    fit = fit_scaling(worst["alg-nmc"])
    result.details["slope"] = fit.status if fit.status != "ok" else f"{fit.slope:.3f}"
    result.checked += 1
    if fit.status == "ok" and not (-0.8 <= fit.slope <= -0.2):
        result.fail(f"log-log slope {fit.slope:.3f} outside [-0.8, -0.2]")
    nmc, mc = worst["alg-nmc"][-1], worst["alg-mc"][-1]
    result.checked += 1
    if mc.regret_hat > nmc.regret_hat + 3.0 * math.hypot(nmc.stderr, mc.stderr):
        result.fail(f"alg-mc regret {mc.regret_hat:.4g} exceeds alg-nmc {nmc.regret_hat:.4g} at T={nmc.T}")
    return result


def run_all(seed: int, quick: bool = False, workers: int = 1, slow: bool = False, regime2: bool = False) -> list[SuiteResult]:
    factor = QUICK_FACTOR if quick else 1
    suites = [
        identity_suite(seed),
        complexity_suite(seed),
        separation_suite(seed),
        kl_suite(seed, reps=max(2, 200 // factor)),
        bookkeeping_suite(seed),
        stream_suite(seed),
        concentration_check(seed, reps=CONCENTRATION_REPS // factor),
    ]
    if slow:
        suites.append(wedge_suite(seed, reps=max(2, WEDGE_REPS // factor), workers=workers))
        suites.append(scaling_suite(seed, reps=max(2, WEDGE_REPS // factor), workers=workers))
    if regime2:
        suites.append(wedge_suite(seed, reps=max(2, WEDGE_REPS // factor), workers=workers, regime2=True))
    for suite in suites:
        log = logger.info if suite.passed else logger.error
        log("suite %s: %s (%d checks)", suite.name, "pass" if suite.passed else "FAIL", suite.checked)
    return suites

"""Monte Carlo experiment runner.

Episodes are keyed by (seed, T index, replication) through ``hcb.streams``;
worker processes return per-action tallies of the final choice, and tallies are
merged by summation, so every number here is independent of chunking and
worker count.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from hcb import streams
from hcb.agents import (
    Policy,
    error_radius,
    make_policy,
    policy_mode,
    run_episode,
    sample_size_condition,
    theoretical_upper_bound,
)
from hcb.complexity import m_value, threshold_mask
from hcb.config import ExperimentConfig, GeneratorSpec
from hcb.errors import ConfigError, HcbError
from hcb.model import (
    ConstantHalf,
    DenseTable,
    HcbInstance,
    Observe,
    TargetBump,
    conditional_reward,
    exact_mu_vector,
    load_instance,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["algorithm", "mode", "N", "K", "T", "reps", "regret_hat", "stderr", "mu_star", "seed"]

PolicySource = str | Callable[[int], Policy]


# ==================================================
# Reports
# ==================================================
@dataclass
class RegretReport:
    algorithm: str
    mode: str
    N: int
    K: int
    T: int
    reps: int
    seed: int
    regret_hat: float
    stderr: float
    mu_star: float
    mu: np.ndarray
    counts: np.ndarray
    actions: tuple[str, ...]
    wall_clock: float = field(default=0.0, compare=False)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.reps

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}

    def to_dict(self) -> dict:
        out = self.row()
        out["actions"] = list(self.actions)
        out["mu"] = [float(v) for v in self.mu]
        out["counts"] = [int(c) for c in self.counts]
        out["frequencies"] = [float(f) for f in self.frequencies]
        return out


def regret_from_counts(mu: Sequence[float], counts: Sequence[int]) -> tuple[float, float]:
    """mu* - sum_a f(a) mu_a and its multinomial standard error."""
    mu = np.asarray(mu, dtype=float)
    counts = np.asarray(counts, dtype=float)
    reps = counts.sum()
    if reps < 1:
        raise HcbError("no episodes tallied")
    freq = counts / reps
    mean = float(freq @ mu)
    var = max(float(freq @ mu**2) - mean**2, 0.0)
    return float(mu.max()) - mean, math.sqrt(var / reps)


# ==================================================
# Regret estimation
# ==================================================
def _policy_for(source: PolicySource, T: int, K: int, mode: str) -> Policy:
    if isinstance(source, str):
        return make_policy(source, T, K, mode)
    return source(T)


def _run_chunk(
    instance: HcbInstance, source: PolicySource, T: int, mode: str, seed: int, t_index: int, reps: range
) -> np.ndarray:
    n = len(instance.actions(mode))
    counts = np.zeros(n, dtype=np.int64)
    for rep in reps:
        policy = _policy_for(source, T, instance.K, mode)
        env = streams.stream(seed, t_index, rep, "env")
        own = streams.stream(seed, t_index, rep, "policy")
        choice, _ = run_episode(instance, policy, T, env, own, mode=mode)
        counts[instance.actions(mode).code(choice)] += 1
    return counts


def _chunks(reps: int, workers: int) -> list[range]:
    bounds = np.linspace(0, reps, min(workers, reps) + 1).astype(int)
    return [range(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]


def estimate_simple_regret(
    instance: HcbInstance,
    policy: PolicySource,
    T: int,
    reps: int,
    seed: int,
    t_index: int = 0,
    workers: int = 1,
    mode: str | None = None,
) -> RegretReport:
    if reps < 2:
        raise HcbError(f"regret estimation needs reps >= 2, got {reps}")
    name = policy if isinstance(policy, str) else getattr(policy, "__name__", "custom")
    if mode is None:
        mode = policy_mode(name) if isinstance(policy, str) else "nmc"
    mu = exact_mu_vector(instance, mode)

    started = time.perf_counter()
    chunks = _chunks(reps, workers)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, instance, policy, T, mode, seed, t_index, c) for c in chunks]
            counts = sum(f.result() for f in futures)
    else:
        counts = sum(_run_chunk(instance, policy, T, mode, seed, t_index, c) for c in chunks)
    elapsed = time.perf_counter() - started

    regret, se = regret_from_counts(mu, counts)
    logger.info("%s T=%d reps=%d regret=%.6g stderr=%.3g (%.2fs)", name, T, reps, regret, se, elapsed)
    return RegretReport(
        algorithm=name,
        mode=mode,
        N=instance.N,
        K=instance.K,
        T=T,
        reps=reps,
        seed=seed,
        regret_hat=regret,
        stderr=se,
        mu_star=float(mu.max()),
        mu=mu,
        counts=counts,
        actions=tuple(str(a) for a in instance.actions(mode).actions),
        wall_clock=elapsed,
    )


# ==================================================
# Instances
# ==================================================
def random_instance(gen: GeneratorSpec, rng: np.random.Generator) -> HcbInstance:
    if gen.alpha is None:
        alpha = rng.uniform(0.1, 0.9) if gen.K == 2 else rng.dirichlet(np.ones(gen.K))
    else:
        alpha = gen.alpha
    if np.isscalar(alpha):
        if gen.K != 2:
            raise ConfigError("a scalar alpha is P(S=1) and needs K = 2")
        alpha = np.array([1.0 - alpha, alpha])
    alpha = np.asarray(alpha, dtype=float)

    cond = rng.uniform(gen.low, gen.high, size=(gen.K, gen.N))
    lead = gen.K - 1
    if gen.biased:
        cond[lead, rng.choice(gen.N, size=gen.biased, replace=False)] = gen.biased_value
    if gen.sorted_p:
        cond[lead] = np.sort(cond[lead])

    if gen.reward == "constant-half":
        reward = ConstantHalf()
    elif gen.reward == "dense":
        if gen.N > 20:
            raise ConfigError(f"dense rewards need N <= 20, got N={gen.N}")
        reward = DenseTable(rng.uniform(0.0, 1.0, size=1 << gen.N))
    else:
        arm = int(rng.integers(gen.N))
        reward = TargetBump(gen.epsilon, (arm,), ())
    return HcbInstance(gen.K, gen.N, alpha, cond, reward)


def resolve_instance(config: ExperimentConfig) -> HcbInstance:
    if isinstance(config.instance, GeneratorSpec):
        return random_instance(config.instance, streams.stream(config.seed, purpose="instance"))
    path = config.instance_path()
    try:
        return load_instance(path)
    except FileNotFoundError:
        raise ConfigError(f"instance file not found: {path}") from None


# ==================================================
# Sweeps
# ==================================================
def write_reports(reports: Sequence[RegretReport], out_dir: str | Path, stem: str = "sweep") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    try:
        frame = pd.DataFrame([r.row() for r in reports], columns=CSV_COLUMNS)
        frame.to_csv(csv_path, index=False, lineterminator="\n")
        json_path.write_text(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise HcbError(f"could not write reports to {out}: {exc}") from exc
    return csv_path, json_path


def sweep(config: ExperimentConfig, workers: int | None = None) -> list[RegretReport]:
    instance = resolve_instance(config)
    workers = workers or config.workers
    reports = []
    for algorithm in config.algorithms:
        for t_index, T in enumerate(config.t_grid):
            try:
                reports.append(
                    estimate_simple_regret(
                        instance, algorithm, T, config.reps, config.seed, t_index, workers, config.mode or None
                    )
                )
            except HcbError as exc:
                raise type(exc)(f"cell ({algorithm}, T={T}): {exc}") from exc
    if config.out:
        write_reports(reports, config.out)
    return reports


# ==================================================
# Scaling
# ==================================================
@dataclass(frozen=True)
class ScalingFit:
    status: str  # ok | inconclusive
    slope: float = float("nan")
    intercept: float = float("nan")
    ci_low: float = float("nan")
    ci_high: float = float("nan")
    points: int = 0


def fit_scaling(series: Iterable[RegretReport], level: float = 0.95) -> ScalingFit:
    """Least-squares slope of log regret against log T over points with signal."""
    usable = [r for r in series if r.regret_hat > 3.0 * r.stderr and r.regret_hat > 0.0]
    if len(usable) < 3:
        logger.warning("scaling fit inconclusive: %d usable points", len(usable))
        return ScalingFit("inconclusive", points=len(usable))
    log_t = np.log([r.T for r in usable])
    log_r = np.log([r.regret_hat for r in usable])
    fit = stats.linregress(log_t, log_r)
    half = stats.t.ppf(0.5 + level / 2.0, len(usable) - 2) * fit.stderr
    return ScalingFit("ok", fit.slope, fit.intercept, fit.slope - half, fit.slope + half, len(usable))


@dataclass(frozen=True)
class UpperBoundRow:
    T: int
    regret: float
    stderr: float
    bound: float
    applicable: bool

    @property
    def passed(self) -> bool:
        return not self.applicable or self.regret - 3.0 * self.stderr <= self.bound


def upper_bound_check(series: Iterable[RegretReport], instance: HcbInstance) -> list[UpperBoundRow]:
    ms = [m_value(row) for row in instance.cond]
    rows = []
    for r in series:
        bound = min(1.0, theoretical_upper_bound(instance.alpha, ms, instance.N, r.T, r.mode))
        applicable = sample_size_condition(instance.alpha, ms, instance.N, r.T, r.mode)
        rows.append(UpperBoundRow(r.T, r.regret_hat, r.stderr, bound, applicable))
    return rows


# ==================================================
# Concentration
# ==================================================
@dataclass(frozen=True)
class EventCheck:
    name: str
    failures: int
    reps: int
    bound: float
    applicable: bool
    zero_tolerance: bool = False

    @property
    def rate(self) -> float:
        return self.failures / self.reps

    @property
    def margin(self) -> float:
        return 3.0 * math.sqrt(self.bound * (1.0 - min(self.bound, 1.0)) / self.reps)

    @property
    def status(self) -> str:
        if not self.applicable:
            return "not applicable"
        if self.zero_tolerance:
            return "pass" if self.failures == 0 else "fail"
        return "pass" if self.rate <= self.bound + self.margin else "fail"


@dataclass
class ConcentrationReport:
    T_prime: int
    reps: int
    m1: float
    events: list[EventCheck]

    @property
    def passed(self) -> bool:
        return all(e.status != "fail" for e in self.events)


def _stage1_statistics(instance: HcbInstance, T_prime: int, reps: int, rng: np.random.Generator):
    """Sufficient statistics of reps observation phases of T' rounds.

    n1 = #{S = 1}, hits_j = #{S = 1, X_j = 1} and the reward total are binomial,
    so they are drawn directly. cell_wins_j = #{S = 1, X_j = 1, Y = 1} is drawn
    given hits_j; each arm's marginal is exact, the joint across arms is not.
    """
    alpha = instance.alpha1
    p = instance.p
    mu_obs = float(exact_mu_vector(instance, "nmc")[0])
    n1 = rng.binomial(T_prime, alpha, size=reps)
    hits = rng.binomial(n1[:, None], p[None, :])
    wins = rng.binomial(T_prime, mu_obs, size=reps)
    cell_mu = np.array([conditional_reward(instance, Observe(), s=1, i=j, x=1) for j in range(instance.N)])
    cell_wins = rng.binomial(hits, cell_mu[None, :])
    return n1, hits, wins, mu_obs, cell_wins, cell_mu


def concentration_suite(instance: HcbInstance, T_prime: int, reps: int, seed: int) -> ConcentrationReport:
    if instance.K != 2:
        raise HcbError("the concentration suite covers binary-context instances")
    if T_prime < 2 or reps < 2:
        raise HcbError(f"need T' >= 2 and reps >= 2, got T'={T_prime}, reps={reps}")
    rng = streams.stream(seed, purpose="concentration")
    alpha, p, N = instance.alpha1, instance.p, instance.N
    m1 = m_value(p)
    log_term = math.log(2 * N * T_prime)

    n1, hits, wins, mu_obs, cell_wins, cell_mu = _stage1_statistics(instance, T_prime, reps, rng)
    alpha_hat = n1 / T_prime
    p_hat = np.divide(hits, n1[:, None], out=np.zeros(hits.shape, dtype=float), where=n1[:, None] > 0)

    alpha_ok = np.abs(alpha_hat - alpha) <= error_radius(3 * alpha, 2, T_prime)
    obs_ok = np.abs(wins / T_prime - mu_obs) < error_radius(3, 2, T_prime)
    rad_p = np.array([error_radius(27 / (alpha * v), 2 * N, T_prime) for v in p])
    rad_pbar = np.array([error_radius(27 / (alpha * (1 - v)), 2 * N, T_prime) for v in p])
    ep = np.all(np.abs(p_hat - p) <= rad_p * p, axis=1)
    ep_bar = np.all(np.abs((1 - p_hat) - (1 - p)) <= rad_pbar * (1 - p), axis=1)
    cell_hat = np.divide(cell_wins, hits, out=np.zeros(hits.shape, dtype=float), where=hits > 0)
    cell_ok = np.all(np.abs(cell_hat - cell_mu) <= rad_p, axis=1)

    m_hat = np.array([m_value(row) for row in p_hat])
    in_window = (m_hat >= 2 * m1 / 3) & (m_hat <= 2 * m1)
    easy = ~np.array([threshold_mask(row, m) for row, m in zip(p_hat, m_hat)])
    floor_ok = ~np.any(easy & (p < 1.0 / (4 * m1))[None, :], axis=1)

    ep_applicable = T_prime > 27 * log_term / alpha
    window_applicable = T_prime > 108 * m1 * log_term / alpha
    events = [
        EventCheck("alpha_hat", int(np.sum(~alpha_ok)), reps, 1 / T_prime, True),
        EventCheck("mu_obs_hat", int(np.sum(~obs_ok)), reps, 1 / T_prime, True),
        EventCheck("E_p", int(np.sum(~ep)), reps, 2 / T_prime, ep_applicable),
        EventCheck("E_pbar", int(np.sum(~ep_bar)), reps, 2 / T_prime, ep_applicable),
        EventCheck("mu_cell_hat", int(np.sum(~cell_ok)), reps, 2 / T_prime, ep_applicable),
        EventCheck("m_hat_window", int(np.sum(~in_window)), reps, 4 / T_prime, window_applicable),
        EventCheck(
            "m_hat_window_given_E", int(np.sum(ep & ep_bar & ~in_window)), reps, 0.0, window_applicable, True
        ),
        EventCheck("p_floor_outside_B11", int(np.sum(~floor_ok)), reps, 4 / T_prime, True),
    ]
    for e in events:
        if not e.applicable:
            logger.warning("event %s not applicable at T'=%d (rate %.3g reported only)", e.name, T_prime, e.rate)
    return ConcentrationReport(T_prime, reps, m1, events)

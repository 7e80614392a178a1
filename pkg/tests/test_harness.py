import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from conftest import FixedPolicy
from hcb import streams
from hcb.complexity import m_value
from hcb.config import GeneratorSpec, config_from_dict
from hcb.errors import ConfigError, HcbError
from hcb.harness import (
    CSV_COLUMNS,
    RegretReport,
    concentration_suite,
    estimate_simple_regret,
    fit_scaling,
    random_instance,
    regret_from_counts,
    resolve_instance,
    sweep,
    upper_bound_check,
    write_reports,
)
from hcb.model import ConstantHalf, DenseTable, HcbInstance


def _report(T, regret, stderr=0.0):
    return RegretReport(
        algorithm="synthetic", mode="nmc", N=1, K=2, T=T, reps=10, seed=0, regret_hat=regret, stderr=stderr,
        mu_star=1.0, mu=np.array([1.0]), counts=np.array([10]), actions=("do()",),
    )


def _config(tmp_path, **changes):
    data = {
        "instance": {"N": 3, "alpha": 0.5, "reward": "target-bump"},
        "algorithms": ["alg-nmc", "uniform"],
        "t_grid": [64, 128, 256],
        "reps": 6,
        "seed": 11,
    }
    data.update(changes)
    return config_from_dict(data, base_dir=tmp_path)


def test_always_observe_regret(bump_instance):
    report = estimate_simple_regret(bump_instance, FixedPolicy, 50, 5, seed=1, mode="nmc")
    assert report.regret_hat == pytest.approx(0.0729, abs=1e-12)
    assert report.stderr == 0.0
    assert report.mu_star == pytest.approx(0.581, abs=1e-12)
    assert_array_equal(report.counts, [5, 0, 0, 0, 0, 0, 0])


def test_constant_reward_has_zero_regret(flat_instance):
    report = estimate_simple_regret(flat_instance, "alg-nmc", 100, 8, seed=2)
    assert report.regret_hat == 0.0
    assert report.counts.sum() == 8


def test_regret_is_worker_independent(bump_instance):
    serial = estimate_simple_regret(bump_instance, "alg-mc", 150, 12, seed=4, workers=1)
    parallel = estimate_simple_regret(bump_instance, "alg-mc", 150, 12, seed=4, workers=3)
    assert_array_equal(serial.counts, parallel.counts)
    assert serial.regret_hat == parallel.regret_hat
    assert serial.mode == "mc"


def test_regret_from_counts():
    regret, se = regret_from_counts([0.5, 0.6], [1, 1])
    assert regret == pytest.approx(0.05)
    assert se == pytest.approx(0.05 / np.sqrt(2))
    with pytest.raises(HcbError):
        regret_from_counts([0.5], [0])
    with pytest.raises(HcbError):
        estimate_simple_regret(HcbInstance(2, 1, [0.5, 0.5], [[0.5], [0.5]], ConstantHalf()), "alg-nmc", 10, 1, 0)


def test_random_instance_biased_entries():
    gen = GeneratorSpec(N=8, alpha=0.5, low=0.3, high=0.7, biased=4)
    inst = random_instance(gen, streams.stream(3, purpose="instance"))
    assert np.sum(inst.p == 0.001) == 4
    assert m_value(inst.p) == 4.0
    assert np.all((inst.q > 0.3) & (inst.q < 0.7))


def test_random_instance_sorted_p():
    gen = GeneratorSpec(N=6, alpha=0.5, low=0.3, high=0.5, sorted_p=True)
    inst = random_instance(gen, np.random.default_rng(0))
    assert np.all(np.diff(inst.p) >= 0)
    with pytest.raises(ConfigError):
        GeneratorSpec(N=6, low=0.3, high=0.7, sorted_p=True)


def test_random_instance_k_contexts():
    inst = random_instance(GeneratorSpec(N=3, K=4), np.random.default_rng(1))
    assert inst.alpha.shape == (4,)
    with pytest.raises(ConfigError):
        random_instance(GeneratorSpec(N=3, K=3, alpha=0.5), np.random.default_rng(1))


def test_sweep_cardinality_and_files(tmp_path):
    config = _config(tmp_path, out=str(tmp_path / "a"))
    reports = sweep(config)
    assert len(reports) == 6
    frame = pd.read_csv(tmp_path / "a" / "sweep.csv")
    assert list(frame.columns) == CSV_COLUMNS
    assert (tmp_path / "a" / "sweep.json").exists()


def test_sweep_is_reproducible(tmp_path):
    sweep(_config(tmp_path, out=str(tmp_path / "a")))
    sweep(_config(tmp_path, out=str(tmp_path / "b")), workers=2)
    for name in ("sweep.csv", "sweep.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_reports_bad_cell(tmp_path):
    with pytest.raises(HcbError, match="alg-mc"):
        sweep(_config(tmp_path, algorithms=["alg-mc"], t_grid=[10]))


def test_missing_instance_file(tmp_path):
    with pytest.raises(ConfigError):
        resolve_instance(_config(tmp_path, instance="nowhere.json"))


def test_write_reports_column_order(tmp_path):
    csv_path, _ = write_reports([_report(10, 0.1)], tmp_path)
    assert csv_path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_fit_scaling():
    grid = [2**k for k in range(10, 15)]
    fit = fit_scaling([_report(T, 3.0 / np.sqrt(T)) for T in grid])
    assert fit.status == "ok"
    assert fit.slope == pytest.approx(-0.5, abs=1e-6)
    assert fit_scaling([_report(T, 2.0 / T) for T in grid]).slope == pytest.approx(-1.0, abs=1e-6)
    assert fit_scaling([_report(T, 0.0) for T in grid]).status == "inconclusive"


def test_upper_bound_check(bump_instance):
    rows = upper_bound_check([_report(1000, 0.01)], bump_instance)
    assert rows[0].bound == 1.0
    assert not rows[0].applicable
    assert rows[0].passed


def test_concentration_suite_degenerate():
    inst = HcbInstance(2, 5, [0.5, 0.5], np.full((2, 5), 0.5), ConstantHalf())
    report = concentration_suite(inst, 2000, 300, seed=7)
    assert report.m1 == 2.0
    status = {e.name: e.status for e in report.events}
    assert status["m_hat_window"] == "not applicable"
    assert status["m_hat_window_given_E"] == "not applicable"
    assert status["p_floor_outside_B11"] == "pass"
    assert status["E_p"] == "pass"
    assert status["mu_cell_hat"] == "pass"
    assert report.passed


def test_concentration_suite_is_seeded():
    inst = HcbInstance(2, 5, [0.5, 0.5], np.full((2, 5), 0.4), ConstantHalf())
    first = concentration_suite(inst, 500, 50, seed=1)
    second = concentration_suite(inst, 500, 50, seed=1)
    assert [e.failures for e in first.events] == [e.failures for e in second.events]


def test_concentration_reward_cells_exact_for_certain_reward():
    inst = HcbInstance(2, 5, [0.5, 0.5], np.full((2, 5), 0.5), DenseTable(np.ones(32)))
    report = concentration_suite(inst, 2000, 100, seed=3)
    (cell,) = [e for e in report.events if e.name == "mu_cell_hat"]
    assert cell.applicable
    assert cell.bound == pytest.approx(1 / 1000)
    assert cell.failures == 0

import math
from functools import partial

import numpy as np
import pytest

from conftest import FixedPolicy
from hcb.adversary import (
    KL_BUDGET,
    adversarial_wedge,
    build_adversarial_family,
    estimate_history_kl,
    export_family,
    gap_floor,
    hard_index_set,
    kl_chain_bound,
    kl_per_hit,
    matching_shape,
    member_instance,
    null_instance,
    optimality_gap,
    reward_expansion_error,
    theoretical_lower_bound,
    thresholds,
    verify_separation,
)
from hcb.agents import uniform_baseline
from hcb.errors import AdversaryError
from hcb.harness import estimate_simple_regret
from hcb.model import DoArm, exact_mu_vector, optimal_action

TENTHS = np.full(3, 0.1)


def test_hard_index_set():
    assert hard_index_set(TENTHS, TENTHS) == (0,)
    assert hard_index_set(np.full(4, 0.1), [0.4, 0.3, 0.2, 0.1]) == (3, 2)
    assert hard_index_set(np.full(3, 0.4), np.full(3, 0.4)) == (0,)
    with pytest.raises(AdversaryError):
        hard_index_set([0.5, 0.5, 0.5], TENTHS)  # m = 2
    with pytest.raises(AdversaryError):
        hard_index_set([0.2, 0.1, 0.1], TENTHS)  # unsorted


def test_family_epsilon():
    p = np.full(4, 0.1)
    isolated = build_adversarial_family(0.5, p, p, 100, "isolated")
    assert isolated.m1 == 4.0
    assert isolated.epsilon == pytest.approx(0.011044, rel=1e-4)
    assert isolated.members == (0, 1, 2, 3)
    coordinate = build_adversarial_family(0.5, p, p, 100, "coordinate")
    assert coordinate.epsilon == pytest.approx(0.0055221, rel=1e-4)
    with pytest.raises(AdversaryError):
        build_adversarial_family(0.5, p, p, 3, "isolated")
    with pytest.raises(AdversaryError):
        build_adversarial_family(0.5, p, p, 100, "ring")


def test_member_targets():
    family = build_adversarial_family(0.5, np.full(4, 0.1), np.full(4, 0.2), 100, "isolated")
    assert family.target(1) == ((1,), (0, 2, 3))
    mirrored = build_adversarial_family(0.5, np.full(4, 0.1), np.full(4, 0.2), 100, "isolated", lead=0)
    assert mirrored.lead_weight == 0.5
    assert export_family(family)["members"] == [0, 1, 2, 3]


def test_separation_probabilities():
    report = verify_separation(0.5, TENTHS, TENTHS)
    assert report.passed
    assert report.probabilities[0, 2] == pytest.approx(0.81, abs=1e-12)
    assert report.probabilities[0, 2] >= 0.5 / math.e
    for i in range(3):
        assert report.probabilities[i, 1 + 2 * i] == 0.0
    assert report.max_enumeration_error <= 1e-12


def test_separation_product_floor():
    report = verify_separation(0.5, np.full(3, 0.4), np.full(3, 0.4))
    assert report.product_floor == pytest.approx(0.18)
    assert report.probabilities[0, 2] == pytest.approx(0.36)
    assert report.passed


def test_reward_expansion():
    family = build_adversarial_family(0.3, [0.05, 0.1, 0.1, 0.4], [0.2, 0.5, 0.6, 0.7], 500)
    for i in family.members:
        assert reward_expansion_error(family, i) <= 1e-12


def test_bumped_arm_is_optimal():
    p = np.full(64, 0.01)
    family = build_adversarial_family(0.5, p, np.full(64, 0.4), 1000, "isolated")
    best, _ = optimal_action(member_instance(family, 0), "mc")
    assert best == DoArm(0, 1)
    assert optimality_gap(family) > 0


def test_thresholds():
    tau0, tau1 = thresholds(0.5)
    assert tau0 == pytest.approx(57.89, abs=0.01)
    assert tau1 == tau0


def test_lower_bound_regimes():
    T = 1000
    v = [0.1, 0.1, 0.1, 0.4]
    easy = theoretical_lower_bound(0.5, v, v, T)
    assert easy.regime == 4
    assert easy.m_tilde == pytest.approx(0.25)
    assert easy.bound == pytest.approx(0.5 / (127 * math.sqrt(T)))
    assert matching_shape(easy) == ("coordinate", 1)

    p_hard = theoretical_lower_bound(0.5, np.full(64, 0.001), np.full(64, 0.4), T)
    assert p_hard.regime == 2
    assert p_hard.m_tilde == pytest.approx(16.0)
    assert matching_shape(p_hard) == ("isolated", 1)

    q_hard = theoretical_lower_bound(0.5, np.full(64, 0.4), np.full(64, 0.001), T)
    assert q_hard.regime == 3
    assert matching_shape(q_hard) == ("isolated", 0)

    with pytest.raises(AdversaryError):
        theoretical_lower_bound(0.5, TENTHS, TENTHS, T)


def test_kl_per_hit():
    assert kl_per_hit(0.2) == pytest.approx(0.087177, abs=1e-6)
    assert kl_per_hit(0.2) <= 16 * 0.04 / 3
    assert kl_per_hit(0.0) == 0.0
    grid = np.linspace(0.001, 0.249, 50)
    assert all(kl_per_hit(e) <= 16 * e**2 / 3 for e in grid)
    with pytest.raises(AdversaryError):
        kl_per_hit(0.25)


def test_history_kl_forced_miss():
    T = 200
    family = build_adversarial_family(0.5, TENTHS, TENTHS, T, "isolated")
    null = null_instance(family)
    never = FixedPolicy(T, code=null.actions("mc").arm_code(0, 0))
    est = estimate_history_kl(null, family, 0, never, T, 4, np.random.default_rng(0))
    assert est.estimate == 0.0
    assert est.stderr == 0.0
    assert est.mean_target_pulls == 0.0


def test_history_kl_uniform_within_chain_bound():
    T = 400
    family = build_adversarial_family(0.5, TENTHS, TENTHS, T, "isolated")
    est = estimate_history_kl(null_instance(family), family, 0, uniform_baseline(T), T, 20, np.random.default_rng(1))
    assert 0 < est.estimate <= KL_BUDGET
    assert est.estimate <= kl_chain_bound(family, est.mean_target_pulls, T) + 3 * est.stderr


def test_history_kl_needs_null_reward():
    family = build_adversarial_family(0.5, TENTHS, TENTHS, 100, "isolated")
    with pytest.raises(AdversaryError):
        estimate_history_kl(member_instance(family, 0), family, 0, uniform_baseline(100), 100, 4, np.random.default_rng(0))


def test_adversarial_wedge_smoke():
    p = np.array([0.1, 0.1, 0.1, 0.4])
    rows = adversarial_wedge(0.5, p, p, "alg-nmc", [256], reps=4, seed=3, shape="isolated", members="all")
    (row,) = rows
    assert row.T == 256
    assert row.shape == "isolated"
    assert row.worst_member in (0, 1, 2)
    assert row.regret >= 0.0
    assert set(row.member_regret) == {0, 1, 2}
    assert set(row.gap_floor) == {0, 1, 2}
    assert row.gap_shortfalls == ()


def test_optimality_gap_is_a_true_gap():
    family = build_adversarial_family(0.9, np.full(8, 0.1), np.full(8, 0.1), 256, "isolated")
    gap = optimality_gap(family)
    assert gap == pytest.approx(family.epsilon * (0.9 / math.e - 1.0 / 8.0))
    for i in family.members:
        mu = np.sort(exact_mu_vector(member_instance(family, i), "mc"))
        assert mu[-1] - mu[-2] >= gap


def test_coordinate_gap_uses_both_rows():
    family = build_adversarial_family(0.5, np.full(4, 0.2), [0.1, 0.7, 0.2, 0.3], 1000, "coordinate")
    assert optimality_gap(family) == pytest.approx(family.epsilon * 0.3)
    for i in family.members:
        mu = np.sort(exact_mu_vector(member_instance(family, i), "mc"))
        assert mu[-1] - mu[-2] >= optimality_gap(family) - 1e-15


def test_gap_floor_bounds_measured_regret():
    family = build_adversarial_family(0.9, np.full(8, 0.1), np.full(8, 0.1), 256, "isolated")
    member = member_instance(family, 0)
    observe = estimate_simple_regret(member, FixedPolicy, 20, 4, seed=1, mode="nmc")
    assert gap_floor(family, 0, observe) == pytest.approx(optimality_gap(family))
    assert observe.regret_hat >= gap_floor(family, 0, observe)

    bumped = partial(FixedPolicy, choice=DoArm(0, 1))
    hit = estimate_simple_regret(member, bumped, 20, 4, seed=1, mode="nmc")
    assert gap_floor(family, 0, hit) == 0.0
    assert hit.regret_hat == pytest.approx(0.0)

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hcb.errors import EnumerationCapError, InstanceError
from hcb.model import (
    ConstantHalf,
    DenseTable,
    DoArm,
    DoContext,
    HcbInstance,
    Observe,
    TargetBump,
    build_instance,
    conditional_reward,
    enumerate_actions,
    exact_mu,
    exact_mu_enumerated,
    exact_mu_vector,
    joint_distribution,
    load_instance,
    optimal_action,
    sample_round,
    sample_rounds,
    save_instance,
)


def _spec(**changes):
    spec = {
        "K": 2,
        "N": 3,
        "alpha": [0.5, 0.5],
        "cond": [[0.1, 0.1, 0.1], [0.1, 0.1, 0.1]],
        "reward": {"type": "constant-half"},
    }
    spec.update(changes)
    return spec


def test_build_instance_accepts_symmetric_bundle():
    inst = build_instance(_spec())
    assert (inst.K, inst.N) == (2, 3)
    assert inst.alpha1 == 0.5
    assert isinstance(inst.reward, ConstantHalf)


@pytest.mark.parametrize(
    "changes",
    [
        {"cond": [[0.0, 0.1, 0.1], [0.1, 0.1, 0.1]]},
        {"alpha": [0.3, 0.3]},
        {"alpha": [0.5, 0.25, 0.25]},
        {"reward": {"type": "target-bump", "epsilon": 0.3, "ones": [0]}},
        {"reward": {"type": "dense", "values": [0.5] * 4}},
    ],
)
def test_build_instance_rejects_bad_bundles(changes):
    with pytest.raises(InstanceError):
        build_instance(_spec(**changes))


def test_dense_table_cap():
    with pytest.raises(EnumerationCapError):
        DenseTable(np.zeros(1 << 21))


def test_action_counts():
    two = HcbInstance(2, 2, [0.5, 0.5], np.full((2, 2), 0.5), ConstantHalf())
    three = HcbInstance(3, 4, [0.2, 0.3, 0.5], np.full((3, 4), 0.5), ConstantHalf())
    assert len(enumerate_actions(two, "nmc")) == 5
    assert len(enumerate_actions(two, "mc")) == 7
    assert len(enumerate_actions(three, "mc")) == 12
    assert enumerate_actions(two, "mc")[:3] == [Observe(), DoArm(0, 0), DoArm(0, 1)]
    assert enumerate_actions(two, "mc")[-1] == DoContext(1)


def test_action_codes_are_prefix_compatible(bump_instance):
    nmc = bump_instance.actions("nmc")
    mc = bump_instance.actions("mc")
    assert mc.actions[: len(nmc)] == nmc.actions
    assert [mc.code(a) for a in mc] == list(range(len(mc)))
    with pytest.raises(InstanceError):
        nmc.code(DoContext(0))


def test_forced_coordinates(bump_instance):
    rng = np.random.default_rng(11)
    aset = bump_instance.actions("mc")
    s, _, _ = sample_rounds(bump_instance, np.full(500, aset.code(DoContext(1))), rng)
    assert np.all(s == 1)
    _, x, _ = sample_rounds(bump_instance, np.full(500, aset.code(DoArm(2, 0))), rng)
    assert np.all(x[:, 2] == 0)
    obs = sample_round(bump_instance, DoArm(1, 1), rng)
    assert obs.x[1] == 1


def test_observational_arm_frequency():
    inst = HcbInstance(2, 2, [0.5, 0.5], [[0.1, 0.5], [0.9, 0.5]], ConstantHalf())
    n = 1_000_000
    _, x, _ = sample_rounds(inst, np.zeros(n, dtype=np.int64), np.random.default_rng(5))
    assert abs(x[:, 0].mean() - 0.5) <= 4 * np.sqrt(0.25 / n)


def test_exact_mu_target_bump(bump_instance):
    assert exact_mu(bump_instance, DoArm(0, 1)) == pytest.approx(0.581, abs=1e-12)
    assert exact_mu(bump_instance, Observe()) == pytest.approx(0.5081, abs=1e-12)
    assert exact_mu(bump_instance, DoArm(0, 0)) == pytest.approx(0.5, abs=1e-12)


def test_closed_form_matches_enumeration(bump_instance):
    for action in bump_instance.actions("mc"):
        assert exact_mu(bump_instance, action) == pytest.approx(exact_mu_enumerated(bump_instance, action), abs=1e-12)


def test_constant_reward_is_half(flat_instance):
    assert_allclose(exact_mu_vector(flat_instance, "mc"), 0.5)
    assert optimal_action(flat_instance, "mc") == (Observe(), 0.5)


def test_optimal_action(bump_instance):
    best, mu_star = optimal_action(bump_instance, "nmc")
    assert best == DoArm(0, 1)
    assert mu_star == pytest.approx(0.581, abs=1e-12)


def test_joint_distribution_is_normalised():
    rng = np.random.default_rng(2)
    inst = HcbInstance(2, 5, [0.3, 0.7], rng.uniform(0.05, 0.95, (2, 5)), DenseTable(rng.uniform(size=32)))
    for action in inst.actions("mc"):
        assert joint_distribution(inst, action).sum() == pytest.approx(1.0, abs=1e-12)


def test_do_context_equals_conditional_reward():
    rng = np.random.default_rng(3)
    inst = HcbInstance(2, 4, [0.4, 0.6], rng.uniform(0.05, 0.95, (2, 4)), DenseTable(rng.uniform(size=16)))
    for s in (0, 1):
        assert exact_mu(inst, DoContext(s)) == pytest.approx(conditional_reward(inst, Observe(), s=s), abs=1e-12)


def test_instance_file_roundtrip(tmp_path, bump_instance):
    path = save_instance(bump_instance, tmp_path / "nested" / "inst.json")
    loaded = load_instance(path)
    assert_array_equal(loaded.cond, bump_instance.cond)
    assert loaded.reward == bump_instance.reward
    with pytest.raises(FileNotFoundError):
        load_instance(tmp_path / "missing.json")


def test_target_bump_rejects_overlap():
    with pytest.raises(InstanceError):
        TargetBump(0.1, (0, 1), (1,))

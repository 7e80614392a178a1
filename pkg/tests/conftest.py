import numpy as np
import pytest

from hcb.agents import Policy
from hcb.model import ConstantHalf, HcbInstance, Observe, TargetBump


@pytest.fixture
def bump_instance():
    """alpha = (1/2, 1/2), every conditional 0.1, bump 0.1 on {x0 = 1, x1 = x2 = 0}."""
    return HcbInstance(2, 3, [0.5, 0.5], np.full((2, 3), 0.1), TargetBump(0.1, (0,), (1, 2)))


@pytest.fixture
def flat_instance():
    return HcbInstance(2, 3, [0.5, 0.5], np.full((2, 3), 0.1), ConstantHalf())


class FixedPolicy(Policy):
    """Plays one action code every round and names a fixed final choice."""

    name = "fixed"

    def __init__(self, T, code=0, choice=Observe()):
        super().__init__(T)
        self.code = code
        self.choice = choice

    def next_actions(self, history, t, rng):
        return np.full(self.T - t, self.code, dtype=np.int64)

    def final_choice(self, history, rng):
        return self.choice

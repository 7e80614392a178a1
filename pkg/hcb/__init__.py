"""Hierarchical causal bandits: simulator, algorithms and verification harness."""

from hcb.agents import alg_k, alg_mc, alg_nmc, make_policy, run_episode, uniform_baseline
from hcb.complexity import m_value
from hcb.model import HcbInstance, exact_mu, optimal_action

__all__ = [
    "HcbInstance",
    "alg_k",
    "alg_mc",
    "alg_nmc",
    "exact_mu",
    "m_value",
    "make_policy",
    "optimal_action",
    "run_episode",
    "uniform_baseline",
]

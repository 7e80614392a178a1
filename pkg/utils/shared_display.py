import numpy as np
import pandas as pd
import streamlit as st

from hcb import streams
from hcb.complexity import m_value, theta
from hcb.config import GeneratorSpec
from hcb.harness import random_instance
from hcb.model import HcbInstance, exact_mu_vector


def clamp(x, lo=0.0, hi=1.0):
    return max(lo, min(hi, x))


def sidebar_instance(default_n=4, reward="target-bump", sorted_p=False, n_min=2, n_max=10):
    """Sidebar controls for a random binary-context instance."""
    st.sidebar.subheader("Instance")
    n = st.sidebar.slider("Arms N", n_min, n_max, default_n)
    alpha = st.sidebar.slider("P(S=1)", 0.05, 0.95, 0.5, 0.05)
    hi_cap = 0.5 if sorted_p else 0.95
    low, high = st.sidebar.slider("Conditional range", 0.02, hi_cap, (0.3, clamp(0.7, hi=hi_cap)), 0.01)
    if high <= low:
        low = high - 0.01
    biased = st.sidebar.slider("Entries of p at 0.001", 0, n, 0)
    seed = st.sidebar.number_input("Instance seed", 0, 2**31 - 1, 7)
    spec = GeneratorSpec(
        N=n, K=2, alpha=alpha, low=low, high=high, biased=biased, sorted_p=sorted_p, reward=reward
    )
    return random_instance(spec, streams.stream(int(seed), purpose="instance")), int(seed)


def bias_table(instance: HcbInstance) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "arm": np.arange(instance.N),
            "p = P(X=1|S=1)": instance.p,
            "q = P(X=1|S=0)": instance.q,
            "theta(p)": theta(instance.p),
            "theta(q)": theta(instance.q),
        }
    )


def action_table(instance: HcbInstance, mode: str = "mc") -> pd.DataFrame:
    mu = exact_mu_vector(instance, mode)
    return pd.DataFrame(
        {
            "action": [str(a) for a in instance.actions(mode).actions],
            "mu": mu,
            "gap": mu.max() - mu,
        }
    )


def complexity_metrics(instance: HcbInstance) -> None:
    left, right = st.columns(2)
    left.metric("m(p)", f"{m_value(instance.p):.4g}")
    right.metric("m(q)", f"{m_value(instance.q):.4g}")


def report_table(reports) -> pd.DataFrame:
    return pd.DataFrame([r.row() for r in reports])

import json

import pandas as pd
import streamlit as st

from hcb.adversary import (
    adversarial_wedge,
    build_adversarial_family,
    export_family,
    matching_shape,
    theoretical_lower_bound,
    verify_separation,
)
from hcb.errors import AdversaryError
from utils.shared_display import complexity_metrics, sidebar_instance

st.title("Lower Bound")
st.caption("Bump the constant reward on a target set; no policy can tell every member apart.")

T = st.sidebar.select_slider("T", [256, 512, 1024, 2048, 4096], value=1024)
shape_choice = st.sidebar.selectbox("Family shape", ["auto", "isolated", "coordinate"])
reps = st.sidebar.slider("Replications per member", 2, 200, 10)
run_seed = st.sidebar.number_input("Run seed", 0, 2**31 - 1, 7)
instance, _ = sidebar_instance(default_n=8, reward="constant-half", sorted_p=True, n_min=4, n_max=12)

# -------------------------------------------------
# Bound
# -------------------------------------------------
try:
    report = theoretical_lower_bound(instance.alpha1, instance.p, instance.q, T)
    shape, lead = matching_shape(report) if shape_choice == "auto" else (shape_choice, 1)
    family = build_adversarial_family(instance.alpha1, instance.p, instance.q, T, shape, lead)
except AdversaryError as exc:
    st.error(str(exc))
    st.stop()

complexity_metrics(instance)
cols = st.columns(4)
cols[0].metric("Regime", report.regime)
cols[1].metric("m~", f"{report.m_tilde:.4g}")
cols[2].metric("tau1 / tau0", f"{report.tau1:.2f} / {report.tau0:.2f}")
cols[3].metric("Bound", f"{report.bound:.3e}")

# -------------------------------------------------
# Separation
# -------------------------------------------------
if family.shape == "isolated" and family.lead == 1:
    sep = verify_separation(instance.alpha1, instance.p, instance.q, enumerate_check=False)
    st.subheader("Target-set separation")
    rows = [
        {
            "member": i,
            "hard": i in sep.hard_set,
            "P(hit | do(X_i=1))": sep.probabilities[i, instance.actions("mc").arm_code(i, 1)],
            "max over other actions": max(
                v for c, v in enumerate(sep.probabilities[i]) if c != instance.actions("mc").arm_code(i, 1)
            ),
        }
        for i in range(sep.probabilities.shape[0])
    ]
    st.dataframe(pd.DataFrame(rows), use_container_width=True)
    st.caption(
        f"floor alpha(1-1/m)^(ceil(m)-1) = {sep.product_floor:.4f}, alpha/e = {sep.nominal_floor:.4f}, "
        f"ceiling 1/m = {sep.ceiling:.4f}"
    )
    if not sep.passed:
        st.error("; ".join(sep.violations))

# -------------------------------------------------
# Wedge
# -------------------------------------------------
st.subheader("Measured worst-member regret (alg-nmc)")
row = adversarial_wedge(
    instance.alpha1, instance.p, instance.q, "alg-nmc", [T], reps, int(run_seed), shape=shape, lead=lead,
    members="all",
)[0]
left, right = st.columns(2)
left.metric("Worst member", row.worst_member)
right.metric("Regret ± stderr", f"{row.regret:.3e} ± {row.stderr:.1e}")
if row.passed:
    st.success("Measured regret reaches the bound within 3 standard errors.")
else:
    st.warning("Measured regret falls short of the bound; raise the replication count.")

with st.expander("Family export", expanded=False):
    st.code(json.dumps(export_family(family), indent=2), language="json")

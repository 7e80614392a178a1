import streamlit as st

from hcb.model import optimal_action
from utils.shared_display import action_table, bias_table, complexity_metrics, sidebar_instance

st.title("Instance Explorer")
st.caption("Exact interventional rewards by closed form or 2^N enumeration.")

reward = st.sidebar.selectbox("Reward family", ["target-bump", "dense", "constant-half"])
mode = st.sidebar.radio("Action set", ["nmc", "mc"], index=1, horizontal=True)
instance, seed = sidebar_instance(default_n=4, reward=reward)

# -------------------------------------------------
# Summary
# -------------------------------------------------
best, mu_star = optimal_action(instance, mode)
complexity_metrics(instance)
left, right = st.columns(2)
left.metric("Optimal action", str(best))
right.metric("mu*", f"{mu_star:.6f}")

st.subheader("Interventions")
st.dataframe(action_table(instance, mode), use_container_width=True)

with st.expander("Bias profile", expanded=False):
    st.dataframe(bias_table(instance), use_container_width=True)
    st.markdown(
        """
- **theta** is the distance of each conditional to the nearer of 0 and 1.
- **m(v)** is the smallest s with at most s entries of theta below 1/s: the number of arms
  observation alone cannot sample well.
"""
    )

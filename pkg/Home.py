import streamlit as st

st.set_page_config(
    page_title="Hierarchical Causal Bandits",
    layout="wide",
)

st.title("Hierarchical Causal Bandits")
st.caption("Context → arms → reward | best-intervention identification under a fixed budget")

st.markdown(
    """
Use the pages in the sidebar:

- **Instance Explorer**: draw an instance, read off m(p), m(q) and the exact reward of every intervention.
- **Regret Estimate**: Monte Carlo simple regret of a policy over a small T grid, with the log-log slope.
- **Lower Bound**: the adversarial family for an instance, the minimax bound, and the measured worst-member regret.
"""
)

st.info(
    "Everything here runs the `hcb` library directly. Heavier runs belong on the command line: "
    "`python -m hcb sweep --config ...` and `python -m hcb verify-lemmas`."
)

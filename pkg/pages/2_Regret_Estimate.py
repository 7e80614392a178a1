import streamlit as st

from hcb.agents import POLICY_NAMES, policy_mode
from hcb.harness import estimate_simple_regret, fit_scaling
from utils.shared_display import report_table, sidebar_instance

st.title("Regret Estimate")
st.caption("Monte Carlo simple regret: mu* minus the exact reward of the identified action, averaged.")

policy = st.sidebar.selectbox("Policy", [p for p in POLICY_NAMES if not p.startswith("alg-k")])
t_grid = st.sidebar.multiselect("T grid", [64, 128, 256, 512, 1024, 2048, 4096], default=[128, 256, 512])
reps = st.sidebar.slider("Replications", 2, 400, 20)
run_seed = st.sidebar.number_input("Run seed", 0, 2**31 - 1, 7)
instance, _ = sidebar_instance(default_n=4, reward="target-bump")

if not t_grid:
    st.info("Pick at least one T.")
    st.stop()

# -------------------------------------------------
# Runs
# -------------------------------------------------
mode = policy_mode(policy)
reports = [
    estimate_simple_regret(instance, policy, T, reps, int(run_seed), t_index=i, mode=mode)
    for i, T in enumerate(sorted(t_grid))
]
table = report_table(reports)

st.subheader("Reports")
st.dataframe(table, use_container_width=True)

last = reports[-1]
left, right = st.columns([0.55, 0.45])
with left:
    st.subheader(f"Identified action at T={last.T}")
    st.dataframe(
        {"action": list(last.actions), "mu": last.mu, "frequency": last.frequencies},
        use_container_width=True,
    )
with right:
    st.subheader("Scaling")
    fit = fit_scaling(reports)
    if fit.status == "ok":
        st.metric("log-log slope", f"{fit.slope:.3f}")
        st.caption(f"95% interval [{fit.ci_low:.3f}, {fit.ci_high:.3f}] over {fit.points} points")
    else:
        st.warning("Inconclusive: fewer than three T values with regret above 3 standard errors.")

st.download_button(
    "Download reports CSV",
    table.to_csv(index=False).encode("utf-8"),
    file_name="regret_reports.csv",
    mime="text/csv",
)

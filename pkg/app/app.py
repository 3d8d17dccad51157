from __future__ import annotations

import sys
from pathlib import Path

import orjson
import streamlit as st

# -------------------------------------------------------------------
# Ensure app/src is on sys.path so we can import qadvlab
# -------------------------------------------------------------------
APP_ROOT = Path(__file__).resolve().parent
SRC_DIR = APP_ROOT / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from qadvlab.config import ExperimentConfig, load_config, parse_config  # noqa: E402
from qadvlab.errors import QAdvLabError  # noqa: E402
from qadvlab.pipeline import (  # noqa: E402
    BOUND_COLUMNS,
    bound_rows,
    run_pipeline_step1_generate_data,
    run_pipeline_step2_build_model,
)
from qadvlab.results_table import frame_to_csv_text, rows_to_frame  # noqa: E402
from qadvlab.sweeps import DIMENSION_COLUMNS, sweep_dimension  # noqa: E402

# Project root (repo root = parent of app/)
PROJECT_ROOT = APP_ROOT.parent
CONFIG_DIR = PROJECT_ROOT / "config"


# -------------------------------------------------------------------
# Streamlit page config
# -------------------------------------------------------------------
st.set_page_config(
    page_title="Quantum Adversarial Robustness Lab",
    layout="wide",
)

st.title("🛡️ Adversarial robustness of quantum classifiers")

st.markdown(
    """
Pick an experiment config, then either evaluate the generalization bounds on
its training set or run a small dimension sweep (adversarial training plus
bounds per dimension and seed).

**Steps:**
1. Choose one of the configs in `config/` or upload your own JSON.
2. Choose **Bounds** or **Dimension sweep**.
3. Click **Run** and download the resulting CSV.
"""
)


# -------------------------------------------------------------------
# Sidebar inputs
# -------------------------------------------------------------------
st.sidebar.header("Settings")

config_files = sorted(CONFIG_DIR.glob("*.json"))
choice = st.sidebar.selectbox(
    "Config",
    options=["(defaults)"] + [p.name for p in config_files],
    help="Experiment configs shipped in config/.",
)
uploaded_file = st.sidebar.file_uploader("...or upload a config JSON", type=["json"])

mode = st.sidebar.radio("Run", options=["Bounds", "Dimension sweep"])
seed = st.sidebar.number_input("Seed", min_value=0, value=0, step=1)

if mode == "Dimension sweep":
    dims_text = st.sidebar.text_input("Dimensions", value="2,4")
    n_seeds = st.sidebar.number_input("Seeds", min_value=1, max_value=10, value=1, step=1)
    epochs = st.sidebar.number_input("Epochs", min_value=0, max_value=200, value=5, step=1)

run_button = st.button("🚀 Run", type="primary")


def _selected_config() -> ExperimentConfig:
    if uploaded_file is not None:
        return parse_config(orjson.loads(uploaded_file.getvalue()), uploaded_file.name)
    if choice == "(defaults)":
        return ExperimentConfig()
    return load_config(CONFIG_DIR / choice)


# -------------------------------------------------------------------
# Main app logic
# -------------------------------------------------------------------
if run_button:
    try:
        cfg = _selected_config().with_seed(int(seed))
    except (QAdvLabError, FileNotFoundError, orjson.JSONDecodeError) as e:
        st.error(f"Config error: {e}")
        st.stop()

    with st.expander("Resolved config"):
        st.json(cfg.model_dump(mode="json"))

    with st.spinner("Running..."):
        try:
            if mode == "Bounds":
                train = run_pipeline_step1_generate_data(cfg)["train"]
                model = run_pipeline_step2_build_model(cfg)["model"]
                rows = bound_rows(cfg, model, train)
                columns = BOUND_COLUMNS
                file_name = "bounds.csv"
            else:
                dims = [int(v) for v in dims_text.split(",") if v.strip()]
                cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"epochs": int(epochs)})})
                rows = sweep_dimension(cfg, dims=dims, n_seeds=int(n_seeds))
                columns = DIMENSION_COLUMNS
                file_name = "sweep_dimension.csv"
        except (QAdvLabError, ValueError) as e:
            st.error(f"Run error: {e}")
            st.stop()

    st.success(f"Finished: {len(rows)} rows.")
    df = rows_to_frame(rows, columns)
    st.dataframe(df, use_container_width=True)

    st.download_button(
        label="💾 Download CSV",
        data=frame_to_csv_text(df),
        file_name=file_name,
        mime="text/csv",
    )

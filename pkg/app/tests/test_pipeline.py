import math

import numpy as np
import pytest

from qadvlab.bounds import covering_number_lemma1, pac_slack, rc_bound_thm2
from qadvlab.checkpoint import load_model
from qadvlab.config import parse_config
from qadvlab.embeddings import embed_batch
from qadvlab.errors import AssumptionViolation
from qadvlab.pipeline import (
    BOUND_COLUMNS,
    bound_config_for,
    bound_rows,
    run_pipeline,
    run_pipeline_step1_generate_data,
    run_pipeline_step2_build_model,
)
from qadvlab.results_table import read_rows_csv

TINY = {
    "task": {"d": 2, "train_m": 6, "test_m": 10, "seed": 1},
    "model": {"layers": 1},
    "train": {"epochs": 2},
    "attack": {"epsilon": 0.1},
}


def _cfg(**blocks):
    data = {k: dict(v) for k, v in TINY.items()}
    for name, update in blocks.items():
        data[name] = {**data.get(name, {}), **update}
    return parse_config(data)


def _setup(cfg):
    train = run_pipeline_step1_generate_data(cfg)["train"]
    model = run_pipeline_step2_build_model(cfg)["model"]
    return model, train


def test_run_pipeline_writes_every_artifact(tmp_path):
    cfg = _cfg()
    outputs = run_pipeline(cfg, tmp_path / "run")
    out = tmp_path / "run"
    for name in ("train_trace.csv", "model.json", "risks.csv", "bounds.csv"):
        assert (out / name).exists()
    assert len(read_rows_csv(out / "train_trace.csv")) == 2
    assert np.array_equal(load_model(out / "model.json").angles, outputs["model"].angles)
    bounds = read_rows_csv(out / "bounds.csv")
    assert list(bounds.columns) == BOUND_COLUMNS
    assert bounds["theorem"].tolist() == ["thm2", "excess", "thm3", "pac_slack", "thm1"]
    risks = outputs["risks"]
    assert risks.adv_train >= risks.clean_train
    assembled = bounds.loc[bounds["theorem"] == "thm1", "value"].iloc[0]
    arc = bounds.loc[bounds["theorem"] == "thm3", "value"].iloc[0]
    slack = pac_slack(bound_config_for(cfg, outputs["model"], outputs["train"]))
    assert assembled == pytest.approx(risks.adv_train + 2 * 2.5 * arc + slack)


def test_pipeline_is_reproducible(tmp_path):
    cfg = _cfg()
    run_pipeline(cfg, tmp_path / "a")
    run_pipeline(cfg, tmp_path / "b")
    for name in ("train_trace.csv", "risks.csv", "bounds.csv", "model.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bound_config_defaults_b_to_observable_norm():
    cfg = _cfg(bounds={"r": 2})
    model, train = _setup(cfg)
    bcfg = bound_config_for(cfg, model, train)
    assert bcfg.b == pytest.approx(math.sqrt(8.0))
    assert bcfg.m == 6 and bcfg.d_H == 4
    assert bcfg.min_x_norm == pytest.approx(np.min(np.linalg.norm(train.X, axis=1)))


def test_rc_rows():
    cfg = _cfg(bounds={"theorem": "thm2", "r": 2, "b": 1.0})
    model, train = _setup(cfg)
    rows = bound_rows(cfg, model, train)
    assert len(rows) == 1
    states = embed_batch(train.X, cfg.embedding).densities()
    assert rows[0]["value"] == pytest.approx(rc_bound_thm2(states, bound_config_for(cfg, model, train)))
    assert rows[0]["r"] == 2.0 and rows[0]["p"] == "inf"


def test_monte_carlo_rows():
    cfg = _cfg(bounds={"theorem": "thm2", "mc_draws": 20})
    model, train = _setup(cfg)
    rows = bound_rows(cfg, model, train)
    assert [r["theorem"] for r in rows] == ["thm2", "rc_mc", "rc_mc_stderr"]
    assert rows[1]["value"] <= rows[0]["value"] + 3 * rows[2]["value"]


def test_noisy_rows_need_noise():
    cfg = _cfg(bounds={"theorem": "thm4", "epsilon": 0.1, "r": 2, "p": 2})
    model, train = _setup(cfg)
    with pytest.raises(AssumptionViolation):
        bound_rows(cfg, model, train)
    noisy = _cfg(bounds={"theorem": "thm4", "epsilon": 0.1, "r": 2, "p": 2}, embedding={"depolarize_lambda": 0.2})
    rows = bound_rows(noisy, model.with_embedding(noisy.embedding), train)
    assert [r["theorem"] for r in rows] == ["thm4_lower", "thm4_upper"]
    assert rows[1]["value"] - rows[0]["value"] == pytest.approx(math.sqrt(8.0) * 0.1 / math.sqrt(6))


def test_covering_and_pac_rows():
    cfg = _cfg(bounds={"theorem": "lemma1"})
    model, train = _setup(cfg)
    bcfg = bound_config_for(cfg, model, train)
    rows = bound_rows(cfg, model, train)
    assert rows[0]["value"] == pytest.approx(covering_number_lemma1(bcfg, bcfg.b))
    assert rows[0]["value"] == pytest.approx(16 * math.log(3.0))
    pac = _cfg(bounds={"theorem": "pac"})
    assert bound_rows(pac, model, train)[0]["value"] == pytest.approx(pac_slack(bcfg))


def test_arc_and_multiclass_rows():
    for theorem in ("thm3", "thm5"):
        cfg = _cfg(bounds={"theorem": theorem})
        model, train = _setup(cfg)
        rows = bound_rows(cfg, model, train)
        assert [r["theorem"] for r in rows] == [theorem]
        assert rows[0]["value"] > 0

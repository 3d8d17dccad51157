import math
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from qadvlab import sweeps
from qadvlab.attacks import AttackSpace
from qadvlab.config import load_config, parse_config
from qadvlab.errors import DomainError
from qadvlab.results_table import frame_to_csv_text, rows_to_frame
from qadvlab.sweeps import (
    AXIS_COLUMNS,
    DIMENSION_COLUMNS,
    NOISE_COLUMNS,
    sweep_axis,
    sweep_dimension,
    sweep_noise,
)

CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"

TINY = {
    "task": {"d": 2, "train_m": 4, "test_m": 6, "seed": 0},
    "model": {"layers": 1},
    "train": {"epochs": 1},
    "attack": {"epsilon": 0.1},
    "sweep": {
        "dims": [1, 2],
        "n_seeds": 2,
        "noise_d": 2,
        "lambda_min": 0.05,
        "epsilons": [0.01, 0.02],
        "noise_train_epsilon": 0.01,
    },
}


@pytest.fixture
def tiny_cfg():
    return parse_config(TINY)


def _by_type(rows, row_type):
    return [r for r in rows if r["row_type"] == row_type]


def test_dimension_sweep_rows(tiny_cfg):
    rows = sweep_dimension(tiny_cfg, workers=1)
    cells = _by_type(rows, "cell")
    assert [(r["d"], r["seed"]) for r in cells] == [(1, 0), (1, 1), (2, 0), (2, 1)]
    assert len(_by_type(rows, "mean")) == 2 and len(_by_type(rows, "stderr")) == 2
    for r in cells:
        assert r["adv_train"] >= r["clean_train"]
        assert r["b"] == r["d"]
        assert r["arc_prop1"] >= r["rc_bound"]
        assert r["gap_diff"] == pytest.approx(r["adv_gap"] - r["clean_gap"])
    mean_d1 = _by_type(rows, "mean")[0]
    assert mean_d1["n_seeds"] == 2
    assert mean_d1["rc_bound"] == pytest.approx(np.mean([c["rc_bound"] for c in cells[:2]]))


def test_sweep_output_does_not_depend_on_workers(tiny_cfg):
    serial = sweep_dimension(tiny_cfg, workers=1)
    parallel = sweep_dimension(tiny_cfg, workers=4)
    text = lambda rows: frame_to_csv_text(rows_to_frame(rows, DIMENSION_COLUMNS))  # noqa: E731
    assert text(serial) == text(parallel)


def test_monte_carlo_column(tiny_cfg):
    cfg = tiny_cfg.model_copy(update={"sweep": tiny_cfg.sweep.model_copy(update={"mc_draws": 10})})
    cells = _by_type(sweep_dimension(cfg, dims=[2], n_seeds=1, workers=1), "cell")
    assert cells[0]["rc_mc"] > 0 and cells[0]["rc_mc_stderr"] >= 0


def test_failing_cell_becomes_error_row(tiny_cfg):
    rows = sweep_dimension(tiny_cfg, dims=[11], n_seeds=1, workers=1)
    assert len(rows) == 1
    assert rows[0]["row_type"] == "error"
    assert rows[0]["error"].startswith("DimensionCapExceeded")


def test_noise_sweep_rows(tiny_cfg):
    rows = sweep_noise(tiny_cfg, n_seeds=1, workers=1)
    cells = _by_type(rows, "cell")
    assert [(r["arm"], r["epsilon"]) for r in cells] == [
        ("noiseless", 0.01),
        ("noiseless", 0.02),
        ("noisy", 0.01),
        ("noisy", 0.02),
    ]
    assert len(rows) == 4 + 8
    for r in cells:
        assert r["d_H"] == 2
        assert r["adv_test"] >= r["clean_test"]
        if r["arm"] == "noisy":
            assert r["lambda_min"] == 0.05
            assert r["thm4_upper"] - r["thm4_lower"] == pytest.approx(r["b"] * r["epsilon"])
        else:
            assert math.isnan(r["thm4_lower"])
    frame = rows_to_frame(rows, NOISE_COLUMNS)
    assert list(frame.columns) == NOISE_COLUMNS


def test_noise_sweep_arms_share_the_trained_model(tiny_cfg):
    cells = _by_type(sweep_noise(tiny_cfg, epsilons=[0.01], n_seeds=1, workers=1), "cell")
    noiseless, noisy = cells
    # the noisy arm scales every score by 1 - lambda_min * d_H
    assert noisy["b"] == noiseless["b"]
    assert noisy["clean_train"] != noiseless["clean_train"]


def test_noise_sweep_trains_against_quantum_attack(tiny_cfg, monkeypatch):
    seen = []
    train = sweeps.train_adversarial

    def recording(model, data, cfg, *args, **kwargs):
        seen.append(cfg.attack)
        return train(model, data, cfg, *args, **kwargs)

    monkeypatch.setattr(sweeps, "train_adversarial", recording)
    sweep_noise(tiny_cfg, epsilons=[0.01], n_seeds=1, workers=1)
    assert [a.space for a in seen] == [AttackSpace.QUANTUM]
    assert seen[0].epsilon == tiny_cfg.sweep.noise_train_epsilon


def test_noise_sweep_needs_lambda_above_epsilon(tiny_cfg):
    with pytest.raises(DomainError):
        sweep_noise(tiny_cfg, epsilons=[0.01, 0.1], workers=1)


def test_axis_sweeps(tiny_cfg):
    rows = sweep_axis(tiny_cfg, "samples", [4, 2], n_seeds=1, workers=1)
    assert [r["value"] for r in _by_type(rows, "cell")] == [2, 4]
    assert len(rows) == 2 + 4

    rows = sweep_axis(tiny_cfg, "epochs", [0, 1], n_seeds=2, workers=2)
    cells = _by_type(rows, "cell")
    assert [(r["value"], r["seed"]) for r in cells] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    frame = rows_to_frame(rows, AXIS_COLUMNS)
    assert list(frame.columns) == AXIS_COLUMNS


def test_axis_sweep_validation(tiny_cfg):
    with pytest.raises(DomainError):
        sweep_axis(tiny_cfg, "width", [1])
    with pytest.raises(DomainError):
        sweep_axis(tiny_cfg, "samples", [0, 2])


@pytest.mark.slow
def test_angle_excess_term_falls_with_dimension():
    cfg = load_config(CONFIG_DIR / "angle_dimension_sweep.json")
    means = _by_type(sweep_dimension(cfg, n_seeds=2), "mean")
    dims = [r["d"] for r in means]
    gaps = [r["arc_prop1"] - r["rc_bound"] for r in means]
    assert spearmanr(dims, gaps).correlation == pytest.approx(-1.0)


@pytest.mark.slow
def test_noisy_gap_grows_with_epsilon():
    cfg = load_config(CONFIG_DIR / "noise_sweep.json")
    means = [r for r in _by_type(sweep_noise(cfg, n_seeds=2), "mean") if r["arm"] == "noisy"]
    gaps = [r["thm4_upper"] - r["thm4_lower"] for r in means]
    assert spearmanr([r["epsilon"] for r in means], gaps).correlation == pytest.approx(1.0)


def _mean_rows(rows, **match):
    return [r for r in _by_type(rows, "mean") if all(r[k] == v for k, v in match.items())]


@pytest.mark.slow
def test_angle_robustness_gap_does_not_grow_with_dimension():
    cfg = load_config(CONFIG_DIR / "angle_dimension_sweep.json")
    means = _mean_rows(sweep_dimension(cfg), family="angle")
    assert [r["d"] for r in means] == [2, 4, 6, 8]
    assert all(r["n_seeds"] == 5 for r in means)
    rho = spearmanr([r["d"] for r in means], [r["gap_diff"] for r in means]).correlation
    assert rho <= 0


@pytest.mark.slow
def test_amplitude_robustness_gap_grows_with_dimension():
    cfg = load_config(CONFIG_DIR / "amplitude_dimension_sweep.json")
    means = {r["d"]: r for r in _mean_rows(sweep_dimension(cfg), family="amplitude")}
    assert sorted(means) == [2, 4, 8, 16]
    assert means[16]["gap_diff"] > means[2]["gap_diff"]


@pytest.mark.slow
def test_noisy_embedding_is_more_robust_at_every_epsilon():
    cfg = load_config(CONFIG_DIR / "noise_sweep.json")
    rows = sweep_noise(cfg)
    noiseless = _mean_rows(rows, arm="noiseless")
    noisy = _mean_rows(rows, arm="noisy")
    assert [r["epsilon"] for r in noisy] == [r["epsilon"] for r in noiseless] == sorted(cfg.sweep.epsilons)
    for clean_arm, noisy_arm in zip(noiseless, noisy):
        assert noisy_arm["adv_gap"] <= clean_arm["adv_gap"]
    for arm in (noiseless, noisy):
        assert np.all(np.diff([r["arc_bound"] for r in arm]) >= 0)
    assert np.all(np.diff([r["thm4_upper"] for r in noisy]) >= 0)

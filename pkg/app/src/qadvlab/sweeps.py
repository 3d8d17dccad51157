# src/qadvlab/sweeps.py
"""
Seeded sweeps over data dimension, attack strength and training length.

A sweep is a list of independent cells, one per (family or arm, axis value,
seed). Cells run on a thread pool and come back in submission order, so the
rows, and the CSV written from them, do not depend on the worker count. A
cell that fails becomes an "error" row and the sweep carries on.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .attacks import AttackConfig, AttackSpace
from .bounds import (
    BoundConfig,
    ExcessVariant,
    arc_bound_thm3,
    excess_classical,
    excess_quantum,
    mc_rc_estimate,
    noisy_bounds_thm4,
    rc_bound_thm2,
)
from .config import ExperimentConfig, quantum_attack
from .datasets import Dataset, gen_dataset
from .embeddings import EmbeddingFamily, embed_batch
from .errors import DomainError, QAdvLabError
from .model import ClassifierModel, build_model
from .pipeline import bound_config_for
from .results_table import aggregate_rows
from .settings import thread_count
from .training import RiskTable, TrainConfig, estimate_risks, train_adversarial

logger = logging.getLogger(__name__)

RISK_COLUMNS = [
    "clean_train",
    "clean_test",
    "adv_train",
    "adv_test",
    "clean_train_stderr",
    "clean_test_stderr",
    "adv_train_stderr",
    "adv_test_stderr",
    "clean_gap",
    "adv_gap",
    "gap_diff",
]

DIMENSION_COLUMNS = (
    ["row_type", "family", "d", "seed", "n_seeds", "d_H", "epsilon", "p", "b"]
    + RISK_COLUMNS
    + [
        "rc_bound",
        "excess_prop1",
        "arc_prop1",
        "excess_appendix",
        "arc_appendix",
        "rc_mc",
        "rc_mc_stderr",
        "error",
    ]
)

NOISE_COLUMNS = (
    ["row_type", "arm", "epsilon", "seed", "n_seeds", "d", "d_H", "lambda_min", "b"]
    + RISK_COLUMNS
    + ["rc_bound", "excess_quantum", "arc_bound", "thm4_lower", "thm4_upper", "error"]
)

AXIS_COLUMNS = ["row_type", "axis", "value", "seed", "n_seeds"] + RISK_COLUMNS + ["error"]

_DIMENSION_VALUES = [c for c in DIMENSION_COLUMNS[5:] if c not in ("p", "error")]
_NOISE_VALUES = [c for c in NOISE_COLUMNS[5:] if c != "error"]
_AXIS_VALUES = [c for c in AXIS_COLUMNS[5:] if c != "error"]


def _risk_row(risks: RiskTable) -> Dict[str, Any]:
    row = risks.as_row()
    row["gap_diff"] = risks.adv_gap - risks.clean_gap
    return row


def _run_cells(
    cells: Sequence[Tuple],
    run: Callable[..., List[Dict[str, Any]]],
    fail: Callable[..., Dict[str, Any]],
    label: str,
    workers: Optional[int],
    progress: bool,
) -> List[Dict[str, Any]]:
    def guarded(cell: Tuple) -> List[Dict[str, Any]]:
        try:
            return run(*cell)
        except (QAdvLabError, ValueError, np.linalg.LinAlgError) as exc:
            logger.warning("[sweep] %s cell %s failed: %s", label, cell[1:], exc)
            return [fail(*cell, error=f"{type(exc).__name__}: {exc}")]

    workers = workers or thread_count()
    logger.info("[sweep] %s: %d cells on %d workers", label, len(cells), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            tqdm(pool.map(guarded, cells), total=len(cells), desc=f"[sweep] {label}", disable=not progress)
        )
    return [row for rows in results for row in rows]


def _bound_config(cfg: ExperimentConfig, model: ClassifierModel, train: Dataset, attack: AttackConfig) -> BoundConfig:
    """Bound parameters for a cell: the attack block sets p and epsilon."""
    return bound_config_for(cfg, model, train).model_copy(update={"p": attack.p, "epsilon": attack.epsilon})


# ---------------------------------------------------------------------
# Dimension sweep
# ---------------------------------------------------------------------


def _dimension_cell(cfg: ExperimentConfig, family: EmbeddingFamily, d: int, seed: int, mc_draws: int) -> List[Dict[str, Any]]:
    local = cfg.with_seed(seed).with_dimension(family, d)
    train, test = gen_dataset(local.task)
    model = build_model(local.embedding, local.model, local.train.seed)
    training = local.training
    result = train_adversarial(model, train, training)
    attack = training.attack
    risks = estimate_risks(result.model, train, test, attack)

    states = embed_batch(train.X, local.embedding).densities()
    bcfg = _bound_config(local, result.model, train, attack)
    rc = rc_bound_thm2(states, bcfg)
    row: Dict[str, Any] = {
        "row_type": "cell",
        "family": family.value,
        "d": d,
        "seed": seed,
        "d_H": local.embedding.hilbert_dim,
        "epsilon": attack.epsilon,
        "p": attack.model_dump(mode="json")["p"],
        "b": bcfg.b,
        **_risk_row(risks),
        "rc_bound": rc,
    }
    for variant in ExcessVariant:
        if attack.space is AttackSpace.QUANTUM:
            excess = excess_quantum(bcfg)
        else:
            excess = excess_classical(bcfg, family, variant)
        row[f"excess_{variant.value}"] = excess
        row[f"arc_{variant.value}"] = arc_bound_thm3(states, bcfg, excess).arc_bound
    if mc_draws > 0:
        row["rc_mc"], row["rc_mc_stderr"] = mc_rc_estimate(states, train.y, bcfg, mc_draws, seed)
    logger.info("[sweep] %s d=%d seed=%d adv_gap=%.4f", family.value, d, seed, risks.adv_gap)
    return [row]


def _dimension_error(cfg, family, d, seed, mc_draws, error: str) -> Dict[str, Any]:
    return {"row_type": "error", "family": family.value, "d": d, "seed": seed, "error": error}


def sweep_dimension(
    cfg: ExperimentConfig,
    dims: Optional[Sequence[int]] = None,
    families: Optional[Sequence[EmbeddingFamily]] = None,
    n_seeds: Optional[int] = None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> List[Dict[str, Any]]:
    """
    Train adversarially and evaluate risks and bound columns for every
    (family, d, seed); seeds are task.seed, task.seed + 1, ... Returns the cell
    rows (sorted by family, d, seed) followed by mean and stderr rows per (family, d).
    """
    dims = list(dims or cfg.sweep.dims)
    families = [EmbeddingFamily(f) for f in (families or cfg.sweep.families)]
    n_seeds = n_seeds or cfg.sweep.n_seeds
    base = cfg.task.seed
    cells = [
        (cfg, fam, d, base + s, cfg.sweep.mc_draws)
        for fam in sorted(families, key=lambda f: f.value)
        for d in sorted(dims)
        for s in range(n_seeds)
    ]
    rows = _run_cells(cells, _dimension_cell, _dimension_error, "dimension", workers, progress)
    return rows + aggregate_rows(rows, ["family", "d"], _DIMENSION_VALUES)


# ---------------------------------------------------------------------
# Noise sweep
# ---------------------------------------------------------------------


def _noise_cell(cfg: ExperimentConfig, seed: int) -> List[Dict[str, Any]]:
    sweep = cfg.sweep
    local = cfg.with_seed(seed).with_dimension(sweep.noise_family, sweep.noise_d, noise=0.0)
    train, test = gen_dataset(local.task)
    model = build_model(local.embedding, local.model, local.train.seed)
    train_cfg = local.train.model_copy(update={"attack": quantum_attack(local, sweep.noise_train_epsilon)})
    trained = train_adversarial(model, train, train_cfg).model

    noisy_spec = local.embedding.model_copy(update={"depolarize_lambda": sweep.lambda_min})
    arms = [("noiseless", local.embedding), ("noisy", noisy_spec)]
    rows: List[Dict[str, Any]] = []
    for arm, spec in arms:
        arm_model = trained.with_embedding(spec)
        states = embed_batch(train.X, spec).densities()
        for eps in sorted(sweep.epsilons):
            attack = quantum_attack(local, eps)
            risks = estimate_risks(arm_model, train, test, attack)
            bcfg = _bound_config(local, arm_model, train, attack)
            excess = excess_quantum(bcfg)
            report = arc_bound_thm3(states, bcfg, excess)
            lower = upper = math.nan
            if arm == "noisy":
                lower, upper = noisy_bounds_thm4(states, bcfg)
            rows.append(
                {
                    "row_type": "cell",
                    "arm": arm,
                    "epsilon": eps,
                    "seed": seed,
                    "d": spec.input_dim,
                    "d_H": spec.hilbert_dim,
                    "lambda_min": spec.depolarize_lambda,
                    "b": bcfg.b,
                    **_risk_row(risks),
                    "rc_bound": report.rc_bound,
                    "excess_quantum": excess,
                    "arc_bound": report.arc_bound,
                    "thm4_lower": lower,
                    "thm4_upper": upper,
                }
            )
    logger.info("[sweep] noise seed=%d done", seed)
    return rows


def _noise_error(cfg, seed, error: str) -> Dict[str, Any]:
    return {"row_type": "error", "seed": seed, "error": error}


def sweep_noise(
    cfg: ExperimentConfig,
    epsilons: Optional[Sequence[float]] = None,
    lambda_min: Optional[float] = None,
    n_seeds: Optional[int] = None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> List[Dict[str, Any]]:
    """
    Per seed: train once against quantum FGSM on the noiseless embedding, then
    evaluate noiseless and depolarized arms at every epsilon, with the ARC and
    noisy-embedding bound columns.
    """
    update: Dict[str, Any] = {}
    if epsilons is not None:
        update["epsilons"] = [float(e) for e in epsilons]
    if lambda_min is not None:
        update["lambda_min"] = float(lambda_min)
    if update:
        cfg = cfg.model_copy(update={"sweep": cfg.sweep.model_copy(update=update)})
    sweep = cfg.sweep
    if sweep.lambda_min < max(sweep.epsilons):
        raise DomainError(
            f"lambda_min={sweep.lambda_min:g} is below the largest epsilon {max(sweep.epsilons):g}; "
            "the noisy arm needs every state's minimum eigenvalue >= epsilon"
        )
    n_seeds = n_seeds or sweep.n_seeds
    cells = [(cfg, cfg.task.seed + s) for s in range(n_seeds)]
    rows = _run_cells(cells, _noise_cell, _noise_error, "noise", workers, progress)
    return rows + aggregate_rows(rows, ["arm", "epsilon"], _NOISE_VALUES)


# ---------------------------------------------------------------------
# Training-set size / training length
# ---------------------------------------------------------------------


def _axis_rows(axis: str, value: int, seed: int, risks: RiskTable) -> Dict[str, Any]:
    return {"row_type": "cell", "axis": axis, "value": value, "seed": seed, **_risk_row(risks)}


def _samples_cell(cfg: ExperimentConfig, values: Tuple[int, ...], seed: int) -> List[Dict[str, Any]]:
    rows = []
    for m in values:
        local = cfg.with_seed(seed)
        local = local.model_copy(update={"task": local.task.model_copy(update={"train_m": m})})
        train, test = gen_dataset(local.task)
        model = build_model(local.embedding, local.model, local.train.seed)
        training = local.training
        trained = train_adversarial(model, train, training).model
        rows.append(_axis_rows("samples", m, seed, estimate_risks(trained, train, test, training.attack)))
    return rows


def _epochs_cell(cfg: ExperimentConfig, values: Tuple[int, ...], seed: int) -> List[Dict[str, Any]]:
    local = cfg.with_seed(seed)
    train, test = gen_dataset(local.task)
    model = build_model(local.embedding, local.model, local.train.seed)
    training: TrainConfig = local.training.model_copy(update={"epochs": max(values)})
    snapshots: Dict[int, ClassifierModel] = {0: model}

    def keep(epoch: int, current: ClassifierModel, risk: float) -> None:
        if epoch + 1 in values:
            snapshots[epoch + 1] = current

    train_adversarial(model, train, training, on_epoch=keep)
    return [
        _axis_rows("epochs", e, seed, estimate_risks(snapshots[e], train, test, training.attack))
        for e in values
    ]


def _axis_error(cfg, values, seed, error: str) -> Dict[str, Any]:
    return {"row_type": "error", "seed": seed, "error": error}


def sweep_axis(
    cfg: ExperimentConfig,
    axis: str,
    values: Sequence[int],
    n_seeds: Optional[int] = None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> List[Dict[str, Any]]:
    """Risks and gaps against the training-set size ("samples") or the epoch count ("epochs")."""
    if axis not in ("samples", "epochs"):
        raise DomainError(f"axis must be 'samples' or 'epochs', got {axis!r}")
    values = tuple(sorted({int(v) for v in values}))
    if not values or values[0] < (1 if axis == "samples" else 0):
        raise DomainError(f"invalid {axis} values {list(values)}")
    n_seeds = n_seeds or cfg.sweep.n_seeds
    run = _samples_cell if axis == "samples" else _epochs_cell
    cells = [(cfg, values, cfg.task.seed + s) for s in range(n_seeds)]
    rows = _run_cells(cells, run, _axis_error, axis, workers, progress)
    cell_rows = sorted(
        (r for r in rows if r["row_type"] == "cell"), key=lambda r: (r["value"], r["seed"])
    )
    errors = [r for r in rows if r["row_type"] == "error"]
    return cell_rows + errors + aggregate_rows(rows, ["axis", "value"], _AXIS_VALUES)

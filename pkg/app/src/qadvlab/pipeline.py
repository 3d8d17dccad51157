# src/qadvlab/pipeline.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from .attacks import AttackSpace
from .bounds import (
    BoundConfig,
    arc_bound_thm3,
    covering_number_lemma1,
    evaluate_bounds,
    excess_classical,
    excess_quantum,
    mc_rc_estimate,
    multiclass_bound_thm5,
    noisy_bounds_thm4,
    pac_slack,
    rc_bound_thm2,
)
from .checkpoint import save_model
from .config import ExperimentConfig, Theorem
from .datasets import Dataset, gen_dataset
from .embeddings import embed_batch
from .model import ClassifierModel, build_model, observable_norm
from .results_table import write_rows_csv
from .training import estimate_risks, train_adversarial

logger = logging.getLogger(__name__)

BOUND_COLUMNS = ["theorem", "r", "p", "epsilon", "m", "d", "d_H", "family", "variant", "value"]


def run_pipeline_step1_generate_data(cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Step 1:
      - draw the Gaussian training and test sets from task.seed
    """
    train, test = gen_dataset(cfg.task)
    logger.info("[data] d=%d train_m=%d test_m=%d", cfg.task.d, len(train), len(test))
    return {"train": train, "test": test}


def run_pipeline_step2_build_model(cfg: ExperimentConfig) -> Dict[str, Any]:
    """
    Step 2:
      - fresh classifier on the configured embedding, angles from train.seed
    """
    return {"model": build_model(cfg.embedding, cfg.model, cfg.train.seed)}


def run_pipeline_step3_train(
    cfg: ExperimentConfig,
    model: ClassifierModel,
    train: Dataset,
    output_dir: Path,
) -> Dict[str, Any]:
    """
    Step 3:
      - adversarial training with the train block (attack block by default)
      - save the per-epoch trace as <output_dir>/train_trace.csv
      - save the trained model as <output_dir>/model.json
    """
    result = train_adversarial(model, train, cfg.training)
    trace = write_rows_csv(result.trace_rows(), output_dir / "train_trace.csv", ["epoch", "adv_empirical_risk"])
    checkpoint = save_model(result.model, output_dir / "model.json")
    return {
        "model": result.model,
        "trace": result.trace,
        "trace_csv": trace["csv"],
        "checkpoint": checkpoint,
    }


def run_pipeline_step4_estimate_risks(
    cfg: ExperimentConfig,
    model: ClassifierModel,
    train: Dataset,
    test: Dataset,
    output_dir: Path,
) -> Dict[str, Any]:
    """
    Step 4:
      - clean and adversarial risks on both sets at the trained angles
      - save as <output_dir>/risks.csv
    """
    risks = estimate_risks(model, train, test, cfg.training.attack)
    out = write_rows_csv([risks.as_row()], output_dir / "risks.csv")
    return {"risks": risks, "risks_csv": out["csv"]}


def run_pipeline_step5_bounds(
    cfg: ExperimentConfig,
    model: ClassifierModel,
    train: Dataset,
    output_dir: Path,
    empirical_risk: float | None = None,
) -> Dict[str, Any]:
    """
    Step 5:
      - evaluate the configured bound(s) on the embedded training states
      - save as <output_dir>/bounds.csv
    """
    rows = bound_rows(cfg, model, train, empirical_risk)
    out = write_rows_csv(rows, output_dir / "bounds.csv", BOUND_COLUMNS)
    return {"bound_rows": rows, "bounds_csv": out["csv"]}


def run_pipeline(cfg: ExperimentConfig, output_dir: Path) -> Dict[str, Any]:
    """
    Steps:
      1) Generate train/test data
      2) Build the classifier
      3) Train adversarially
      4) Estimate clean/adversarial risks
      5) Evaluate bounds, the assembled one at the adversarial training risk
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    outputs: Dict[str, Any] = {}

    step1 = run_pipeline_step1_generate_data(cfg)
    outputs.update(step1)

    step2 = run_pipeline_step2_build_model(cfg)
    outputs.update(step2)

    step3 = run_pipeline_step3_train(cfg, step2["model"], step1["train"], output_dir)
    outputs.update(step3)

    step4 = run_pipeline_step4_estimate_risks(cfg, step3["model"], step1["train"], step1["test"], output_dir)
    outputs.update(step4)

    step5 = run_pipeline_step5_bounds(cfg, step3["model"], step1["train"], output_dir, step4["risks"].adv_train)
    outputs.update(step5)

    return outputs


# ---------------------------------------------------------------------
# Bound rows
# ---------------------------------------------------------------------


def bound_config_for(cfg: ExperimentConfig, model: ClassifierModel, train: Dataset) -> BoundConfig:
    """The bounds block completed with data sizes and, if unset, b = ||M||_r."""
    block = cfg.bounds
    b = block.b if block.b is not None else observable_norm(model, block.r)
    return BoundConfig(
        r=block.r,
        b=b,
        p=block.p,
        epsilon=block.epsilon,
        m=len(train),
        d=cfg.embedding.input_dim,
        d_H=cfg.embedding.hilbert_dim,
        L=cfg.embedding.layers,
        K=block.K,
        gamma=block.gamma,
        min_x_norm=max(float(np.min(np.linalg.norm(train.X, axis=1))), 1e-12),
        delta_conf=block.delta_conf,
        B_loss=block.B_loss,
        eta=block.eta,
    )


def _row(theorem: str, value: float, bcfg: BoundConfig, family: str, variant: str) -> Dict[str, Any]:
    dumped = bcfg.model_dump(mode="json")
    return {
        "theorem": theorem,
        "r": dumped["r"],
        "p": dumped["p"],
        "epsilon": bcfg.epsilon,
        "m": bcfg.m,
        "d": bcfg.d,
        "d_H": bcfg.d_H,
        "family": family,
        "variant": variant,
        "value": float(value),
    }


def bound_rows(
    cfg: ExperimentConfig,
    model: ClassifierModel,
    train: Dataset,
    empirical_risk: float | None = None,
) -> List[Dict[str, Any]]:
    """CSV rows for the theorem selected in the bounds block."""
    block = cfg.bounds
    states = embed_batch(train.X, cfg.embedding).densities()
    bcfg = bound_config_for(cfg, model, train)
    family = cfg.embedding.family.value
    variant = block.variant.value
    quantum = cfg.attack.space is AttackSpace.QUANTUM
    excess = excess_quantum(bcfg) if quantum else excess_classical(bcfg, cfg.embedding.family, block.variant)

    def row(theorem: str, value: float) -> Dict[str, Any]:
        return _row(theorem, value, bcfg, family, variant)

    theorem = block.theorem
    if theorem is Theorem.RC:
        rows = [row("thm2", rc_bound_thm2(states, bcfg))]
    elif theorem is Theorem.ARC:
        rows = [row("thm3", arc_bound_thm3(states, bcfg, excess).arc_bound)]
    elif theorem is Theorem.NOISY:
        lower, upper = noisy_bounds_thm4(states, bcfg)
        rows = [row("thm4_lower", lower), row("thm4_upper", upper)]
    elif theorem is Theorem.MULTICLASS:
        rows = [row("thm5", multiclass_bound_thm5(states, bcfg, excess))]
    elif theorem is Theorem.COVERING:
        delta = block.covering_delta if block.covering_delta is not None else bcfg.budget_b
        rows = [row("lemma1", covering_number_lemma1(bcfg, delta))]
    elif theorem is Theorem.PAC:
        rows = [row("pac_slack", pac_slack(bcfg))]
    else:
        risk = block.empirical_risk if empirical_risk is None else empirical_risk
        space = "quantum" if quantum else "classical"
        report = evaluate_bounds(states, bcfg, cfg.embedding.family, space, block.variant, risk)
        rows = report.to_rows()

    if block.mc_draws > 0 and theorem in (Theorem.ALL, Theorem.RC):
        mean, err = mc_rc_estimate(states, train.y, bcfg, block.mc_draws, cfg.task.seed)
        rows += [row("rc_mc", mean), row("rc_mc_stderr", err)]
    logger.info("[bounds] %s: %d rows", theorem.value, len(rows))
    return rows

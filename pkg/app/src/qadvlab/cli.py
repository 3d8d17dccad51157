# src/qadvlab/cli.py
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import orjson
from pydantic import ValidationError

from .attacks import AttackSpace, attack_batch
from .bounds import ExcessVariant
from .checkpoint import load_model, save_model
from .config import ExperimentConfig, load_config
from .embeddings import EmbeddingFamily, embed
from .errors import ConfigError, QAdvLabError
from .pipeline import (
    BOUND_COLUMNS,
    bound_rows,
    run_pipeline_step1_generate_data,
    run_pipeline_step2_build_model,
)
from .results_table import frame_to_csv_text, rows_to_frame, write_rows_csv
from .selftest import run_selftest
from .sweeps import AXIS_COLUMNS, DIMENSION_COLUMNS, NOISE_COLUMNS, sweep_axis, sweep_dimension, sweep_noise
from .training import estimate_risks, train_adversarial

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _families(text: str) -> List[EmbeddingFamily]:
    try:
        return [EmbeddingFamily(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=Path, default=None, help="JSON experiment config (default: built-in defaults).")
    common.add_argument("--seed", type=int, default=None, help="Override task, training and attack seeds.")
    common.add_argument("--out", "-o", type=Path, default=None, help="CSV output path (default: stdout).")
    common.add_argument("--variant", choices=["prop1", "appendix"], default=None, help="Excess-term constants.")
    common.add_argument("-v", "--verbose", action="store_true", help="Log progress at INFO level.")
    common.add_argument("-q", "--quiet", action="store_true", help="No progress bars.")

    parser = _Parser(
        prog="qadvlab",
        description="Adversarial robustness lab for quantum classifiers: embeddings, attacks, bounds and sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("embed", parents=[common], help="Print rho(x) as JSON.")
    p.add_argument("--x", type=_floats, default=None, help="Comma-separated features (default: first training sample).")

    p = sub.add_parser("train", parents=[common], help="Adversarially train; per-epoch trace CSV, risks JSON.")
    p.add_argument("--checkpoint", type=Path, default=None, help="Where to save the trained model.")

    p = sub.add_parser("attack", parents=[common], help="Attack one training sample and print the result as JSON.")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--checkpoint", type=Path, default=None, help="Trained model (default: untrained model from the seed).")

    sub.add_parser("bounds", parents=[common], help="Evaluate the configured bound(s) as CSV rows.")

    p = sub.add_parser("sweep-dim", parents=[common], help="Risks and bounds against the data dimension.")
    p.add_argument("--dims", type=_ints, default=None)
    p.add_argument("--families", type=_families, default=None)
    p.add_argument("--seeds", type=int, default=None, help="Number of seeds.")

    p = sub.add_parser("sweep-noise", parents=[common], help="Noiseless vs depolarized embedding under quantum attacks.")
    p.add_argument("--epsilons", type=_floats, default=None)
    p.add_argument("--lambda-min", type=float, default=None)
    p.add_argument("--seeds", type=int, default=None)

    p = sub.add_parser("sweep", parents=[common], help="Risks against training-set size or epoch count.")
    p.add_argument("--axis", choices=["samples", "epochs"], required=True)
    p.add_argument("--values", type=_ints, required=True)
    p.add_argument("--seeds", type=int, default=None)

    sub.add_parser("selftest", parents=[common], help="Run the in-process invariant suites.")
    return parser


def _configure(args: argparse.Namespace) -> ExperimentConfig:
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.variant is not None:
        variant = ExcessVariant(args.variant)
        cfg = cfg.model_copy(update={"bounds": cfg.bounds.model_copy(update={"variant": variant})})
    return cfg


def _emit_json(payload: Dict[str, Any]) -> None:
    sys.stdout.write(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY).decode())
    sys.stdout.write("\n")


def _emit_rows(rows: Sequence[Dict[str, Any]], out: Optional[Path], columns: Sequence[str]) -> None:
    if out is not None:
        write_rows_csv(rows, out, columns)
    else:
        sys.stdout.write(frame_to_csv_text(rows_to_frame(rows, columns)))


# ---------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------


def _cmd_embed(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    x = args.x
    if x is None:
        x = run_pipeline_step1_generate_data(cfg)["train"].X[0]
    rho = embed(np.asarray(x, dtype=float), cfg.embedding)
    _emit_json(
        {
            "family": cfg.embedding.family.value,
            "x": np.asarray(x, dtype=float),
            "d_H": cfg.embedding.hilbert_dim,
            "rho_real": np.ascontiguousarray(rho.real),
            "rho_imag": np.ascontiguousarray(rho.imag),
        }
    )
    return 0


def _cmd_train(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    data = run_pipeline_step1_generate_data(cfg)
    model = run_pipeline_step2_build_model(cfg)["model"]
    training = cfg.training
    result = train_adversarial(model, data["train"], training)
    if args.out is not None:
        write_rows_csv(result.trace_rows(), args.out, ["epoch", "adv_empirical_risk"])
    if args.checkpoint is not None:
        save_model(result.model, args.checkpoint)
    risks = estimate_risks(result.model, data["train"], data["test"], training.attack)
    _emit_json({"trace": result.trace, "risks": risks.as_row()})
    return 0


def _cmd_attack(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    train = run_pipeline_step1_generate_data(cfg)["train"]
    if not 0 <= args.index < len(train):
        raise ConfigError(f"--index {args.index} outside the {len(train)} training samples")
    model = load_model(args.checkpoint) if args.checkpoint else run_pipeline_step2_build_model(cfg)["model"]
    i = args.index
    outcome = attack_batch(model, train.X[i : i + 1], train.y[i : i + 1], cfg.attack)
    payload: Dict[str, Any] = {
        "index": i,
        "y": int(train.y[i]),
        "space": cfg.attack.space.value,
        "epsilon": cfg.attack.epsilon,
        "clean_loss": float(outcome.clean_losses[0]),
        "adversarial_loss": float(outcome.losses[0]),
        "x": train.X[i],
    }
    if cfg.attack.space is AttackSpace.CLASSICAL and outcome.inputs is not None:
        payload["x_adversarial"] = outcome.inputs[0]
    if outcome.iterations is not None:
        payload["halvings"] = int(outcome.iterations[0])
    _emit_json(payload)
    return 0


def _cmd_bounds(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    train = run_pipeline_step1_generate_data(cfg)["train"]
    model = run_pipeline_step2_build_model(cfg)["model"]
    _emit_rows(bound_rows(cfg, model, train), args.out, BOUND_COLUMNS)
    return 0


def _cmd_sweep_dim(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    rows = sweep_dimension(cfg, args.dims, args.families, args.seeds, progress=not args.quiet)
    _emit_rows(rows, args.out, DIMENSION_COLUMNS)
    return 0


def _cmd_sweep_noise(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    rows = sweep_noise(cfg, args.epsilons, args.lambda_min, args.seeds, progress=not args.quiet)
    _emit_rows(rows, args.out, NOISE_COLUMNS)
    return 0


def _cmd_sweep(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    rows = sweep_axis(cfg, args.axis, args.values, args.seeds, progress=not args.quiet)
    _emit_rows(rows, args.out, AXIS_COLUMNS)
    return 0


def _cmd_selftest(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    results = run_selftest(cfg.task.seed)
    _emit_json({"suites": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]})
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "embed": _cmd_embed,
    "train": _cmd_train,
    "attack": _cmd_attack,
    "bounds": _cmd_bounds,
    "sweep-dim": _cmd_sweep_dim,
    "sweep-noise": _cmd_sweep_noise,
    "sweep": _cmd_sweep,
    "selftest": _cmd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = _configure(args)
        return COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"Error: invalid configuration:\n{exc}", file=sys.stderr)
        return 1
    except QAdvLabError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())

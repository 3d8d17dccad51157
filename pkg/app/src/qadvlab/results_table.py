# src/qadvlab/results_table.py
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def rows_to_frame(rows: Sequence[Dict[str, Any]], columns: Sequence[str] | None = None) -> pd.DataFrame:
    """DataFrame with a fixed column order; columns missing from a row become NaN."""
    df = pd.DataFrame(list(rows))
    if columns is not None:
        df = df.reindex(columns=list(columns))
    return df


def frame_to_csv_text(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_rows_csv(
    rows: Sequence[Dict[str, Any]],
    out_csv: Path,
    columns: Sequence[str] | None = None,
) -> Dict[str, Any]:
    """
    Write rows as UTF-8 CSV: header row, 17 significant digits, LF endings,
    so identical rows give identical bytes.
    """
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    df = rows_to_frame(rows, columns)
    out_csv.write_bytes(frame_to_csv_text(df).encode("utf-8"))
    logger.info("[table] wrote %s with %d rows", out_csv, len(df))
    return {"csv": out_csv, "df": df}


def read_rows_csv(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"results CSV not found: {path}")
    return pd.read_csv(path, float_precision="round_trip")


def aggregate_rows(
    rows: Sequence[Dict[str, Any]],
    group_keys: Sequence[str],
    value_columns: Sequence[str],
) -> List[Dict[str, Any]]:
    """
    Two rows per group of "cell" rows: row_type "mean" and row_type "stderr"
    (sample std / sqrt(n); 0 for a single cell). Groups come out sorted.
    """
    cells = [r for r in rows if r.get("row_type") == "cell"]
    if not cells:
        return []
    df = pd.DataFrame(cells)
    out: List[Dict[str, Any]] = []
    for key, group in df.groupby(list(group_keys), sort=True):
        key = key if isinstance(key, tuple) else (key,)
        head = dict(zip(group_keys, key))
        n = len(group)
        mean_row = {"row_type": "mean", **head, "n_seeds": n}
        err_row = {"row_type": "stderr", **head, "n_seeds": n}
        for col in value_columns:
            if col not in group:
                continue
            values = group[col].to_numpy(dtype=float)
            values = values[np.isfinite(values)]
            if values.size == 0:
                continue
            mean_row[col] = math.fsum(values) / values.size
            err_row[col] = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        out.extend([mean_row, err_row])
    return out

import math

import pytest

from qadvlab.results_table import aggregate_rows, frame_to_csv_text, read_rows_csv, rows_to_frame, write_rows_csv

ROWS = [
    {"row_type": "cell", "family": "angle", "d": 2, "seed": 0, "value": 0.1},
    {"row_type": "cell", "family": "angle", "d": 2, "seed": 1, "value": 0.3},
    {"row_type": "cell", "family": "angle", "d": 4, "seed": 0, "value": 1.0 / 3.0},
    {"row_type": "error", "family": "angle", "d": 4, "seed": 1, "error": "DomainError: boom"},
]


def test_csv_bytes_are_deterministic(tmp_path):
    a = write_rows_csv(ROWS, tmp_path / "a.csv", ["row_type", "family", "d", "seed", "value", "error"])
    b = write_rows_csv(list(ROWS), tmp_path / "b.csv", ["row_type", "family", "d", "seed", "value", "error"])
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    text = a["csv"].read_text()
    assert "\r" not in text
    assert text.splitlines()[0] == "row_type,family,d,seed,value,error"
    assert "0.33333333333333331" in text


def test_floats_survive_a_round_trip(tmp_path):
    out = write_rows_csv(ROWS[:3], tmp_path / "rows.csv")
    df = read_rows_csv(out["csv"])
    assert df["value"].tolist() == [0.1, 0.3, 1.0 / 3.0]


def test_missing_columns_become_empty():
    df = rows_to_frame(ROWS, ["row_type", "value", "error"])
    assert list(df.columns) == ["row_type", "value", "error"]
    assert math.isnan(df["value"].iloc[3])
    assert frame_to_csv_text(df).splitlines()[1] == "cell,0.10000000000000001,"


def test_read_missing_csv(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_rows_csv(tmp_path / "none.csv")


def test_aggregate_mean_and_stderr():
    agg = aggregate_rows(ROWS, ["family", "d"], ["value"])
    assert [(r["row_type"], r["d"]) for r in agg] == [("mean", 2), ("stderr", 2), ("mean", 4), ("stderr", 4)]
    assert agg[0]["value"] == pytest.approx(0.2)
    assert agg[1]["value"] == pytest.approx(0.1)
    assert agg[0]["n_seeds"] == 2
    # the error row is not a cell
    assert agg[2]["n_seeds"] == 1 and agg[3]["value"] == 0.0


def test_aggregate_without_cells():
    assert aggregate_rows(ROWS[3:], ["family"], ["value"]) == []

from __future__ import annotations

import csv
import sys
from pathlib import Path
from typing import Any, TextIO

import pandas as pd

from .errors import DomainError
from .pricing import DiscountCurve

CURVE_FIELDS = ["T", "discount", "yield"]
PATH_FIELDS = ["path_id", "t", "tenor", "yield"]
VERIFY_FIELDS = ["check", "inputs", "lhs", "rhs", "z", "verdict"]


def format_value(value: Any) -> Any:
    # repr keeps every bit of a float, so reruns compare byte for byte
    if isinstance(value, float):
        return repr(float(value))
    return "" if value is None else value


def write_rows(stream: TextIO, rows: list[dict[str, Any]], fieldnames: list[str] | None = None) -> None:
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    writer = csv.DictWriter(stream, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_value(row.get(key)) for key in fieldnames})


def export_rows_to_csv(path: str | Path | None, rows: list[dict[str, Any]], fieldnames: list[str] | None = None) -> None:
    """Writes rows with a header; ``None`` or ``"-"`` means stdout."""
    if path is None or str(path) == "-":
        write_rows(sys.stdout, rows, fieldnames)
        return
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as f:
        write_rows(f, rows, fieldnames)


def read_discount_curve(path: str | Path) -> DiscountCurve:
    """Reads a ``T,discount`` CSV (extra columns such as ``yield`` are ignored)."""
    frame = pd.read_csv(path)
    missing = [col for col in ("T", "discount") if col not in frame.columns]
    if missing:
        raise DomainError(f"discount curve CSV {path} is missing columns: {', '.join(missing)}")
    frame = frame.sort_values("T")
    return DiscountCurve(
        maturities=tuple(float(v) for v in frame["T"]),
        discounts=tuple(float(v) for v in frame["discount"]),
    )


def write_discount_curve(path: str | Path | None, curve: DiscountCurve) -> None:
    export_rows_to_csv(path, curve.rows(), CURVE_FIELDS)

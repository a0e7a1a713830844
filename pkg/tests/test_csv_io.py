from __future__ import annotations

import pytest

from rateforge_core.csv_io import (
    CURVE_FIELDS,
    export_rows_to_csv,
    format_value,
    read_discount_curve,
    write_discount_curve,
)
from rateforge_core.errors import DomainError
from rateforge_core.pricing import DiscountCurve


def test_format_value_keeps_every_bit() -> None:
    value = 0.1 + 0.2
    assert float(format_value(value)) == value
    assert format_value(None) == ""
    assert format_value(3) == 3
    assert format_value("pass") == "pass"


def test_export_fills_missing_fields_in_the_given_order(capsys) -> None:
    export_rows_to_csv(None, [{"a": 1.5, "b": None}, {"a": 2, "b": "x"}])
    assert capsys.readouterr().out == "a,b\n1.5,\n2,x\n"
    export_rows_to_csv("-", [{"a": 1}, {"a": 2, "b": 3}], ["b", "a"])
    assert capsys.readouterr().out == "b,a\n,1\n3,2\n"


def test_export_to_stdout_and_file(tmp_path, capsys) -> None:
    rows = [{"name": "constant", "kernel": "expectation"}]
    export_rows_to_csv(None, rows)
    assert capsys.readouterr().out == "name,kernel\nconstant,expectation\n"
    out = tmp_path / "nested" / "rows.csv"
    export_rows_to_csv(out, rows)
    assert out.read_text(encoding="utf-8") == "name,kernel\nconstant,expectation\n"


def test_discount_curve_file_round_trip(tmp_path) -> None:
    curve = DiscountCurve((0.0, 0.5, 2.0), (1.0, 0.985, 0.94))
    path = tmp_path / "curve.csv"
    write_discount_curve(path, curve)
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(CURVE_FIELDS)
    loaded = read_discount_curve(path)
    assert loaded.maturities == curve.maturities
    assert loaded.discounts == pytest.approx(curve.discounts, rel=1e-15)


def test_read_discount_curve_sorts_and_checks_columns(tmp_path) -> None:
    path = tmp_path / "curve.csv"
    path.write_text("discount,T\n0.9,3\n0.97,1\n", encoding="utf-8")
    curve = read_discount_curve(path)
    assert curve.maturities == (1.0, 3.0)
    assert curve.discounts == pytest.approx((0.97, 0.9), rel=1e-15)
    bad = tmp_path / "bad.csv"
    bad.write_text("maturity,price\n1,0.97\n", encoding="utf-8")
    with pytest.raises(DomainError, match="missing columns: T, discount"):
        read_discount_curve(bad)
    negative = tmp_path / "negative.csv"
    negative.write_text("T,discount\n1,-0.5\n", encoding="utf-8")
    with pytest.raises(DomainError):
        read_discount_curve(negative)

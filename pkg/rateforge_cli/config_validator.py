from __future__ import annotations

from pathlib import Path
from typing import Any

from rateforge_core.config import PRESET_PREFIX, list_presets, load_config, validate_config
from rateforge_core.errors import ConfigError


def _numbers(value: Any) -> bool:
    return isinstance(value, list) and bool(value) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)


def validate_run_settings(doc: dict[str, Any]) -> list[str]:
    """Checks the sections the commands read (maturities, tenors, swaption, budgets)."""
    errors: list[str] = []
    maturities = doc.get("maturities")
    if maturities is not None:
        if not _numbers(maturities) or any(m < 0 for m in maturities):
            errors.append("maturities must be a non-empty list of non-negative numbers")
        elif any(b <= a for a, b in zip(maturities, maturities[1:])):
            errors.append(f"maturities must be strictly increasing (got {maturities})")
    tenors = doc.get("tenors")
    if tenors is not None and (not _numbers(tenors) or any(t <= 0 for t in tenors)):
        errors.append("tenors must be a non-empty list of positive numbers")
    for key in ("n_paths", "n"):
        value = doc.get(key)
        if value is not None and not (isinstance(value, int) and value > 0):
            errors.append(f"{key} must be a positive integer (got {value})")
    swaption = doc.get("swaption")
    if swaption is not None:
        if not isinstance(swaption, dict):
            errors.append("swaption must be an object with 'dates' and 'strike'")
        else:
            unknown = set(swaption) - {"dates", "strike"}
            if unknown:
                errors.append(f"swaption has unknown keys: {sorted(unknown)}")
            dates = swaption.get("dates")
            if not _numbers(dates) or len(dates) < 2 or any(b <= a for a, b in zip(dates, dates[1:])):
                errors.append("swaption.dates must list at least two strictly increasing dates")
            strike = swaption.get("strike", 0.0)
            if not (isinstance(strike, (int, float)) and strike >= 0):
                errors.append(f"swaption.strike must be non-negative (got {strike})")
    return errors


def validate_document(doc: Any) -> list[str]:
    errors = validate_config(doc)
    if isinstance(doc, dict):
        errors.extend(validate_run_settings(doc))
    return errors


def validate_config_file(source: str | Path) -> list[str]:
    try:
        doc = load_config(source)
    except ConfigError as exc:
        return exc.problems
    except KeyError as exc:
        return [str(exc).strip("'\"")]
    return validate_document(doc)


if __name__ == "__main__":
    problems = []
    for preset in list_presets():
        problems.extend(f"{preset['name']}: {p}" for p in validate_config_file(PRESET_PREFIX + preset["name"]))
    if problems:
        print("Preset validation failed:")
        for p in problems:
            print(f"- {p}")
        raise SystemExit(1)
    print("Preset validation passed.")

from __future__ import annotations

import json

import pytest

from rateforge_core.config import (
    SEED_ENV,
    build_model,
    list_presets,
    load_config,
    load_preset,
    resolve_seed,
    validate_config,
    with_values,
)
from rateforge_core.errors import ConfigError
from rateforge_core.kernels import EigenKernel, KilledKernel, TraceKernel, WeightedKernel

PRESETS = [
    "affine_cir",
    "constant",
    "eigen_bm",
    "eigen_ou",
    "killed_cir",
    "levy_cauchy",
    "trace_cauchy",
    "trace_gauss_heat",
    "trace_nig",
    "trace_quad_gauss",
    "trace_vg",
    "weighted_exp",
]


def test_presets_are_listed() -> None:
    rows = list_presets()
    assert [r["name"] for r in rows] == PRESETS
    assert all(r["description"] for r in rows)
    assert {r["name"]: r["kernel"] for r in rows}["killed_cir"] == "killed"


@pytest.mark.parametrize("name", PRESETS)
def test_every_preset_validates_and_builds(name: str) -> None:
    doc = load_preset(name)
    assert validate_config(doc) == []
    model = build_model(doc)
    assert len(model.state) == model.process.dim


def test_built_kernels_have_the_declared_types(preset_model) -> None:
    assert isinstance(preset_model("trace_vg").kernel, TraceKernel)
    assert isinstance(preset_model("weighted_exp").kernel, WeightedKernel)
    assert isinstance(preset_model("killed_cir").kernel, KilledKernel)
    eigen = preset_model("eigen_bm").kernel
    assert isinstance(eigen, EigenKernel)
    assert eigen.mu == pytest.approx(-0.5)


def test_preset_documents_are_independent_copies() -> None:
    doc = load_preset("constant")
    doc["x0"] = [5.0]
    assert load_preset("constant")["x0"] == [0.0]


def test_unknown_preset() -> None:
    with pytest.raises(KeyError):
        load_preset("nelson_siegel")
    with pytest.raises(KeyError):
        load_config("preset:nelson_siegel")


def test_load_config_reads_files_and_presets(tmp_path) -> None:
    path = tmp_path / "model.json"
    path.write_text(json.dumps(load_preset("eigen_bm")), encoding="utf-8")
    assert load_config(path) == load_preset("eigen_bm")
    assert load_config("preset:eigen_bm") == load_preset("eigen_bm")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(broken)
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.json")


def test_validate_config_collects_problems() -> None:
    assert validate_config([1, 2]) == ["config must be a JSON object"]
    doc = load_preset("trace_gauss_heat")
    del doc["x0"]
    doc["colour"] = "blue"
    doc["schema_version"] = 2
    doc["seed"] = -1
    doc["horizon"] = 0
    problems = validate_config(doc)
    assert any("missing keys" in p and "x0" in p for p in problems)
    assert any("unknown keys" in p and "colour" in p for p in problems)
    assert any("schema_version must be 1" in p for p in problems)
    assert any(p.startswith("seed must be") for p in problems)
    assert any(p.startswith("horizon must be") for p in problems)


@pytest.mark.parametrize(
    "path, value, fragment",
    [
        (("kernel", "params", "c"), 2.0, "c must be > 2"),
        (("kernel", "params", "lambda"), 0.0, "lambda must be > 0"),
        (("kernel", "params", "family"), "bessel", "Unknown trace family"),
        (("process", "type"), "jump_diffusion", "Unknown process type"),
        (("kernel", "type"), "hjm", "Unknown kernel type"),
        (("kernel", "params", "colour"), 1, "unknown params"),
    ],
)
def test_validate_config_reports_bad_kernels(path, value, fragment: str) -> None:
    doc = with_values(load_preset("trace_gauss_heat"), {path: value})
    problems = validate_config(doc)
    assert any(fragment in p for p in problems), problems
    with pytest.raises(ConfigError):
        build_model(doc)


def test_vg_trace_needs_enough_lambda() -> None:
    doc = load_preset("trace_vg")
    eta = doc["process"]["params"]["eta"]
    doc = with_values(doc, {("kernel", "params", "lambda"): 0.25 / eta})
    problems = validate_config(doc)
    assert any("eta·lambda > 1/2" in p for p in problems)


def test_eigen_needs_negative_mu() -> None:
    doc = with_values(load_preset("eigen_bm"), {("process", "params", "kappa"): [0.25]})
    problems = validate_config(doc)
    assert any("mu < 0" in p for p in problems), problems


def test_resolve_seed_precedence(monkeypatch) -> None:
    assert resolve_seed(None) == 0
    monkeypatch.setenv(SEED_ENV, "42")
    assert resolve_seed(None) == 42
    assert resolve_seed(None, {"seed": 7}) == 7
    assert resolve_seed(3, {"seed": 7}) == 3
    assert resolve_seed(None, {"seed": None}) == 42
    monkeypatch.setenv(SEED_ENV, "forty-two")
    with pytest.raises(ConfigError):
        resolve_seed(None)


def test_with_values_copies() -> None:
    doc = load_preset("affine_cir")
    updated = with_values(doc, {("kernel", "params", "mu", 1): -3.0, ("x0", 0): 0.05})
    assert updated["kernel"]["params"]["mu"] == [-0.5, -3.0]
    assert updated["x0"] == [0.05]
    assert doc["kernel"]["params"]["mu"] == [-0.5, -2.0]

from __future__ import annotations

import logging

import pytest

from rateforge_core import mc
from rateforge_core.config import build_model, load_preset, with_values
from rateforge_core.verification import (
    SUITES,
    VerificationReport,
    all_passed,
    cauchy_erratum_report,
    reports_to_csv,
    reports_to_text,
    verify_model,
)


def _by_check(reports: list[VerificationReport]) -> dict[str, list[VerificationReport]]:
    grouped: dict[str, list[VerificationReport]] = {}
    for r in reports:
        grouped.setdefault(r.check, []).append(r)
    return grouped


def test_trace_model_passes_every_suite(preset_model) -> None:
    reports = verify_model(preset_model("trace_gauss_heat"), n=20_000, seed=1, checks=3)
    assert all_passed(reports), reports_to_text(reports)
    grouped = _by_check(reports)
    assert len(grouped["propagation"]) == 3
    assert len(grouped["no_arbitrage"]) == 3 and len(grouped["no_arbitrage_mc"]) == 3
    assert all(r.verdict == "pass" for r in grouped["short_rate"])
    assert grouped["cauchy_erratum"][0].verdict == "skip"


def test_eigen_model_checks_its_closed_forms(preset_model) -> None:
    reports = verify_model(preset_model("eigen_bm"), suites=("swaption_parity",), n=40_000, seed=2, checks=2)
    assert all_passed(reports), reports_to_text(reports)
    grouped = _by_check(reports)
    assert set(grouped) == {"swaption_parity_mc", "swaption_parity_closed", "swaption_closed_vs_mc"}
    assert all(r.z is None for r in grouped["swaption_parity_closed"])


def test_killed_model_skips_what_it_cannot_check(preset_model) -> None:
    reports = verify_model(
        preset_model("killed_cir"), suites=("propagation", "supermartingale", "no_arbitrage", "positivity"), n=5_000, seed=3, checks=3
    )
    assert all_passed(reports), reports_to_text(reports)
    grouped = _by_check(reports)
    assert grouped["propagation"][0].verdict == "skip"
    assert "no_arbitrage_mc" not in grouped
    assert all(r.lhs >= 0.0 for r in grouped["short_rate"])


def test_affine_model_makes_no_positivity_claim(preset_model) -> None:
    reports = verify_model(preset_model("affine_cir"), suites=("supermartingale", "positivity", "swaption_parity"), n=5_000, seed=4, checks=2)
    grouped = _by_check(reports)
    assert grouped["supermartingale"][0].verdict == "skip"
    assert grouped["short_rate"][0].verdict == "skip"
    assert grouped["swaption_parity"][0].verdict == "skip"
    assert grouped["positivity"][0].verdict == "pass"


def test_weighted_supermartingale_includes_simulated_check(preset_model) -> None:
    reports = verify_model(preset_model("weighted_exp"), suites=("supermartingale",), n=20_000, seed=5, checks=2)
    assert all_passed(reports), reports_to_text(reports)
    grouped = _by_check(reports)
    assert len(grouped["supermartingale"]) == 2
    assert len(grouped["supermartingale_mc"]) == 2


def test_cauchy_erratum_accepts_bond_form_and_rejects_late_constant(preset_model) -> None:
    accepted, rejected = cauchy_erratum_report(preset_model("trace_cauchy"), seed=11)
    assert accepted.check == "cauchy_bond" and accepted.verdict == "pass"
    assert rejected.check == "cauchy_bond_late_constant" and rejected.verdict == "pass"
    assert abs(rejected.z) > 6.0
    assert rejected.rhs < accepted.rhs
    skipped = cauchy_erratum_report(preset_model("trace_gauss_heat"))
    assert skipped[0].verdict == "skip"


def test_verification_is_seed_deterministic(preset_model) -> None:
    model = preset_model("trace_quad_gauss")
    first = verify_model(model, suites=("propagation",), n=10_000, seed=9, checks=2)
    again = verify_model(model, suites=("propagation",), n=10_000, seed=9, checks=2, workers=3)
    assert first == again


def test_unknown_suite_is_a_key_error(preset_model) -> None:
    with pytest.raises(KeyError):
        verify_model(preset_model("constant"), suites=("calendar",))
    assert "cauchy_erratum" in SUITES


def test_verdict_logging(preset_model, caplog) -> None:
    with caplog.at_level(logging.INFO, logger="rateforge_core.verification"):
        verify_model(preset_model("constant"), suites=("positivity",), checks=1)
    assert "suite positivity" in caplog.text


def test_report_serialisers(tmp_path) -> None:
    reports = [
        VerificationReport("propagation", "t=1;s=0.5", 0.25, 0.25, 0.1, "pass", lhs_stderr=0.01),
        VerificationReport("supermartingale", "", None, None, None, "skip", note="no claim"),
        VerificationReport("short_rate", "t=1", -0.5, -1e-8, None, "fail"),
    ]
    assert not all_passed(reports)
    assert all_passed(reports[:2])
    text = reports_to_text(reports)
    assert "FAIL  short_rate" in text
    assert "(no claim)" in text
    assert text.endswith("1 passed, 1 failed, 1 skipped\n")
    out = tmp_path / "verify.csv"
    reports_to_csv(out, reports)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "check,inputs,lhs,rhs,z,verdict"
    assert lines[1] == "propagation,t=1;s=0.5,0.25,0.25,0.1,pass"
    assert lines[2] == "supermartingale,,,,,skip"


def test_simulated_supermartingale_checks_use_the_suite_threshold(preset_model, monkeypatch) -> None:
    requested = []
    real = mc.suite_threshold

    def recording(checks: int, *args, **kwargs) -> float:
        requested.append(checks)
        return real(checks, *args, **kwargs)

    monkeypatch.setattr(mc, "suite_threshold", recording)
    threshold = real(3)
    killed = with_values(load_preset("killed_cir"), {("kernel", "params", "estimator"): "mc"})
    for model in (preset_model("weighted_exp"), build_model(killed)):
        requested.clear()
        reports = verify_model(model, suites=("supermartingale",), n=4_000, seed=12, checks=3)
        assert requested == [3]
        assert all_passed(reports), reports_to_text(reports)
        for r in reports:
            if r.check == "supermartingale_mc":
                assert r.lhs <= r.rhs + threshold * r.lhs_stderr

from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from rateforge_core.config import build_model, load_preset  # noqa: E402


@pytest.fixture
def preset_model():
    def make(name: str):
        return build_model(load_preset(name))

    return make


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("HKA_SEED", raising=False)

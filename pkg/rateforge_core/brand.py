from __future__ import annotations

APP_NAME = "RateForge"
TAGLINE = "Arbitrage-free term structures from propagation kernels"
DISCLAIMER = "Research tool. Model prices are not quotes. No market data is fetched."
VERSION = "v0.9"

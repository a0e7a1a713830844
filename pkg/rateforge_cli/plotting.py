from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from rateforge_core.brand import APP_NAME  # noqa: E402


def plot_yield_paths(paths: pd.DataFrame, out_path: str | Path, title: str = "", dpi: int = 150) -> Path:
    """One panel per tenor, one line per simulated path."""
    tenors = sorted(paths["tenor"].unique())
    fig, axes = plt.subplots(1, len(tenors), figsize=(4.0 * len(tenors), 3.2), sharey=True, squeeze=False)
    for ax, tenor in zip(axes[0], tenors):
        panel = paths[paths["tenor"] == tenor]
        for _, path in panel.groupby("path_id"):
            ax.plot(path["t"], path["yield"], linewidth=0.9)
        ax.set_title(f"{tenor:g}y zero yield")
        ax.set_xlabel("t")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("yield")
    fig.suptitle(title or f"{APP_NAME} simulated yields")
    fig.tight_layout()
    target = Path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, dpi=dpi)
    plt.close(fig)
    return target

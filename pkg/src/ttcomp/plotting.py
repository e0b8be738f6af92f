"""PNG renderings of the figure experiments, written next to their CSV."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .entropy import lemma_bound  # noqa: E402
from .experiments import ExperimentResult  # noqa: E402


def _finish(fig, ax, path: Path) -> Path:
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    # fixed metadata keeps re-runs byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_figure3(result: ExperimentResult, path) -> Path:
    rows = result.rows
    M = [r["M"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for col, label, mk in (
        ("H_1_partition_bits", "1-partition", "o"),
        ("H_sqrtM_partition_bits", "sqrt(M)-partition", "s"),
        ("H_M_partition_bits", "M-partition", "^"),
    ):
        ax.plot(M, [r[col] for r in rows], marker=mk, label=label)
    ax.axhline(lemma_bound(1), color="k", ls="--", lw=0.8, label="(5/2)log2(2) + 12")
    ax.set_xscale("log")
    ax.set_xlabel("number of sensors M")
    ax.set_ylabel("H(U_1, ..., U_J) [bits]")
    return _finish(fig, ax, Path(path))


def plot_figure4(result: ExperimentResult, path) -> Path:
    rows = result.rows
    fig, ax = plt.subplots(figsize=(6, 4))
    for P in sorted({r["P_linear"] for r in rows}):
        sub = [r for r in rows if r["P_linear"] == P]
        M = [r["M"] for r in sub]
        ax.plot(M, [r["mrgb_rate_bits_per_channel_use"] for r in sub], marker="o", label=f"group broadcast, P={P:g}")
        ax.plot(
            M,
            [r["irr_upper_bound_bits_per_channel_use"] for r in sub],
            marker="s",
            ls="--",
            label=f"round-robin upper bound, P={P:g}",
        )
    ax.set_xscale("log")
    ax.set_xlabel("number of sensors M")
    ax.set_ylabel("computation rate [bits/channel use]")
    return _finish(fig, ax, Path(path))


PLOTTERS = {"figure3": plot_figure3, "figure4": plot_figure4}


def render(result: ExperimentResult, data_path) -> Path | None:
    """Render the figure for ``result`` beside ``data_path``; None if the kind has no figure."""
    fn = PLOTTERS.get(result.experiment)
    if fn is None:
        return None
    return fn(result, Path(data_path).with_suffix(".png"))

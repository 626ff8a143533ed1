"""Line charts of sweep results as standalone SVG files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import SweepResult

CHANNELS = ("split", "J", "unsat")

_XLABEL = {"alpha": "penetration rate alpha", "phi": "demand phi [veh/h]"}


def _undefined_spans(x: np.ndarray, defined: np.ndarray) -> list[tuple[float, float]]:
    """Contiguous parameter ranges where ``defined`` is False."""
    spans, start = [], None
    for k, ok in enumerate(defined):
        if not ok and start is None:
            start = x[k - 1] if k > 0 else x[k]
        if ok and start is not None:
            spans.append((start, x[k]))
            start = None
    if start is not None:
        spans.append((start, x[-1]))
    return spans


def emit_svg(sweep: SweepResult, channel: str, path) -> Path:
    """Render one channel of a sweep (``split``, ``J`` or ``unsat``) to ``path``.

    Rows where J is undefined are shaded grey. Raises ``ValueError`` before
    touching the file system when the channel has nothing to draw.
    """
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    x = sweep.params
    if channel == "split":
        series = {"R1": sweep.column("R1"), "R2": sweep.column("R2")}
        ylabel = "routing ratio at equilibrium"
    elif channel == "J":
        series = {"J": sweep.column("J")}
        ylabel = "J at equilibrium [veh/h]"
    else:
        series = {"route 1": sweep.column("unsat1"), "route 2": sweep.column("unsat2")}
        ylabel = "unsatisfied demand [veh/h]"
    if x.size == 0 or all(np.all(np.isnan(v)) for v in series.values()):
        raise ValueError(f"no data to plot for channel {channel!r}")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "tworoute"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        defined = np.array([r.J_defined for r in sweep.rows])
        for lo, hi in _undefined_spans(x, defined):
            ax.axvspan(lo, hi, color="0.85", zorder=0, label="J undefined")
        for name, y in series.items():
            ax.plot(x, y, label=name)
        if channel == "J" and np.any(~np.isnan(series["J"])):
            k = int(np.nanargmin(series["J"]))
            ax.plot([x[k]], [series["J"][k]], "o", color="k",
                    label=f"min at {x[k]:.4g}")
        ax.set_xlabel(_XLABEL.get(sweep.vary, sweep.vary))
        ax.set_ylabel(ylabel)
        handles, labels = ax.get_legend_handles_labels()
        seen = dict(zip(labels, handles))
        ax.legend(seen.values(), seen.keys())
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return path


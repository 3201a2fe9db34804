"""Figure assembly for the four supported plot kinds."""

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import Table, VizInputError, read_table

__all__ = ["KINDS", "PlotJob", "build_figure", "render"]

KINDS = ("shell3d", "xzgraph", "nyquist", "timeseries")

_XLABEL = r"$x=\mathrm{Re}\,v^*\!Av$"
_YLABEL = r"$y=\mathrm{Im}\,v^*\!Av$"
_ZLABEL = r"$z=\Vert Av\Vert^2$"


@dataclass
class PlotJob:
    kind: str
    inputs: list = field(default_factory=list)
    output: str = "figure.png"
    title: str | None = None
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise VizInputError(
                f"unknown figure kind {self.kind!r} (choose from {', '.join(KINDS)})")
        if not self.inputs:
            raise VizInputError("at least one input CSV is required")


def _split(tables: list[Table], kind: str,
           wanted: tuple[str, ...]) -> dict[str, list[Table]]:
    groups: dict[str, list[Table]] = {w: [] for w in wanted}
    for t in tables:
        if t.kind not in wanted:
            raise VizInputError(
                f"{t.path}: a {t.kind or 'unknown'} CSV (columns "
                f"{','.join(t.columns)}) does not belong on a {kind} figure")
        groups[t.kind].append(t)
    return groups


def _finite(t: Table, names: tuple[str, ...]) -> list[np.ndarray]:
    cols = [t.col(n) for n in names]
    keep = np.all(np.isfinite(np.stack(cols)), axis=0)
    return [c[keep] for c in cols]


def _render_shell3d(tables, ax) -> None:
    groups = _split(tables, "shell3d", ("cloud", "segment"))
    if not groups["cloud"]:
        raise VizInputError("shell3d needs at least one x,y,z cloud CSV")
    for t in groups["cloud"]:
        x, y, z = _finite(t, ("x", "y", "z"))
        ax.scatter(x, y, z, s=3.0, alpha=0.35, label=t.path.stem,
                   depthshade=False)
    for t in groups["segment"]:
        x, z = _finite(t, ("x", "z"))
        ax.plot(x, np.zeros_like(x), z, color="red", lw=2.0,
                label="network shell")
    ax.set_xlabel(_XLABEL)
    ax.set_ylabel(_YLABEL)
    ax.set_zlabel(_ZLABEL)
    ax.legend(loc="upper left", fontsize=8)


def _render_xzgraph(tables, ax) -> None:
    groups = _split(tables, "xzgraph", ("cloud", "segment"))
    if not groups["cloud"] and not groups["segment"]:
        raise VizInputError("xzgraph needs cloud and/or segment CSVs")
    xs_all, cloud_pts = [], []
    for t in groups["cloud"]:
        x, _y, z = _finite(t, ("x", "y", "z"))
        ax.scatter(x, z, s=6.0, alpha=0.5, label=t.path.stem)
        xs_all.append(x)
        cloud_pts.append(np.stack([x, z], axis=-1))
    gscr = None
    seg_pts = None
    for t in groups["segment"]:
        x, z = _finite(t, ("x", "z"))
        ax.plot(x, z, color="red", lw=2.0, label="network arm")
        xs_all.append(x)
        gscr = -float(x.max())
        seg_pts = np.stack([x, z], axis=-1)

    # the containment boundary is part of every x-z picture
    lo = min(float(x.min()) for x in xs_all)
    hi = max(float(x.max()) for x in xs_all)
    pad = 0.1 * (hi - lo + 1.0)
    u = np.linspace(lo - pad, hi + pad, 400)
    ax.plot(u, u * u, color="0.4", lw=1.0, ls="--", label=r"$z=x^2$")
    if gscr is not None:
        ax.axvspan(lo - pad, -gscr, color="red", alpha=0.08)

    if cloud_pts and seg_pts is not None:
        pts = np.concatenate(cloud_pts)
        d2 = ((pts[:, None, :] - seg_pts[None, :, :]) ** 2).sum(-1)
        i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
        a, b = pts[i], seg_pts[j]
        ax.plot([a[0], b[0]], [a[1], b[1]], color="0.2", lw=1.0, ls=":")
        ax.annotate(f"gap {np.sqrt(d2[i, j]):.3g}",
                    xy=(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])),
                    fontsize=8, color="0.2")
    ax.set_xlabel(_XLABEL)
    ax.set_ylabel(_ZLABEL)
    ax.legend(loc="best", fontsize=8)


def _render_nyquist(tables, ax) -> None:
    groups = _split(tables, "nyquist", ("locus",))
    for t in groups["locus"]:
        re, im = _finite(t, ("re", "im"))
        ax.plot(re, im, lw=1.0, label=t.path.stem)
    ax.plot([0.0], [0.0], marker="+", color="black", ms=12, mew=2.0,
            ls="none", label="origin")
    ax.axhline(0.0, color="0.85", lw=0.8, zorder=0)
    ax.axvline(0.0, color="0.85", lw=0.8, zorder=0)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.legend(loc="best", fontsize=8)


def _render_timeseries(tables, ax) -> None:
    groups = _split(tables, "timeseries", ("timeseries",))
    many = len(groups["timeseries"]) > 1
    for t in groups["timeseries"]:
        time = t.col("t")
        for name in t.columns[1:]:
            label = f"{t.path.stem}:{name}" if many else name
            ax.plot(time, t.col(name), lw=0.9, label=label)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("deviation")
    ax.legend(loc="upper right", fontsize=7, ncols=2)


def build_figure(job: PlotJob):
    """Parse the job's inputs and return the finished matplotlib figure."""
    tables = [read_table(p) for p in job.inputs]
    if job.kind == "shell3d":
        fig = plt.figure(figsize=(7.0, 5.6))
        ax = fig.add_subplot(projection="3d")
        _render_shell3d(tables, ax)
    else:
        fig, ax = plt.subplots(figsize=(7.0, 5.0))
        {"xzgraph": _render_xzgraph,
         "nyquist": _render_nyquist,
         "timeseries": _render_timeseries}[job.kind](tables, ax)
    ax.set_title(job.title if job.title is not None
                 else f"{job.kind}: {', '.join(Path(p).stem for p in job.inputs)}",
                 fontsize=10)
    fig.tight_layout()
    return fig


def render(job: PlotJob) -> Path:
    """Render the job to its output path and return that path."""
    fig = build_figure(job)
    out = Path(job.output)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    kwargs = {}
    if out.suffix.lower() == ".png":
        # pin the only non-content PNG field so re-runs are byte-identical
        kwargs["metadata"] = {"Software": "dwshell-viz"}
    try:
        fig.savefig(out, dpi=job.dpi, **kwargs)
    finally:
        plt.close(fig)
    return out

"""Separation certificates: converter shells vs. the network parabola.

The closed loop of a converter fleet behind an inductive grid is
certified stable when, at every swept frequency, the x-z projection of
each converter's shell stays clear of the arm {(u, u^2) : u <= -gscr}.
This module computes those margins, classifies per-frequency verdicts,
and assembles the overall report, in two flavors:

* decentralized: each 2x2 converter block is tested on its own (the
  per-device certificate that only needs the scalar gscr of the grid);
* centralized: the whole block-diagonal fleet response is tested at
  once.  Its x-z hull is the convex hull of the union of the block
  projections, so the centralized margin can only be smaller.

Margins for 2x2 responses are computed from the analytic projection
ellipse (no sampling error): distance between the ellipse boundary and
the arm, with the point-to-arm leg solved exactly via the cubic
stationarity condition.  The method certifies; it never claims
instability.  A non-separated verdict means "not certified" and the
eigenvalue/Nyquist oracles should be consulted.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from io import StringIO

import numpy as np

from .converters import ConverterFleet, freq_response
from .errors import InputError
from .geometry import convex_hull_2d, parabola_arm_distance, parabola_ray_margin
from .network import ParabolaSegment, ReducedNetwork, network_shell_segment
from .shells import ShellCloud, xz_ellipse_boundary_points, xz_ellipse_params

__all__ = [
    "TOL_SEP", "SeparationResult", "StabilityReport", "FrequencySweep",
    "default_sweep", "xz_margin", "decentralized_certify", "centralized_certify",
]

TOL_SEP = 1e-6

VERDICT_SEPARATED = "separated"
VERDICT_INTERSECTING = "intersecting"
VERDICT_INCONCLUSIVE = "inconclusive"

_CONTAINMENT_SLACK = 1e-9   # shells live above z = x^2 up to roundoff


def classify_margin(margin: float, tol_sep: float = TOL_SEP) -> str:
    if margin > tol_sep:
        return VERDICT_SEPARATED
    if margin < -tol_sep:
        return VERDICT_INTERSECTING
    return VERDICT_INCONCLUSIVE


@dataclass(frozen=True)
class SeparationResult:
    """Margin of one shell against the network arm at one frequency."""
    omega: float
    converter_index: int | str      # block index, or "aggregate"
    margin: float
    nearest_shell_point: tuple[float, float]
    nearest_curve_point: tuple[float, float]
    verdict: str


@dataclass(frozen=True)
class FrequencySweep:
    """Sorted evaluation grid in rad/s; may include 0 and inf."""
    omegas: np.ndarray
    f_min_hz: float = 0.1
    f_max_hz: float = 1000.0
    n_points: int = 400

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise InputError("sweep needs at least two frequencies")
        if np.any(np.diff(w) <= 0.0):
            raise InputError("sweep frequencies must be strictly increasing")
        if w[0] < 0.0:
            raise InputError("sweep frequencies must be non-negative")
        object.__setattr__(self, "omegas", w)

    def __len__(self) -> int:
        return self.omegas.size


def default_sweep(f_min_hz: float = 0.1, f_max_hz: float = 1000.0,
                  n_points: int = 400) -> FrequencySweep:
    """Log grid over [f_min, f_max] Hz, with DC and the infinite-frequency
    limit prepended/appended so the sweep closes the [0, inf) range."""
    if not (0.0 < f_min_hz < f_max_hz):
        raise InputError(f"need 0 < f_min < f_max, got {f_min_hz}, {f_max_hz}")
    if n_points < 2:
        raise InputError("n_points must be at least 2")
    body = 2.0 * np.pi * np.logspace(np.log10(f_min_hz), np.log10(f_max_hz), n_points)
    omegas = np.concatenate([[0.0], body, [np.inf]])
    return FrequencySweep(omegas=omegas, f_min_hz=f_min_hz, f_max_hz=f_max_hz,
                          n_points=n_points)


def _as_sweep(sweep) -> FrequencySweep:
    if sweep is None:
        return default_sweep()
    if isinstance(sweep, FrequencySweep):
        return sweep
    w = np.unique(np.asarray(sweep, dtype=float))
    return FrequencySweep(omegas=w)


# ---------------------------------------------------------------------------
# margin of a sampled shell cloud (general-dimension path)


def xz_margin(cloud: ShellCloud, segment: ParabolaSegment
              ) -> tuple[float, tuple[float, float], tuple[float, float]]:
    """Signed distance between a shell's x-z hull and the network arm.

    Positive margins are the Euclidean gap, realized by the returned
    (shell point, curve point) pair.  Negative margins report the
    deepest penetration; that can only happen for synthetic clouds,
    since genuine shell data lies weakly above the parabola.
    """
    if len(cloud) == 0:
        raise InputError("cannot compute a margin for an empty shell cloud")
    hull = cloud.xz_hull
    u_max = segment.u_max
    margin, shell_pt, curve_pt = parabola_ray_margin(hull, u_max)
    if margin > 0.0:
        # vertices sitting below the parabola, left of the endpoint, mean
        # the hull lives inside the forbidden region even without a
        # boundary crossing; genuine shells never do this
        hx, hz = hull[:, 0], hull[:, 1]
        scale = np.maximum(1.0, hx * hx)
        viol = (hx <= u_max) & (hz < hx * hx - _CONTAINMENT_SLACK * scale)
        if viol.any():
            dists, us = parabola_arm_distance(hull[viol], u_max)
            k = int(np.argmax(dists))
            vtx = hull[viol][k]
            margin = -float(dists[k])
            shell_pt = vtx
            curve_pt = np.array([us[k], us[k] ** 2])
    return float(margin), (float(shell_pt[0]), float(shell_pt[1])), \
        (float(curve_pt[0]), float(curve_pt[1]))


# ---------------------------------------------------------------------------
# analytic ellipse-vs-arm margins for stacks of 2x2 responses


_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def _boundary_arm_dist(params: dict, t: np.ndarray, u_max: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Arm distance of ellipse boundary points at anomalies t (m, k)."""
    pts = xz_ellipse_boundary_points(params, t)
    flat = pts.reshape(-1, 2)
    d, u = parabola_arm_distance(flat, u_max)
    return d.reshape(t.shape), u.reshape(t.shape)


def _ellipse_arm_margins(params: dict, u_max: float, n_boundary: int = 64,
                         refine_iters: int = 30) -> dict:
    """Distance from each projection ellipse boundary to the arm.

    Coarse minimum over an eccentric-anomaly grid, then golden-section
    refinement of the anomaly per ellipse.  Also flags frequencies where
    the arm enters the open ellipse interior (those need the exact
    polygon fallback; impossible for true shells except at tangency).
    """
    m = params["cx"].shape[0]
    t0 = np.linspace(0.0, 2.0 * np.pi, n_boundary, endpoint=False)
    d0, _ = _boundary_arm_dist(params, np.broadcast_to(t0, (m, n_boundary)), u_max)
    j = np.argmin(d0, axis=1)
    step = 2.0 * np.pi / n_boundary
    lo = t0[j] - step
    hi = t0[j] + step
    for _ in range(refine_iters):
        span = hi - lo
        t1 = hi - _GOLDEN * span
        t2 = lo + _GOLDEN * span
        d1, _ = _boundary_arm_dist(params, np.stack([t1], axis=1), u_max)
        d2, _ = _boundary_arm_dist(params, np.stack([t2], axis=1), u_max)
        take_lo = d1.ravel() < d2.ravel()
        hi = np.where(take_lo, t2, hi)
        lo = np.where(take_lo, lo, t1)
    t_star = 0.5 * (lo + hi)
    pts = xz_ellipse_boundary_points(params, t_star[:, None])[:, 0, :]
    dist, u_star = parabola_arm_distance(pts, u_max)

    inside = _arm_enters_ellipse(params, u_max)
    return {"margin": dist, "shell_pt": pts,
            "curve_pt": np.stack([u_star, u_star * u_star], axis=-1),
            "inside": inside}


def _arm_enters_ellipse(params: dict, u_max: float, n_check: int = 33) -> np.ndarray:
    """True where arm points lie strictly inside the ellipse interior."""
    cx, cz = params["cx"], params["cz"]
    a, b, phi = params["a"], params["b"], params["phi"]
    u_lo = cx - a
    u_hi = np.minimum(cx + a, u_max)
    has_window = u_hi > u_lo
    frac = np.linspace(0.0, 1.0, n_check)
    u = u_lo[:, None] + (u_hi - u_lo)[:, None] * frac
    dx = u - cx[:, None]
    dz = u * u - cz[:, None]
    cphi, sphi = np.cos(phi)[:, None], np.sin(phi)[:, None]
    qx = dx * cphi + dz * sphi
    qz = -dx * sphi + dz * cphi
    a_safe = np.where(a <= 0.0, 1.0, a)[:, None]
    b_safe = np.where(b <= 0.0, 1.0, b)[:, None]
    rho2 = (qx / a_safe) ** 2 + (qz / b_safe) ** 2
    degenerate = (a <= 0.0) | (b <= 0.0)
    inside = np.any(rho2 < 1.0 - 1e-10, axis=1) & has_window & ~degenerate
    return inside


def _exact_hull_margin_2x2(y: np.ndarray, u_max: float, n_boundary: int = 512
                           ) -> tuple[float, np.ndarray, np.ndarray]:
    """Polygon fallback for a single 2x2 response (touch/penetration cases)."""
    params = xz_ellipse_params(y[None])
    t = np.linspace(0.0, 2.0 * np.pi, n_boundary, endpoint=False)
    boundary = xz_ellipse_boundary_points(params, t)[0]
    hull = convex_hull_2d(boundary)
    return parabola_ray_margin(hull, u_max)


def _thread_count() -> int:
    raw = os.environ.get("DWSHELL_THREADS", "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _chunked(fn, omegas: np.ndarray):
    """Run fn over omega chunks, possibly threaded, preserving order."""
    k = _thread_count()
    if k <= 1 or omegas.size < 4 * k:
        return fn(omegas)
    chunks = np.array_split(omegas, k)
    with ThreadPoolExecutor(max_workers=k) as pool:
        parts = list(pool.map(fn, chunks))
    return {key: np.concatenate([p[key] for p in parts], axis=0) for key in parts[0]}


def _block_margin_arrays(block, ws: np.ndarray, u_max: float) -> dict:
    """Analytic per-frequency margins of one 2-port block (unchunked)."""
    y = freq_response(block, ws)
    params = xz_ellipse_params(y)
    out = _ellipse_arm_margins(params, u_max)
    if out["inside"].any():
        for i in np.nonzero(out["inside"])[0]:
            mg, sp, cp = _exact_hull_margin_2x2(y[i], u_max)
            out["margin"][i] = mg
            out["shell_pt"][i] = sp
            out["curve_pt"][i] = cp
    return out


def _block_margins(block, omegas: np.ndarray, u_max: float) -> dict:
    """Margins of one 2-port block over a frequency grid."""
    return _chunked(lambda ws: _block_margin_arrays(block, ws, u_max), omegas)


def _fleet_union_margins(fleet: ConverterFleet, omegas: np.ndarray, u_max: float,
                         n_boundary: int = 256) -> dict:
    """Margins of the aggregate fleet response over a frequency grid.

    The x-z projection of the block-diagonal aggregate is the convex
    hull of the union of the block projection ellipses (any unit vector
    splits into per-block pieces, making every aggregate point a convex
    combination of block points), so the hull is assembled from the
    exact per-block boundaries instead of sampling the 2N-sphere.

    The inscribed polygon only errs on the ellipse arcs themselves, so
    the reported margin is the minimum of the polygon estimate and the
    exact per-block margins; both bound the true hull margin from above
    and the min restores pointwise dominance over the decentralized
    test, which resonance-sized sagittas would otherwise break.
    """
    def run(ws: np.ndarray) -> dict:
        t = np.linspace(0.0, 2.0 * np.pi, n_boundary, endpoint=False)
        boundaries = []
        for blk in fleet.blocks:
            params = xz_ellipse_params(freq_response(blk, ws))
            boundaries.append(xz_ellipse_boundary_points(
                params, np.broadcast_to(t, (ws.size, n_boundary))))
        stacked = np.concatenate(boundaries, axis=1)   # (nw, N*nb, 2)
        n = ws.size
        margin = np.empty(n)
        shell_pt = np.empty((n, 2))
        curve_pt = np.empty((n, 2))
        for i in range(n):
            hull = convex_hull_2d(stacked[i])
            mg, sp, cp = parabola_ray_margin(hull, u_max)
            margin[i] = mg
            shell_pt[i] = sp
            curve_pt[i] = cp
        for blk in fleet.blocks:
            bm = _block_margin_arrays(blk, ws, u_max)
            take = bm["margin"] < margin
            margin[take] = bm["margin"][take]
            shell_pt[take] = bm["shell_pt"][take]
            curve_pt[take] = bm["curve_pt"][take]
        return {"margin": margin, "shell_pt": shell_pt, "curve_pt": curve_pt}
    return _chunked(run, omegas)


# ---------------------------------------------------------------------------
# adaptive sweep


def _insert_between(w_lo: float, w_hi: float, per_gap: int = 3) -> list[float]:
    """Refinement points between two grid frequencies (x4 densification)."""
    ks = np.arange(1, per_gap + 1)
    if w_lo == 0.0 and np.isfinite(w_hi):
        return (w_hi / 4.0 ** ks).tolist()
    if np.isinf(w_hi) and w_lo > 0.0:
        return (w_lo * 4.0 ** ks).tolist()
    if w_lo > 0.0 and np.isfinite(w_hi):
        ratio = (w_hi / w_lo) ** (1.0 / (per_gap + 1))
        return (w_lo * ratio ** ks).tolist()
    return []


def _refinement_points(omegas: np.ndarray, min_margins: np.ndarray,
                       cap: int = 240) -> np.ndarray:
    """New frequencies around margin dips.

    A grid point is a dip when it is a local minimum of the margin, or
    when a neighbor exceeds it fivefold (narrow-resonance guard); both
    neighbors of each dip interval get densified.
    """
    m = min_margins
    n = m.size
    idx = set()
    for i in range(n):
        left = m[i - 1] if i > 0 else np.inf
        right = m[i + 1] if i < n - 1 else np.inf
        if m[i] <= left and m[i] <= right:
            idx.add(i)
        if max(left, right) > 5.0 * max(m[i], 0.0) and np.isfinite(max(left, right)):
            idx.add(i)
    idx.add(int(np.argmin(m)))
    new: list[float] = []
    for i in sorted(idx):
        if i > 0:
            new.extend(_insert_between(omegas[i - 1], omegas[i]))
        if i < n - 1:
            new.extend(_insert_between(omegas[i], omegas[i + 1]))
    fresh = np.unique(np.asarray(new, dtype=float))
    fresh = np.setdiff1d(fresh, omegas)
    if fresh.size > cap:
        # keep points nearest the global dip
        w_star = omegas[int(np.argmin(m))]
        order = np.argsort(np.abs(np.log(np.maximum(fresh, 1e-300))
                                  - np.log(max(w_star, 1e-300))))
        fresh = np.sort(fresh[order[:cap]])
    return fresh


@dataclass
class StabilityReport:
    """Per-frequency separation results and the overall certificate."""
    mode: str
    gscr: float
    tol_sep: float
    omegas: np.ndarray
    converter_names: list[str]
    margins: np.ndarray                      # (n_series, n_omegas)
    results: list[SeparationResult]
    overall_verdict: str
    flagged: list[SeparationResult]
    critical_frequencies: list[tuple[float, int | str, float]]
    adaptive_rounds: int = 0
    series_labels: list[str] = field(default_factory=list)

    def min_margin(self) -> float:
        return float(self.margins.min())

    def certified(self) -> bool:
        return self.overall_verdict == "certified_stable"

    def summary(self) -> str:
        """Aligned-column human summary."""
        buf = StringIO()
        buf.write(f"verdict: {self.overall_verdict}\n")
        buf.write(f"mode: {self.mode}   gscr: {self.gscr:.6g}   "
                  f"tol_sep: {self.tol_sep:.3g}   frequencies: {len(self.omegas)}"
                  f"   adaptive rounds: {self.adaptive_rounds}\n")
        header = f"{'series':<22}{'min margin':>14}{'at (Hz)':>12}  verdict"
        buf.write(header + "\n")
        for k, label in enumerate(self.series_labels):
            i = int(np.argmin(self.margins[k]))
            w = self.omegas[i]
            hz = w / (2.0 * np.pi) if np.isfinite(w) else np.inf
            verdict = classify_margin(float(self.margins[k, i]), self.tol_sep)
            buf.write(f"{label:<22}{self.margins[k, i]:>14.6e}{hz:>12.4g}  {verdict}\n")
        if self.flagged:
            buf.write(f"non-separated points: {len(self.flagged)}\n")
            for r in self.flagged[:12]:
                hz = r.omega / (2.0 * np.pi) if np.isfinite(r.omega) else np.inf
                buf.write(f"  converter={r.converter_index} f={hz:.4g} Hz "
                          f"margin={r.margin:.3e} ({r.verdict})\n")
            if len(self.flagged) > 12:
                buf.write(f"  ... {len(self.flagged) - 12} more\n")
        return buf.getvalue()

    def record(self) -> str:
        """Structured-text record (machine-oriented)."""
        lines = [
            "stability_report:",
            f"  mode: {self.mode}",
            f"  overall_verdict: {self.overall_verdict}",
            f"  gscr: {self.gscr:.17g}",
            f"  tol_sep: {self.tol_sep:.17g}",
            f"  n_frequencies: {len(self.omegas)}",
            f"  adaptive_rounds: {self.adaptive_rounds}",
            f"  min_margin: {self.min_margin():.17g}",
            f"  flagged_count: {len(self.flagged)}",
            "  critical_frequencies:",
        ]
        for w, idx, mg in self.critical_frequencies:
            hz = w / (2.0 * np.pi) if np.isfinite(w) else float("inf")
            lines.append(f"    - {{omega: {w:.17g}, hz: {hz:.17g}, "
                         f"converter: {idx}, margin: {mg:.17g}}}")
        return "\n".join(lines) + "\n"

    def margins_csv(self) -> str:
        buf = StringIO()
        buf.write("omega_rad_s,frequency_hz,converter_index,margin,verdict\n")
        for r in self.results:
            hz = r.omega / (2.0 * np.pi) if np.isfinite(r.omega) else np.inf
            buf.write(f"{r.omega:.17g},{hz:.17g},{r.converter_index},"
                      f"{r.margin:.17g},{r.verdict}\n")
        return buf.getvalue()


def _run_certification(fleet: ConverterFleet, rn: ReducedNetwork, sweep,
                       mode: str, adaptive: bool, tol_sep: float,
                       max_rounds: int = 5) -> StabilityReport:
    if len(fleet) != rn.n_converters:
        raise InputError(f"fleet has {len(fleet)} converters for "
                         f"{rn.n_converters} network buses")
    for blk in fleet.blocks:
        if blk.n_ports != 2:
            raise InputError(
                f"block {blk.name or '<unnamed>'} has {blk.n_ports} ports; "
                "certification expects 2x2 dq admittances")
    segment = network_shell_segment(rn)
    u_max = segment.u_max
    sw = _as_sweep(sweep)
    omegas = sw.omegas.copy()

    if mode == "decentralized":
        series = [(i, fleet.blocks[i]) for i in range(len(fleet))]
        labels = list(fleet.names)
        def evaluate(ws: np.ndarray) -> np.ndarray:
            data = [_block_margins(blk, ws, u_max) for _, blk in series]
            return data
        indices: list[int | str] = [i for i, _ in series]
    elif mode == "centralized":
        if len(fleet) == 1:
            def evaluate(ws: np.ndarray):
                return [_block_margins(fleet.blocks[0], ws, u_max)]
        else:
            def evaluate(ws: np.ndarray):
                return [_fleet_union_margins(fleet, ws, u_max)]
        labels = ["aggregate"]
        indices = ["aggregate"]
    else:
        raise InputError(f"unknown certification mode {mode!r}")

    data = evaluate(omegas)
    rounds = 0
    if adaptive:
        prev_min = min(float(d["margin"].min()) for d in data)
        while rounds < max_rounds:
            stackmin = np.min(np.stack([d["margin"] for d in data]), axis=0)
            fresh = _refinement_points(omegas, stackmin)
            if fresh.size == 0:
                break
            new_data = evaluate(fresh)
            merged = np.concatenate([omegas, fresh])
            order = np.argsort(merged)
            omegas = merged[order]
            for k in range(len(data)):
                for key in ("margin", "shell_pt", "curve_pt"):
                    data[k][key] = np.concatenate(
                        [data[k][key], new_data[k][key]], axis=0)[order]
            rounds += 1
            cur_min = min(float(d["margin"].min()) for d in data)
            if abs(prev_min - cur_min) <= 0.05 * max(abs(prev_min), 1e-12):
                break
            prev_min = cur_min

    margins = np.stack([d["margin"] for d in data])
    results: list[SeparationResult] = []
    flagged: list[SeparationResult] = []
    for i, w in enumerate(omegas):
        for k, d in enumerate(data):
            verdict = classify_margin(float(d["margin"][i]), tol_sep)
            res = SeparationResult(
                omega=float(w), converter_index=indices[k],
                margin=float(d["margin"][i]),
                nearest_shell_point=(float(d["shell_pt"][i, 0]),
                                     float(d["shell_pt"][i, 1])),
                nearest_curve_point=(float(d["curve_pt"][i, 0]),
                                     float(d["curve_pt"][i, 1])),
                verdict=verdict)
            results.append(res)
            if verdict != VERDICT_SEPARATED:
                flagged.append(res)

    critical = []
    for k, d in enumerate(data):
        i = int(np.argmin(d["margin"]))
        critical.append((float(omegas[i]), indices[k], float(d["margin"][i])))
    critical.sort(key=lambda item: item[2])

    if not results:
        overall = "inconclusive"
    elif not flagged:
        overall = "certified_stable"
    else:
        overall = "not_certified"

    return StabilityReport(
        mode=mode, gscr=rn.gscr, tol_sep=tol_sep, omegas=omegas,
        converter_names=list(fleet.names), margins=margins, results=results,
        overall_verdict=overall, flagged=flagged,
        critical_frequencies=critical, adaptive_rounds=rounds,
        series_labels=labels)


def decentralized_certify(fleet: ConverterFleet, rn: ReducedNetwork,
                          sweep=None, *, adaptive: bool = True,
                          tol_sep: float = TOL_SEP) -> StabilityReport:
    """Per-converter certificate against the gscr parabola arm.

    Sufficient condition only: ``certified_stable`` requires every
    converter separated at every swept frequency.  Anything else is
    "not certified", with the eigenvalue oracle recommended for the
    flagged cases.
    """
    return _run_certification(fleet, rn, sweep, "decentralized", adaptive, tol_sep)


def centralized_certify(fleet: ConverterFleet, rn: ReducedNetwork,
                        sweep=None, *, adaptive: bool = True,
                        tol_sep: float = TOL_SEP) -> StabilityReport:
    """Whole-fleet certificate using the aggregate response's x-z hull.

    With one converter this coincides with the decentralized test (and
    shares its code path); with several it is at most as permissive,
    since the aggregate hull contains every block projection.
    """
    return _run_certification(fleet, rn, sweep, "centralized", adaptive, tol_sep)

"""Ground-truth stability oracles, independent of the shell machinery.

Three cross-checks on the same closed loop (converter fleet behind the
static inductive grid):

* ``closed_loop_eigs``: eigenvalues of the interconnected state matrix;
* ``gnc_locus``: origin encirclements of det(I + G^{-1} Y(s)) along the
  closed right-half-plane contour (generalized Nyquist);
* ``simulate_step``: fixed-step linear time response to a disturbance.

The certification path never consults these; they exist to verify it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .converters import ConverterFleet, aggregate_state_space, transfer_at
from .errors import AlgebraicLoopError, InputError, MarginalLocusError
from .network import ReducedNetwork, grid_admittance

__all__ = [
    "ClosedLoopModel", "ClosedLoopSpectrum", "GncResult", "TimeSeries",
    "build_closed_loop", "closed_loop_eigs", "gnc_locus", "simulate_step",
    "det_identity_check",
]

_COND_LIMIT = 1e12
_LOCUS_MIN_DIST = 1e-9
_ARG_JUMP = np.pi / 2.0


@dataclass
class ClosedLoopModel:
    """Fleet states under static network feedback.

    With K = G + D_agg (G the grid admittance, load-convention device
    feedthrough D_agg), bus voltages satisfy v = -K^{-1} C_agg x and the
    state matrix is A_cl = A_agg - B_agg K^{-1} C_agg, which equals the
    textbook A_agg - B_agg (I + G^{-1} D_agg)^{-1} G^{-1} C_agg.
    """
    a_cl: np.ndarray
    input_gain: np.ndarray      # maps a bus-current disturbance to a state kick
    voltage_gain: np.ndarray    # maps states to bus voltage deviations
    converter_names: list[str]
    state_offsets: list[int]
    gscr: float

    @property
    def n_states(self) -> int:
        return self.a_cl.shape[0]


def build_closed_loop(fleet: ConverterFleet, rn: ReducedNetwork) -> ClosedLoopModel:
    if len(fleet) != rn.n_converters:
        raise InputError(f"fleet has {len(fleet)} converters for "
                         f"{rn.n_converters} network buses")
    agg = aggregate_state_space(fleet)
    g = grid_admittance(rn)
    if agg.n_ports != g.shape[0]:
        raise InputError(f"aggregate has {agg.n_ports} ports, grid expects {g.shape[0]}")
    k_mat = g + agg.d
    cond = np.linalg.cond(k_mat)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise AlgebraicLoopError(
            f"interconnection matrix G + D is numerically singular "
            f"(cond ~ {cond:.3e}); the closed loop is ill posed")
    k_inv = np.linalg.inv(k_mat)
    a_cl = agg.a - agg.b @ k_inv @ agg.c
    offsets, at = [], 0
    for blk in fleet.blocks:
        offsets.append(at)
        at += blk.n_states
    return ClosedLoopModel(a_cl=a_cl, input_gain=agg.b @ k_inv,
                           voltage_gain=-k_inv @ agg.c,
                           converter_names=list(fleet.names),
                           state_offsets=offsets, gscr=rn.gscr)


@dataclass(frozen=True)
class ClosedLoopSpectrum:
    eigenvalues: np.ndarray
    spectral_abscissa: float

    @property
    def stable(self) -> bool:
        return self.spectral_abscissa < 0.0

    @property
    def n_unstable(self) -> int:
        return int(np.sum(self.eigenvalues.real > 0.0))


def closed_loop_eigs(fleet: ConverterFleet, rn: ReducedNetwork) -> ClosedLoopSpectrum:
    """Spectrum of the interconnected loop, sorted by descending real part."""
    cl = build_closed_loop(fleet, rn)
    eigs = np.linalg.eigvals(cl.a_cl)
    order = np.lexsort((eigs.imag, -eigs.real))
    eigs = eigs[order]
    absc = float(eigs.real.max()) if eigs.size else -np.inf
    return ClosedLoopSpectrum(eigenvalues=eigs, spectral_abscissa=absc)


# ---------------------------------------------------------------------------
# generalized Nyquist


@dataclass
class GncResult:
    encirclements: int          # clockwise encirclements = RHP closed-loop eigs
    s_points: np.ndarray
    locus: np.ndarray
    min_distance: float
    refinement_rounds: int

    def to_csv(self) -> str:
        buf = StringIO()
        buf.write("re,im\n")
        for v in self.locus:
            buf.write(f"{v.real:.17g},{v.imag:.17g}\n")
        return buf.getvalue()


def _char_det(fleet: ConverterFleet, g_inv: np.ndarray, s: np.ndarray) -> np.ndarray:
    """det(I + G^{-1} Y^N(s)) batched over contour points."""
    n = s.size
    p = g_inv.shape[0]
    y_agg = np.zeros((n, p, p), dtype=complex)
    at = 0
    for blk in fleet.blocks:
        w = blk.n_ports
        y_agg[:, at:at + w, at:at + w] = transfer_at(blk, s)
        at += w
    mats = np.eye(p)[None] + g_inv[None] @ y_agg
    return np.linalg.det(mats)


def _default_contour(radius: float, indent: float | None) -> np.ndarray:
    """Closed clockwise boundary of the right half-plane.

    Up the imaginary axis from the origin (or an indentation arc around
    it), clockwise around the |s| = radius arc, back up the negative
    imaginary axis; the list closes on its first point.
    """
    w = np.logspace(-2, np.log10(radius), 600)
    if indent is None:
        start = [0.0 + 0.0j]
    else:
        theta = np.linspace(-np.pi / 2.0, np.pi / 2.0, 31)
        start = list(indent * np.exp(1j * theta))
    upper = list(1j * w)
    theta_arc = np.linspace(np.pi / 2.0, -np.pi / 2.0, 181)
    arc = list(radius * np.exp(1j * theta_arc))
    lower = list(-1j * w[::-1])
    pts = np.array(start + upper + arc[1:-1] + lower, dtype=complex)
    return np.append(pts, pts[0])


def _midpoint(sa: complex, sb: complex, radius: float) -> complex:
    """A point between two contour points that stays on the contour."""
    on_axis = abs(sa.real) <= 1e-12 * abs(sa) and abs(sb.real) <= 1e-12 * abs(sb)
    if on_axis and sa.imag * sb.imag > 0.0:
        return 1j * np.sign(sa.imag) * np.sqrt(abs(sa.imag) * abs(sb.imag))
    ra, rb = abs(sa), abs(sb)
    if abs(ra - radius) <= 1e-9 * radius and abs(rb - radius) <= 1e-9 * radius:
        ang = (np.angle(sa) + np.angle(sb)) / 2.0
        return radius * np.exp(1j * ang)
    return 0.5 * (sa + sb)


def gnc_locus(fleet: ConverterFleet, rn: ReducedNetwork,
              contour: np.ndarray | None = None, *,
              radius: float = 1e6, max_rounds: int = 40) -> GncResult:
    """Count clockwise origin encirclements of det(I + G^{-1} Y^N(s)).

    Open-loop stable blocks leave the contour pole-free, so the count
    equals the number of right-half-plane closed-loop eigenvalues by
    the argument principle.  The contour is refined wherever the locus
    argument jumps more than pi/2 between neighbors; a locus passing
    within 1e-9 of the origin aborts with MarginalLocusError.
    """
    if len(fleet) != rn.n_converters:
        raise InputError(f"fleet has {len(fleet)} converters for "
                         f"{rn.n_converters} network buses")
    g = grid_admittance(rn)
    g_inv = np.linalg.inv(g)

    if contour is not None:
        s = np.asarray(contour, dtype=complex)
        if s.size < 8:
            raise InputError("contour needs at least 8 points")
        if abs(s[0] - s[-1]) > 0.0:
            s = np.append(s, s[0])
    else:
        probe = _char_det(fleet, g_inv, np.array([0.0 + 0.0j]))[0]
        indent = 1e-6 if abs(probe) < 1e-6 else None
        s = _default_contour(radius, indent)

    f_vals = _char_det(fleet, g_inv, s)
    rounds = 0
    while rounds < max_rounds:
        dphi = np.angle(f_vals[1:] / f_vals[:-1])
        bad = np.nonzero(np.abs(dphi) > _ARG_JUMP)[0]
        if bad.size == 0:
            break
        inserts = [(_midpoint(s[i], s[i + 1], radius), i) for i in bad]
        new_s = np.array([v for v, _ in inserts], dtype=complex)
        new_f = _char_det(fleet, g_inv, new_s)
        s = np.insert(s, [i + 1 for _, i in inserts], new_s)
        f_vals = np.insert(f_vals, [i + 1 for _, i in inserts], new_f)
        rounds += 1
    else:
        raise MarginalLocusError(
            "argument jumps persist after refinement; the locus is marginal "
            "near the origin, refine the model or contour")

    min_dist = float(np.abs(f_vals).min())
    if min_dist < _LOCUS_MIN_DIST:
        raise MarginalLocusError(
            f"det locus passes within {min_dist:.2e} of the origin; "
            "encirclement count is unreliable (marginal case)")

    dphi = np.angle(f_vals[1:] / f_vals[:-1])
    total = float(dphi.sum())
    winding = total / (2.0 * np.pi)
    enc = int(round(-winding))
    if abs(-winding - enc) > 0.05:
        raise MarginalLocusError(
            f"winding number {-winding:.3f} is not an integer; contour "
            "under-resolved or marginal")
    return GncResult(encirclements=enc, s_points=s, locus=f_vals,
                     min_distance=min_dist, refinement_rounds=rounds)


# ---------------------------------------------------------------------------
# time-domain simulation


@dataclass
class TimeSeries:
    t: np.ndarray
    states: np.ndarray          # (n_steps + 1, n_states)
    voltages: np.ndarray        # (n_steps + 1, 2N) bus dq voltage deviations
    dt: float

    def to_csv(self) -> str:
        buf = StringIO()
        cols = ",".join(f"state{k + 1}" for k in range(self.states.shape[1]))
        buf.write(f"t,{cols}\n")
        for i, ti in enumerate(self.t):
            row = ",".join(f"{v:.17g}" for v in self.states[i])
            buf.write(f"{ti:.17g},{row}\n")
        return buf.getvalue()

    def voltages_csv(self) -> str:
        buf = StringIO()
        cols = ",".join(f"v{k + 1}" for k in range(self.voltages.shape[1]))
        buf.write(f"t,{cols}\n")
        for i, ti in enumerate(self.t):
            row = ",".join(f"{v:.17g}" for v in self.voltages[i])
            buf.write(f"{ti:.17g},{row}\n")
        return buf.getvalue()


def simulate_step(cl: ClosedLoopModel, disturbance: np.ndarray,
                  t_end: float, dt: float) -> TimeSeries:
    """Fixed-step 4th-order response to a bus-current disturbance.

    The disturbance is applied as a brief unit-area pulse of bus current
    demand, which kicks the states by input_gain @ disturbance; the
    trajectory is the homogeneous response from that kick, advanced by
    the exact RK4 propagator I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24.
    A dt with ||A_cl|| dt > 0.1 is halved (with a warning) until safe.
    """
    if dt <= 0.0:
        raise InputError(f"dt must be positive, got {dt}")
    if t_end <= dt:
        raise InputError(f"t_end ({t_end}) must exceed dt ({dt})")
    d = np.asarray(disturbance, dtype=float).ravel()
    if d.size != cl.input_gain.shape[1]:
        raise InputError(f"disturbance length {d.size}, expected "
                         f"{cl.input_gain.shape[1]}")
    a = cl.a_cl
    nrm = float(np.linalg.norm(a, 2)) if a.size else 0.0
    h = float(dt)
    halvings = 0
    while nrm * h > 0.1 and halvings < 60:
        h /= 2.0
        halvings += 1
    if halvings:
        warnings.warn(f"dt {dt:g} too coarse for ||A||={nrm:.3g}; "
                      f"using {h:g}", stacklevel=2)

    n_steps = int(np.ceil(t_end / h))
    ha = h * a
    prop = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, 5):
        term = term @ ha / k
        prop = prop + term

    states = np.empty((n_steps + 1, a.shape[0]))
    states[0] = cl.input_gain @ d
    for i in range(n_steps):
        states[i + 1] = prop @ states[i]
    t = h * np.arange(n_steps + 1)
    voltages = states @ cl.voltage_gain.T
    return TimeSeries(t=t, states=states, voltages=voltages, dt=h)


def det_identity_check(a, b) -> float:
    """Relative residual of det(A+B) = det(B) det(I + B^{-1} A)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"need two square matrices of equal size, "
                         f"got {a.shape} and {b.shape}")
    cond = np.linalg.cond(b)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise InputError(f"B is numerically singular (cond ~ {cond:.3e})")
    lhs = np.linalg.det(a + b)
    rhs = np.linalg.det(b) * np.linalg.det(np.eye(a.shape[0]) + np.linalg.solve(b, a))
    return float(abs(lhs - rhs) / (abs(lhs) + 1e-12))

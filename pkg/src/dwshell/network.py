"""Grid model: grounded susceptance Laplacian, Kron reduction, gscr.

The transmission network is described at the susceptance level (lossless
inductive lines, per-unit on a common system base).  Converter buses are
kept, interior buses are eliminated by Kron reduction, and ties to the
infinite bus ground the Laplacian.  The reduced susceptance matrix,
symmetrically scaled by the converter capacity ratios, carries the
generalized short-circuit ratio (gscr) as its smallest eigenvalue.

On the shell side the grid contributes nothing but a parabola arm in the
x-z plane: the scaled coupling matrix is real symmetric, so its shell
data collapses onto the curve z = x^2 left of -gscr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotGroundedError, SingularInteriorError

__all__ = [
    "NetworkDescription", "ReducedNetwork", "ParabolaSegment",
    "build_laplacian", "kron_reduce", "reduce_network", "grid_admittance",
    "network_shell_segment",
]

_SINGULAR_RTOL = 1e-10


@dataclass
class NetworkDescription:
    """Bus-branch model of the grid seen by the converters.

    lines          (bus_a, bus_b, susceptance) with susceptance > 0
    grounded_ties  bus -> susceptance of its tie to the infinite bus
    capacities     converter bus -> capacity ratio used for scaling
                   (unlisted converter buses default to 1.0)

    Buses are referred to by name; converter buses come first in every
    matrix ordering.  Construction validates eagerly, including the
    grounded-Laplacian positive-definiteness check.
    """
    converter_buses: list[str]
    interior_buses: list[str] = field(default_factory=list)
    lines: list[tuple[str, str, float]] = field(default_factory=list)
    grounded_ties: dict[str, float] = field(default_factory=dict)
    capacities: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def buses(self) -> list[str]:
        return list(self.converter_buses) + list(self.interior_buses)

    @property
    def n_converter_buses(self) -> int:
        return len(self.converter_buses)

    @property
    def n_interior_buses(self) -> int:
        return len(self.interior_buses)

    def validate(self) -> None:
        if not self.converter_buses:
            raise InputError("network needs at least one converter bus")
        names = self.buses
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise InputError(f"duplicate bus names: {dupes}")
        known = set(names)
        for a, b, y in self.lines:
            if a not in known or b not in known:
                raise InputError(f"line ({a}, {b}) references an unknown bus")
            if a == b:
                raise InputError(f"line ({a}, {b}) is a self-loop")
            if not (y > 0.0) or not np.isfinite(y):
                raise InputError(f"line ({a}, {b}) susceptance must be finite and > 0, got {y}")
        for bus, y in self.grounded_ties.items():
            if bus not in known:
                raise InputError(f"ground tie references unknown bus {bus!r}")
            if not (y > 0.0) or not np.isfinite(y):
                raise InputError(f"ground tie at {bus!r} must be finite and > 0, got {y}")
        for bus, s in self.capacities.items():
            if bus not in self.converter_buses:
                raise InputError(f"capacity given for non-converter bus {bus!r}")
            if not (s > 0.0) or not np.isfinite(s):
                raise InputError(f"capacity at {bus!r} must be finite and > 0, got {s}")
        # positive definiteness of the grounded Laplacian doubles as the
        # connected-to-ground check
        build_laplacian(self)

    def capacity_vector(self) -> np.ndarray:
        return np.array([self.capacities.get(b, 1.0) for b in self.converter_buses])


def build_laplacian(net: NetworkDescription) -> np.ndarray:
    """Grounded susceptance Laplacian over converter + interior buses.

    Row/column order is ``net.buses`` (converters first).  Ground ties
    appear only on the diagonal; a network where some island has no
    path to a ground tie leaves the matrix singular, which is rejected
    here with a "no infinite bus" diagnostic.
    """
    order = {b: i for i, b in enumerate(net.buses)}
    n = len(order)
    lap = np.zeros((n, n))
    for a, b, y in net.lines:
        i, j = order[a], order[b]
        lap[i, i] += y
        lap[j, j] += y
        lap[i, j] -= y
        lap[j, i] -= y
    for bus, y in net.grounded_ties.items():
        i = order[bus]
        lap[i, i] += y
    scale = max(float(np.abs(lap).max()), 1.0)
    if not net.grounded_ties or np.linalg.eigvalsh(lap)[0] <= _SINGULAR_RTOL * scale:
        raise NotGroundedError(
            "network has no infinite bus reachable from every island; "
            "the grounded Laplacian is singular")
    return lap


def kron_reduce(lap: np.ndarray, interior: list[int] | np.ndarray,
                bus_names: list[str] | None = None) -> np.ndarray:
    """Eliminate the given interior indices: B_r = L_cc - L_ci L_ii^{-1} L_ic.

    ``lap`` is any symmetric susceptance Laplacian; ``interior`` indexes
    the buses to fold away.  Raises SingularInteriorError naming the
    offending buses when the interior block cannot be inverted.
    """
    lap = np.asarray(lap, dtype=float)
    n = lap.shape[0]
    if lap.shape != (n, n):
        raise InputError(f"Laplacian must be square, got {lap.shape}")
    if np.abs(lap - lap.T).max() > 1e-12 * max(1.0, np.abs(lap).max()):
        raise InputError("Laplacian must be symmetric")
    interior = np.asarray(interior, dtype=int)
    if interior.size == 0:
        return lap.copy()
    if interior.min() < 0 or interior.max() >= n or len(set(interior.tolist())) != interior.size:
        raise InputError(f"interior indices out of range or repeated: {interior.tolist()}")
    keep = np.setdiff1d(np.arange(n), interior)
    if keep.size == 0:
        raise InputError("cannot eliminate every bus")
    lcc = lap[np.ix_(keep, keep)]
    lci = lap[np.ix_(keep, interior)]
    lii = lap[np.ix_(interior, interior)]
    vals, vecs = np.linalg.eigh(lii)
    if vals[0] <= _SINGULAR_RTOL * max(float(np.abs(lii).max()), 1.0):
        v = np.abs(vecs[:, 0])
        island = interior[v > 0.1 * v.max()]
        labels = ([bus_names[i] for i in island] if bus_names is not None
                  else island.tolist())
        raise SingularInteriorError(
            f"interior block is singular; buses {labels} form an island "
            "with no connection to the retained network")
    b_reduced = lcc - lci @ np.linalg.solve(lii, lci.T)
    return 0.5 * (b_reduced + b_reduced.T)


@dataclass
class ReducedNetwork:
    """Kron-reduced grid with capacity scaling applied."""
    converter_buses: list[str]
    b_reduced: np.ndarray       # reduced susceptance matrix, converters only
    capacities: np.ndarray      # capacity ratio per converter, same order
    coupling: np.ndarray        # S^{-1/2} B_r S^{-1/2}
    gscr: float                 # smallest eigenvalue of the coupling matrix

    @property
    def n_converters(self) -> int:
        return len(self.converter_buses)

    def record(self) -> str:
        lines = [
            "reduced_network:",
            f"  converter_buses: [{', '.join(self.converter_buses)}]",
            f"  gscr: {self.gscr:.17g}",
            "  b_reduced:",
        ]
        for row in self.b_reduced:
            lines.append("    - [" + ", ".join(f"{v:.17g}" for v in row) + "]")
        lines.append("  capacities: [" + ", ".join(f"{v:.17g}" for v in self.capacities) + "]")
        return "\n".join(lines) + "\n"


def reduce_network(net: NetworkDescription) -> ReducedNetwork:
    """Full pipeline: Laplacian, Kron reduction, capacity scaling, gscr."""
    lap = build_laplacian(net)
    nc = net.n_converter_buses
    interior = np.arange(nc, len(net.buses))
    b_reduced = kron_reduce(lap, interior, bus_names=net.buses)
    s = net.capacity_vector()
    inv_sqrt = 1.0 / np.sqrt(s)
    coupling = b_reduced * np.outer(inv_sqrt, inv_sqrt)
    gscr = float(np.linalg.eigvalsh(coupling)[0])
    if gscr <= _SINGULAR_RTOL * max(float(np.abs(coupling).max()), 1.0):
        raise NotGroundedError(
            "reduced network is singular: some converter bus has no path to "
            "the infinite bus, so the short-circuit ratio is zero")
    return ReducedNetwork(converter_buses=list(net.converter_buses),
                          b_reduced=b_reduced, capacities=s,
                          coupling=coupling, gscr=gscr)


def grid_admittance(reduced: ReducedNetwork) -> np.ndarray:
    """Frequency-independent dq admittance of the reduced grid.

    Each scalar coupling entry acts identically on the d and q channel,
    hence the Kronecker structure.  Real symmetric positive definite,
    smallest eigenvalue = gscr (doubled multiplicity).
    """
    return np.kron(reduced.coupling, np.eye(2))


@dataclass(frozen=True)
class ParabolaSegment:
    """Shell of the grid side: the arm {(u, u^2) : u <= u_max} with
    u_max = -gscr.

    The arm itself is unbounded; ``u_min_cap`` only truncates it for
    plotting and serialization.  Separation margins always use the full
    analytic arm (hulls are bounded, so the distance minimizer is finite
    regardless).
    """
    u_max: float
    u_min_cap: float

    def __post_init__(self):
        if not np.isfinite(self.u_max) or not np.isfinite(self.u_min_cap):
            raise InputError("segment endpoints must be finite")
        if self.u_min_cap >= self.u_max:
            raise InputError(
                f"x_min_cap ({self.u_min_cap}) must lie left of the arm "
                f"endpoint ({self.u_max})")

    @property
    def gscr(self) -> float:
        return -self.u_max

    @property
    def endpoints(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.u_min_cap, self.u_min_cap ** 2), (self.u_max, self.u_max ** 2))

    def sample(self, n: int = 256) -> np.ndarray:
        """(n, 2) points along the truncated arm, left to right."""
        if n < 2:
            raise InputError("need at least two sample points")
        u = np.linspace(self.u_min_cap, self.u_max, n)
        return np.stack([u, u * u], axis=-1)

    def to_csv(self, n: int = 256) -> str:
        rows = ["x,z"]
        for u, z in self.sample(n):
            rows.append(f"{u:.17g},{z:.17g}")
        return "\n".join(rows) + "\n"


def network_shell_segment(reduced: ReducedNetwork,
                          x_min_cap: float | None = None) -> ParabolaSegment:
    """Parabola arm governed by the generalized short-circuit ratio.

    ``x_min_cap`` defaults to -10 * gscr; it must lie strictly left of
    -gscr and affects only plotting extent, never verdicts.
    """
    u_max = -reduced.gscr
    cap = x_min_cap if x_min_cap is not None else 10.0 * u_max
    return ParabolaSegment(u_max=u_max, u_min_cap=float(cap))

"""Numerical range and Davis-Wielandt shell sampling.

The Davis-Wielandt shell of a square complex matrix A is the set

    DW(A) = {(Re x*Ax, Im x*Ax, ||Ax||^2) : ||x|| = 1},

a surface in R^3 that always lies weakly inside the paraboloid
z = x^2 + y^2 (Cauchy-Schwarz) and touches it exactly at eigenvectors.
The stability machinery only ever needs the projection of the shell onto
the x-z plane, and that projection has a useful identity: it equals the
numerical range of the auxiliary matrix

    T(A) = (A + A*)/2 + 1j * (A* A),

because a unit vector x maps to the point (x*Hx) + 1j*(x*Gx) of W(T)
with H the Hermitian part and G = A*A.  Numerical ranges of 2x2 matrices
are exact ellipses (elliptical range theorem), so for 2x2 blocks the x-z
hull is computed from the analytic ellipse rather than from samples
alone; for larger matrices the hull is tightened with eigenvector seeds
taken at a grid of support directions of W(T).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from io import StringIO
from typing import Iterator

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc, norm

from .errors import InputError, ZeroMatrixError
from .geometry import convex_hull_2d

__all__ = [
    "SamplerSpec", "ShellPoint", "ShellCloud", "PhaseInterval",
    "numerical_range_boundary", "dw_shell_samples", "xy_projection",
    "sectoriality_and_phases", "shell_point", "as_complex_matrix",
    "xz_ellipse_params", "xz_ellipse_boundary_points",
]

_WITNESS_NORM_TOL = 1e-12


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return a square complex ndarray."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise InputError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(m.view(float))):
        raise InputError(f"{name} contains non-finite entries")
    return m


def _fix_global_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each row so its first non-negligible component is real >= 0."""
    v = vectors.copy()
    mags = np.abs(v)
    lead = (mags > 1e-12 * mags.max(axis=1, keepdims=True)).argmax(axis=1)
    pivots = v[np.arange(v.shape[0]), lead]
    safe = np.where(np.abs(pivots) == 0.0, 1.0 + 0j, pivots)
    phases = safe / np.abs(safe)
    return v * np.conj(phases)[:, None]


@dataclass(frozen=True)
class SamplerSpec:
    """Controls shell sampling density.

    grid_t, grid_phi   two-parameter sphere grid used when dim == 2
    n_random           quasi-random unit vectors used when dim > 2
    n_range_seeds      rotated-Hermitian-part eigenvector seeds (dim > 2)
    n_support          x-z support directions used to tighten the hull
    """
    grid_t: int = 181
    grid_phi: int = 360
    n_random: int = 20_000
    n_range_seeds: int = 720
    n_support: int = 1024
    label: str = "default"

    def scaled(self, total_samples: int) -> "SamplerSpec":
        """Sampler with roughly ``total_samples`` sample vectors."""
        t = max(5, int(np.sqrt(total_samples / 2)))
        return SamplerSpec(grid_t=t, grid_phi=2 * t,
                           n_random=max(64, total_samples),
                           n_range_seeds=min(self.n_range_seeds, max(36, total_samples // 8)),
                           n_support=self.n_support,
                           label=f"scaled-{total_samples}")


#: cheap profile used inside frequency sweeps, where only the x-z hull matters
MARGIN_SAMPLER = SamplerSpec(grid_t=21, grid_phi=40, n_random=2000,
                             n_range_seeds=120, n_support=512, label="margin")


@dataclass(frozen=True)
class ShellPoint:
    """One shell sample with its witness unit vector."""
    x: float
    y: float
    z: float
    witness: np.ndarray

    def __post_init__(self):
        nrm = float(np.linalg.norm(self.witness))
        if abs(nrm - 1.0) > _WITNESS_NORM_TOL:
            raise InputError(f"witness norm {nrm!r} deviates from 1 beyond {_WITNESS_NORM_TOL}")
        if self.z < -1e-12:
            raise InputError("shell point has negative squared gain")


@dataclass
class ShellCloud:
    """Sampled shell plus the convex hull of its x-z projection.

    Arrays are the primary representation; ``points`` materializes
    ShellPoint objects on demand for convenience in small cases.
    """
    matrix_dim: int
    xs: np.ndarray
    ys: np.ndarray
    zs: np.ndarray
    witnesses: np.ndarray
    xz_hull: np.ndarray            # (m, 2) CCW vertices
    sampler: SamplerSpec
    source_label: str = ""

    def __len__(self) -> int:
        return self.xs.shape[0]

    @property
    def points(self) -> list[ShellPoint]:
        return [ShellPoint(float(self.xs[i]), float(self.ys[i]), float(self.zs[i]),
                           self.witnesses[i]) for i in range(len(self))]

    def iter_points(self) -> Iterator[ShellPoint]:
        for i in range(len(self)):
            yield ShellPoint(float(self.xs[i]), float(self.ys[i]), float(self.zs[i]),
                             self.witnesses[i])

    def to_csv(self) -> str:
        buf = StringIO()
        buf.write("x,y,z\n")
        for x, y, z in zip(self.xs, self.ys, self.zs):
            buf.write(f"{x:.17g},{y:.17g},{z:.17g}\n")
        return buf.getvalue()

    def record(self) -> str:
        """Structured-text record: sampler metadata plus hull vertices."""
        lines = [
            "shell_cloud:",
            f"  matrix_dim: {self.matrix_dim}",
            f"  n_points: {len(self)}",
            f"  source: {self.source_label or 'unknown'}",
            "  sampler:",
            f"    label: {self.sampler.label}",
            f"    grid_t: {self.sampler.grid_t}",
            f"    grid_phi: {self.sampler.grid_phi}",
            f"    n_random: {self.sampler.n_random}",
            f"    n_range_seeds: {self.sampler.n_range_seeds}",
            f"    n_support: {self.sampler.n_support}",
            "  xz_hull:",
        ]
        for vx, vz in self.xz_hull:
            lines.append(f"    - [{vx:.17g}, {vz:.17g}]")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PhaseInterval:
    """Supporting-ray angles of the numerical range seen from the origin.

    Angles use the branch centered on the separating direction alpha (the
    direction from the origin toward the range), so phi_min/phi_max may
    leave (-pi, pi] when the range straddles the negative real axis.
    """
    sectorial: bool
    phi_min: float | None
    phi_max: float | None
    origin_gap: float

    def width(self) -> float | None:
        if not self.sectorial:
            return None
        return self.phi_max - self.phi_min


def shell_point(a: np.ndarray, witness: np.ndarray) -> ShellPoint:
    """Evaluate the shell map at one (not necessarily normalized) vector."""
    a = as_complex_matrix(a)
    v = np.asarray(witness, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise InputError("witness must be nonzero")
    v = v / nrm
    av = a @ v
    w = complex(np.vdot(v, av))
    z = float(np.real(np.vdot(av, av)))
    v = _fix_global_phase(v[None, :])[0]
    return ShellPoint(w.real, w.imag, z, v)


# ---------------------------------------------------------------------------
# numerical range


def _rotated_hermitian_tops(a: np.ndarray, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Top eigenpair of (e^{j t} A + e^{-j t} A*)/2 for each angle."""
    ph = np.exp(1j * angles)
    h = 0.5 * (ph[:, None, None] * a[None] + np.conj(ph)[:, None, None] * a.conj().T[None])
    vals, vecs = np.linalg.eigh(h)
    return vals[:, -1], vecs[:, :, -1]


def numerical_range_boundary(a, n_angles: int = 360) -> np.ndarray:
    """Boundary points of the numerical range W(A), ordered by sweep angle.

    Uses the classical rotated-Hermitian-part construction: for each angle
    the top eigenvector of (e^{j t} A + e^{-j t} A*)/2 witnesses a support
    point of W(A).  Returns complex points; for normal matrices the
    extreme points are hit exactly.
    """
    a = as_complex_matrix(a)
    if n_angles < 8:
        raise InputError("n_angles must be at least 8 to outline the range")
    angles = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    try:
        _, vecs = _rotated_hermitian_tops(a, angles)
    except np.linalg.LinAlgError as exc:
        raise InputError(f"eigensolver failed while tracing W(A): {exc}") from exc
    av = vecs @ a.T  # row i is A @ vecs[i] transposed into row form
    pts = np.einsum("ij,ij->i", vecs.conj(), av)
    return pts


# ---------------------------------------------------------------------------
# shell sampling


def _grid_vectors_dim2(n_t: int, n_phi: int) -> np.ndarray:
    """Exact two-parameter cover of C^2 unit vectors modulo global phase."""
    t = np.linspace(0.0, np.pi / 2.0, n_t)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(t, phi, indexing="ij")
    v = np.empty((n_t * n_phi, 2), dtype=complex)
    v[:, 0] = np.cos(tt).ravel()
    v[:, 1] = np.exp(1j * pp.ravel()) * np.sin(tt).ravel()
    return v


def _quasirandom_vectors(dim: int, n: int) -> np.ndarray:
    """Deterministic quasi-random unit vectors (Sobol points through the
    Gaussian map, then normalized and phase-fixed)."""
    eng = qmc.Sobol(d=2 * dim, scramble=False)
    m = int(np.ceil(np.log2(max(4, n))))
    u = eng.random_base2(m)[:n]
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    g = norm.ppf(u)
    v = g[:, :dim] + 1j * g[:, dim:]
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    return _fix_global_phase(v / nrm)


def _xz_support_seeds(a: np.ndarray, n_dirs: int) -> np.ndarray:
    """Unit vectors witnessing support points of the x-z projection.

    The projection of the shell onto the x-z plane is the joint range of
    (H, G) with H the Hermitian part and G = A*A, so its support point in
    direction (cos psi, sin psi) is the top eigenvector of
    cos(psi) H + sin(psi) G.
    """
    h = 0.5 * (a + a.conj().T)
    g = a.conj().T @ a
    psi = np.linspace(0.0, 2.0 * np.pi, n_dirs, endpoint=False)
    stack = np.cos(psi)[:, None, None] * h[None] + np.sin(psi)[:, None, None] * g[None]
    _, vecs = np.linalg.eigh(stack)
    return _fix_global_phase(vecs[:, :, -1])


def xz_ellipse_params(matrices: np.ndarray) -> dict[str, np.ndarray]:
    """Exact x-z projection ellipses for a stack of 2x2 matrices.

    The x-z projection of the shell of a 2x2 matrix A is the numerical
    range of T = (A + A*)/2 + 1j A*A, an ellipse (elliptical range
    theorem) with foci at the eigenvalues of T and minor semi-axis
    sqrt(tr(T*T) - |l1|^2 - |l2|^2) / 2.  Input shape (..., 2, 2);
    returns arrays cx, cz (center), a, b (semi-axes, a >= b), phi (major
    axis angle) of matching leading shape.
    """
    m = np.asarray(matrices, dtype=complex)
    if m.shape[-2:] != (2, 2):
        raise InputError(f"expected trailing 2x2 matrices, got shape {m.shape}")
    mh = np.conj(np.swapaxes(m, -1, -2))
    t_aux = 0.5 * (m + mh) + 1j * (mh @ m)
    tr = t_aux[..., 0, 0] + t_aux[..., 1, 1]
    det = t_aux[..., 0, 0] * t_aux[..., 1, 1] - t_aux[..., 0, 1] * t_aux[..., 1, 0]
    disc = np.sqrt(tr * tr - 4.0 * det)
    l1 = 0.5 * (tr + disc)
    l2 = 0.5 * (tr - disc)
    center = 0.5 * tr
    c_f = 0.5 * np.abs(disc)
    # centered Frobenius norm avoids the cancellation that would leave
    # normal matrices with a spurious b of order sqrt(eps)
    t_cent = t_aux - center[..., None, None] * np.eye(2)
    fro2_cent = np.sum(np.abs(t_cent) ** 2, axis=(-2, -1))
    b_min = np.sqrt(np.maximum(0.0, fro2_cent - 0.5 * np.abs(disc) ** 2)) / 2.0
    a_maj = np.hypot(c_f, b_min)
    phi = np.angle(np.where(disc == 0.0, 1.0, disc))
    return {"cx": center.real, "cz": center.imag,
            "a": a_maj, "b": b_min, "phi": phi}


def xz_ellipse_boundary_points(params: dict[str, np.ndarray], t: np.ndarray) -> np.ndarray:
    """Boundary points of projection ellipses at eccentric anomalies ``t``.

    ``t`` broadcasts against the parameter arrays with one trailing
    sample axis; output shape is params_shape + t_trailing + (2,).
    The eccentric-anomaly parameterization keeps the inscribed-polygon
    sagitta quadratic in the angular step uniformly in eccentricity.
    """
    ca, sa = np.cos(t), np.sin(t)
    ax = params["a"][..., None] * ca
    bz = params["b"][..., None] * sa
    cphi = np.cos(params["phi"])[..., None]
    sphi = np.sin(params["phi"])[..., None]
    x = params["cx"][..., None] + ax * cphi - bz * sphi
    z = params["cz"][..., None] + ax * sphi + bz * cphi
    return np.stack([x, z], axis=-1)


def _xz_ellipse_boundary(a: np.ndarray, n: int) -> np.ndarray:
    """Exact x-z projection boundary of one 2x2 matrix, as (n, 2) points."""
    params = xz_ellipse_params(a[None])
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return xz_ellipse_boundary_points(params, t)[0]


def dw_shell_samples(a, sampler: SamplerSpec | None = None,
                     source_label: str = "") -> ShellCloud:
    """Sample the Davis-Wielandt shell of ``a``.

    dim == 2 uses the exact two-parameter sphere grid; the x-z hull comes
    from the analytic ellipse of the projection, which contains every
    sample.
    dim > 2 combines quasi-random unit vectors with eigenvector seeds of
    the rotated Hermitian parts (numerical-range extremes) and of the x-z
    support family, so hull extremes are pinned by exact eigenpoints.
    """
    a = as_complex_matrix(a)
    dim = a.shape[0]
    spec = sampler or SamplerSpec()

    if dim == 2:
        vectors = _grid_vectors_dim2(spec.grid_t, spec.grid_phi)
        hull_extra = _xz_ellipse_boundary(a, spec.n_support)
    else:
        parts = [_quasirandom_vectors(dim, spec.n_random)]
        angles = np.linspace(0.0, 2.0 * np.pi, spec.n_range_seeds, endpoint=False)
        try:
            _, range_seeds = _rotated_hermitian_tops(a, angles)
        except np.linalg.LinAlgError as exc:
            raise InputError(f"eigensolver failed while seeding the shell: {exc}") from exc
        parts.append(_fix_global_phase(range_seeds))
        parts.append(_xz_support_seeds(a, spec.n_support))
        vectors = np.concatenate(parts, axis=0)
        hull_extra = None

    av = vectors @ a.T
    w = np.einsum("ij,ij->i", vectors.conj(), av)
    z = np.einsum("ij,ij->i", av.conj(), av).real

    if hull_extra is not None:
        # the analytic ellipse contains every dim-2 sample, so hulling it
        # alone keeps the hull exact (and exactly degenerate for normal
        # matrices) instead of inheriting grid noise
        hull = convex_hull_2d(hull_extra)
    else:
        hull = convex_hull_2d(np.stack([w.real, z], axis=-1))

    return ShellCloud(matrix_dim=dim, xs=w.real, ys=w.imag, zs=z,
                      witnesses=vectors, xz_hull=hull, sampler=spec,
                      source_label=source_label)


def xy_projection(cloud: ShellCloud) -> np.ndarray:
    """Shell samples projected onto the numerical-range plane, as complex."""
    return cloud.xs + 1j * cloud.ys


# ---------------------------------------------------------------------------
# sectoriality and matrix phases


def sectoriality_and_phases(a, n_angles: int = 720) -> PhaseInterval:
    """Decide 0 not-in W(A) and, if so, the two supporting-ray angles.

    The support function h(t) = lambda_max((e^{jt}A + e^{-jt}A*)/2) is
    negative for some t exactly when the origin lies outside W(A).  The
    returned angles are measured in the branch centered on the separating
    direction; extreme angles of normal matrices are hit exactly because
    the support eigenvectors are then eigenvectors of A itself.
    """
    a = as_complex_matrix(a)
    if np.allclose(a, 0.0, atol=0.0):
        raise ZeroMatrixError("W(A) = {0} for the zero matrix; phases are undefined")
    angles = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    vals, vecs = _rotated_hermitian_tops(a, angles)
    h_min = float(vals.min())
    if h_min >= 0.0:
        return PhaseInterval(sectorial=False, phi_min=None, phi_max=None,
                             origin_gap=max(0.0, -h_min))

    theta_star = float(angles[int(np.argmin(vals))])
    alpha = np.pi - theta_star
    av = vecs @ a.T
    pts = np.einsum("ij,ij->i", vecs.conj(), av)
    rel = np.angle(pts * np.exp(-1j * alpha))
    phi = alpha + rel

    # polish the two extremes: the boundary point angle is smooth in the
    # sweep angle away from flat edges, and exact at polygon vertices
    def angle_at(theta: float) -> float:
        _, v = _rotated_hermitian_tops(a, np.array([theta]))
        p = complex(np.vdot(v[0], a @ v[0]))
        return alpha + float(np.angle(p * np.exp(-1j * alpha)))

    step = 2.0 * np.pi / n_angles
    k_hi = int(np.argmax(phi))
    k_lo = int(np.argmin(phi))
    hi = minimize_scalar(lambda t: -angle_at(t),
                         bounds=(angles[k_hi] - step, angles[k_hi] + step),
                         method="bounded", options={"xatol": 1e-10})
    lo = minimize_scalar(angle_at,
                         bounds=(angles[k_lo] - step, angles[k_lo] + step),
                         method="bounded", options={"xatol": 1e-10})
    phi_max = max(float(phi[k_hi]), float(-hi.fun))
    phi_min = min(float(phi[k_lo]), float(lo.fun))
    return PhaseInterval(sectorial=True, phi_min=phi_min, phi_max=phi_max,
                         origin_gap=-h_min)

"""Planar convex-hull and distance helpers.

Everything here works on plain (n, 2) float arrays.  The stability margin
reduces to distances between a convex polygon and the parabola z = x^2, so
the polygon routines are written to survive degenerate hulls (a single
point, or all points collinear).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Convex hull of a 2D point set, counterclockwise, via monotone chain.

    Returns an (m, 2) array of hull vertices.  Degenerate inputs collapse
    to one vertex (all points coincide) or two (all points collinear).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of points")
    if pts.shape[0] == 0:
        raise ValueError("cannot hull an empty point set")
    # unique + lexicographic sort; keeps the chain construction O(n log n)
    pts = np.unique(pts, axis=0)
    if pts.shape[0] == 1:
        return pts.copy()

    def half_chain(ordered):
        chain = []
        for p in ordered:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                # strict right turn or collinear -> drop interior vertex
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0.0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half_chain(pts)
    upper = half_chain(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # fully collinear set collapses the chains
        return np.array([pts[0], pts[-1]])
    return _collapse_degenerate(np.array(hull))


def _collapse_degenerate(hull: np.ndarray) -> np.ndarray:
    """Snap hulls that are a point or segment up to rounding noise.

    Normal matrices produce analytically degenerate projections whose
    sampled vertices differ only in the last few bits; downstream code
    keys behavior on the vertex count, so collapse those cleanly.
    """
    if hull.shape[0] <= 2:
        return hull
    tol = 1e-12 * (1.0 + float(np.abs(hull).max()))
    center = hull.mean(axis=0)
    d = hull - center
    if np.hypot(d[:, 0], d[:, 1]).max() <= tol:
        return center[None, :].copy()
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    u = vt[0]
    if np.abs(d @ np.array([-u[1], u[0]])).max() <= tol:
        t = d @ u
        return np.array([center + t.min() * u, center + t.max() * u])
    return hull


def polygon_contains(hull: np.ndarray, queries: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Vectorized inside-or-on test for a CCW convex polygon.

    ``hull`` with fewer than 3 vertices has empty interior; points then test
    True only if they lie on the vertex/segment itself (within ``tol``).
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    if hull.shape[0] == 1:
        return np.hypot(q[:, 0] - hull[0, 0], q[:, 1] - hull[0, 1]) <= tol
    if hull.shape[0] == 2:
        return _dist_to_segments(q, hull[None, 0], hull[None, 1]).ravel() <= tol
    a = hull
    b = np.roll(hull, -1, axis=0)
    # cross((b-a), (q-a)) >= -tol for every edge of a CCW polygon
    cross = (b[:, 0] - a[:, 0])[None, :] * (q[:, 1:2] - a[None, :, 1]) \
        - (b[:, 1] - a[:, 1])[None, :] * (q[:, 0:1] - a[None, :, 0])
    return np.all(cross >= -tol, axis=1)


def _dist_to_segments(q: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray) -> np.ndarray:
    """Distances from each query point to each segment, shape (nq, nseg)."""
    d = seg_b - seg_a                                      # (nseg, 2)
    qq = q[:, None, :] - seg_a[None, :, :]                 # (nq, nseg, 2)
    denom = np.einsum("sk,sk->s", d, d)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(np.einsum("qsk,sk->qs", qq, d) / denom, 0.0, 1.0)
    proj = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
    diff = q[:, None, :] - proj
    return np.hypot(diff[..., 0], diff[..., 1])


def polygon_boundary_distance(hull: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Distance from query points to the polygon boundary (not signed)."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    if hull.shape[0] == 1:
        return np.hypot(q[:, 0] - hull[0, 0], q[:, 1] - hull[0, 1])
    a = hull
    b = np.roll(hull, -1, axis=0) if hull.shape[0] > 2 else hull[1:2]
    if hull.shape[0] == 2:
        a = hull[0:1]
    return _dist_to_segments(q, a, b).min(axis=1)


def polygon_exterior_distance(hull: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Distance to the filled polygon: zero for points inside or on it."""
    d = polygon_boundary_distance(hull, queries)
    inside = polygon_contains(hull, queries)
    return np.where(inside, 0.0, d)


def nearest_on_polygon(hull: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Closest point of the polygon boundary to ``point``."""
    p = np.asarray(point, dtype=float)
    if hull.shape[0] == 1:
        return hull[0].copy()
    a = hull if hull.shape[0] > 2 else hull[0:1]
    b = np.roll(hull, -1, axis=0) if hull.shape[0] > 2 else hull[1:2]
    d = b - a
    denom = np.einsum("sk,sk->s", d, d)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(((p - a) * d).sum(axis=1) / denom, 0.0, 1.0)
    proj = a + t[:, None] * d
    k = int(np.argmin(np.hypot(*(p - proj).T)))
    return proj[k]


def hausdorff_distance(poly_a: np.ndarray, poly_b: np.ndarray, n_boundary: int = 512) -> float:
    """Two-sided Hausdorff distance between two filled convex polygons.

    For convex sets the supremum is attained on the boundary of either set,
    and within each boundary edge the distance to the other convex set is
    convex, so sampling edges densely plus all vertices is reliable.
    """
    def boundary_samples(poly):
        if poly.shape[0] == 1:
            return poly
        a = poly if poly.shape[0] > 2 else poly[0:1]
        b = np.roll(poly, -1, axis=0) if poly.shape[0] > 2 else poly[1:2]
        ts = np.linspace(0.0, 1.0, max(2, n_boundary // max(1, len(a))))
        pts = a[:, None, :] + ts[None, :, None] * (b - a)[:, None, :]
        return pts.reshape(-1, 2)

    sa = boundary_samples(poly_a)
    sb = boundary_samples(poly_b)
    d_ab = polygon_exterior_distance(poly_b, sa).max()
    d_ba = polygon_exterior_distance(poly_a, sb).max()
    return float(max(d_ab, d_ba))


# ---------------------------------------------------------------------------
# distance between a convex hull and the parabola ray {(u, u^2) : u <= u_max}


def _depressed_cubic_roots(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Real roots of u^3 + p u + q = 0, vectorized; shape (n, 3), NaN-padded.

    Uses Cardano for the single-root case and the trigonometric form for
    three real roots; accurate enough here because downstream only uses
    the roots as candidate minimizers of a smooth distance.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    out = np.full(p.shape + (3,), np.nan)

    one = disc > 0.0
    if one.any():
        sq = np.sqrt(disc[one])
        out[one, 0] = np.cbrt(-q[one] / 2.0 + sq) + np.cbrt(-q[one] / 2.0 - sq)

    three = ~one
    if three.any():
        pm = p[three]
        m = 2.0 * np.sqrt(np.maximum(-pm / 3.0, 0.0))
        denom = np.sqrt(np.maximum(-((pm / 3.0) ** 3), 0.0))
        denom = np.where(denom == 0.0, 1.0, denom)
        theta = np.arccos(np.clip((-q[three] / 2.0) / denom, -1.0, 1.0))
        for k in range(3):
            out[three, k] = m * np.cos((theta - 2.0 * np.pi * k) / 3.0)
    return out


def parabola_arm_distance(points: np.ndarray, u_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact Euclidean distance from points to {(u, u^2) : u <= u_max}.

    Stationary points of the squared distance to the full parabola solve
    2u^3 + (1 - 2 z) u - x = 0; candidates are those roots clamped to the
    arm plus the arm endpoint.  Returns (distances, minimizing u) with
    the same leading shape as ``points``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    px, pz = pts[:, 0], pts[:, 1]
    roots = _depressed_cubic_roots((1.0 - 2.0 * pz) / 2.0, -px / 2.0)
    cand = np.concatenate([roots, np.full((pts.shape[0], 1), float(u_max))], axis=1)
    cand = np.where(np.isnan(cand) | (cand > u_max), float(u_max), cand)
    d2 = (cand - px[:, None]) ** 2 + (cand * cand - pz[:, None]) ** 2
    k = np.argmin(d2, axis=1)
    rows = np.arange(pts.shape[0])
    return np.sqrt(d2[rows, k]), cand[rows, k]


def _parabola_hull_distance_at(hull: np.ndarray, u: np.ndarray) -> np.ndarray:
    pts = np.stack([u, u * u], axis=-1)
    return polygon_exterior_distance(hull, pts)


def parabola_ray_crossings(hull: np.ndarray, u_max: float) -> np.ndarray:
    """Parameters u <= u_max where the parabola crosses the hull boundary.

    Each hull edge meets z = x^2 where a quadratic in the edge parameter
    vanishes, so the test is exact up to roundoff.
    """
    if hull.shape[0] == 1:
        p = hull[0]
        if p[0] <= u_max and abs(p[1] - p[0] ** 2) == 0.0:
            return np.array([p[0]])
        return np.empty(0)
    a = hull if hull.shape[0] > 2 else hull[0:1]
    b = np.roll(hull, -1, axis=0) if hull.shape[0] > 2 else hull[1:2]
    out = []
    for (px, pz), (qx, qz) in zip(a, b):
        dx, dz = qx - px, qz - pz
        # (pz + s dz) - (px + s dx)^2 = 0
        c2 = -dx * dx
        c1 = dz - 2.0 * px * dx
        c0 = pz - px * px
        if c2 == 0.0:
            roots = [-c0 / c1] if c1 != 0.0 else []
        else:
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc < 0.0:
                roots = []
            else:
                sq = np.sqrt(disc)
                roots = [(-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)]
        for s in roots:
            if -1e-12 <= s <= 1.0 + 1e-12:
                u = px + np.clip(s, 0.0, 1.0) * dx
                if u <= u_max + 1e-12:
                    out.append(u)
    return np.unique(np.asarray(out))  # tangencies yield double roots; dedupe


def parabola_ray_margin(hull: np.ndarray, u_max: float,
                        n_scan: int = 512) -> tuple[float, np.ndarray, np.ndarray]:
    """Signed distance between a convex hull and {(u, u^2) : u <= u_max}.

    Positive: Euclidean gap, with the realizing pair of points.
    Negative: deepest interior penetration of the curve into the hull
    (only possible within roundoff of zero for genuine shell data, since
    sampled shells live weakly above the parabola).

    Returns (margin, nearest_hull_point, nearest_curve_point).
    """
    hull = np.asarray(hull, dtype=float)
    crossings = parabola_ray_crossings(hull, u_max)
    endpoint = np.array([u_max, u_max * u_max])
    endpoint_inside = bool(polygon_contains(hull, endpoint[None, :])[0])

    if crossings.size or endpoint_inside:
        # curve reaches the hull: measure the deepest covered point
        us = [u_max] if endpoint_inside else []
        us.extend(crossings.tolist())
        lo = min(us)
        hi = min(max(us), u_max)
        grid = np.unique(np.concatenate([np.linspace(lo, hi, n_scan), np.array(us)]))
        pts = np.stack([grid, grid * grid], axis=-1)
        inside = polygon_contains(hull, pts, tol=1e-12)
        if not inside.any():
            # tangential contact
            u_star = crossings[0] if crossings.size else u_max
            cpt = np.array([u_star, u_star * u_star])
            return 0.0, nearest_on_polygon(hull, cpt), cpt
        depth = np.where(inside, polygon_boundary_distance(hull, pts), -np.inf)
        k = int(np.argmax(depth))
        u_star = grid[k]
        cpt = np.array([u_star, u_star * u_star])
        return float(-depth[k]), nearest_on_polygon(hull, cpt), cpt

    # disjoint: bracket the minimizer, scan, then polish each local minimum
    cx = hull[:, 0].mean()
    r = float(np.hypot(hull[:, 0] - cx, hull[:, 1] - hull[:, 1].mean()).max())
    d_end = float(_parabola_hull_distance_at(hull, np.array([u_max]))[0])
    u_lo = min(u_max, cx - (d_end + r)) - 1.0
    grid = np.linspace(u_lo, u_max, n_scan)
    dist = _parabola_hull_distance_at(hull, grid)

    candidates = [n_scan - 1]
    interior = np.where((dist[1:-1] <= dist[:-2]) & (dist[1:-1] <= dist[2:]))[0] + 1
    candidates.extend(interior.tolist())
    if dist[0] < dist[1]:
        candidates.append(0)

    best_u, best_d = None, np.inf
    for k in candidates:
        a = grid[max(0, k - 1)]
        b = grid[min(n_scan - 1, k + 1)]
        if a == b:
            u_star, d_star = grid[k], dist[k]
        else:
            res = minimize_scalar(
                lambda u: float(_parabola_hull_distance_at(hull, np.array([u]))[0]),
                bounds=(a, b), method="bounded",
                options={"xatol": 1e-12 * max(1.0, abs(u_max))})
            u_star, d_star = float(res.x), float(res.fun)
            # fminbound stays sqrt(eps) away from its bounds, so a minimizer
            # sitting on the bracket edge (usually u_max) needs an exact probe
            for u_edge in (a, b):
                d_edge = float(_parabola_hull_distance_at(
                    hull, np.array([u_edge]))[0])
                if d_edge < d_star:
                    u_star, d_star = u_edge, d_edge
        if d_star < best_d:
            best_u, best_d = u_star, d_star
    best_u = min(best_u, u_max)
    cpt = np.array([best_u, best_u * best_u])
    return best_d, nearest_on_polygon(hull, cpt), cpt

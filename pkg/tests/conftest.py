"""Shared test helpers: independent oracles and random-instance generators.

Everything here deliberately avoids the package's own numerics where an
independent route exists (polynomial resolvent instead of linear solves,
half-plane tests instead of the geometry module) so that agreement between
a test and the implementation actually means something.
"""

import numpy as np

from dwshell import ConverterFleet, LtiBlock, NetworkDescription, reduce_network


def faddeev_transfer(a, b, c, d, s):
    """Transfer matrix via the Leverrier-Faddeev resolvent recursion.

    Builds the characteristic polynomial and the matrix numerator of
    (sI - A)^{-1} with nothing but matmul and traces, then evaluates
    C (sI - A)^{-1} B + D at one complex point.  Independent of any
    factorization-based solve.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 0:
        return np.asarray(d, dtype=complex)
    coeffs = [1.0]
    bk = np.eye(n)
    numerators = [np.asarray(c, float) @ bk @ np.asarray(b, float)]
    for k in range(1, n + 1):
        ab = a @ bk
        ck = -np.trace(ab) / k
        coeffs.append(ck)
        bk = ab + ck * np.eye(n)
        if k < n:
            numerators.append(np.asarray(c, float) @ bk @ np.asarray(b, float))
    poly = np.polyval(coeffs, s)
    num = sum(s ** (n - 1 - k) * numerators[k] for k in range(n))
    return num / poly + np.asarray(d, dtype=float)


def polygon_signed_margin(poly, points):
    """Signed distance of points to a CCW convex polygon boundary.

    Positive inside, negative outside; computed as the minimum over edges
    of the cross-product distance.  A plain half-plane test, no package
    geometry involved.
    """
    poly = np.asarray(poly, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    lengths = np.hypot(e[:, 0], e[:, 1])
    lengths[lengths == 0.0] = 1.0
    cross = (e[:, 0][None, :] * (pts[:, 1:2] - a[None, :, 1])
             - e[:, 1][None, :] * (pts[:, 0:1] - a[None, :, 0]))
    return (cross / lengths[None, :]).min(axis=1)


def min_polygon_margin(poly, points, chunk=4096):
    """Minimum of polygon_signed_margin, chunked to bound the cross matrix."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    worst = np.inf
    for k in range(0, pts.shape[0], chunk):
        worst = min(worst, float(polygon_signed_margin(poly, pts[k:k + chunk]).min()))
    return worst


def brute_shell_points(a, n, seed):
    """Brute-force shell samples from random unit vectors: (x, y, z) arrays."""
    rng = np.random.default_rng(seed)
    dim = a.shape[0]
    v = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    av = v @ np.asarray(a, dtype=complex).T
    w = np.einsum("ij,ij->i", v.conj(), av)
    z = np.einsum("ij,ij->i", av.conj(), av).real
    return w.real, w.imag, z


def random_stable_block(rng, order, gain=1.0, name=""):
    """Random strictly Hurwitz 2-port state-space block."""
    a = rng.normal(size=(order, order))
    a = a - (abs(np.linalg.eigvals(a).real).max() + rng.uniform(0.5, 3.0)) * np.eye(order)
    b = rng.normal(size=(order, 2))
    c = gain * rng.normal(size=(2, order))
    d = gain * rng.normal(scale=0.3, size=(2, 2))
    return LtiBlock(a, b, c, d, name=name)


def random_grounded_network(rng, n_conv):
    """Random connected network: spanning tree + chords, one ground tie."""
    n_int = int(rng.integers(0, 3))
    conv = [f"c{k}" for k in range(n_conv)]
    inter = [f"i{k}" for k in range(n_int)]
    buses = conv + inter
    lines = []
    for k in range(1, len(buses)):
        j = int(rng.integers(0, k))
        lines.append((buses[k], buses[j], float(rng.uniform(0.5, 8.0))))
    if len(buses) >= 2:
        for _ in range(int(rng.integers(0, 3))):
            i, j = rng.choice(len(buses), size=2, replace=False)
            lines.append((buses[int(i)], buses[int(j)], float(rng.uniform(0.5, 8.0))))
    ties = {buses[int(rng.integers(0, len(buses)))]: float(rng.uniform(1.0, 10.0))}
    caps = {bus: float(rng.uniform(0.5, 2.0)) for bus in conv}
    return NetworkDescription(converter_buses=conv, interior_buses=inter,
                              lines=lines, grounded_ties=ties, capacities=caps)


def random_system(rng, gain=1.0):
    """Random fleet (N <= 3, block order <= 4) plus reduced network."""
    n_conv = int(rng.integers(1, 4))
    net = random_grounded_network(rng, n_conv)
    blocks = [random_stable_block(rng, int(rng.integers(1, 5)), gain)
              for _ in range(n_conv)]
    return ConverterFleet(blocks), reduce_network(net)

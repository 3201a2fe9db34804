"""Shell sampling, numerical range and phase extraction."""

import numpy as np
import pytest

from conftest import brute_shell_points, min_polygon_margin
from dwshell import (InputError, SamplerSpec, ZeroMatrixError, dw_shell_samples,
                     numerical_range_boundary, sectoriality_and_phases,
                     xy_projection)
from dwshell.geometry import convex_hull_2d, hausdorff_distance
from dwshell.shells import (MARGIN_SAMPLER, ShellPoint, shell_point,
                            xz_ellipse_boundary_points, xz_ellipse_params)


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def xy_hull(cloud):
    w = xy_projection(cloud)
    return convex_hull_2d(np.stack([w.real, w.imag], axis=-1))


# --- worked examples -------------------------------------------------------


def test_identity_shell_is_one_point():
    cloud = dw_shell_samples(np.eye(2))
    assert np.allclose(cloud.xs, 1.0, atol=1e-12)
    assert np.allclose(cloud.ys, 0.0, atol=1e-12)
    assert np.allclose(cloud.zs, 1.0, atol=1e-12)
    # the x-z hull collapses to the single vertex (1, 1)
    assert cloud.xz_hull.shape == (1, 2)
    assert cloud.xz_hull[0] == pytest.approx([1.0, 1.0], abs=1e-12)


def test_identity_range_boundary():
    pts = numerical_range_boundary(np.eye(2))
    assert np.allclose(pts, 1.0 + 0.0j, atol=1e-12)


def test_diag_1j_range_is_segment():
    pts = numerical_range_boundary(np.diag([1.0, 1.0j]))
    # W(diag(1, j)) is the segment joining 1 and j: Re + Im == 1 on it
    assert np.allclose(pts.real + pts.imag, 1.0, atol=1e-9)
    assert pts.real.min() >= -1e-9 and pts.real.max() <= 1.0 + 1e-9
    assert pts.real.max() == pytest.approx(1.0, abs=1e-9)
    assert pts.imag.max() == pytest.approx(1.0, abs=1e-9)


def test_hermitian_diag_shell():
    a = np.diag([2.0, 3.0])
    cloud = dw_shell_samples(a)
    assert np.allclose(cloud.ys, 0.0, atol=1e-12)
    assert np.all(cloud.zs >= cloud.xs**2 - 1e-9)
    # eigenpoints land on the paraboloid
    p1 = shell_point(a, np.array([1.0, 0.0]))
    p2 = shell_point(a, np.array([0.0, 1.0]))
    assert (p1.x, p1.y, p1.z) == pytest.approx((2.0, 0.0, 4.0), abs=1e-12)
    assert (p2.x, p2.y, p2.z) == pytest.approx((3.0, 0.0, 9.0), abs=1e-12)
    # x-z hull degenerates to the chord z = 5x - 6 between the eigenpoints
    hull = cloud.xz_hull
    assert hull.shape[0] == 2
    assert np.allclose(hull[:, 1], 5.0 * hull[:, 0] - 6.0, atol=1e-9)
    assert sorted(hull[:, 0].tolist()) == pytest.approx([2.0, 3.0], abs=1e-12)


def test_nilpotent_jordan_block_is_a_ball():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    params = xz_ellipse_params(a)
    assert params["cx"] == pytest.approx(0.0, abs=1e-15)
    assert params["cz"] == pytest.approx(0.5, abs=1e-15)
    assert params["a"] == pytest.approx(0.5, abs=1e-15)
    assert params["b"] == pytest.approx(0.5, abs=1e-15)
    # W(A) is the disk of radius 1/2 about the origin
    pts = numerical_range_boundary(a)
    assert np.abs(pts) == pytest.approx(0.5, abs=1e-9)


def test_ellipse_boundary_parameterization():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    params = xz_ellipse_params(a)
    t = np.linspace(0.0, 2.0 * np.pi, 257)
    pts = xz_ellipse_boundary_points(params, t)
    # ellipse equation in the rotated frame
    c, s = np.cos(params["phi"]), np.sin(params["phi"])
    dx = pts[..., 0] - params["cx"]
    dz = pts[..., 1] - params["cz"]
    u = c * dx + s * dz
    v = -s * dx + c * dz
    assert np.allclose((u / params["a"]) ** 2 + (v / params["b"]) ** 2, 1.0, atol=1e-9)


def test_ellipse_params_batched():
    rng = np.random.default_rng(4)
    ms = rng.standard_normal((5, 2, 2)) + 1j * rng.standard_normal((5, 2, 2))
    batch = xz_ellipse_params(ms)
    for k in range(5):
        single = xz_ellipse_params(ms[k])
        for key in ("cx", "cz", "a", "b", "phi"):
            assert batch[key][k] == pytest.approx(single[key], abs=1e-13)
    with pytest.raises(InputError):
        xz_ellipse_params(np.eye(3))


# --- sampled-shell properties ----------------------------------------------


@pytest.mark.parametrize("dim,seed", [(2, 0), (3, 1), (4, 2), (5, 3), (6, 4)])
def test_shell_containment(dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    cloud = dw_shell_samples(a, SamplerSpec().scaled(2000))
    assert np.all(cloud.zs >= cloud.xs**2 + cloud.ys**2 - 1e-9)
    assert cloud.matrix_dim == dim
    assert cloud.witnesses.shape == (len(cloud), dim)


@pytest.mark.parametrize("seed", [5, 6, 7])
def test_eigenpoints_on_paraboloid(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    vals, vecs = np.linalg.eig(a)
    for lam, v in zip(vals, vecs.T):
        p = shell_point(a, v)
        assert p.x == pytest.approx(lam.real, abs=1e-12)
        assert p.y == pytest.approx(lam.imag, abs=1e-12)
        assert p.z == pytest.approx(abs(lam) ** 2, abs=1e-12)
        assert p.z == pytest.approx(p.x**2 + p.y**2, abs=1e-12)


@pytest.mark.parametrize("seed", [8, 9, 10, 11])
def test_projection_matches_numerical_range_dim2(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    cloud = dw_shell_samples(a)
    w = numerical_range_boundary(a, n_angles=720)
    range_hull = convex_hull_2d(np.stack([w.real, w.imag], axis=-1))
    assert hausdorff_distance(xy_hull(cloud), range_hull) <= 2e-2


def test_range_boundary_encloses_brute_force():
    rng = np.random.default_rng(12)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    w = numerical_range_boundary(a, n_angles=720)
    poly = convex_hull_2d(np.stack([w.real, w.imag], axis=-1))
    bx, by, _ = brute_shell_points(a, 100_000, seed=13)
    assert min_polygon_margin(poly, np.stack([bx, by], axis=-1)) >= -1e-9


def test_projection_hull_gap_shrinks_with_density():
    rng = np.random.default_rng(14)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    # the reference polygon is inscribed, so it must be dense enough that
    # its sagitta stays below the 1e-6 slack given to boundary samples
    w = numerical_range_boundary(a, n_angles=12288)
    ref = convex_hull_2d(np.stack([w.real, w.imag], axis=-1))
    gaps = []
    for n_t, n_phi in [(11, 20), (21, 40), (41, 80)]:
        spec = SamplerSpec(grid_t=n_t, grid_phi=n_phi)
        cloud = dw_shell_samples(a, spec)
        # every sample stays inside the range polygon
        pts = np.stack([cloud.xs, cloud.ys], axis=-1)
        assert min_polygon_margin(ref, pts) >= -1e-6
        gaps.append(hausdorff_distance(xy_hull(cloud), ref))
    # the three grids are nested, so the hull gap cannot grow
    assert gaps[2] <= gaps[1] + 1e-9 <= gaps[0] + 2e-9
    assert gaps[2] < gaps[0]


@pytest.mark.parametrize("seed", [15, 16])
def test_xz_hull_unitary_invariance_dim2(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    u = random_unitary(rng, 2)
    h1 = dw_shell_samples(a).xz_hull
    h2 = dw_shell_samples(u.conj().T @ a @ u).xz_hull
    assert hausdorff_distance(h1, h2) <= 1e-6


def test_range_boundary_rejects_sparse_sweeps():
    with pytest.raises(InputError):
        numerical_range_boundary(np.eye(2), n_angles=4)


# --- sectoriality -----------------------------------------------------------


def test_sectorial_normal_matrix_phases():
    a = np.diag([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 6)])
    res = sectoriality_and_phases(a)
    assert res.sectorial
    assert res.phi_max == pytest.approx(np.pi / 4, abs=1e-6)
    assert res.phi_min == pytest.approx(-np.pi / 6, abs=1e-6)
    assert res.width() == pytest.approx(np.pi / 4 + np.pi / 6, abs=1e-6)
    assert res.origin_gap > 0.0


def test_normal_phases_match_eigenvalue_arguments():
    rng = np.random.default_rng(17)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    eigs = np.array([np.exp(0.9j), 2.0 * np.exp(-0.4j), 0.5 * np.exp(0.2j)])
    a = q @ np.diag(eigs) @ q.conj().T
    res = sectoriality_and_phases(a)
    assert res.sectorial
    assert res.phi_max == pytest.approx(0.9, abs=1e-6)
    assert res.phi_min == pytest.approx(-0.4, abs=1e-6)


def test_indefinite_hermitian_not_sectorial():
    res = sectoriality_and_phases(np.diag([1.0, -1.0]))
    assert not res.sectorial
    assert res.phi_min is None and res.phi_max is None
    assert res.width() is None
    assert res.origin_gap == 0.0


def test_positive_definite_phases_are_zero():
    res = sectoriality_and_phases(np.diag([1.0, 3.0]))
    assert res.sectorial
    assert res.phi_min == pytest.approx(0.0, abs=1e-8)
    assert res.phi_max == pytest.approx(0.0, abs=1e-8)
    assert res.origin_gap == pytest.approx(1.0, abs=1e-9)


def test_zero_matrix_rejected():
    with pytest.raises(ZeroMatrixError):
        sectoriality_and_phases(np.zeros((3, 3)))


# --- containers -------------------------------------------------------------


def test_shell_point_normalizes_witness():
    p = shell_point(np.diag([2.0, 3.0]), np.array([2.0, 0.0]))
    assert (p.x, p.z) == pytest.approx((2.0, 4.0), abs=1e-14)
    with pytest.raises(InputError):
        shell_point(np.eye(2), np.zeros(2))


def test_shell_point_validation():
    with pytest.raises(InputError):
        ShellPoint(1.0, 0.0, 1.0, np.array([0.9, 0.0]))
    with pytest.raises(InputError):
        ShellPoint(0.0, 0.0, -1e-6, np.array([1.0, 0.0]))


def test_cloud_csv_roundtrip_and_record():
    cloud = dw_shell_samples(np.diag([2.0, 3.0]), MARGIN_SAMPLER, source_label="demo")
    text = cloud.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,z"
    data = np.array([[float(f) for f in ln.split(",")] for ln in lines[1:]])
    # %.17g round-trips doubles exactly
    assert np.array_equal(data[:, 0], cloud.xs)
    assert np.array_equal(data[:, 1], cloud.ys)
    assert np.array_equal(data[:, 2], cloud.zs)

    rec = cloud.record()
    assert "matrix_dim: 2" in rec
    assert "source: demo" in rec
    assert "label: margin" in rec
    assert rec.count("- [") == cloud.xz_hull.shape[0]


def test_sampler_scaling():
    spec = SamplerSpec().scaled(1500)
    assert spec.n_random == 1500
    assert spec.grid_phi == 2 * spec.grid_t
    assert spec.label == "scaled-1500"
    assert SamplerSpec().scaled(100).grid_t < SamplerSpec().scaled(10_000).grid_t
    tiny = SamplerSpec().scaled(16)
    assert tiny.grid_t >= 5 and tiny.n_random >= 64

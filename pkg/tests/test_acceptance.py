"""End-to-end acceptance checks, one per headline guarantee.

Each test exercises one externally stated property at its stated
tolerance and prints a single PASS line with the measured figure, so a
verbose run reads as a checklist.  Tolerances here are contractual:
do not loosen them to make a failure go away.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import (min_polygon_margin, random_grounded_network,
                      random_system)
from dwshell import (ConverterFleet, NetworkDescription, bundled_system_path,
                     centralized_certify, decentralized_certify, default_sweep,
                     dw_shell_samples, load_system, numerical_range_boundary,
                     reduce_network)
from dwshell.geometry import convex_hull_2d, hausdorff_distance
from dwshell.network import network_shell_segment
from dwshell.shells import SamplerSpec, xy_projection
from dwshell.verify import (build_closed_loop, closed_loop_eigs,
                            det_identity_check, gnc_locus, simulate_step)


def test_every_shell_sample_sits_above_the_paraboloid():
    rng = np.random.default_rng(20260815)
    spec = SamplerSpec().scaled(1500)
    t0 = time.time()
    worst = np.inf
    for i in range(1000):
        dim = 2 + i % 5
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        cloud = dw_shell_samples(a, spec)
        slack = cloud.zs - (cloud.xs**2 + cloud.ys**2)
        worst = min(worst, float(slack.min()))
        assert slack.min() >= -1e-9, f"matrix {i} dips {slack.min():.3e}"
    elapsed = time.time() - t0
    assert elapsed < 30.0, f"containment sweep took {elapsed:.1f}s"
    print(f"PASS paraboloid containment: 1000 matrices (dims 2-6), "
          f"worst slack {worst:.3e}, {elapsed:.1f}s")


def test_xy_projection_reproduces_the_numerical_range():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        cloud = dw_shell_samples(a)
        w = xy_projection(cloud)
        sampled = convex_hull_2d(np.stack([w.real, w.imag], axis=-1))
        bnd = numerical_range_boundary(a, n_angles=720)
        exact = convex_hull_2d(np.stack([bnd.real, bnd.imag], axis=-1))
        worst = max(worst, hausdorff_distance(sampled, exact))
    assert worst <= 2e-2
    print(f"PASS projection identity: 100 random 2x2, "
          f"worst Hausdorff gap {worst:.2e} <= 2e-2")


def test_single_line_network_strength_and_arm_endpoint():
    desc = load_system(bundled_system_path("single_converter"))
    rn = desc.reduced()
    assert rn.gscr == 3.5
    seg = network_shell_segment(rn)
    assert seg.endpoints[1] == (-3.5, 12.25)
    print("PASS single-line network: gscr == 3.5 exactly, "
          "arm endpoint (-3.5, 12.25)")


def test_network_strength_laws():
    rng = np.random.default_rng(4)
    worst_scale = 0.0
    for _ in range(20):
        net = random_grounded_network(rng, int(rng.integers(1, 4)))
        base = reduce_network(net).gscr
        c = float(rng.uniform(0.2, 5.0))
        scaled = replace(net, capacities={b: c * s for b, s in net.capacities.items()})
        err = abs(reduce_network(scaled).gscr - base / c)
        worst_scale = max(worst_scale, err)
        assert err <= 1e-10
    worst_drop = 0.0
    for _ in range(100):
        net = random_grounded_network(rng, int(rng.integers(1, 4)))
        base = reduce_network(net).gscr
        buses = net.converter_buses + net.interior_buses
        y = float(rng.uniform(0.5, 8.0))
        if rng.uniform() < 0.5 or len(buses) < 2:
            bus = buses[int(rng.integers(0, len(buses)))]
            ties = dict(net.grounded_ties)
            ties[bus] = ties.get(bus, 0.0) + y
            grown = replace(net, grounded_ties=ties)
        else:
            i, j = rng.choice(len(buses), size=2, replace=False)
            grown = replace(net, lines=net.lines + [(buses[int(i)], buses[int(j)], y)])
        drop = base - reduce_network(grown).gscr
        worst_drop = max(worst_drop, drop)
        assert drop <= 1e-10
    print(f"PASS gscr laws: capacity scaling error {worst_scale:.2e} <= 1e-10, "
          f"worst strength drop over 100 added lines {worst_drop:.2e}")


def test_comfortable_margins_imply_true_stability():
    rng = np.random.default_rng(42)
    sweep = default_sweep(0.05, 500.0, 60)
    t0 = time.time()
    checked = 0
    for i in range(200):
        fleet, rn = random_system(rng)
        report = decentralized_certify(fleet, rn, sweep)
        if not (report.certified() and report.min_margin() > 0.05):
            continue
        spec = closed_loop_eigs(fleet, rn)
        assert spec.spectral_abscissa < 0.0, \
            f"system {i}: margin {report.min_margin():.3f} but abscissa " \
            f"{spec.spectral_abscissa:+.3e}"
        assert gnc_locus(fleet, rn).encirclements == 0, f"system {i}"
        checked += 1
    elapsed = time.time() - t0
    assert elapsed < 120.0, f"soundness sweep took {elapsed:.1f}s"
    assert checked >= 50
    print(f"PASS soundness: {checked}/200 systems certified with margin "
          f"> 0.05, zero counterexamples, {elapsed:.1f}s")


def test_encirclement_count_matches_unstable_eigs_everywhere():
    rng = np.random.default_rng(7)
    counts = {}
    for _ in range(100):
        fleet, rn = random_system(rng, gain=float(rng.uniform(0.5, 4.0)))
        spec = closed_loop_eigs(fleet, rn)
        enc = gnc_locus(fleet, rn).encirclements
        assert enc == spec.n_unstable
        counts[enc] = counts.get(enc, 0) + 1
    assert sum(counts.values()) == 100
    print(f"PASS oracle agreement: 100/100 exact, counts {counts}")


def test_determinant_splitting_identity():
    rng = np.random.default_rng(777)
    worst = 0.0
    done = 0
    while done < 100:
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        b = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        if np.linalg.cond(b) > 1e6:
            continue
        worst = max(worst, det_identity_check(a, b))
        done += 1
    assert worst < 1e-10
    print(f"PASS det identity: 100 pairs, worst residual {worst:.2e} < 1e-10")


def test_weakening_the_grid_flips_the_verdict_and_really_destabilizes():
    strong = load_system(bundled_system_path("single_converter"))
    weak = load_system(bundled_system_path("single_converter_weak"))
    rep_s = decentralized_certify(strong.fleet, strong.reduced(),
                                  strong.sweep.build())
    rep_w = decentralized_certify(weak.fleet, weak.reduced(),
                                  weak.sweep.build())
    assert rep_s.overall_verdict == "certified_stable"
    assert rep_w.overall_verdict == "not_certified"

    spec = closed_loop_eigs(weak.fleet, weak.reduced())
    assert spec.spectral_abscissa > 0.0

    cl = build_closed_loop(weak.fleet, weak.reduced())
    d = np.zeros(cl.input_gain.shape[1])
    d[0] = 1.0
    with pytest.warns(UserWarning):
        ts = simulate_step(cl, d, t_end=3.0, dt=2e-4)
    norms = np.linalg.norm(ts.states, axis=1)
    tail = ts.t >= 1.5
    slope = np.polyfit(ts.t[tail], np.log(norms[tail]), 1)[0]
    assert slope > 0.0

    k = int(np.argmax(np.var(ts.states, axis=0)))
    sig = ts.states[:, k] - ts.states[:, k].mean()
    amp = np.abs(np.fft.rfft(sig * np.hanning(sig.size)))
    peak_hz = (int(np.argmax(amp[1:])) + 1) / (sig.size * ts.dt)
    crit_hz = rep_w.critical_frequencies[0][0] / (2.0 * np.pi)
    assert abs(peak_hz - crit_hz) <= 0.2 * crit_hz
    print(f"PASS verdict flip: strong certified, weak not certified; "
          f"abscissa {spec.spectral_abscissa:+.3f}, growth {slope:+.3f}/s, "
          f"oscillation {peak_hz:.2f} Hz vs margin dip {crit_hz:.2f} Hz")


def test_aggregate_certificate_is_never_more_permissive():
    rng = np.random.default_rng(13)
    sweep = default_sweep(0.5, 200.0, 40)
    worst = -np.inf
    for _ in range(50):
        fleet, rn = random_system(rng)
        dec = decentralized_certify(fleet, rn, sweep, adaptive=False)
        cen = centralized_certify(fleet, rn, sweep, adaptive=False)
        gap = cen.min_margin() - dec.min_margin()
        worst = max(worst, gap)
        assert gap <= 5e-2
    print(f"PASS hull dominance: 50 fleets, worst centralized excess "
          f"{worst:.2e} <= 5e-2")

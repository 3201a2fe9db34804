"""Converter-side small-signal models.

Converters enter the certification problem as stable LTI admittance
blocks in the synchronous dq frame, per-unit on each device's own
capacity base, in load convention (positive current drawn from the
grid) so that grid and device admittances add in the closed-loop
characteristic matrix.

``bundled_gfl_model`` builds the stock grid-following converter used by
the example systems: a second-order PLL synchronizing on the q-axis
terminal voltage plus per-axis PI current control on the filter current
with the synchronous cross-coupling left uncompensated.  It is a
self-contained illustrative model, documented in full below, not a
reproduction of any particular vendor or literature admittance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .errors import InputError, UnstableBlockError

__all__ = [
    "LtiBlock", "ConverterFleet", "freq_response", "transfer_at",
    "aggregate_fleet", "aggregate_state_space", "bundled_gfl_model",
]

_STABILITY_RTOL = 1e-9


@dataclass
class LtiBlock:
    """State-space admittance block dx = Ax + Bu, y = Cx + Du.

    Inputs are dq voltage deviations, outputs dq current deviations; the
    port count is the common size of both (2 for a single converter).
    n_states = 0 (pure D feedthrough) is allowed.  Construction rejects
    blocks whose A matrix is not Hurwitz, since every certificate here
    assumes open-loop stable devices.
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.d = np.atleast_2d(np.asarray(self.d, dtype=float))
        ns = self.a.shape[0]
        if self.a.shape != (ns, ns):
            raise InputError(f"A must be square, got {self.a.shape}")
        if self.b.shape[0] != ns:
            raise InputError(f"B has {self.b.shape[0]} rows, expected {ns}")
        if self.c.shape[1] != ns:
            raise InputError(f"C has {self.c.shape[1]} columns, expected {ns}")
        p_in, p_out = self.b.shape[1], self.c.shape[0]
        if p_in != p_out:
            raise InputError(
                f"admittance block must be square: {p_in} inputs vs {p_out} outputs")
        if self.d.shape != (p_out, p_in):
            raise InputError(f"D must be {(p_out, p_in)}, got {self.d.shape}")
        for mname, m in (("A", self.a), ("B", self.b), ("C", self.c), ("D", self.d)):
            if m.size and not np.all(np.isfinite(m)):
                raise InputError(f"{mname} contains non-finite entries")
        if ns > 0:
            eigs = np.linalg.eigvals(self.a)
            scale = max(1.0, float(np.abs(eigs).max()))
            worst = float(eigs.real.max())
            if worst >= -_STABILITY_RTOL * scale:
                raise UnstableBlockError(
                    f"block {self.name or '<unnamed>'} is not open-loop stable: "
                    f"eigenvalue with real part {worst:.3e}")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_ports(self) -> int:
        return self.d.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.a)


def transfer_at(block: LtiBlock, s_values) -> np.ndarray:
    """Transfer matrix C (sI - A)^{-1} B + D at arbitrary complex s.

    Points at infinity (complex or real inf) return D.  Used by the
    Nyquist machinery, whose contour leaves the imaginary axis.
    """
    s = np.asarray(s_values, dtype=complex)
    scalar = (s.ndim == 0)
    s = np.atleast_1d(s).ravel()
    n, p = block.n_states, block.n_ports
    out = np.empty((s.size, p, p), dtype=complex)
    finite = np.isfinite(s)
    out[~finite] = block.d
    if finite.any() and n > 0:
        sm = s[finite]
        lhs = sm[:, None, None] * np.eye(n)[None] - block.a[None]
        try:
            sol = np.linalg.solve(lhs, np.broadcast_to(
                block.b.astype(complex), (sm.size, n, p)))
        except np.linalg.LinAlgError as exc:
            raise InputError(
                f"(sI - A) singular while evaluating block "
                f"{block.name or '<unnamed>'}: {exc}") from exc
        out[finite] = block.c[None] @ sol + block.d[None]
    elif n == 0:
        out[finite] = block.d
    return out[0] if scalar else out.reshape(np.shape(s_values) + (p, p))


def freq_response(block: LtiBlock, omegas) -> np.ndarray:
    """Admittance Y(j omega) = C (j omega I - A)^{-1} B + D.

    ``omegas`` may be scalar or array, in rad/s.  np.inf is accepted and
    returns D exactly (the relative-degree-zero limit), which lets
    frequency sweeps close the [0, inf) range.  For a stable A and real
    omega the resolvent never becomes singular; the guard exists for
    defensive completeness.
    """
    w = np.asarray(omegas, dtype=float)
    scalar = (w.ndim == 0)
    wa = np.atleast_1d(w)
    s = np.empty(wa.shape, dtype=complex)
    finite = np.isfinite(wa)
    s[finite] = 1j * wa[finite]
    s[~finite] = np.inf
    res = transfer_at(block, s)
    return res[0] if scalar else res.reshape(np.shape(omegas) + res.shape[-2:])


@dataclass
class ConverterFleet:
    """Ordered converter blocks; the ordering matches the network's
    converter buses."""
    blocks: list[LtiBlock] = field(default_factory=list)

    def __post_init__(self):
        if not self.blocks:
            raise InputError("fleet must contain at least one converter")
        for k, blk in enumerate(self.blocks):
            if not isinstance(blk, LtiBlock):
                raise InputError(f"fleet entry {k} is not an LtiBlock")

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def names(self) -> list[str]:
        return [blk.name or f"converter{k + 1}" for k, blk in enumerate(self.blocks)]

    @property
    def total_ports(self) -> int:
        return sum(blk.n_ports for blk in self.blocks)

    def port_slices(self) -> list[slice]:
        out, at = [], 0
        for blk in self.blocks:
            out.append(slice(at, at + blk.n_ports))
            at += blk.n_ports
        return out


def aggregate_fleet(fleet: ConverterFleet, omega: float) -> np.ndarray:
    """Block-diagonal fleet admittance at one frequency (2N x 2N)."""
    return block_diag(*[freq_response(blk, omega) for blk in fleet.blocks]).astype(complex)


def aggregate_state_space(fleet: ConverterFleet) -> LtiBlock:
    """Stacked state-space of the whole fleet (block-diagonal A, B, C, D)."""
    a = block_diag(*[blk.a for blk in fleet.blocks])
    b = block_diag(*[blk.b for blk in fleet.blocks])
    c = block_diag(*[blk.c for blk in fleet.blocks])
    d = block_diag(*[blk.d for blk in fleet.blocks])
    return LtiBlock(a, b, c, d, name="aggregate(" + ",".join(fleet.names) + ")")


#: synchronous base frequency of the bundled per-unit model, rad/s
OMEGA_BASE = 2.0 * np.pi * 50.0


def bundled_gfl_model(p0: float = 1.0, q0: float = 0.0, v0: float = 1.0,
                      pll_bandwidth: float = 2.0 * np.pi * 20.0,
                      pll_zero: float = 2.0 * np.pi * 300.0,
                      current_loop_bandwidth: float = 2.0 * np.pi * 25.0,
                      filter_inductance: float = 0.2,
                      convention: str = "load",
                      name: str = "gfl") -> LtiBlock:
    """Six-state grid-following converter admittance (per-unit, dq).

    Self-contained illustrative model, linearized at the operating point
    P = p0, Q = q0, V = v0 (per-unit; grid d-axis aligned with the
    terminal voltage, so id0 = p0/v0 and iq0 = -q0/v0).

    * PLL: a PI controller drives the measured q-axis voltage to zero.
      Gains come from a natural frequency wn (``pll_bandwidth``, rad/s)
      and a fixed PI zero wz (``pll_zero``): kp = wn^2/(wz v0),
      ki = wn^2/v0, giving the angle tracking function

          H(s) = (2 z wn s + wn^2) / (s^2 + 2 z wn s + wn^2),
          z = wn / (2 wz).

      The fixed zero means slowing the PLL down also lowers its damping,
      the usual single-knob retuning trade-off.
    * Current control: per-axis PI on the measured filter current, with
      no decoupling of the synchronous cross-coupling and no voltage
      feedforward.  With lt = lf/w0 the filter time constant, the gains
      are kpc = lt wcc and kic = kpc wcc / 5 (``current_loop_bandwidth``
      = wcc sets the loop scale, the PI zero sits at wcc/5).  The filter
      equation keeps the w0 rotation term:

          lt di/dt = vc - v - lf J i,     J = [[0, -1], [1, 0]],

      so the closed current loop owns a synchronous-frequency dq mode
      whose damping scales with wcc/w0; slow current loops leave it
      underdamped, and its interaction with the PLL through the grid is
      what eventually turns a weak-grid verdict flip into a growing
      oscillation rather than a monotone collapse.
    * Frame couplings: the PLL angle rotates the current references,
      the measured currents, and the applied converter voltage, which
      contributes the operating-point terms J i0 and J vc0, with
      vc0 = v + lf J i0 the steady converter-side voltage.

    States: (PLL integrator, PLL angle, d-axis current PI integrator,
    q-axis current PI integrator, d filter current, q filter current).
    The A matrix is block-triangular (PLL drives the current loop, never
    the reverse internally), and both diagonal blocks are Hurwitz for
    every positive parameter set, so the construction-time stability
    check never fires for this generator.

    In load convention the q-axis admittance is exactly -p0/v0^2 at DC,
    the constant-power term whose shell point sits on the paraboloid;
    the response rolls off to zero at high frequency (D = 0).
    """
    for pname, val in (("p0", p0), ("q0", q0), ("v0", v0),
                       ("pll_bandwidth", pll_bandwidth), ("pll_zero", pll_zero),
                       ("current_loop_bandwidth", current_loop_bandwidth),
                       ("filter_inductance", filter_inductance)):
        if not np.isfinite(val):
            raise InputError(f"{pname} must be finite, got {val}")
    if v0 <= 0.0:
        raise InputError(f"v0 must be positive, got {v0}")
    for pname, val in (("pll_bandwidth", pll_bandwidth), ("pll_zero", pll_zero),
                       ("current_loop_bandwidth", current_loop_bandwidth),
                       ("filter_inductance", filter_inductance)):
        if val <= 0.0:
            raise InputError(f"{pname} must be positive, got {val}")
    if convention not in ("load", "injection"):
        raise InputError(f"convention must be 'load' or 'injection', got {convention!r}")

    wn, wz, wcc = pll_bandwidth, pll_zero, current_loop_bandwidth
    kp = wn * wn / (wz * v0)
    ki = wn * wn / v0
    lf = filter_inductance
    lt = lf / OMEGA_BASE
    kpc = lt * wcc
    kic = kpc * wcc / 5.0
    id0 = p0 / v0
    iq0 = -q0 / v0
    vc0d = v0 - lf * iq0
    vc0q = lf * id0

    a = np.zeros((6, 6))
    b = np.zeros((6, 2))
    a[0, 1] = -ki * v0
    b[0, 1] = ki
    a[1, 0] = 1.0
    a[1, 1] = -kp * v0
    b[1, 1] = kp
    a[2, 1] = -kic * iq0
    a[2, 4] = -kic
    a[3, 1] = kic * id0
    a[3, 5] = -kic
    a[4, 1] = (-kpc * iq0 - vc0q) / lt
    a[4, 2] = 1.0 / lt
    a[4, 4] = -kpc / lt
    a[4, 5] = lf / lt
    b[4, 0] = -1.0 / lt
    a[5, 1] = (kpc * id0 + vc0d) / lt
    a[5, 3] = 1.0 / lt
    a[5, 4] = -lf / lt
    a[5, 5] = -kpc / lt
    b[5, 1] = -1.0 / lt

    c_inj = np.zeros((2, 6))
    c_inj[0, 4] = 1.0
    c_inj[1, 5] = 1.0
    d = np.zeros((2, 2))
    c = -c_inj if convention == "load" else c_inj
    return LtiBlock(a, b, c, d, name=name)

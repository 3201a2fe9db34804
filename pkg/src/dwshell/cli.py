"""Command-line workflows.

Every command takes a system file (path or bundled name) and exits with
0 = certified / stable, 1 = not certified / unstable, 2 = inconclusive,
3 = input error.  Human-readable output goes to stdout; ``--out DIR``
additionally writes the machine-readable CSV / structured-text bundle.
Frequencies are Hz on this surface and rad/s everywhere inside.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .errors import DwshellError, InputError, MarginalLocusError
from .network import network_shell_segment
from .shells import SamplerSpec
from .stability import centralized_certify, decentralized_certify
from .sysio import (SweepSettings, SystemDescription, ToleranceSettings,
                    bundled_system_names, export_certification, export_shell,
                    load_system, resolve_system_path)
from .verify import build_closed_loop, closed_loop_eigs, gnc_locus, simulate_step

_TWO_PI = 2.0 * np.pi

EXIT_OK = 0
EXIT_BAD = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT = 3


def _parse_freqs(spec: str) -> SweepSettings:
    parts = spec.split(":")
    if len(parts) != 3:
        raise InputError(f"--freqs expects F_MIN:F_MAX:N (Hz), got {spec!r}")
    try:
        f_min, f_max, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InputError(f"--freqs {spec!r}: {exc}") from exc
    return SweepSettings(f_min_hz=f_min, f_max_hz=f_max, n_points=n)


def _load(system: str, freqs: str | None, adaptive: bool | None,
          samples: int | None, tol: float | None) -> SystemDescription:
    desc = load_system(resolve_system_path(system))
    if freqs is not None:
        desc.sweep = SweepSettings(**{**_parse_freqs(freqs).__dict__,
                                      "adaptive": desc.sweep.adaptive})
    if adaptive is not None:
        desc.sweep = SweepSettings(f_min_hz=desc.sweep.f_min_hz,
                                   f_max_hz=desc.sweep.f_max_hz,
                                   n_points=desc.sweep.n_points,
                                   adaptive=adaptive)
    if tol is not None or samples is not None:
        desc.tolerances = ToleranceSettings(
            tol_sep=tol if tol is not None else desc.tolerances.tol_sep,
            samples=samples if samples is not None else desc.tolerances.samples)
    return desc


@click.group()
def cli() -> None:
    """Separation certificates for converter fleets on inductive grids."""


@cli.command()
@click.argument("system")
@click.option("--centralized", is_flag=True,
              help="Certify the aggregate fleet instead of each converter.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for the machine-readable bundle.")
@click.option("--freqs", default=None, metavar="F_MIN:F_MAX:N",
              help="Sweep grid in Hz, overriding the system file.")
@click.option("--adaptive/--no-adaptive", "adaptive", default=None,
              help="Toggle adaptive refinement around margin dips.")
@click.option("--samples", type=int, default=None,
              help="Shell sample budget for exported clouds.")
@click.option("--tol", type=float, default=None,
              help="Separation tolerance (margin units).")
@click.option("--format", "fmt", type=click.Choice(["report", "csv"]),
              default="report", help="stdout format.")
def certify(system, centralized, out, freqs, adaptive, samples, tol, fmt) -> int:
    """Run the frequency-sweep separation certificate."""
    desc = _load(system, freqs, adaptive, samples, tol)
    rn = desc.reduced()
    run = centralized_certify if centralized else decentralized_certify
    report = run(desc.fleet, rn, desc.sweep.build(),
                 adaptive=desc.sweep.adaptive, tol_sep=desc.tolerances.tol_sep)
    click.echo(report.margins_csv() if fmt == "csv" else report.summary(), nl=False)
    if out:
        for f in export_certification(out, desc, rn, report):
            click.echo(f"wrote {f}", err=True)
    return {"certified_stable": EXIT_OK,
            "not_certified": EXIT_BAD}.get(report.overall_verdict, EXIT_INCONCLUSIVE)


@cli.command()
@click.argument("system")
@click.argument("freq_hz", type=float)
@click.argument("converter", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), default=".",
              help="Directory for the cloud CSV, record, and arm samples.")
@click.option("--samples", type=int, default=None,
              help="Shell sample budget.")
def shell(system, freq_hz, converter, out, samples) -> int:
    """Sample one converter's shell at FREQ_HZ and dump it with the arm."""
    desc = _load(system, None, None, samples, None)
    rn = desc.reduced()
    omega = _TWO_PI * freq_hz
    if freq_hz < 0.0:
        raise InputError(f"FREQ_HZ must be nonnegative, got {freq_hz}")
    for f in export_shell(out, desc, rn, converter, omega):
        click.echo(f"wrote {f}")
    return EXIT_OK


@cli.command()
@click.argument("system")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for the reduced-network record and arm samples.")
def gscr(system, out) -> int:
    """Print the generalized short-circuit ratio of the reduced network."""
    desc = _load(system, None, None, None, None)
    rn = desc.reduced()
    click.echo(f"{rn.gscr:.12g}")
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "network.record").write_text(rn.record())
        (outdir / "segment.csv").write_text(network_shell_segment(rn).to_csv())
    return EXIT_OK


@cli.command()
@click.argument("system")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for eigenvalue and locus CSVs.")
def verify(system, out) -> int:
    """Ground truth: closed-loop eigenvalues plus Nyquist encirclements."""
    desc = _load(system, None, None, None, None)
    rn = desc.reduced()
    spectrum = closed_loop_eigs(desc.fleet, rn)
    click.echo(f"spectral abscissa: {spectrum.spectral_abscissa:.6g}")
    click.echo(f"unstable eigenvalues: {spectrum.n_unstable}")
    try:
        locus = gnc_locus(desc.fleet, rn)
    except MarginalLocusError as exc:
        click.echo(f"nyquist: inconclusive ({exc})")
        return EXIT_INCONCLUSIVE
    click.echo(f"nyquist encirclements: {locus.encirclements}")
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        buf = ["re,im"]
        buf += [f"{v.real:.17g},{v.imag:.17g}" for v in spectrum.eigenvalues]
        (outdir / "eigenvalues.csv").write_text("\n".join(buf) + "\n")
        (outdir / "locus.csv").write_text(locus.to_csv())
    if locus.encirclements != spectrum.n_unstable:
        click.echo("oracles disagree; model is marginal or under-resolved")
        return EXIT_INCONCLUSIVE
    return EXIT_OK if spectrum.stable else EXIT_BAD


@cli.command()
@click.argument("system")
@click.argument("t_end", type=float, default=3.0)
@click.option("--dt", type=float, default=2e-4, help="Step size in seconds.")
@click.option("--channel", type=int, default=0,
              help="Disturbed bus-current channel (2 per converter: d, q).")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for trajectory and voltage CSVs.")
def simulate(system, t_end, dt, channel, out) -> int:
    """Kick the closed loop with a current pulse and classify the response."""
    desc = _load(system, None, None, None, None)
    rn = desc.reduced()
    cl = build_closed_loop(desc.fleet, rn)
    if not (0 <= channel < cl.input_gain.shape[1]):
        raise InputError(f"channel {channel} out of range 0..{cl.input_gain.shape[1] - 1}")
    d = np.zeros(cl.input_gain.shape[1])
    d[channel] = 1.0
    ts = simulate_step(cl, d, t_end, dt)

    norms = np.linalg.norm(ts.states, axis=1)
    tail = ts.t >= 0.5 * t_end
    safe = np.maximum(norms[tail], 1e-300)
    slope = np.polyfit(ts.t[tail], np.log(safe), 1)[0]

    k = int(np.argmax(np.var(ts.states, axis=0)))
    sig = ts.states[:, k] - ts.states[:, k].mean()
    spec = np.abs(np.fft.rfft(sig * np.hanning(sig.size)))
    peak = int(np.argmax(spec[1:])) + 1
    dom_hz = peak / (sig.size * ts.dt)

    click.echo(f"growth rate: {slope:.6g} 1/s")
    click.echo(f"dominant frequency: {dom_hz:.4g} Hz")
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "trajectory.csv").write_text(ts.to_csv())
        (outdir / "voltages.csv").write_text(ts.voltages_csv())
    if slope < -1e-3:
        click.echo("verdict: decaying")
        return EXIT_OK
    if slope > 1e-3:
        click.echo("verdict: growing")
        return EXIT_BAD
    click.echo("verdict: marginal")
    return EXIT_INCONCLUSIVE


@cli.command()
def systems() -> int:
    """List the bundled example systems."""
    for name in bundled_system_names():
        click.echo(name)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, standalone_mode=False)
    except DwshellError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INPUT
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_INPUT
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INPUT
    return int(code) if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

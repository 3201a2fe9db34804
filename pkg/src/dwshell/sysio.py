"""System-description files and all on-disk serialization.

A ``.sys`` file is YAML with four sections: ``network``, ``converters``,
``sweep``, ``tolerances`` (plus ``name``/``description``).  Converters
are either explicit state-space blocks or parameter records for the
bundled grid-following model.  Frequencies are given in Hz at the file
and CLI surface and converted to rad/s internally.

Loading is eager and strict: every module invariant is checked here,
and schema problems raise InputError naming the offending field path
(YAML syntax errors carry the parser's line/column).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .converters import ConverterFleet, LtiBlock, bundled_gfl_model, freq_response
from .errors import DwshellError, InputError
from .network import NetworkDescription, ReducedNetwork, network_shell_segment, reduce_network
from .shells import SamplerSpec, dw_shell_samples
from .stability import FrequencySweep, StabilityReport, TOL_SEP, default_sweep

__all__ = [
    "SweepSettings", "ToleranceSettings", "SystemDescription",
    "load_system", "save_system", "bundled_system_names", "bundled_system_path",
    "export_certification", "export_shell",
]

_TWO_PI = 2.0 * np.pi

_GFL_PARAM_KEYS = {
    "p0", "q0", "v0", "pll_bandwidth_hz", "pll_zero_hz",
    "current_loop_bandwidth_hz", "filter_inductance",
}


@dataclass(frozen=True)
class SweepSettings:
    f_min_hz: float = 0.1
    f_max_hz: float = 1000.0
    n_points: int = 400
    adaptive: bool = True

    def __post_init__(self):
        if not (0.0 < self.f_min_hz < self.f_max_hz):
            raise InputError(
                f"sweep needs 0 < f_min_hz < f_max_hz, got "
                f"{self.f_min_hz} and {self.f_max_hz}")
        if self.n_points < 2:
            raise InputError(f"sweep n_points must be >= 2, got {self.n_points}")

    def build(self) -> FrequencySweep:
        return default_sweep(self.f_min_hz, self.f_max_hz, self.n_points)


@dataclass(frozen=True)
class ToleranceSettings:
    tol_sep: float = TOL_SEP
    samples: int | None = None

    def __post_init__(self):
        if not (self.tol_sep > 0.0):
            raise InputError(f"tol_sep must be positive, got {self.tol_sep}")
        if self.samples is not None and self.samples < 8:
            raise InputError(f"samples must be >= 8, got {self.samples}")

    def sampler(self) -> SamplerSpec:
        if self.samples is None:
            return SamplerSpec()
        return SamplerSpec().scaled(self.samples)


@dataclass
class SystemDescription:
    name: str
    description: str
    network: NetworkDescription
    fleet: ConverterFleet
    sweep: SweepSettings = field(default_factory=SweepSettings)
    tolerances: ToleranceSettings = field(default_factory=ToleranceSettings)
    converter_specs: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if len(self.fleet) != self.network.n_converter_buses:
            raise InputError(
                f"{len(self.fleet)} converters for "
                f"{self.network.n_converter_buses} network converter buses")

    def reduced(self) -> ReducedNetwork:
        return reduce_network(self.network)


def _expect_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise InputError(f"{where}: expected a mapping, got {type(value).__name__}")
    return value


def _expect_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _expect_matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: not a numeric array ({exc})") from exc
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise InputError(f"{where}: expected a nested (2D) numeric array")
    return arr


def _parse_network(raw, where: str) -> NetworkDescription:
    raw = _expect_mapping(raw, where)
    allowed = {"converter_buses", "interior_buses", "lines", "grounded_ties", "capacities"}
    unknown = set(raw) - allowed
    if unknown:
        raise InputError(f"{where}: unknown keys {sorted(unknown)}")
    conv = raw.get("converter_buses")
    if not isinstance(conv, list) or not all(isinstance(b, str) for b in conv):
        raise InputError(f"{where}.converter_buses: expected a list of bus names")
    interior = raw.get("interior_buses", []) or []
    if not isinstance(interior, list) or not all(isinstance(b, str) for b in interior):
        raise InputError(f"{where}.interior_buses: expected a list of bus names")
    lines = []
    for k, entry in enumerate(raw.get("lines", []) or []):
        if not isinstance(entry, list) or len(entry) != 3:
            raise InputError(f"{where}.lines[{k}]: expected [bus_a, bus_b, susceptance]")
        a, b, y = entry
        lines.append((str(a), str(b), _expect_number(y, f"{where}.lines[{k}][2]")))
    ties_raw = raw.get("grounded_ties", {}) or {}
    ties = {str(bus): _expect_number(y, f"{where}.grounded_ties[{bus}]")
            for bus, y in _expect_mapping(ties_raw, f"{where}.grounded_ties").items()}
    caps_raw = raw.get("capacities", {}) or {}
    caps = {str(bus): _expect_number(s, f"{where}.capacities[{bus}]")
            for bus, s in _expect_mapping(caps_raw, f"{where}.capacities").items()}
    try:
        return NetworkDescription(converter_buses=list(conv), interior_buses=list(interior),
                                  lines=lines, grounded_ties=ties, capacities=caps)
    except InputError as exc:
        raise InputError(f"{where}: {exc}") from exc


def _parse_converter(raw, where: str) -> tuple[LtiBlock, dict]:
    raw = _expect_mapping(raw, where)
    model = raw.get("model")
    name = str(raw.get("name", ""))
    if model == "gfl":
        params = _expect_mapping(raw.get("params", {}), f"{where}.params")
        unknown = set(params) - _GFL_PARAM_KEYS
        if unknown:
            raise InputError(f"{where}.params: unknown keys {sorted(unknown)} "
                             f"(allowed: {sorted(_GFL_PARAM_KEYS)})")
        vals = {k: _expect_number(v, f"{where}.params.{k}") for k, v in params.items()}
        try:
            block = bundled_gfl_model(
                p0=vals.get("p0", 1.0), q0=vals.get("q0", 0.0), v0=vals.get("v0", 1.0),
                pll_bandwidth=_TWO_PI * vals.get("pll_bandwidth_hz", 20.0),
                pll_zero=_TWO_PI * vals.get("pll_zero_hz", 300.0),
                current_loop_bandwidth=_TWO_PI * vals.get("current_loop_bandwidth_hz", 25.0),
                filter_inductance=vals.get("filter_inductance", 0.2),
                name=name or "gfl")
        except InputError as exc:
            raise InputError(f"{where}: {exc}") from exc
        spec = {"name": block.name, "model": "gfl",
                "params": {k: vals.get(k, d) for k, d in (
                    ("p0", 1.0), ("q0", 0.0), ("v0", 1.0),
                    ("pll_bandwidth_hz", 20.0), ("pll_zero_hz", 300.0),
                    ("current_loop_bandwidth_hz", 25.0), ("filter_inductance", 0.2))}}
        return block, spec
    if model == "state_space":
        mats = {}
        for key in ("a", "b", "c", "d"):
            if key not in raw:
                raise InputError(f"{where}: state_space converter is missing {key!r}")
            mats[key] = _expect_matrix(raw[key], f"{where}.{key}")
        try:
            block = LtiBlock(mats["a"], mats["b"], mats["c"], mats["d"],
                             name=name or "state_space")
        except DwshellError as exc:
            raise InputError(f"{where}: {exc}") from exc
        spec = {"name": block.name, "model": "state_space",
                "a": block.a.tolist(), "b": block.b.tolist(),
                "c": block.c.tolist(), "d": block.d.tolist()}
        return block, spec
    raise InputError(f"{where}.model: expected 'gfl' or 'state_space', got {model!r}")


def _parse_sweep(raw, where: str) -> SweepSettings:
    if raw is None:
        return SweepSettings()
    raw = _expect_mapping(raw, where)
    allowed = {"f_min_hz", "f_max_hz", "n_points", "adaptive"}
    unknown = set(raw) - allowed
    if unknown:
        raise InputError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key in ("f_min_hz", "f_max_hz"):
        if key in raw:
            kwargs[key] = _expect_number(raw[key], f"{where}.{key}")
    if "n_points" in raw:
        n = raw["n_points"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise InputError(f"{where}.n_points: expected an integer, got {n!r}")
        kwargs["n_points"] = n
    if "adaptive" in raw:
        if not isinstance(raw["adaptive"], bool):
            raise InputError(f"{where}.adaptive: expected true/false")
        kwargs["adaptive"] = raw["adaptive"]
    try:
        return SweepSettings(**kwargs)
    except InputError as exc:
        raise InputError(f"{where}: {exc}") from exc


def _parse_tolerances(raw, where: str) -> ToleranceSettings:
    if raw is None:
        return ToleranceSettings()
    raw = _expect_mapping(raw, where)
    allowed = {"tol_sep", "samples"}
    unknown = set(raw) - allowed
    if unknown:
        raise InputError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    if "tol_sep" in raw:
        kwargs["tol_sep"] = _expect_number(raw["tol_sep"], f"{where}.tol_sep")
    if "samples" in raw and raw["samples"] is not None:
        n = raw["samples"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise InputError(f"{where}.samples: expected an integer, got {n!r}")
        kwargs["samples"] = n
    try:
        return ToleranceSettings(**kwargs)
    except InputError as exc:
        raise InputError(f"{where}: {exc}") from exc


def load_system(path) -> SystemDescription:
    """Parse and fully validate a .sys file."""
    p = Path(path)
    if not p.exists():
        raise InputError(f"system file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise InputError(f"{p}: YAML syntax error{loc}: {exc}") from exc
    raw = _expect_mapping(raw, str(p))
    allowed = {"name", "description", "network", "converters", "sweep", "tolerances"}
    unknown = set(raw) - allowed
    if unknown:
        raise InputError(f"{p}: unknown top-level keys {sorted(unknown)}")
    if "network" not in raw:
        raise InputError(f"{p}: missing required section 'network'")
    if "converters" not in raw:
        raise InputError(f"{p}: missing required section 'converters'")

    network = _parse_network(raw["network"], f"{p}: network")
    conv_raw = raw["converters"]
    if not isinstance(conv_raw, list) or not conv_raw:
        raise InputError(f"{p}: converters: expected a non-empty list")
    blocks, specs = [], []
    for k, entry in enumerate(conv_raw):
        block, spec = _parse_converter(entry, f"{p}: converters[{k}]")
        blocks.append(block)
        specs.append(spec)
    if len(blocks) != network.n_converter_buses:
        raise InputError(
            f"{p}: {len(blocks)} converters listed for "
            f"{network.n_converter_buses} converter buses "
            f"({', '.join(network.converter_buses)})")
    sweep = _parse_sweep(raw.get("sweep"), f"{p}: sweep")
    tol = _parse_tolerances(raw.get("tolerances"), f"{p}: tolerances")
    return SystemDescription(
        name=str(raw.get("name", p.stem)),
        description=str(raw.get("description", "")).strip(),
        network=network, fleet=ConverterFleet(blocks),
        sweep=sweep, tolerances=tol, converter_specs=specs)


def save_system(desc: SystemDescription, path) -> None:
    """Serialize back to the .sys schema (round-trips through load_system)."""
    doc = {
        "name": desc.name,
        "description": desc.description,
        "network": {
            "converter_buses": list(desc.network.converter_buses),
            "interior_buses": list(desc.network.interior_buses),
            "lines": [[a, b, y] for a, b, y in desc.network.lines],
            "grounded_ties": dict(desc.network.grounded_ties),
            "capacities": dict(desc.network.capacities),
        },
        "converters": desc.converter_specs,
        "sweep": {
            "f_min_hz": desc.sweep.f_min_hz,
            "f_max_hz": desc.sweep.f_max_hz,
            "n_points": desc.sweep.n_points,
            "adaptive": desc.sweep.adaptive,
        },
        "tolerances": {
            "tol_sep": desc.tolerances.tol_sep,
            "samples": desc.tolerances.samples,
        },
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


# ---------------------------------------------------------------------------
# bundled example systems


def bundled_system_names() -> list[str]:
    root = resources.files("dwshell") / "systems"
    return sorted(f.name[:-4] for f in root.iterdir() if f.name.endswith(".sys"))


def bundled_system_path(name: str) -> Path:
    root = resources.files("dwshell") / "systems"
    candidate = root / f"{name}.sys"
    if not candidate.is_file():
        known = ", ".join(bundled_system_names()) or "<none>"
        raise InputError(f"no bundled system named {name!r} (available: {known})")
    return Path(str(candidate))


def resolve_system_path(spec: str) -> Path:
    """A CLI SYSTEM argument: a real path, or a bundled system name."""
    p = Path(spec)
    if p.exists():
        return p
    if "/" not in spec and "\\" not in spec:
        try:
            return bundled_system_path(spec)
        except InputError:
            pass
    raise InputError(f"system file not found: {spec}")


# ---------------------------------------------------------------------------
# output bundles for the CLI


def export_certification(outdir, desc: SystemDescription, rn: ReducedNetwork,
                         report: StabilityReport,
                         sampler: SamplerSpec | None = None) -> list[Path]:
    """Write the machine-readable certification bundle.

    report.txt        structured-text report record
    margins.csv       per-frequency margins
    segment.csv       truncated network parabola arm
    shell_*.csv       shell cloud of each series at its critical frequency
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str) -> None:
        f = out / name
        f.write_text(text)
        written.append(f)

    put("report.txt", report.record())
    put("margins.csv", report.margins_csv())
    put("segment.csv", network_shell_segment(rn).to_csv())

    spec = sampler or desc.tolerances.sampler()
    for omega, idx, _margin in report.critical_frequencies:
        if idx == "aggregate":
            from .converters import aggregate_fleet
            mat = aggregate_fleet(desc.fleet, omega)
            label = "aggregate"
        else:
            mat = freq_response(desc.fleet.blocks[idx], omega)
            label = f"c{idx}"
        hz = omega / _TWO_PI if np.isfinite(omega) else np.inf
        cloud = dw_shell_samples(mat, spec, source_label=f"{desc.name}:{label}@{hz:g}Hz")
        put(f"shell_{label}_critical.csv", cloud.to_csv())
    return written


def export_shell(outdir, desc: SystemDescription, rn: ReducedNetwork,
                 converter_index: int, omega: float,
                 sampler: SamplerSpec | None = None) -> list[Path]:
    """Write one converter's shell cloud, its record, and the arm samples."""
    if not (0 <= converter_index < len(desc.fleet)):
        raise InputError(f"converter index {converter_index} out of range "
                         f"0..{len(desc.fleet) - 1}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    spec = sampler or desc.tolerances.sampler()
    mat = freq_response(desc.fleet.blocks[converter_index], omega)
    hz = omega / _TWO_PI if np.isfinite(omega) else np.inf
    cloud = dw_shell_samples(mat, spec,
                             source_label=f"{desc.name}:c{converter_index}@{hz:g}Hz")
    paths = []
    f = out / f"shell_c{converter_index}.csv"
    f.write_text(cloud.to_csv())
    paths.append(f)
    f = out / f"shell_c{converter_index}.record"
    f.write_text(cloud.record())
    paths.append(f)
    f = out / "segment.csv"
    f.write_text(network_shell_segment(rn).to_csv())
    paths.append(f)
    return paths

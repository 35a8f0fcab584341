"""Scenario files: YAML documents describing one computation.

Every section and key is listed in ``SCHEMA``; anything else is an error.
See README.md for the full grammar. Command-line flags are merged into the
parsed document before it is checked, so flags always win over file values.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from .core_types import (
    LatticePotential,
    ParticleChain,
    ScattererParams,
    SpectralLine,
    Spectrum,
    ValidationError,
    validate_spectrum,
)
from .dynamics import DynamicsConfig, characteristic_times
from .spectral_designer import PRESET_NAMES, TARGET_NAMES, preset_spectrum
from .transfer_matrix import QuadratureConfig

SCENARIO_DIR_ENV = "FIBERBIND_SCENARIO_DIR"

SCHEMA: dict[str, set[str]] = {
    "description": set(),
    "spectrum": {"lines", "preset", "lines_file", "refractive_index", "physical"},
    "scatterer": {"zeta", "eta"},
    "particles": {"positions", "wells", "velocities", "units"},
    "lattice": {"depth", "intensity", "wavenumber"},
    "dynamics": {"integrator", "mass", "friction", "timestep", "duration", "record_stride",
                 "force_tol", "velocity_tol", "stop_on_convergence", "time_unit"},
    "quadrature": {"window", "rtol", "atol", "max_depth", "nodes", "domain"},
    "grid": {"d_min", "d_max", "samples", "units"},
    "design": {"target", "period", "m_max", "samples", "width"},
    "minimize": {"num_particles", "wells", "cap", "relax"},
    "relax": {"tolerance", "max_iter"},
    "field": {"wavenumber"},
    "landscape": {"particle", "samples"},
    "output": {"path", "profile_path"},
}
LINE_KEYS = {"intensity", "wavenumber", "linewidth"}
PRESET_KEYS = {"name", "m_max", "broadened"}
LENGTH_UNITS = {"inverse_k1": 1.0, "lambda1": 2.0 * math.pi}


@dataclass
class SchemaReport:
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def add(self, message: str) -> None:
        self.errors.append(message)


def resolve_path(path: str | os.PathLike) -> Path:
    """Find a scenario file, falling back to $FIBERBIND_SCENARIO_DIR."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(SCENARIO_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p


def load_document(path: str | os.PathLike) -> dict:
    p = resolve_path(path)
    with open(p, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ValidationError(f"{p}: scenario must be a mapping of sections")
    doc.setdefault("_base_dir", str(p.parent))
    return doc


def check_document(doc: Mapping[str, Any]) -> SchemaReport:
    report = SchemaReport()
    for section, body in doc.items():
        if section.startswith("_"):
            continue
        if section not in SCHEMA:
            report.add(f"unknown section '{section}'")
            continue
        if section == "description":
            continue
        if not isinstance(body, dict):
            report.add(f"section '{section}' must be a mapping")
            continue
        for key in body:
            if key not in SCHEMA[section]:
                report.add(f"unknown key '{section}.{key}'")
    spec_doc = doc.get("spectrum")
    if isinstance(spec_doc, dict):
        sources = [k for k in ("lines", "preset", "lines_file") if k in spec_doc]
        if not sources:
            report.add("missing key 'spectrum.lines' (or 'spectrum.preset' / 'spectrum.lines_file')")
        elif len(sources) > 1:
            report.add("give only one of spectrum.lines, spectrum.preset, spectrum.lines_file")
        for i, line in enumerate(spec_doc.get("lines") or [], start=1):
            if not isinstance(line, dict):
                report.add(f"spectrum.lines[{i}] must be a mapping")
                continue
            for key in line:
                if key not in LINE_KEYS:
                    report.add(f"unknown key 'spectrum.lines[{i}].{key}'")
            for key in ("intensity", "wavenumber"):
                if key not in line:
                    report.add(f"missing key 'spectrum.lines[{i}].{key}'")
        preset = spec_doc.get("preset")
        if isinstance(preset, dict):
            for key in preset:
                if key not in PRESET_KEYS:
                    report.add(f"unknown key 'spectrum.preset.{key}'")
            if "name" not in preset:
                report.add("missing key 'spectrum.preset.name'")
            elif preset["name"] not in PRESET_NAMES:
                report.add(f"unknown preset '{preset['name']}'")
        elif preset is not None:
            report.add("spectrum.preset must be a mapping")
    particles = doc.get("particles")
    if isinstance(particles, dict):
        if ("positions" in particles) == ("wells" in particles):
            report.add("particles needs exactly one of 'positions' or 'wells'")
        if "wells" in particles and not isinstance(doc.get("lattice"), dict):
            report.add("particles.wells requires a lattice section")
    lattice = doc.get("lattice")
    if isinstance(lattice, dict) and ("depth" in lattice) == ("intensity" in lattice):
        report.add("lattice needs exactly one of 'depth' or 'intensity'")
    design = doc.get("design")
    if isinstance(design, dict) and "target" in design and design["target"] not in TARGET_NAMES:
        report.add(f"unknown design target '{design['target']}'")
    if report.ok:
        # build every object so invariant violations surface here too
        try:
            scenario = Scenario(doc)
            if spec_doc is not None:
                for v in validate_spectrum(scenario.spectrum()).violations:
                    report.add(f"spectrum: {v}")
            for name in ("scatterer", "lattice", "particles", "dynamics", "quadrature"):
                if name in doc:
                    getattr(scenario, name)()
        except ValidationError as exc:
            report.add(str(exc))
        except (TypeError, ValueError, KeyError, OSError) as exc:
            report.add(f"{type(exc).__name__}: {exc}")
    return report


def scenario_schema_check(path: str | os.PathLike) -> SchemaReport:
    """Validate a scenario file and report every problem found."""
    try:
        doc = load_document(path)
    except (OSError, yaml.YAMLError, ValidationError) as exc:
        return SchemaReport([str(exc)])
    return check_document(doc)


def _float(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"'{name}' must be a number (got {value!r})") from None


def _complex(value, name: str) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValidationError(f"'{name}' must be [real, imag]")
        return complex(_float(value[0], name), _float(value[1], name))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            raise ValidationError(f"'{name}' is not a complex number: {value!r}") from None
    return complex(_float(value, name))


def read_spectrum_csv(path: str | os.PathLike, refractive_index: float = 1.0,
                      physical: bool = False) -> Spectrum:
    """Load lines from a CSV with columns intensity, wavenumber, linewidth."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    lines = []
    for i, row in enumerate(rows, start=1):
        try:
            lines.append(SpectralLine(float(row["intensity"]), float(row["wavenumber"]),
                                      float(row.get("linewidth") or 0.0)))
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"{path}: bad spectrum row {i}: {exc}") from None
    return Spectrum(tuple(lines), refractive_index, physical)


class Scenario:
    """Typed accessors over a checked scenario document."""

    def __init__(self, doc: Mapping[str, Any]):
        self.doc = dict(doc)
        self.base_dir = Path(self.doc.get("_base_dir", "."))

    def section(self, name: str) -> dict:
        return dict(self.doc.get(name) or {})

    def has(self, name: str) -> bool:
        return name in self.doc and self.doc[name] is not None

    def require(self, name: str) -> dict:
        if not self.has(name):
            raise ValidationError(f"missing section '{name}'")
        return self.section(name)

    def spectrum(self) -> Spectrum:
        spec_doc = self.require("spectrum")
        n = _float(spec_doc.get("refractive_index", 1.0), "spectrum.refractive_index")
        physical = bool(spec_doc.get("physical", False))
        if "preset" in spec_doc:
            p = spec_doc["preset"]
            s = preset_spectrum(p["name"], p.get("m_max"), bool(p.get("broadened", False)), n)
            return Spectrum(s.lines, n, physical)
        if "lines_file" in spec_doc:
            path = Path(spec_doc["lines_file"])
            if not path.is_absolute():
                path = self.base_dir / path
            return read_spectrum_csv(path, n, physical)
        if "lines" not in spec_doc:
            raise ValidationError("missing key 'spectrum.lines'")
        lines = tuple(SpectralLine(_float(l["intensity"], "intensity"),
                                   _float(l["wavenumber"], "wavenumber"),
                                   _float(l.get("linewidth", 0.0), "linewidth"))
                      for l in spec_doc["lines"])
        return Spectrum(lines, n, physical)

    def scatterer(self) -> ScattererParams:
        s = self.section("scatterer")
        return ScattererParams(_complex(s.get("zeta", 0.0), "scatterer.zeta"),
                               _float(s.get("eta", 1.0), "scatterer.eta"))

    def lattice(self) -> Optional[LatticePotential]:
        if not self.has("lattice"):
            return None
        lat = self.section("lattice")
        k = _float(lat.get("wavenumber", 1.0), "lattice.wavenumber")
        if "intensity" in lat:
            n = 1.0
            if self.has("spectrum"):
                n = _float(self.section("spectrum").get("refractive_index", 1.0), "refractive_index")
            return LatticePotential.from_intensity(_float(lat["intensity"], "lattice.intensity"), k, n)
        return LatticePotential(_float(lat["depth"], "lattice.depth"), k)

    def particles(self) -> ParticleChain:
        p = self.require("particles")
        if "wells" in p:
            lattice = self.lattice()
            if lattice is None:
                raise ValidationError("particles.wells requires a lattice section")
            return ParticleChain.from_wells([int(z) for z in p["wells"]], lattice)
        unit = LENGTH_UNITS.get(p.get("units", "inverse_k1"))
        if unit is None:
            raise ValidationError(f"unknown length unit {p.get('units')!r}")
        return ParticleChain(tuple(_float(x, "particles.positions") * unit for x in p["positions"]))

    def velocities(self):
        v = self.section("particles").get("velocities")
        return None if v is None else [_float(x, "particles.velocities") for x in v]

    def dynamics(self) -> DynamicsConfig:
        d = self.section("dynamics")
        unit_name = d.get("time_unit", "absolute")
        keys = {"integrator", "mass", "friction", "timestep", "duration", "record_stride",
                "force_tol", "velocity_tol", "stop_on_convergence"}
        kwargs = {k: d[k] for k in keys if k in d}
        for k in ("mass", "friction", "timestep", "duration", "force_tol", "velocity_tol"):
            if k in kwargs:
                kwargs[k] = _float(kwargs[k], f"dynamics.{k}")
        if "record_stride" in kwargs:
            kwargs["record_stride"] = int(kwargs["record_stride"])
        if "stop_on_convergence" in kwargs:
            kwargs["stop_on_convergence"] = bool(kwargs["stop_on_convergence"])
        config = DynamicsConfig(**kwargs)
        if unit_name == "absolute":
            return config
        t_mu, t_0 = characteristic_times(config, self.spectrum(), self.lattice())
        unit = {"t0": t_0, "t_mu": t_mu}.get(unit_name, "bad")
        if unit == "bad":
            raise ValidationError(f"unknown dynamics.time_unit {unit_name!r}")
        if unit is None:
            raise ValidationError(f"time unit {unit_name} is undefined for this scenario")
        return DynamicsConfig(**{**kwargs, "timestep": config.timestep * unit,
                                 "duration": config.duration * unit})

    def quadrature(self) -> QuadratureConfig:
        q = self.section("quadrature")
        kwargs = {}
        for k in ("window", "rtol", "atol"):
            if k in q:
                kwargs[k] = _float(q[k], f"quadrature.{k}")
        for k in ("max_depth", "nodes"):
            if k in q:
                kwargs[k] = int(q[k])
        if "domain" in q:
            kwargs["domain"] = str(q["domain"])
        return QuadratureConfig(**kwargs)

    def grid(self, default_max: float = 4.0, default_samples: int = 2000):
        """Distance grid in 1/k1; values in the file default to units of lambda1."""
        g = self.section("grid")
        unit = LENGTH_UNITS.get(g.get("units", "lambda1"))
        if unit is None:
            raise ValidationError(f"unknown length unit {g.get('units')!r}")
        d_min = _float(g.get("d_min", 0.0), "grid.d_min") * unit
        d_max = _float(g.get("d_max", default_max), "grid.d_max") * unit
        samples = int(g.get("samples", default_samples))
        if samples < 2 or d_max <= d_min or d_min < 0:
            raise ValidationError("grid needs 0 <= d_min < d_max and samples >= 2")
        return np.linspace(d_min, d_max, samples)

    def output_path(self, default: str) -> Path:
        return Path(self.section("output").get("path", default))

"""Command-line entry point: ``fiberbind <subcommand> [--scenario FILE] [flags]``.

Values are resolved in the order flag > scenario file > built-in default.
Every subcommand writes one CSV file (header row, comma separated, floats
with 17 significant digits, LF line endings) and prints a one-line summary.
Exit status is 0 on success, 2 for invalid input, 3 for numerical failures
and 4 for I/O errors; failures print ``error[<category>]: <message>`` to
stderr.
"""

from __future__ import annotations

import argparse
import copy
import math
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .core_types import FiberBindError, NumericalError, ParticleChain, ValidationError
from .dynamics import simulate
from .optimizer import enumerate_well_configs, landscape_scan, local_relax
from .pair_interactions import chain_forces, pair_force, pair_potential
from .scenario import Scenario, check_document, load_document, scenario_schema_check
from .spectral_designer import (
    PRESET_NAMES,
    TargetProfile,
    cosine_coefficients,
    evaluate_design,
    preset_spectrum,
)
from .transfer_matrix import solve_fields, total_force_exact

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
LAMBDA1 = 2.0 * math.pi


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write rows with fixed formatting so identical inputs give identical bytes."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
            count += 1
    return count


def _set(doc: dict, section: str, key: str, value) -> None:
    if value is not None:
        sect = doc.get(section)
        if not isinstance(sect, dict):
            sect = {}
        sect[key] = value
        doc[section] = sect


def apply_overrides(doc: dict, args: argparse.Namespace) -> dict:
    """Merge command-line flags into a scenario document (flags win)."""
    doc = copy.deepcopy(doc)
    if getattr(args, "preset", None) is not None and args.command not in ("design", "presets"):
        table = {k: v for k, v in (doc.get("spectrum") or {}).items()
                if k in ("refractive_index", "physical")}
        preset = {"name": args.preset}
        if args.mmax is not None:
            preset["m_max"] = args.mmax
        if args.broadened:
            preset["broadened"] = True
        table["preset"] = preset
        doc["spectrum"] = table
    elif getattr(args, "mmax", None) is not None and args.command not in ("design", "presets"):
        preset = (doc.get("spectrum") or {}).get("preset")
        if not isinstance(preset, dict):
            raise ValidationError("--mmax needs a preset spectrum (use --preset)")
        preset["m_max"] = args.mmax
    elif getattr(args, "broadened", False) and args.command not in ("design", "presets"):
        preset = (doc.get("spectrum") or {}).get("preset")
        if not isinstance(preset, dict):
            raise ValidationError("--broadened needs a preset spectrum (use --preset)")
        preset["broadened"] = True
    for key, flag in (("d_min", "dmin"), ("d_max", "dmax"), ("samples", "samples"),
                      ("units", "grid_units")):
        _set(doc, "grid", key, getattr(args, flag, None))
    if getattr(args, "positions", None) is not None:
        particles = {k: v for k, v in (doc.get("particles") or {}).items() if k == "units"}
        particles["positions"] = args.positions
        doc["particles"] = particles
    if getattr(args, "wells", None) is not None:
        if args.command == "minimize":
            _set(doc, "minimize", "wells", args.wells)
        else:
            doc["particles"] = {"wells": args.wells}
    for key in ("zeta", "eta"):
        _set(doc, "scatterer", key, getattr(args, key, None))
    _set(doc, "field", "wavenumber", getattr(args, "wavenumber", None))
    for key in ("integrator", "friction", "timestep", "duration", "mass"):
        _set(doc, "dynamics", key, getattr(args, key, None))
    _set(doc, "quadrature", "window", getattr(args, "window", None))
    if args.command == "design":
        _set(doc, "design", "target", getattr(args, "target", None))
        _set(doc, "design", "m_max", getattr(args, "mmax", None))
        _set(doc, "design", "period", getattr(args, "period", None))
    _set(doc, "minimize", "num_particles", getattr(args, "num_particles", None))
    _set(doc, "landscape", "particle", getattr(args, "particle", None))
    _set(doc, "output", "path", getattr(args, "output", None))
    return doc


def _finite(values, what: str) -> None:
    if not np.all(np.isfinite(np.asarray(values, dtype=float))):
        raise NumericalError(f"{what} contains non-finite values")


def cmd_pair(sc: Scenario, args, potential: bool) -> str:
    spectrum = sc.spectrum()
    d = sc.grid()
    values = pair_potential(d, spectrum) if potential else pair_force(d, spectrum)
    _finite(values, "pair curve")
    label = "U" if potential else "F"
    out = sc.output_path(f"pair_{'potential' if potential else 'force'}.csv")
    n = write_csv(out, ["d", "d_over_lambda1", label], zip(d, d / LAMBDA1, values))
    return f"{args.command}: {n} rows over d in [{d[0] / LAMBDA1:.4g}, {d[-1] / LAMBDA1:.4g}] lambda1 -> {out}"


def cmd_field(sc: Scenario, args) -> str:
    chain = sc.particles()
    params = sc.scatterer()
    k = float(sc.section("field").get("wavenumber", 1.0))
    state = solve_fields(chain, params, k)
    forces = state.forces()
    header = ["particle", "x", "A_re", "A_im", "B_re", "B_im", "C_re", "C_im", "D_re", "D_im", "force"]
    rows = []
    for j in range(len(chain)):
        amps = state.amplitudes[j]
        row = [j + 1, chain.positions[j]]
        for a in amps:
            row += [a.real, a.imag]
        rows.append(row + [forces[j]])
    out = sc.output_path("field.csv")
    write_csv(out, header, rows)
    return f"field: {len(chain)} particles at k = {k:.6g}, net force {float(np.sum(forces)):.3e} -> {out}"


def cmd_force_exact(sc: Scenario, args) -> str:
    chain = sc.particles()
    spectrum = sc.spectrum()
    params = sc.scatterer()
    exact = total_force_exact(chain, params, spectrum, sc.quadrature())
    weak = chain_forces(chain.array, spectrum) * params.eta ** 2
    _finite(exact, "exact force")
    out = sc.output_path("force_exact.csv")
    rows = [(j + 1, x, fe, fw) for j, (x, fe, fw) in enumerate(zip(chain.positions, exact, weak))]
    write_csv(out, ["particle", "x", "force_exact", "force_pairwise"], rows)
    dev = float(np.max(np.abs(exact - weak)))
    return f"force-exact: {len(chain)} particles, max |exact - pairwise| = {dev:.3e} -> {out}"


def cmd_design(sc: Scenario, args) -> str:
    design = sc.require("design")
    if "target" not in design:
        raise ValidationError("missing key 'design.target'")
    period = float(design.get("period", 1.0)) * LAMBDA1
    params = {"width": float(design["width"]) * LAMBDA1} if "width" in design else {}
    target = TargetProfile(period=period, name=design["target"], params=params)
    m_max = int(design.get("m_max", 10))
    n = float((sc.section("spectrum") or {}).get("refractive_index", 1.0)) if sc.has("spectrum") else 1.0
    spectrum = cosine_coefficients(target, m_max, int(design.get("samples", 4096)), n)
    out = sc.output_path("design.csv")
    write_csv(out, ["intensity", "wavenumber", "linewidth"],
              ((l.intensity, l.wavenumber, l.linewidth) for l in spectrum.lines))
    grid = np.linspace(0.0, 2.0 * period, 4001)
    report = evaluate_design(spectrum, target, grid)
    profile = sc.section("output").get("profile_path")
    if profile:
        write_csv(Path(profile), ["d", "d_over_lambda1", "target", "achieved"],
                  zip(grid, grid / LAMBDA1, report.target, report.achieved))
    return (f"design: {m_max} lines for '{target.name}', rms error {report.l2:.3e}, "
            f"overshoot {100 * report.overshoot:.2f}%, physical={report.physical} -> {out}")


def cmd_simulate(sc: Scenario, args) -> str:
    spectrum = sc.spectrum()
    lattice = sc.lattice()
    chain = sc.particles()
    config = sc.dynamics()
    traj = simulate(chain, spectrum, lattice, config, sc.velocities())
    n = len(chain)
    header = ["time"] + [f"x{j}" for j in range(1, n + 1)] + [f"v{j}" for j in range(1, n + 1)]
    out = sc.output_path("trajectory.csv")
    rows = (np.concatenate(([t], x, v)) for t, x, v in zip(traj.times, traj.positions, traj.velocities))
    count = write_csv(out, header, rows)
    seps = " ".join(f"{s:.5f}" for s in traj.separations[-1] / LAMBDA1)
    return (f"simulate: {count} frames to t = {traj.times[-1]:.6g}, final separations [{seps}] lambda1, "
            f"converged={traj.converged} -> {out}")


def _well_list(value) -> list[int]:
    wells = [int(w) for w in value]
    if len(wells) == 2 and wells[1] - wells[0] > 1:
        # [first, last] range shorthand
        return list(range(wells[0], wells[1] + 1))
    return wells


def cmd_minimize(sc: Scenario, args) -> str:
    spectrum = sc.spectrum()
    lattice = sc.lattice()
    if lattice is None:
        raise ValidationError("minimize needs a lattice section")
    mini = sc.require("minimize")
    if "num_particles" not in mini or "wells" not in mini:
        raise ValidationError("minimize needs 'minimize.num_particles' and 'minimize.wells'")
    wells = _well_list(mini["wells"])
    workers = max(1, min(int(args.threads or 1), os.cpu_count() or 1))
    kwargs = {"cap": int(mini["cap"])} if "cap" in mini else {}
    ranked = enumerate_well_configs(int(mini["num_particles"]), wells, spectrum, lattice,
                                    workers=workers, **kwargs)
    out = sc.output_path("ranking.csv")
    write_csv(out, ["rank", "assignment", "energy"],
              ((r.rank, " ".join(str(z) for z in r.assignment), r.energy) for r in ranked))
    best = ranked[0]
    summary = (f"minimize: {len(ranked)} configurations, best {{{','.join(map(str, best.assignment))}}} "
               f"E = {best.energy:.6g}")
    if mini.get("relax", False):
        relax = sc.section("relax")
        res = local_relax(ParticleChain.from_wells(best.assignment, lattice), spectrum, lattice,
                          float(relax.get("tolerance", 1e-9)), int(relax.get("max_iter", 200_000)))
        summary += f", relaxed E = {res.energy:.6g}"
    return summary + f" -> {out}"


def cmd_landscape(sc: Scenario, args) -> str:
    spectrum = sc.spectrum()
    lattice = sc.lattice()
    if lattice is None:
        raise ValidationError("landscape needs a lattice section")
    chain = sc.particles()
    land = sc.section("landscape")
    which = land.get("particle", "all")
    if which == "all":
        indices = range(len(chain))
    else:
        j = int(which)
        if not 1 <= j <= len(chain):
            raise ValidationError(f"landscape.particle must be in 1..{len(chain)} or 'all'")
        indices = [j - 1]
    samples = int(land.get("samples", 401))
    rows = []
    for j in indices:
        scan = landscape_scan(j, chain, spectrum, lattice, samples=samples)
        rows += [(j + 1, x, u, v, t) for x, u, v, t in zip(scan.x, scan.pair, scan.lattice, scan.total)]
    out = sc.output_path("landscape.csv")
    n = write_csv(out, ["particle", "x", "U", "V", "total"], rows)
    return f"landscape: {len(list(indices))} particle scans, {n} rows -> {out}"


def cmd_presets(sc: Scenario, args) -> str:
    names = [args.preset] if args.preset else list(PRESET_NAMES)
    rows = []
    for name in names:
        for broadened in ((True,) if args.broadened else (False, True)):
            table = preset_spectrum(name, args.mmax, broadened)
            for m, line in enumerate(table.lines, start=1):
                rows.append((name, broadened, m, line.intensity, line.wavenumber, line.linewidth))
    out = sc.output_path("presets.csv")
    n = write_csv(out, ["preset", "broadened", "m", "intensity", "wavenumber", "linewidth"], rows)
    return f"presets: {len(names)} presets, {n} lines -> {out}"


COMMANDS = {
    "pair-force": lambda sc, a: cmd_pair(sc, a, potential=False),
    "pair-potential": lambda sc, a: cmd_pair(sc, a, potential=True),
    "field": cmd_field,
    "force-exact": cmd_force_exact,
    "design": cmd_design,
    "simulate": cmd_simulate,
    "minimize": cmd_minimize,
    "landscape": cmd_landscape,
    "presets": cmd_presets,
}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-s", "--scenario", help="YAML scenario file (also searched in $FIBERBIND_SCENARIO_DIR)")
    common.add_argument("-o", "--output", help="output CSV path")
    common.add_argument("--threads", type=int, default=1, help="maximum worker threads")
    common.add_argument("--preset", choices=PRESET_NAMES, help="use a preset spectrum")
    common.add_argument("--mmax", type=int, help="number of preset lines / design harmonics")
    common.add_argument("--broadened", action="store_true", help="finite-linewidth preset variant")

    parser = argparse.ArgumentParser(prog="fiberbind", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def grid_flags(p):
        p.add_argument("--dmin", type=float, help="grid start (grid units)")
        p.add_argument("--dmax", type=float, help="grid end (grid units)")
        p.add_argument("--samples", type=int, help="number of grid points")
        p.add_argument("--grid-units", choices=("lambda1", "inverse_k1"), help="grid length unit")

    def chain_flags(p):
        p.add_argument("--positions", type=_floats, help="particle positions, e.g. '0 4.3 9'")
        p.add_argument("--wells", type=_ints, help="occupied well indices, e.g. '1 2 4'")

    def scatter_flags(p):
        p.add_argument("--zeta", type=lambda t: str(complex(t.replace(" ", ""))), help="polarizability, e.g. 0.01+0.001j")
        p.add_argument("--eta", type=float, help="pump coupling")

    for name in ("pair-force", "pair-potential"):
        grid_flags(sub.add_parser(name, parents=[common], help=f"tabulate the {name.split('-')[1]} curve"))
    p = sub.add_parser("field", parents=[common], help="mode amplitudes at one wavenumber")
    chain_flags(p)
    scatter_flags(p)
    p.add_argument("--wavenumber", type=float)
    p = sub.add_parser("force-exact", parents=[common], help="multiple-scattering forces over the spectrum")
    chain_flags(p)
    scatter_flags(p)
    p.add_argument("--window", type=float, help="integration window in linewidths")
    p = sub.add_parser("design", parents=[common], help="Fourier-design a spectrum for a target profile")
    p.add_argument("--target", help="target profile name")
    p.add_argument("--period", type=float, help="target period in lambda1")
    p = sub.add_parser("simulate", parents=[common], help="integrate particle trajectories")
    chain_flags(p)
    p.add_argument("--integrator", choices=("damped_newtonian", "overdamped", "undamped_newtonian"))
    for flag in ("mass", "friction", "timestep", "duration"):
        p.add_argument(f"--{flag}", type=float)
    p = sub.add_parser("minimize", parents=[common], help="rank well assignments by energy")
    p.add_argument("--num-particles", type=int)
    p.add_argument("--wells", type=_ints, help="candidate wells")
    p = sub.add_parser("landscape", parents=[common], help="single-particle potential scans")
    chain_flags(p)
    p.add_argument("--particle", help="1-based particle index or 'all'")
    sub.add_parser("presets", parents=[common], help="list preset line tables")
    sub.add_parser("check", parents=[common], help="validate a scenario file")
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            if not args.scenario:
                raise ValidationError("check needs --scenario")
            report = scenario_schema_check(args.scenario)
            for err in report.errors:
                print(f"  {err}")
            print(f"check: {args.scenario} {'ok' if report.ok else f'{len(report.errors)} problem(s)'}")
            return EXIT_OK if report.ok else EXIT_VALIDATION
        doc = load_document(args.scenario) if args.scenario else {}
        doc = apply_overrides(doc, args)
        report = check_document(doc)
        if not report.ok:
            raise ValidationError("; ".join(report.errors), report.errors)
        print(COMMANDS[args.command](Scenario(doc), args))
        return EXIT_OK
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"error[io]: {exc.strerror or exc}{where}", file=sys.stderr)
        return EXIT_IO
    except yaml.YAMLError as exc:
        print(f"error[validation]: cannot parse scenario: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"error[validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TypeError, ValueError, KeyError) as exc:
        print(f"error[validation]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FiberBindError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line entry point.

Exit codes: 0 success, 1 a requested check found violations, 2 usage or
configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import re
import secrets
import sys
import warnings
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from . import __version__
from .dielectrics import (
    ComplexPermittivity,
    MixtureComposition,
    debye_permittivity,
    mixture_permittivity,
    refractive_index,
)
from .errors import CatalogReadError, DermawaveError, FrequencyRangeWarning
from .exports import _csv_text, num, write_report, write_scenario
from .losses import absorption_coefficient
from .materials import Catalog, dump_catalog, load_catalog
from .scenario import GridConfig, generate_scenario, verify_realization
from .simulate import SimulationConfig, default_threads, run_monte_carlo

log = logging.getLogger("dermawave")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}
DIST_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}


class UsageError(Exception):
    pass


def parse_quantity(text: str, units: dict) -> float:
    m = re.fullmatch(r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\d\s]*)\s*", text)
    if not m:
        raise UsageError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if unit and unit not in units:
        raise UsageError(f"unknown unit {m.group(2)!r} in {text!r} (expected one of {', '.join(units)})")
    # inputs are decimal; drop the binary noise that scaling by 1e-6 etc. adds
    return float(format(value * units.get(unit, 1.0), ".15g"))


def parse_list(text: str, units: dict) -> List[float]:
    """Comma list whose items are values or inclusive ``start:step:stop`` ranges."""
    out: List[float] = []
    for item in text.split(","):
        if not item.strip():
            continue
        parts = item.split(":")
        if len(parts) == 1:
            out.append(parse_quantity(parts[0], units))
        elif len(parts) == 3:
            start, step, stop = (parse_quantity(p, units) for p in parts)
            if step <= 0 or stop < start:
                raise UsageError(f"range {item!r} needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            out.extend(float(format(start + k * step, ".12g")) for k in range(n + 1))
        else:
            raise UsageError(f"bad list item {item!r}; use a value or start:step:stop")
    if not out:
        raise UsageError("empty list")
    return out


def parse_composition(text: str, catalog: Catalog) -> MixtureComposition:
    """``protein=0.25,lipid=0.05`` style literal; water takes the remainder."""
    inclusions = []
    for item in text.split(","):
        name, _, frac = item.partition("=")
        name = name.strip()
        if name not in catalog.components:
            raise UsageError(f"unknown component {name!r} in composition {text!r}")
        try:
            phi = float(frac)
        except ValueError:
            raise UsageError(f"bad fraction in {item!r}") from None
        if name != "water":
            inclusions.append((name, phi))
    return MixtureComposition(tuple(inclusions))


def resolve_material(name: str, catalog: Catalog) -> Callable[[float], ComplexPermittivity]:
    """Permittivity-vs-frequency function for a material id or composition literal."""
    if name in catalog.components:
        params = catalog.component_params(name)
        return lambda f: debye_permittivity(params, f)
    if "=" in name:
        comp = parse_composition(name, catalog)
    else:
        try:
            comp = catalog.material_composition(name)
        except KeyError:
            raise UsageError(f"unknown material {name!r}") from None
    return lambda f: mixture_permittivity(comp, f, catalog)


# -- subcommands -------------------------------------------------------------


def _catalog(args) -> Catalog:
    return load_catalog(args.catalog, builtin=args.builtin or args.catalog is None)


def _out_dir(path: str) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
        probe = p / ".dermawave-write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {p} is not writable: {exc.strerror}") from exc
    return p


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    if args.seed_from_entropy:
        seed = secrets.randbits(63)
        print(f"seed: {seed}")
        log.warning("using entropy seed %d", seed)
        return seed
    raise UsageError("--seed is required (or pass --seed-from-entropy)")


def _grid(args, seed: int) -> GridConfig:
    extent = (args.x_mm * 1e-3, args.y_mm * 1e-3, args.z_mm * 1e-3)
    try:
        return GridConfig(dx=args.dx_um * 1e-6, extent=extent, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_dump_catalog(args) -> int:
    text = dump_catalog(_catalog(args))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_permittivity(args) -> int:
    catalog = _catalog(args)
    permittivity = resolve_material(args.material, catalog)
    freqs = parse_list(args.f, FREQ_UNITS)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FrequencyRangeWarning)
        for f in freqs:
            if not f > 0:
                raise UsageError(f"frequency must be > 0, got {f}")
            eps = permittivity(f)
            n = refractive_index(eps)
            rows.append((f, eps.eps_real, eps.eps_imag, n.n_real, n.n_imag, absorption_coefficient(n, f)))
    text = _csv_text(("f_hz", "eps_real", "eps_imag", "n_real", "n_imag", "mu_abs_per_m"), rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _density_summary(counts) -> None:
    print("species,target,achieved,achieved_per_mm3")
    for sp, c in counts.items():
        print(f"{sp},{c.target},{c.achieved},{num(c.achieved_density / 1e9)}")


def cmd_scenario(args) -> int:
    catalog = _catalog(args)
    grid = _grid(args, _seed(args))
    out = _out_dir(args.out)
    real = generate_scenario(grid, catalog)
    write_scenario(real, out)
    _density_summary(real.counts)
    if args.verify:
        problems = verify_realization(real, catalog)
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        if problems:
            return EXIT_CHECK
        print("verify: ok")
    return EXIT_OK


def self_check(report) -> List[str]:
    bad = []
    for r in report.attenuation:
        b = r.loss
        prod = b.spreading.factor * b.absorption.factor * b.scattering.factor
        if not math.isclose(b.total.factor, prod, rel_tol=1e-12, abs_tol=0.0) and not (prod == b.total.factor == 0):
            bad.append(f"f={r.frequency:g} d={r.distance:g}: factor product mismatch")
        if abs(b.total.db - (b.spreading.db + b.absorption.db + b.scattering.db)) > 1e-9:
            bad.append(f"f={r.frequency:g} d={r.distance:g}: dB sum mismatch")
    return bad


def cmd_simulate(args) -> int:
    catalog = _catalog(args)
    seed = _seed(args)
    grid = _grid(args, seed)
    freqs = parse_list(args.f, FREQ_UNITS)
    dists = parse_list(args.d, DIST_UNITS)
    if any(not f > 0 for f in freqs):
        raise UsageError("frequencies must be > 0")
    z = grid.extent[2]
    if any(d < 0 or d > z * (1 + 1e-12) for d in dists):
        raise UsageError(f"distances must lie in [0, {num(z)}] m")
    if args.bins < 2:
        raise UsageError("--bins must be >= 2")
    if args.n_realizations < 1:
        raise UsageError("--n-realizations must be >= 1")
    column = None
    if args.column:
        try:
            ix, iy = (int(v) for v in args.column.split(","))
        except ValueError:
            raise UsageError("--column takes IX,IY") from None
        nx, ny, _ = grid.shape
        if not (0 <= ix < nx and 0 <= iy < ny):
            raise UsageError(f"--column outside the {nx}x{ny} lateral grid")
        column = (ix, iy)
    if args.directivity < 1:
        raise UsageError("--directivity must be >= 1")
    out = _out_dir(args.out)

    cfg = SimulationConfig(
        frequencies=tuple(freqs),
        distances=tuple(dists),
        grid=grid,
        directivity=args.directivity,
        bins=args.bins,
        n_realizations=args.n_realizations,
        threads=default_threads(),
        column=column,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FrequencyRangeWarning)
        report = run_monte_carlo(cfg, catalog)
    write_report(report, out)
    print(f"{len(report.attenuation)} attenuation rows, {len(report.histograms)} histograms -> {out}")
    if args.self_check:
        problems = self_check(report)
        for p in problems:
            print(f"self-check: {p}", file=sys.stderr)
        if problems:
            return EXIT_CHECK
        print("self-check: ok")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dermawave", description="Terahertz skin tissue channel simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--catalog", help="catalog file (default: packaged values)")
    src.add_argument("--builtin", action="store_true", help="use the packaged catalog")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, help="master seed (required unless --seed-from-entropy)")
    seeded.add_argument("--seed-from-entropy", action="store_true")
    seeded.add_argument("--x-mm", type=float, default=0.1)
    seeded.add_argument("--y-mm", type=float, default=0.1)
    seeded.add_argument("--z-mm", type=float, default=5.0)
    seeded.add_argument("--dx-um", type=float, default=10.0)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dump-catalog", parents=[common], help="print the catalog in file format")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_catalog)

    p = sub.add_parser("permittivity", parents=[common], help="permittivity and index of a material")
    p.add_argument("material", help="component, cell, layer or ecm_<layer> id, or a literal like protein=0.25,lipid=0.05")
    p.add_argument("--f", default="100e9,1e12", help="frequencies, e.g. 100GHz,1THz or 0.1THz:0.1THz:1THz")
    p.add_argument("--out")
    p.set_defaults(func=cmd_permittivity)

    p = sub.add_parser("scenario", parents=[common, seeded], help="generate one tissue realization")
    p.add_argument("--out", default="dermawave-out")
    p.add_argument("--verify", action="store_true", help="run the brute-force geometry checks")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("simulate", parents=[common, seeded], help="Monte Carlo attenuation and coefficient PDFs")
    p.add_argument("--f", default="100e9,1e12")
    p.add_argument("--d", default="0:0.5mm:5mm")
    p.add_argument("--out", default="dermawave-out")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--n-realizations", type=int, default=10)
    p.add_argument("--directivity", type=float, default=1.0)
    p.add_argument("--column", help="IX,IY: integrate one voxel column instead of the lateral mean")
    p.add_argument("--self-check", action="store_true", help="verify loss factorization on every row")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CatalogReadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DermawaveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

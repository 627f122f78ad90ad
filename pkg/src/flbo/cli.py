"""Command-line front end: ``flbo <subcommand> [options]``.

Exit codes: 0 success, 1 validation failure, 2 input error, 3 missing
prerequisite file. Configuration comes from an optional JSON file; explicit
flags override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import fixtures
from .diffusion import DiffusionConfig, drift_source, implicit_euler_diffuse, simplified_randers_solve
from .exceptions import ConfigurationError, FLBOError
from .geometry import estimate_curvature_frames, write_frames_csv
from .mesh import load_mesh
from .operators import AnisotropyParams, assemble_albo, assemble_family, export_family, load_family
from .spectral import (
    FilterSpec,
    anisotropic_convolve,
    directional_sum_convolve,
    eigensolve,
    finsler_hks,
    heat_propagate,
    read_field_csv,
    write_descriptor_csv,
    write_eigenvalues_csv,
    write_eigenvectors,
    write_field_csv,
)
from .validation import CHECKS, run_validation

logger = logging.getLogger("flbo")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_MISSING = 0, 1, 2, 3
STEM = "flbo"


class MissingPrerequisite(Exception):
    pass


def default_times():
    return np.geomspace(0.01, 1.0, 8).tolist()


@dataclass
class RunConfig:
    mesh_path: str | None = None
    anisotropy_level: float = 10.0
    tau: float = 0.1
    n_angles: int = 8
    n_eigenpairs: int = 128
    chebyshev_order: int = 16
    times: list = field(default_factory=default_times)
    seed: int = 0
    output_dir: str = "."

    def __post_init__(self):
        for name in ("n_angles", "n_eigenpairs", "chebyshev_order"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value}")
            setattr(self, name, int(value))
        self.times = [float(t) for t in self.times]
        if not self.times or any(t <= 0 for t in self.times):
            raise ConfigurationError("times must be a non-empty list of positive values")
        self.seed = int(self.seed)

    @property
    def params(self):
        return AnisotropyParams(self.anisotropy_level, self.tau, self.n_angles)


# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "mesh": "mesh_path", "alpha": "anisotropy_level", "tau": "tau", "angles": "n_angles",
    "eigs": "n_eigenpairs", "cheb_order": "chebyshev_order", "times": "times", "seed": "seed",
    "out": "output_dir",
}


def build_config(args):
    values = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise MissingPrerequisite(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    return RunConfig(**values)


def _mesh(config):
    if not config.mesh_path:
        raise ConfigurationError("no mesh given; use --mesh PATH or --mesh fixture:NAME")
    if config.mesh_path.startswith("fixture:"):
        return fixtures.fixture(config.mesh_path.split(":", 1)[1])
    path = Path(config.mesh_path)
    if not path.exists():
        raise MissingPrerequisite(f"mesh file not found: {path}")
    return load_mesh(path)


def _out_dir(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _operators(config, args):
    """Operator family, either loaded from ``--operators`` or assembled from the mesh."""
    if getattr(args, "operators", None):
        try:
            return load_family(args.operators, STEM)
        except FileNotFoundError as exc:
            raise MissingPrerequisite(f"operator file not found: {exc}") from exc
    return assemble_family(_mesh(config), config.params)


def _pick(pairs, index):
    if not 0 <= index < len(pairs):
        raise ConfigurationError(f"--theta-index {index} out of range [0, {len(pairs)})")
    return pairs[index]


def _basis(config, pair):
    k = min(config.n_eigenpairs, pair.n)
    return eigensolve(pair, k, seed=config.seed)


def _read_vector(path, what):
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisite(f"{what} file not found: {path}")
    return read_field_csv(path)


# ---------------------------------------------------------------- commands


def cmd_operator(config, args):
    mesh = _mesh(config)
    frames = estimate_curvature_frames(mesh)
    if args.albo:
        pairs = [assemble_albo(mesh, config.params, th, frames=frames) for th in config.params.theta_values]
    else:
        pairs = assemble_family(mesh, config.params, frames=frames)
    out = _out_dir(config)
    paths = export_family(pairs, out, STEM)
    if args.export_frames:
        write_frames_csv(frames, out / f"{STEM}.frames.csv")
        paths.append(out / f"{STEM}.frames.csv")
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_spectrum(config, args):
    pairs = _operators(config, args)
    out = _out_dir(config)
    indices = range(len(pairs)) if args.all_angles else [args.theta_index]
    for k in indices:
        basis = _basis(config, _pick(pairs, k))
        suffix = f"_theta{k}"
        write_eigenvalues_csv(basis, out / f"eigenvalues{suffix}.csv")
        write_eigenvectors(basis, out / f"eigenvectors{suffix}.npy")
        print(out / f"eigenvalues{suffix}.csv")
    return EXIT_OK


def cmd_heat(config, args):
    pairs = _operators(config, args)
    pair = _pick(pairs, args.theta_index)
    if args.f0:
        f0 = _read_vector(args.f0, "initial field")
    else:
        if not 0 <= args.vertex < pair.n:
            raise ConfigurationError(f"--vertex {args.vertex} out of range [0, {pair.n})")
        f0 = np.zeros(pair.n)
        f0[args.vertex] = 1.0 / pair.mass[args.vertex]
    if len(f0) != pair.n:
        raise ConfigurationError(f"initial field has {len(f0)} values, mesh has {pair.n} vertices")
    if args.source and pair.field is None:
        raise MissingPrerequisite("--source needs the per-face metrics; pass --mesh instead of --operators")
    out = _out_dir(config)
    if args.method == "implicit-euler":
        src = drift_source(pair) if args.source else None
        result = implicit_euler_diffuse(pair, f0, DiffusionConfig(args.time, args.steps, source_enabled=args.source),
                                        source=src)
    else:
        basis = _basis(config, pair)
        if args.source:
            result = simplified_randers_solve(pair, pair.field, f0, args.time, basis=basis)
        else:
            result = heat_propagate(basis, f0, args.time)
    path = write_field_csv(result, out / "heat.csv")
    print(path)
    return EXIT_OK


def _read_coeffs(path):
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisite(f"coefficient file not found: {path}")
    text = path.read_text().replace(",", " ").split()
    try:
        return np.array([float(x) for x in text])
    except ValueError as exc:
        raise ConfigurationError(f"coefficient file {path} is not numeric: {exc}") from exc


def cmd_filter(config, args):
    pairs = _operators(config, args)
    if args.coeffs:
        coeffs = _read_coeffs(args.coeffs)
    else:
        coeffs = np.zeros(config.chebyshev_order)
        coeffs[0] = 1.0
    spec = FilterSpec(coeffs)
    field_ = _read_vector(args.field, "input field")
    if len(field_) != pairs[0].n:
        raise ConfigurationError(f"field has {len(field_)} values, mesh has {pairs[0].n} vertices")
    if args.directional:
        result = directional_sum_convolve([_basis(config, p) for p in pairs], field_, spec)
    else:
        result = anisotropic_convolve(_basis(config, _pick(pairs, args.theta_index)), field_, spec)
    path = write_field_csv(result, _out_dir(config) / "filtered.csv")
    print(path)
    return EXIT_OK


def cmd_descriptor(config, args):
    pairs = _operators(config, args)
    basis = _basis(config, _pick(pairs, args.theta_index))
    desc = finsler_hks(basis, config.times)
    path = write_descriptor_csv(desc, config.times, _out_dir(config) / "hks.csv")
    print(path)
    return EXIT_OK


def cmd_validate(config, args):
    t0 = time.perf_counter()
    only = args.only.split(",") if args.only else None
    if only:
        bad = [c for c in only if c not in CHECKS]
        if bad:
            raise ConfigurationError(f"unknown checks: {', '.join(bad)}; known: {', '.join(CHECKS)}")
    passed, results = run_validation(seed=config.seed, params=config.params, inject=args.inject, only=only)
    report = {
        "passed": passed,
        "seed": config.seed,
        "params": asdict(config.params),
        "inject": args.inject,
        "seconds": round(time.perf_counter() - t0, 3),
        "checks": [r.to_dict() for r in results],
    }
    out = _out_dir(config) / "validation.json"
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text(json.dumps(report, indent=2) + "\n")
    os.replace(tmp, out)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.1f}s)")
    print(out)
    if not passed:
        failing = [r.name for r in results if not r.passed]
        print(f"validation failed: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {
    "operator": cmd_operator,
    "spectrum": cmd_spectrum,
    "heat": cmd_heat,
    "filter": cmd_filter,
    "descriptor": cmd_descriptor,
    "validate": cmd_validate,
}


def _times(text):
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", help="OFF/OBJ file or fixture:NAME (e.g. fixture:icosphere3)")
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=float, help="anisotropy level (default 10)")
    common.add_argument("--tau", type=float, help="drift magnitude (default 0.1)")
    common.add_argument("--angles", type=int, help="number of orientations (default 8)")
    common.add_argument("--eigs", type=int, help="eigenpairs, clamped to the vertex count (default 128)")
    common.add_argument("--cheb-order", type=int, help="Chebyshev order (default 16)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--times", type=_times, help="comma separated diffusion times")
    common.add_argument("-v", "--verbose", action="store_true")

    with_ops = argparse.ArgumentParser(add_help=False)
    with_ops.add_argument("--operators", help="directory written by 'flbo operator' (skips assembly)")
    with_ops.add_argument("--theta-index", type=int, default=0, help="orientation to use (default 0)")

    parser = argparse.ArgumentParser(prog="flbo", description="Finsler-Laplace-Beltrami operators on triangle meshes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("operator", parents=[common], help="assemble and export the operator family")
    p.add_argument("--export-frames", action="store_true", help="also write per-face curvature frames")
    p.add_argument("--albo", action="store_true", help="export the drift-free baseline (diffusivity = shear)")

    p = sub.add_parser("spectrum", parents=[common, with_ops], help="eigenpairs of one or all orientations")
    p.add_argument("--all-angles", action="store_true")

    p = sub.add_parser("heat", parents=[common, with_ops], help="diffuse a field")
    p.add_argument("--time", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=1000, help="implicit Euler steps")
    p.add_argument("--method", choices=("spectral", "implicit-euler"), default="spectral")
    p.add_argument("--source", action="store_true", help="include the drift divergence source term")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--f0", help="CSV with the initial field (one value per vertex)")
    g.add_argument("--vertex", type=int, default=0, help="unit heat impulse at this vertex")

    p = sub.add_parser("filter", parents=[common, with_ops], help="Chebyshev spectral filtering")
    p.add_argument("--field", required=True, help="CSV with one value per vertex")
    p.add_argument("--coeffs", help="Chebyshev coefficients (whitespace or comma separated)")
    p.add_argument("--directional", action="store_true", help="sum over all orientations")

    sub.add_parser("descriptor", parents=[common, with_ops], help="heat kernel signature")

    p = sub.add_parser("validate", parents=[common], help="run the invariant and oracle suite")
    p.add_argument("--only", help="comma separated subset of checks")
    p.add_argument("--inject", choices=("w-sign",), help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        return COMMANDS[args.command](config, args)
    except MissingPrerequisite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (FLBOError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING if isinstance(exc, FileNotFoundError) else EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end: config parsing, subcommands, result persistence.

Config files are flat INI (configparser) with sections mesh / material /
sweep / solver / output.  Unknown sections or keys are hard errors.  All
quantities are dimensionless with lattice constant 2*pi.
"""

import argparse
import configparser
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .material import Constant, MaterialConfigError, MaterialModel, Rational
from .mesh import build_structured_mesh
from .sweep import (PointSolver, SolverSettings, SweepConfig,
                    analytic_homogeneous_spectrum, sweep_band_structure,
                    real_branch_surfaces)
from .assembly import PencilFactory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INDETERMINATE = 3
EXIT_IO = 4

GAPS_SCHEMA = "band-gap-report-v1"

_FMT = "{:.9g}"  # all floating-point output carries 9 significant digits


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n_per_side: int
    model: MaterialModel
    sweep: SweepConfig
    out_dir: str = "."


def _parse_law(text: str):
    """Parse 'constant:VALUE' or 'rational:A,B,C' into a frequency law."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "constant":
            return Constant(float(rest))
        if kind == "rational":
            a, b, c = (float(t) for t in rest.split(","))
            return Rational(a, b, c)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed law spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown law kind {kind!r} in {text!r} "
                      f"(expected constant: or rational:)")


_KNOWN_KEYS = {
    "mesh": {"n_per_side"},
    "material": {"background", "inclusion", "inclusion_radius",
                 "inclusion_center", "valid_range"},
    "sweep": {"omega_min", "omega_max", "omega_step", "theta_count",
              "n_eigs", "bz_constant", "gap_threshold", "endpoint_tolerance"},
    "solver": {"algorithm", "shift", "tolerance", "max_restarts",
               "fallback", "subspace_dim"},
    "output": {"directory"},
}


def _get(section, key, conv, default):
    if key not in section:
        return default
    raw = section[key]
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from exc


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_pair(raw: str):
    parts = [float(t) for t in raw.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated numbers")
    return tuple(parts)


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(parser[section]) - _KNOWN_KEYS[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: "
                              + ", ".join(sorted(extra)))

    mesh_sec = parser["mesh"] if "mesh" in parser else {}
    n_per_side = _get(mesh_sec, "n_per_side", int, 20)
    if n_per_side < 2:
        raise ConfigError(f"n_per_side must be >= 2, got {n_per_side}")

    mat = parser["material"] if "material" in parser else {}
    valid_range = _get(mat, "valid_range", _parse_pair, (0.0, 0.7))
    try:
        model = MaterialModel(
            background=_parse_law(mat.get("background", "constant:1.0")),
            inclusion=_parse_law(mat.get("inclusion", "constant:8.9")),
            inclusion_radius=_get(mat, "inclusion_radius", float,
                                  0.75 * np.pi),
            inclusion_center=_get(mat, "inclusion_center", _parse_pair,
                                  (0.0, 0.0)),
            valid_range=valid_range,
        )
    except MaterialConfigError as exc:
        raise ConfigError(f"invalid material: {exc}") from exc

    slv = parser["solver"] if "solver" in parser else {}
    try:
        solver = SolverSettings(
            algorithm=slv.get("algorithm", "shira").strip().lower(),
            shift=_get(slv, "shift", complex, 0.05 + 0.25j),
            tolerance=_get(slv, "tolerance", float, 1e-9),
            max_restarts=_get(slv, "max_restarts", int, 50),
            fallback=_get(slv, "fallback", _parse_bool, True),
            subspace_dim=_get(slv, "subspace_dim", int, 40),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    swp = parser["sweep"] if "sweep" in parser else {}
    omega_min = _get(swp, "omega_min", float, valid_range[0])
    omega_max = _get(swp, "omega_max", float, valid_range[1])
    try:
        sweep = SweepConfig(
            omega_range=(omega_min, omega_max),
            omega_step=_get(swp, "omega_step", float, 2e-3),
            theta_count=_get(swp, "theta_count", int, 17),
            n_eigs=_get(swp, "n_eigs", int, 24),
            bz_filter_constant=_get(swp, "bz_constant", float, 1.0),
            gap_threshold=_get(swp, "gap_threshold", float, 1e-6),
            endpoint_tolerance=_get(swp, "endpoint_tolerance", float, 1e-5),
            solver=solver,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    lo, hi = model.valid_range
    if not (lo <= omega_min and omega_max <= hi):
        raise ConfigError(f"sweep range [{omega_min}, {omega_max}] exceeds "
                          f"material valid range [{lo}, {hi}]")

    out_sec = parser["output"] if "output" in parser else {}
    return RunConfig(n_per_side=n_per_side, model=model, sweep=sweep,
                     out_dir=out_sec.get("directory", "."))


def atomic_write(path: str, text: str) -> None:
    """Write via a sibling temp file and rename; readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-",
                               suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return _FMT.format(float(x))


def write_artifacts(report, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)

    rows = ["omega,theta,re_lambda,im_lambda,residual,mirrored_flag"]
    for rec in report.points:
        for e in rec.spectrum.entries:
            rows.append(",".join((_fmt(rec.omega), _fmt(rec.theta),
                                  _fmt(e.lam.real), _fmt(e.lam.imag),
                                  _fmt(e.residual), str(int(e.mirrored)))))
    atomic_write(os.path.join(out_dir, "eigs.csv"), "\n".join(rows) + "\n")

    tube = ["omega,theta,gap_margin"]
    for rec in report.points:
        margin = rec.margin if np.isfinite(rec.margin) else -1.0
        tube.append(",".join((_fmt(rec.omega), _fmt(rec.theta),
                              _fmt(margin))))
    atomic_write(os.path.join(out_dir, "tube.csv"), "\n".join(tube) + "\n")

    surf = ["theta,lambda,omega"]
    for theta, lam, omega in real_branch_surfaces(report):
        surf.append(",".join((_fmt(theta), _fmt(lam), _fmt(omega))))
    atomic_write(os.path.join(out_dir, "surfaces.csv"),
                 "\n".join(surf) + "\n")

    payload = {
        "schema": GAPS_SCHEMA,
        "gaps": [{"lo": float(_fmt(g.lo)), "hi": float(_fmt(g.hi)),
                  "margin": float(_fmt(g.margin)),
                  "indeterminate": g.indeterminate}
                 for g in report.gaps],
        "indeterminate_frequencies": [
            float(_fmt(w)) for w, v in report.verdicts.items() if v is None],
        "provenance": report.provenance,
    }
    atomic_write(os.path.join(out_dir, "gaps.json"),
                 json.dumps(payload, indent=2) + "\n")


def _print_spectrum(lams, residuals=None):
    print(f"{'re_lambda':>16} {'im_lambda':>16}"
          + (f" {'residual':>12}" if residuals is not None else ""))
    for i, lam in enumerate(lams):
        line = f"{_fmt(lam.real):>16} {_fmt(lam.imag):>16}"
        if residuals is not None:
            line += f" {_fmt(residuals[i]):>12}"
        print(line)


def _apply_overrides(run: RunConfig, args) -> None:
    if getattr(args, "algorithm", None):
        run.sweep.solver.algorithm = args.algorithm
    if getattr(args, "bz_constant", None) is not None:
        run.sweep.bz_filter_constant = args.bz_constant
    if getattr(args, "out", None):
        run.out_dir = args.out


def _set_threads(n: int) -> None:
    # Advisory: caps the BLAS / OpenMP pools used by the sparse factorizations.
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def cmd_sweep(args) -> int:
    run = load_config(args.config)
    _apply_overrides(run, args)
    mesh = build_structured_mesh(run.n_per_side)
    report = sweep_band_structure(run.sweep, mesh, run.model)
    try:
        write_artifacts(report, run.out_dir)
    except OSError as exc:
        print(f"error: cannot write artifacts: {exc}", file=sys.stderr)
        return EXIT_IO
    n_indet = sum(v is None for v in report.verdicts.values())
    print(f"gaps found: {len(report.gaps)}")
    for g in report.gaps:
        tag = " (indeterminate)" if g.indeterminate else ""
        print(f"  [{_fmt(g.lo)}, {_fmt(g.hi)}] margin {_fmt(g.margin)}{tag}")
    if n_indet or any(g.indeterminate for g in report.gaps):
        print(f"warning: {n_indet} indeterminate frequencies",
              file=sys.stderr)
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_point(args) -> int:
    run = load_config(args.config)
    _apply_overrides(run, args)
    if not 0.0 <= args.theta <= np.pi / 4:
        raise ConfigError(f"theta {args.theta} outside [0, pi/4]")
    lo, hi = run.model.valid_range
    if not lo <= args.omega <= hi:
        raise ConfigError(f"omega {args.omega} outside valid range "
                          f"[{lo}, {hi}]")
    mesh = build_structured_mesh(run.n_per_side)
    solver = PointSolver(PencilFactory(mesh, run.model), run.sweep)
    rec = solver.point(args.omega, args.theta)
    lams = rec.filtered
    res = {e.lam: e.residual for e in rec.spectrum.entries}
    _print_spectrum(lams, [res.get(l, np.nan) for l in lams])
    if not rec.determinate:
        print("warning: solver did not converge; listing is incomplete",
              file=sys.stderr)
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_oracle(args) -> int:
    theta = args.theta
    if not 0.0 <= theta <= np.pi / 4:
        raise ConfigError(f"theta {theta} outside [0, pi/4]")
    k_hat = (np.cos(theta), np.sin(theta))
    lams = analytic_homogeneous_spectrum(args.omega, k_hat, eps=args.eps,
                                         m_range=args.m_range)
    _print_spectrum(lams)
    return EXIT_OK


def cmd_mesh_info(args) -> int:
    if args.config:
        n = load_config(args.config).n_per_side
    else:
        n = args.n_per_side
    mesh = build_structured_mesh(n)
    print(f"n_per_side: {mesh.n_per_side}")
    print(f"h_over_2pi: {_fmt(1.0 / mesh.n_per_side)}")
    print(f"elements: {mesh.n_cells}")
    print(f"dofs: {mesh.n_dofs}")
    print(f"element_order: {mesh.element_order}")
    if args.dump:
        mesh.dump_text(sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="blochband",
        description="Bloch band structures and photonic band gaps of 2D "
                    "periodic dielectric media (TM polarization).")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="INI configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="BLAS/OpenMP thread cap")
        p.add_argument("--algorithm", choices=("shira", "ira", "dense"),
                       default=None, help="eigensolver override")
        p.add_argument("--bz-constant", type=float, default=None,
                       choices=(1.0, 0.5), dest="bz_constant",
                       help="Brillouin-zone filter constant")

    p_sweep = sub.add_parser("sweep", help="frequency sweep and gap report")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_point = sub.add_parser("point", help="solve a single (omega, theta)")
    common(p_point)
    p_point.add_argument("--omega", type=float, required=True)
    p_point.add_argument("--theta", type=float, default=0.0)
    p_point.set_defaults(func=cmd_point)

    p_oracle = sub.add_parser("oracle",
                              help="analytic homogeneous-medium spectrum")
    p_oracle.add_argument("--omega", type=float, required=True)
    p_oracle.add_argument("--theta", type=float, default=0.0)
    p_oracle.add_argument("--eps", type=float, default=1.0)
    p_oracle.add_argument("--m-range", type=int, default=3, dest="m_range")
    p_oracle.set_defaults(func=cmd_oracle)

    p_mesh = sub.add_parser("mesh-info", help="mesh statistics")
    p_mesh.add_argument("--config", default=None)
    p_mesh.add_argument("--n-per-side", type=int, default=20,
                        dest="n_per_side")
    p_mesh.add_argument("--dump", action="store_true",
                        help="print node/element listing")
    p_mesh.set_defaults(func=cmd_mesh_info)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        _set_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

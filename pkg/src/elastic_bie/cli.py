"""Command-line front end: configuration, experiment orchestration, CSV output.

Four commands drive the solver library:

    solve        one manufactured-solution solve, one result row
    convergence  error vs. number of panels N (optionally crossed with omega)
    rcip-sweep   error vs. corner refinement depth n_sub on a cornered geometry
    asymptotics  fitted corner exponent alpha plus the wedge roots nu1, nu2

Configuration comes from an optional flat text file of ``key = value`` lines
(``#`` starts a comment) plus command-line overrides, which win.  Every run
echoes the fully resolved configuration into the CSV header as ``#`` comment
lines so the output is self-describing; rows are emitted in a deterministic
order with errors in scientific notation (6 significant digits).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import assembly as asm
from . import driver
from .driver import DEFAULT_PARAMS
from .kernels import ElasticParams

log = logging.getLogger(__name__)

GEOMETRIES = ("circle", "ellipse", "droplet", "sector")


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------

DEFAULTS = {
    "geometry": "droplet",
    "formulation": "dnd_ext",
    "npanels": "48",
    "n_sub": "0",
    "nq": "16",
    "omega": str(DEFAULT_PARAMS.omega),
    "lam": str(DEFAULT_PARAMS.lam),
    "mu": str(DEFAULT_PARAMS.mu),
    "rho": str(DEFAULT_PARAMS.rho),
    "alpha": "1.0",
    "wedge_slope": "1.0",
    "out": "-",
}


def parse_config_file(path: str) -> dict:
    """Read ``key = value`` lines; blank lines and ``#`` comments ignored."""
    cfg = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, val = (s.strip() for s in line.split("=", 1))
                if not key or not val:
                    raise ConfigError(f"{path}:{lineno}: empty key or value")
                cfg[key] = val
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return cfg


def _as_int(cfg, key):
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}") from exc


def _as_float(cfg, key):
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {cfg[key]!r}") from exc


def _as_list(cfg, key, cast):
    try:
        vals = [cast(tok) for tok in str(cfg[key]).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key} must be a comma-separated list, "
                          f"got {cfg[key]!r}") from exc
    if not vals:
        raise ConfigError(f"{key} must be a nonempty list")
    return vals


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and command-line overrides.

    The returned dict carries the set of explicitly configured keys under
    ``"_explicit"`` so commands with protocol defaults (asymptotics) can
    tell a deliberate override from the generic fallback.
    """
    cfg = dict(DEFAULTS)
    explicit = set()
    if args.config:
        file_cfg = parse_config_file(args.config)
        cfg.update(file_cfg)
        explicit |= set(file_cfg)
    for key in ("geometry", "formulation", "npanels", "n_sub", "nq", "omega",
                "lam", "mu", "rho", "alpha", "wedge_slope", "out"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = str(val)
            explicit.add(key)
    cfg["_explicit"] = explicit
    if cfg["geometry"] not in GEOMETRIES:
        raise ConfigError(f"unknown geometry {cfg['geometry']!r}; "
                          f"choose from {', '.join(GEOMETRIES)}")
    if cfg["formulation"] not in asm.FORMULATIONS:
        raise ConfigError(f"unknown formulation {cfg['formulation']!r}; "
                          f"choose from {', '.join(sorted(asm.FORMULATIONS))}")
    lam, mu, rho = (_as_float(cfg, k) for k in ("lam", "mu", "rho"))
    if mu <= 0.0 or lam + mu <= 0.0 or rho <= 0.0 or _as_float(cfg, "omega") <= 0.0:
        raise ConfigError("require mu > 0, lam + mu > 0, rho > 0, omega > 0")
    return cfg


def material(cfg) -> ElasticParams:
    return ElasticParams(lam=_as_float(cfg, "lam"), mu=_as_float(cfg, "mu"),
                         rho=_as_float(cfg, "rho"), omega=_as_float(cfg, "omega"))


# ----------------------------------------------------------------------------
# output
# ----------------------------------------------------------------------------

def _sci(x: float) -> str:
    return f"{x:.5e}"


def write_csv(out: str, command: str, cfg: dict, header: list, rows: list):
    """Emit the resolved config as comments, then header and data rows."""
    lines = [f"# command = {command}"]
    lines += [f"# {k} = {cfg[k]}" for k in sorted(cfg) if not k.startswith("_")]
    lines.append(",".join(header))
    lines += [",".join(str(c) for c in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
        log.info("wrote %d rows to %s", len(rows), out)


RESULT_HEADER = ["geometry", "formulation", "npanels", "n_sub", "omega",
                 "err1", "err2", "seconds"]


def _result_row(r) -> list:
    return [r.geometry, r.formulation, r.npanels, r.n_sub, r.omega,
            _sci(r.errors[0]), _sci(r.errors[1]), f"{r.elapsed:.2f}"]


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def cmd_solve(cfg) -> tuple:
    r = driver.solve_problem(
        cfg["geometry"], cfg["formulation"], _as_int(cfg, "npanels"),
        p=material(cfg), n_sub=_as_int(cfg, "n_sub"), nq=_as_int(cfg, "nq"),
        alpha=_as_float(cfg, "alpha"),
        wedge_slope=_as_float(cfg, "wedge_slope"))
    return RESULT_HEADER, [_result_row(r)]


def cmd_convergence(cfg) -> tuple:
    ns = _as_list(cfg, "npanels", int)
    omegas = _as_list(cfg, "omega", float)
    rows = []
    for omega in omegas:
        p = ElasticParams(lam=_as_float(cfg, "lam"), mu=_as_float(cfg, "mu"),
                          rho=_as_float(cfg, "rho"), omega=omega)
        for n in ns:
            r = driver.solve_problem(
                cfg["geometry"], cfg["formulation"], n, p=p,
                n_sub=_as_int(cfg, "n_sub"), nq=_as_int(cfg, "nq"),
                alpha=_as_float(cfg, "alpha"),
                wedge_slope=_as_float(cfg, "wedge_slope"))
            rows.append(_result_row(r))
    return RESULT_HEADER, rows


def cmd_rcip_sweep(cfg) -> tuple:
    from .geometry import make_geometry
    geom = make_geometry(cfg["geometry"], alpha=_as_float(cfg, "alpha"),
                         k=_as_float(cfg, "wedge_slope"))
    if not geom.corners:
        raise ConfigError(f"rcip-sweep needs a cornered geometry; "
                          f"{cfg['geometry']!r} is smooth")
    n_subs = _as_list(cfg, "n_sub", int)
    rows = []
    for form in _as_list(cfg, "formulation", str):
        if form not in asm.FORMULATIONS:
            raise ConfigError(f"unknown formulation {form!r}")
        results = driver.nsub_sweep(
            geom, form, _as_int(cfg, "npanels"), n_subs,
            p=material(cfg), nq=_as_int(cfg, "nq"))
        rows += [_result_row(r) for r in results]
    return RESULT_HEADER, rows


def cmd_asymptotics(cfg) -> tuple:
    """Fit the corner exponent on the sector and report the wedge roots.

    The fit protocol has its own defaults (24 panels per side, 15 dyadic
    levels) that differ from the generic solver defaults; only explicit
    settings override them.  The roots are taken at the reentrant angle
    theta = 2 pi - theta_0 = 3 pi / 2; the density magnitude behaves like
    r^(nu1 - 1) for the rigid (interior Neumann) case and r^nu2 for the
    traction-free (exterior Neumann) case.
    """
    p = material(cfg)
    kwargs = dict(p=p, wedge_slope=_as_float(cfg, "wedge_slope"))
    explicit = cfg.get("_explicit", set())
    if "npanels" in explicit:
        kwargs["npanels"] = _as_int(cfg, "npanels")
    if "n_sub" in explicit:
        kwargs["n_sub"] = _as_int(cfg, "n_sub")
    if "nq" in explicit:
        kwargs["nq"] = _as_int(cfg, "nq")
    theta = 1.5 * np.pi
    xi = p.lam / (2.0 * (p.lam + p.mu))
    nu1 = driver.singular_exponent(theta, 1.0 / (3.0 - 4.0 * xi) ** 2)
    nu2 = driver.singular_exponent(theta, 1.0)
    rows = []
    for region, target in (("interior", nu1 - 1.0), ("exterior", nu2)):
        alpha = driver.corner_exponent(region, **kwargs)
        rows.append(["sector", region, _sci(alpha), _sci(nu1), _sci(nu2),
                     _sci(abs(alpha - target))])
    return ["geometry", "region", "alpha", "nu1", "nu2", "residual"], rows


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "rcip-sweep": cmd_rcip_sweep,
    "asymptotics": cmd_asymptotics,
}


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="elastic-bie",
        description="2D time-harmonic elastic scattering via kernel-split "
                    "Nystrom boundary integral equations with corner "
                    "compression.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--geometry", choices=GEOMETRIES)
    ap.add_argument("--formulation",
                    help="one of %s; rcip-sweep accepts a comma list"
                         % ", ".join(sorted(asm.FORMULATIONS)))
    ap.add_argument("--npanels", help="panels per smooth side "
                                      "(comma list for convergence)")
    ap.add_argument("--nsub", dest="n_sub",
                    help="corner refinement depth (comma list for rcip-sweep)")
    ap.add_argument("--nq", type=int, help="quadrature nodes per panel")
    ap.add_argument("--omega", help="angular frequency (comma list for "
                                    "convergence)")
    ap.add_argument("--lam", type=float, help="first Lame parameter")
    ap.add_argument("--mu", type=float, help="shear modulus")
    ap.add_argument("--rho", type=float, help="density")
    ap.add_argument("--alpha", type=float, help="ellipse aspect ratio")
    ap.add_argument("--wedge-slope", type=float, dest="wedge_slope",
                    help="sector boundary slope parameter")
    ap.add_argument("--out", help="output CSV path ('-' for stdout)")
    ap.add_argument("-v", "--verbose", action="store_true",
                    help="log solver progress to stderr")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = resolve(args)
        header, rows = COMMANDS[args.command](cfg)
        write_csv(cfg["out"], args.command, cfg, header, rows)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    log.info("done in %.2fs", time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())

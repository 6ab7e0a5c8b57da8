"""Command-line front end: ``wgbiharmonic {solve,convergence,validate,mesh}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import WGError

log = logging.getLogger("wgbiharmonic")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    example: int | None = None
    u_expr: str | None = None
    verbatim: bool = False
    k: int = 2
    n: int = 8
    level: int | None = None
    levels: int = 4
    start_n: int = 4
    lshape_start: int = 2
    algorithm: str = "schur"
    solver: str = "direct"
    tol: float = 1e-10
    mesh_file: str | None = None
    output: str | None = None
    csv: str | None = None
    markdown: str | None = None
    export_matrix: str | None = None
    seed: int = 0

    def check(self) -> "RunConfig":
        if self.k < 2:
            raise UsageError(f"k must be >= 2, got {self.k}")
        if self.levels < 1:
            raise UsageError(f"levels must be >= 1, got {self.levels}")
        if not 0 < self.tol <= 1e-4:
            raise UsageError(f"tolerance must lie in (0, 1e-4], got {self.tol}")
        if self.n < 1:
            raise UsageError(f"n must be >= 1, got {self.n}")
        if self.example is not None and self.example not in (1, 2, 3):
            raise UsageError(f"example must be 1, 2 or 3, got {self.example}")
        if self.algorithm not in ("schur", "full"):
            raise UsageError(f"unknown method {self.algorithm!r}")
        if self.solver not in ("direct", "iterative"):
            raise UsageError(f"unknown solver {self.solver!r}")
        return self


_CASTS = {f.name: f.type for f in fields(RunConfig)}
# config keys may use the flag spelling
_ALIASES = {"method": "algorithm", "u": "u_expr", "mesh": "mesh_file"}


def _cast(name, raw):
    kind = str(_CASTS[name])
    if "bool" in kind:
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def load_config(path, command: str) -> dict:
    """Read ``key = value`` pairs from [DEFAULT] and the [<command>] section."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path}")
    section = cp[command] if cp.has_section(command) else cp.defaults()
    out = {}
    for key, raw in section.items():
        key = key.replace("-", "_")
        key = _ALIASES.get(key, key)
        if key not in _CASTS:
            raise UsageError(f"unknown config key {key!r} in {path}")
        out[key] = _cast(key, raw)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wgbiharmonic", description="Weak Galerkin solver for the clamped biharmonic problem.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value config file; flags override it")
        sp.add_argument("--k", type=int)
        sp.add_argument("--seed", type=int)

    def problem(sp):
        sp.add_argument("--example", type=int)
        sp.add_argument("--u", dest="u_expr", help="custom exact solution in x, y (sympy syntax)")
        sp.add_argument("--verbatim", action="store_true", default=None, help="example 1 with y^2(1-y^2)")
        sp.add_argument("--method", dest="algorithm", choices=["schur", "full"])
        sp.add_argument("--solver", choices=["direct", "iterative"])
        sp.add_argument("--tol", type=float)

    s = sub.add_parser("solve", help="solve one problem on one mesh")
    common(s)
    problem(s)
    s.add_argument("--n", type=int, help="unit square subdivisions")
    s.add_argument("--level", type=int, help="L-shape level (example 3)")
    s.add_argument("--lshape-start", type=int)
    s.add_argument("--mesh", dest="mesh_file")
    s.add_argument("--output", help="write the DOF dump here")
    s.add_argument("--export-matrix", help="Matrix Market file for the solved system")

    c = sub.add_parser("convergence", help="error table over refinement levels")
    common(c)
    problem(c)
    c.add_argument("--levels", type=int)
    c.add_argument("--start-n", type=int)
    c.add_argument("--lshape-start", type=int)
    c.add_argument("--csv")
    c.add_argument("--markdown")

    v = sub.add_parser("validate", help="run the invariant suite")
    common(v)
    v.add_argument("--mesh", dest="mesh_file", help="mesh fixture for the mesh/sign checks")

    m = sub.add_parser("mesh", help="build, inspect or export meshes")
    m.add_argument("--config")
    m.add_argument("--n", type=int, help="unit square with n x n cells")
    m.add_argument("--level", type=int, help="L-shape level (1 = six triangles)")
    m.add_argument("--input", dest="mesh_file")
    m.add_argument("--output")
    return p


def make_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config, args.command))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    values["command"] = args.command
    return RunConfig(**values).check()


# ------------------------------------------------------------------ problems
def custom_solution(expr: str):
    """ManufacturedSolution from a sympy expression in x and y."""
    import sympy

    from .analysis import ManufacturedSolution

    x, y = sympy.symbols("x y")
    try:
        u = sympy.sympify(expr, locals={"x": x, "y": y})
    except (sympy.SympifyError, TypeError) as exc:
        raise UsageError(f"cannot parse --u {expr!r}: {exc}") from None
    ux, uy = sympy.diff(u, x), sympy.diff(u, y)
    lap = sympy.diff(u, x, 2) + sympy.diff(u, y, 2)
    bih = sympy.simplify(sympy.diff(lap, x, 2) + sympy.diff(lap, y, 2))

    def fn(e):
        g = sympy.lambdify((x, y), e, "numpy")
        return lambda X, Y: np.broadcast_to(np.asarray(g(X, Y), dtype=float), np.shape(X))

    fu, fx, fy, fl, ff = (fn(e) for e in (u, ux, uy, lap, bih))
    return ManufacturedSolution(f"u = {expr}", fu, lambda X, Y: (fx(X, Y), fy(X, Y)), fl, ff)


def _problem(cfg: RunConfig):
    from .analysis import get_example

    if cfg.u_expr:
        return custom_solution(cfg.u_expr)
    if cfg.example is None:
        raise UsageError("give --example or --u")
    return get_example(cfg.example, cfg.verbatim)


# ------------------------------------------------------------------ commands
def cmd_solve(cfg: RunConfig) -> int:
    from .analysis import example_mesh, l2_error, triple_bar_error
    from .mesh import build_unit_square_mesh, load_mesh
    from .solver import assemble_full, condense, recover_interior, solve, write_matrix_market, WGFunction

    ex = _problem(cfg)
    if cfg.mesh_file:
        mesh = load_mesh(cfg.mesh_file)
    elif cfg.example == 3:
        mesh, _ = example_mesh(3, cfg.level or 1, lshape_start=cfg.lshape_start)
    else:
        mesh = build_unit_square_mesh(cfg.n)

    if cfg.algorithm == "full":
        system = assemble_full(mesh, cfg.k, ex.f, ex.boundary)
        x, report = solve(system, method=cfg.solver, tol=cfg.tol)
        uh = WGFunction.from_vector(mesh, cfg.k, system.expand(x))
    else:
        system = condense(mesh, cfg.k, ex.f, ex.boundary)
        x, report = solve(system, method=cfg.solver, tol=cfg.tol)
        uh = recover_interior(system, system.expand(x))

    print(f"problem: {ex.name}  k={cfg.k}  triangles={mesh.n_triangles}  h_max={mesh.h:.6g}  method={cfg.algorithm}")
    print(f"solve: {report}")
    print(f"err_H2 = {triple_bar_error(uh, ex):.8e}")
    print(f"err_L2 = {l2_error(uh, ex):.8e}")
    if cfg.output:
        uh.dump(cfg.output)
    if cfg.export_matrix:
        write_matrix_market(system, cfg.export_matrix, comment=f"{cfg.algorithm} system, k={cfg.k}")
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    from .analysis import run_convergence

    if cfg.u_expr:
        raise UsageError("convergence runs the built-in examples only")
    if cfg.example is None:
        raise UsageError("give --example")
    table = run_convergence(
        cfg.example,
        cfg.k,
        cfg.levels,
        verbatim=cfg.verbatim,
        algorithm=cfg.algorithm,
        method=cfg.solver,
        start_n=cfg.start_n,
        lshape_start=cfg.lshape_start,
    )
    md = table.to_markdown()
    print(md, end="")
    if cfg.csv:
        Path(cfg.csv).write_text(table.to_csv())
    if cfg.markdown:
        Path(cfg.markdown).write_text(md)
    return EXIT_NUMERICAL if table.failure else EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    from .mesh import load_mesh
    from .validation import run_all

    mesh = load_mesh(cfg.mesh_file) if cfg.mesh_file else None
    results = run_all(cfg.seed, cfg.k, mesh)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"FAILED: {failed[0].name}" + (f" (+{len(failed) - 1} more)" if len(failed) > 1 else ""))
        return EXIT_NUMERICAL
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_mesh(args) -> int:
    from .mesh import build_unit_square_mesh, load_mesh, lshape_level, validate

    if args.mesh_file:
        mesh = load_mesh(args.mesh_file)
    elif args.level is not None:
        mesh = lshape_level(args.level)
    elif args.n is not None:
        if args.n < 1:
            raise UsageError("n must be >= 1")
        mesh = build_unit_square_mesh(args.n)
    else:
        raise UsageError("give --n, --level or --input")
    report = validate(mesh)
    print(
        f"vertices={mesh.n_vertices} triangles={mesh.n_triangles} edges={mesh.n_edges} "
        f"boundary_edges={int(mesh.boundary_edges.sum())} area={mesh.areas.sum():.12g} h_max={mesh.h:.6g}"
    )
    for line in report:
        print(f"  violation: {line}")
    if args.output:
        mesh.save(args.output)
    return EXIT_OK if not report else EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "mesh":
            return cmd_mesh(args)
        cfg = make_config(args)
        return {"solve": cmd_solve, "convergence": cmd_convergence, "validate": cmd_validate}[args.command](cfg)
    except UsageError as exc:
        print(f"wgbiharmonic: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WGError, np.linalg.LinAlgError) as exc:
        print(f"wgbiharmonic: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"wgbiharmonic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

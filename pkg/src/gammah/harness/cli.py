"""Command-line entry point.

Exit codes: 0 success (all acceptance rules pass), 1 a rule failed or a
computation could not complete, 2 configuration or argument error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import scipy.sparse as sp

from gammah.adaptive import CYCLE_CSV_HEADER, adaptive_refine, select_power_level
from gammah.assembly import Pencil, ProblemSpec, build_pencil, read_matrix_market, write_matrix_market
from gammah.chains import chain_report
from gammah.diagnostics import CSV_HEADER, gamma_power, indicators, numrange_distance
from gammah.errors import (AssemblyError, ConfigError, InvalidArgumentError,
                           NotPositiveDefiniteError, UnsupportedError)
from gammah.harness.config import ExperimentConfig, load_config, parse_float, parse_float_list
from gammah.harness.experiments import EXPERIMENTS, run_experiment
from gammah.linalg import SolverConfig
from gammah.mesh import lshape_mesh, structured_square_mesh, uniform_mesh_1d
from gammah.util import csv_line

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_DOMAIN = {
    "schrodinger_1d": "interval",
    "convection_diffusion_1d": "interval",
    "transport_fd": "interval",
    "laplace_potential_2d": "square",
    "convection_diffusion_2d": "square",
}


def _problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--config", help="INI configuration file")
    g.add_argument("--kind", help="problem kind (default schrodinger_1d)")
    g.add_argument("--epsilon", type=parse_float)
    g.add_argument("--beta", type=parse_float_list)
    g.add_argument("--c", type=parse_float)
    g.add_argument("--potential", type=parse_float)
    g.add_argument("--supg-delta", type=parse_float)
    g.add_argument("--bc", help="dirichlet_both or mixed_left_dirichlet_right_neumann")
    g.add_argument("--fd-scheme", help="upwind or central (transport_fd)")
    g.add_argument("--weighting", help="mass or identity (transport_fd)")
    g.add_argument("--mass", help="consistent or lumped")
    g.add_argument("--domain", help="interval, square or lshape")
    g.add_argument("--h", type=parse_float, help="mesh width, e.g. 2^-6")
    g.add_argument("--n", type=int, help="cells per unit length (alternative to --h)")
    g.add_argument("--lam", type=complex, help="spectral parameter, e.g. -1 or 2+1j")
    g.add_argument("--tol", type=parse_float)
    g.add_argument("--max-iter", type=int)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    for key, section in (("kind", "problem"), ("epsilon", "problem"), ("beta", "problem"),
                         ("c", "problem"), ("potential", "problem"), ("supg_delta", "problem"),
                         ("bc", "problem"), ("fd_scheme", "scheme"), ("weighting", "scheme"),
                         ("mass", "scheme"), ("domain", "mesh"), ("tol", "solver"),
                         ("max_iter", "solver")):
        v = getattr(args, key, None)
        if v is not None:
            cfg.set(section, key, v)
    if getattr(args, "h", None) is not None:
        cfg.set("mesh", "h", [args.h])
    if getattr(args, "n", None) is not None:
        cfg.set("mesh", "n", [args.n])
    lam = getattr(args, "lam", None)
    if lam is not None:
        cfg.set("lambda", "re", lam.real)
        cfg.set("lambda", "im", lam.imag)
    cfg.validate()
    return cfg


def spec_from_config(cfg: ExperimentConfig) -> ProblemSpec:
    kind = cfg.get("problem", "kind", "schrodinger_1d")
    if kind not in DEFAULT_DOMAIN:
        raise ConfigError(f"unknown problem kind {kind!r}")
    beta = cfg.get("problem", "beta", [0.0])
    if kind.endswith("_2d"):
        beta = tuple(beta) if len(beta) == 2 else beta[0]
    else:
        beta = beta[0]
    try:
        return ProblemSpec(kind,
                           epsilon=cfg.get("problem", "epsilon", 0.0 if kind == "transport_fd" else 1.0),
                           beta=beta,
                           c=cfg.get("problem", "c", 0.0),
                           potential=cfg.get("problem", "potential", 0.0),
                           supg_delta=cfg.get("problem", "supg_delta", 0.0),
                           fd_scheme=cfg.get("scheme", "fd_scheme", "upwind"),
                           bc=cfg.get("problem", "bc", "dirichlet_both"))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None


def mesh_from_config(cfg: ExperimentConfig, kind: str):
    """Mesh object (or cell count for ``transport_fd``); defaults to 16 cells per unit."""
    hs = cfg.get("mesh", "h")
    ns = cfg.get("mesh", "n")
    if ns:
        n = ns[0]
    elif hs:
        n = int(round(1.0 / hs[0]))
    else:
        n = 16
    domain = cfg.get("mesh", "domain", DEFAULT_DOMAIN[kind])
    if kind == "transport_fd":
        return n
    if domain == "interval":
        return uniform_mesh_1d(n)
    if domain == "square":
        return structured_square_mesh(n)
    if domain == "lshape":
        return lshape_mesh(n)
    raise ConfigError(f"unknown domain {domain!r}")


def pencil_from_config(cfg: ExperimentConfig) -> Pencil:
    """Single pencil described by the ``[problem]``, ``[mesh]`` and ``[lambda]`` sections."""
    spec = spec_from_config(cfg)
    mesh = mesh_from_config(cfg, spec.kind)
    lam = cfg.lam if cfg.lam is not None else 0.0
    try:
        return build_pencil(spec, mesh, lam, weighting=cfg.get("scheme", "weighting", "mass"),
                            mass=cfg.get("scheme", "mass", "consistent"))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None


def cmd_assemble(args):
    cfg = _config(args)
    p = pencil_from_config(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out / "A.mtx", p.A)
    write_matrix_market(out / "M.mtx", p.M)
    print(f"n = {p.n}, nnz(A) = {p.A.nnz}, nnz(M) = {p.M.nnz}, written to {out}")
    return EXIT_OK


def cmd_gamma(args):
    cfg = _config(args)
    p = pencil_from_config(cfg)
    g, conv = gamma_power(p, 1, cfg.solver)
    print("n,gamma_h,converged")
    print(csv_line([p.n, g, conv]))
    return EXIT_OK if conv else EXIT_FAIL


def cmd_gamma_powers(args):
    cfg = _config(args)
    p = pencil_from_config(cfg)
    print("m,gamma,converged")
    ok = True
    for m in range(1, args.m_max + 1):
        g, conv = gamma_power(p, m, cfg.solver)
        ok &= conv
        print(csv_line([m, g, conv]))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_numrange(args):
    cfg = _config(args)
    p = pencil_from_config(cfg)
    print("n,numrange_dist")
    print(csv_line([p.n, numrange_distance(p, args.n_angles, cfg.solver)]))
    return EXIT_OK


def cmd_ascent(args):
    cfg = _config(args)
    p = pencil_from_config(cfg)
    rep = chain_report(p.shifted.toarray(), args.m_max, args.rank_tol)
    print("\n".join(rep.csv_lines()))
    print(f"# ascent={rep.ascent if rep.resolved else 'unresolved'} "
          f"descent={rep.descent if rep.resolved else 'unresolved'} "
          f"min_gap_ratio={rep.min_gap_ratio:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_adapt_m(args):
    cfg = _config(args)
    p = pencil_from_config(cfg)
    r = select_power_level(p, args.eps_tol, args.m_max, cfg.solver)
    print("m,gamma")
    for m, g in r.history:
        print(csv_line([m, g]))
    print(f"# m_selected={r.m_selected} converged={r.converged} degenerate={r.degenerate}",
          file=sys.stderr)
    return EXIT_OK


def cmd_adapt_mesh(args):
    cfg = _config(args)
    if cfg.get("problem", "kind") is None:
        cfg.set("problem", "kind", "laplace_potential_2d")
    if cfg.get("mesh", "domain") is None:
        cfg.set("mesh", "domain", "lshape")
    spec = spec_from_config(cfg)
    if not spec.kind.endswith("_2d"):
        raise ConfigError("adapt-mesh needs a 2D problem kind")
    mesh = mesh_from_config(cfg, spec.kind)
    lam = cfg.lam if cfg.lam is not None else -1.0
    print(CYCLE_CSV_HEADER)
    adaptive_refine(mesh, spec, lam, args.tau, args.l_max, args.cycles,
                    state_callback=lambda st: print(st.csv_row(), flush=True))
    return EXIT_OK


def cmd_experiment(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg.experiment_id = args.id
    if args.output:
        cfg.set("output", "directory", args.output)
    if args.svg:
        cfg.set("output", "svg", True)
    if args.id not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment id {args.id!r}; known: {', '.join(EXPERIMENTS)}")
    res = run_experiment(cfg)
    print(res.report_text(), end="")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_oracle_check(args):
    args.id = "oracle-check"
    return cmd_experiment(args)


def cmd_import_mm(args):
    A = read_matrix_market(args.file)
    M = read_matrix_market(args.mass) if args.mass else None
    if M is None:
        M = sp.identity(A.shape[0], format="csr")
    p = Pencil(A, M, args.lam if args.lam is not None else 0.0)
    cfg = SolverConfig(tol=args.tol) if args.tol else SolverConfig()
    rep = indicators(p, args.pseudo_eps, cfg, args.n_angles, args.n_rays,
                     powers=tuple(range(1, args.m_max + 1)))
    print(CSV_HEADER)
    print(rep.csv_row())
    print("m,gamma,converged")
    for m, g, conv in rep.gamma_powers:
        print(csv_line([m, g, conv]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gammah",
                                 description="Discrete reduced minimum modulus diagnostics")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", help="assemble A and M and write Matrix Market files")
    _problem_args(p)
    p.add_argument("--output", default=".", help="output directory")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("gamma", help="smallest singular value of the pencil")
    _problem_args(p)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("gamma-powers", help="gamma of powers m = 1..m_max")
    _problem_args(p)
    p.add_argument("--m-max", type=int, default=3)
    p.set_defaults(func=cmd_gamma_powers)

    p = sub.add_parser("numrange", help="distance to the M-numerical range")
    _problem_args(p)
    p.add_argument("--n-angles", type=int, default=64)
    p.set_defaults(func=cmd_numrange)

    p = sub.add_parser("ascent", help="kernel/range chains of the shifted matrix")
    _problem_args(p)
    p.add_argument("--m-max", type=int, default=4)
    p.add_argument("--rank-tol", type=parse_float, default=None)
    p.set_defaults(func=cmd_ascent)

    p = sub.add_parser("adapt-m", help="adaptive choice of the power level")
    _problem_args(p)
    p.add_argument("--eps-tol", type=parse_float, default=1e-2)
    p.add_argument("--m-max", type=int, default=5)
    p.set_defaults(func=cmd_adapt_m)

    p = sub.add_parser("adapt-mesh", help="gamma-driven adaptive refinement (2D)")
    _problem_args(p)
    p.add_argument("--tau", type=parse_float, default=1.05)
    p.add_argument("--l-max", type=int, default=3)
    p.add_argument("--cycles", type=int, default=3)
    p.set_defaults(func=cmd_adapt_mesh)

    for name, func, helptext in (("experiment", cmd_experiment, "run a named experiment"),
                                 ("oracle-check", cmd_oracle_check, "Krylov vs dense oracle sweep")):
        p = sub.add_parser(name, help=helptext)
        if name == "experiment":
            p.add_argument("id", help="one of: " + ", ".join(EXPERIMENTS))
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--output", help="output directory (default results)")
        p.add_argument("--svg", action="store_true", help="also write an SVG chart")
        p.set_defaults(func=func)

    p = sub.add_parser("import-mm", help="diagnostics for Matrix Market A (and M)")
    p.add_argument("file")
    p.add_argument("--mass", help="Matrix Market file for M (default identity)")
    p.add_argument("--lam", type=complex)
    p.add_argument("--pseudo-eps", type=parse_float, default=1e-3)
    p.add_argument("--m-max", type=int, default=1)
    p.add_argument("--tol", type=parse_float)
    p.add_argument("--n-angles", type=int, default=64, help="numerical range directions")
    p.add_argument("--n-rays", type=int, default=64, help="pseudospectral rays")
    p.set_defaults(func=cmd_import_mm)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssemblyError, NotPositiveDefiniteError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

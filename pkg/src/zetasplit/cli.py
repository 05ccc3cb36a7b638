"""Command line driver: validate, sweep, verify, spectrum, scatter, eta.

Exit codes: 0 pass, 1 verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import ConfigError, build_closed_operator, build_half_operators, load_config, validate_config
from .fiber import FiberError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load(arg: str):
    """Config from a path, or the name of a bundled config."""
    from .verify import CONFIG_NAMES, bundled_config

    if not Path(arg).exists() and arg in CONFIG_NAMES:
        return bundled_config(arg)
    if not Path(arg).exists():
        raise ConfigError(f"{arg}: no such file (bundled configs: {', '.join(CONFIG_NAMES)})")
    return load_config(arg)


def _r_list(text: str | None):
    if text is None:
        return None
    parts = [p for p in text.replace(" ", "").split(",") if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--r-list: not a comma separated list of numbers: {text!r}") from None
    if any(not math.isfinite(v) or v <= 0 for v in vals):
        raise ConfigError("--r-list: R values must be positive")
    return vals


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cplx(M) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(M)]


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    cfg = _load(args.config)
    problems = validate_config(cfg)
    if problems:
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_USAGE
    F = cfg.fiber
    print(f"{cfg.name}: valid (m={cfg.m}, h_Y={F.h_Y}, mu1={F.mu1:.6g}, arcs={len(cfg.arcs)})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .sweep import run_sweep, to_csv, to_json

    cfg = _load(args.config)
    problems = validate_config(cfg)
    if problems:
        print("invalid config: " + "; ".join(problems), file=sys.stderr)
        return EXIT_USAGE
    res = run_sweep(cfg, _r_list(args.r_list), threads=args.threads, timing=not args.no_timing)
    _emit(to_json(res) if args.format == "json" else to_csv(res), args.out)
    return EXIT_FAIL if any(r.error for r in res.rows) else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    rep = run_suite(args.suite, seed=args.seed)
    _emit(rep.to_json(), args.out)
    for c in rep.checks:
        print(f"{'PASS' if c.ok else 'FAIL'} {c.name}: {c.value:.3g} (tol {c.tol:g})", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_spectrum(args) -> int:
    from .ode import enumerate_eigenvalues

    cfg = _load(args.config)
    Rs = _r_list(args.r_list) or [float(cfg.R_list[0])]
    rows = []
    for R in Rs:
        descs = (build_closed_operator(cfg, R),) + build_half_operators(cfg, R)
        for label, d in zip(("closed", "side1", "side2"), descs):
            for k, v in enumerate(np.sort(enumerate_eigenvalues(d, args.window, weyl_check=False).all())):
                rows.append({"R": R, "operator": label, "index": k, "eigenvalue": float(v)})
    if args.format == "json":
        text = json.dumps({"config": cfg.name, "window": args.window, "rows": rows}, indent=1) + "\n"
    else:
        text = "R,operator,index,eigenvalue\n" + "".join(
            f"{r['R']!r},{r['operator']},{r['index']},{r['eigenvalue']!r}\n" for r in rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_scatter(args) -> int:
    from .scattering import compose_c12, s_sigma, scattering_matrix

    cfg = _load(args.config)
    if cfg.fiber.h_Y == 0:
        print(f"{cfg.name}: ker B = 0, no scattering matrices", file=sys.stderr)
        return EXIT_USAGE
    lams = [float(x) for x in (args.lam or "0").split(",") if x]
    out = {"config": cfg.name, "h_Y": cfg.fiber.h_Y, "points": []}
    for x in lams:
        C1, C2 = scattering_matrix(cfg, 1, x), scattering_matrix(cfg, 2, x)
        out["points"].append({
            "lambda": x, "C1": _cplx(C1), "C2": _cplx(C2), "C12": _cplx(compose_c12(C1, C2)),
            "S1": _cplx(s_sigma(C1, cfg.sigma1, 1)), "S2": _cplx(s_sigma(C2, cfg.sigma2, 2)),
            "unitarity_error": float(max(np.linalg.norm(C @ C.conj().T - np.eye(len(C))) for C in (C1, C2))),
        })
    _emit(json.dumps(out, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_eta(args) -> int:
    from .scattering import scattering_matrix
    from .zeta_eta import eta_decomposition_check, random_tuple

    if args.config:
        cfg = _load(args.config)
        if cfg.fiber.h_Y == 0:
            print(f"{cfg.name}: ker B = 0, the eta splitting has no kernel terms", file=sys.stderr)
            return EXIT_USAGE
        src = cfg.name
        C1, C2 = scattering_matrix(cfg, 1, 0.0), scattering_matrix(cfg, 2, 0.0)
        s1, s2 = cfg.sigma1, cfg.sigma2
    else:
        src = f"random tuple, seed {args.seed}"
        C1, C2, s1, s2 = random_tuple(1, np.random.default_rng(args.seed))
    r = eta_decomposition_check(C1, C2, s1, s2)
    out = {"source": src, "eta_C12_minus_S1_minus_S2": r.eta_models, "eta_cylinder": r.eta_cyl,
           "deviation_mod1": r.deviation, "det_identity_error": r.det_identity_error, "ok": bool(r.ok)}
    _emit(json.dumps(out, indent=1) + "\n", args.out)
    return EXIT_OK if r.ok else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zetasplit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"zetasplit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, required=True):
        if config:
            sp.add_argument("--config", required=required, help="config JSON path or bundled config name")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("validate", help="check a config")
    sp.add_argument("--config", required=True, help="config JSON path or bundled config name")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("sweep", help="det ratio vs R against the limit formula")
    common(sp)
    sp.add_argument("--r-list", help="comma separated R values (default: the config's R_list)")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--no-timing", action="store_true", help="write wall_ms = 0 for byte-identical output")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run a verification suite, JSON report")
    sp.add_argument("suite")
    common(sp, config=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("spectrum", help="eigenvalues of the closed and side operators")
    common(sp)
    sp.add_argument("--r-list", help="comma separated R values (default: first entry of R_list)")
    sp.add_argument("--window", type=float, default=0.5)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("scatter", help="scattering matrices at given lambda values")
    common(sp)
    sp.add_argument("--lam", help="comma separated lambda values (default 0)")
    sp.set_defaults(func=cmd_scatter)

    sp = sub.add_parser("eta", help="eta splitting for a config or a seeded random tuple")
    common(sp, required=False)
    sp.set_defaults(func=cmd_eta)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, FiberError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

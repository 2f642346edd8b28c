"""Command-line front end: ``disjsos <command> [options]``.

Exit codes: 0 certified / decided, 2 not certified or inconclusive (including
node-cap or time-limit exhaustion), 1 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bench
from .bnb import algorithm2, algorithm3, clique_number_bounds
from .certify import (NcCertificate, StepInfeasible, algorithm1, alternating_max,
                      nc_certify)
from .conic import SolverSettings
from .poly import FLOAT, RATIONAL, ParseError, Polynomial, dehomogenize, parse
from .sos import solve_sos_bound

log = logging.getLogger("disjsos")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CERTIFIED = 0, 1, 2
CERT_TOL = 1e-6


@dataclass
class RunConfig:
    command: str
    instance: str | None = None
    poly_file: str | None = None
    matrix_file: str | None = None
    graph: str | None = None
    method: str = "bnb"
    dprime: int = 2
    eps: float | None = None
    init: str = "orthants"
    K: int | None = None
    beta: float | None = None
    node_cap: int = 10_000
    max_m: int = 8
    max_level: int = 8
    seed: int = 0
    workers: int = 1
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def eps_or_default(self) -> float:
        # forms use 1e-4 and QPs 1e-6, as in the reported experiments
        if self.eps is not None:
            return self.eps
        return 1e-6 if self.command in ("copositive", "clique") else 1e-4

    def K_or_default(self) -> int:
        if self.K is not None:
            return self.K
        return {"copositive": 5, "clique": 10}.get(self.command, 1)


class InputError(Exception):
    pass


# -- input loading -----------------------------------------------------------

def load_polynomial(cfg: RunConfig) -> tuple[str, Polynomial]:
    if cfg.poly_file:
        text = Path(cfg.poly_file).read_text()
        nvars = cfg.extra.get("nvars")
        return Path(cfg.poly_file).stem, parse(text, nvars, RATIONAL)
    if cfg.instance:
        key = cfg.instance.lower()
        if key in ("motzkin-affine", "motzkin2"):
            return cfg.instance, bench.motzkin_affine()
        try:
            return cfg.instance, bench.classic_form(cfg.instance)
        except KeyError as e:
            raise InputError(str(e)) from None
    raise InputError("give --instance or --poly-file")


def parse_matrix(text: str) -> list[list[Fraction]]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([Fraction(tok) for tok in line.replace(",", " ").split()])
        except ValueError:
            raise InputError(f"line {lineno}: cannot read matrix entries {line!r}") from None
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise InputError("matrix must be square and nonempty")
    return rows


def load_matrix(cfg: RunConfig):
    if cfg.matrix_file:
        return Path(cfg.matrix_file).stem, parse_matrix(Path(cfg.matrix_file).read_text())
    if cfg.instance:
        key = cfg.instance.lower()
        if key == "horn":
            return "horn", bench.horn_matrix()
        if key.startswith("q") and key[1:].isdigit():
            return key, bench.qp_instance(int(key[1:]))
        raise InputError(f"unknown matrix instance {cfg.instance!r} (horn, q1..q4)")
    raise InputError("give --instance or --matrix-file")


def load_graph(cfg: RunConfig) -> np.ndarray:
    if cfg.graph:
        spec = cfg.graph
        if spec.startswith("er:"):
            # er:n:p[:seed]
            parts = spec.split(":")
            n, p = int(parts[1]), float(parts[2])
            seed = int(parts[3]) if len(parts) > 3 else cfg.seed
            return bench.erdos_renyi(n, p, seed)
        return bench.read_edge_list(Path(spec).read_text())
    raise InputError("give --graph FILE or --graph er:n:p[:seed]")


def _write(path: str | None, text: str):
    if path:
        Path(path).write_text(text)
        log.info("wrote %s", path)


# -- commands ----------------------------------------------------------------

def cmd_certify(cfg: RunConfig, settings: SolverSettings) -> int:
    name, p = load_polynomial(cfg)
    method = cfg.method
    if method == "nc":
        res = nc_certify(p, cfg.max_level)
        if isinstance(res, NcCertificate):
            print(f"{name}: certified by coefficient signs at level {res.level} "
                  f"({len(res.transformed)} generators)")
            _write(cfg.out, json.dumps(res.to_json()))
            return EXIT_OK
        print(f"{name}: not certified up to level {res.level}; most negative coefficient "
              f"{res.worst_coefficient:.6g} at monomial {res.worst_monomial}")
        return EXIT_NOT_CERTIFIED
    if method == "sos":
        gamma, cert = solve_sos_bound(p, None, p.degree, settings=settings, prune=True)
        return _report_sos(name, gamma, cert, cfg.out)
    if method == "altmax":
        q = p
        if p.is_homogeneous() and p.nvars > 1:
            # a form is nonnegative iff its dehomogenization is
            q = dehomogenize(p, p.nvars - 1)
        dbar = cfg.extra.get("dbar") or p.degree
        try:
            res = alternating_max(q, ell=cfg.extra.get("ell", 1), dbar=dbar,
                                  init_degree=cfg.extra.get("init_degree", 1),
                                  iters=cfg.extra.get("iters", 20), seed=cfg.seed,
                                  settings=settings, target=-CERT_TOL)
        except StepInfeasible as e:
            print(f"{name}: {e}")
            return EXIT_NOT_CERTIFIED
        print(f"{name}: alternating maximization gamma = {res.gamma:.3e} after "
              f"{res.iterations} rounds; h = {res.h}")
        return _report_sos(name, res.gamma, res.certificate, cfg.out)
    if method == "caps":
        res = algorithm1(p, cfg.dprime, cfg.eps_or_default(), cfg.max_m, settings=settings,
                         workers=cfg.workers)
        _write(cfg.out, res.to_csv())
        print(f"{name}: L = {res.L:.6e}, U = {res.U:.6e}")
        return EXIT_OK if res.L >= -CERT_TOL else EXIT_NOT_CERTIFIED
    if method == "bnb":
        res = algorithm2(p, cfg.eps_or_default(), cfg.init, cfg.K_or_default(), cfg.beta,
                         cfg.node_cap, cfg.workers, settings)
        _write(cfg.out, res.log_csv())
        print(f"{name}: L = {res.L:.6e}, U = {res.U:.6e}, subregions = {res.subregion_count}")
        return EXIT_OK if res.L >= -CERT_TOL else EXIT_NOT_CERTIFIED
    raise InputError(f"unknown method {method!r}")


def _report_sos(name, gamma, cert, out) -> int:
    ok = math.isfinite(gamma) and gamma >= -CERT_TOL and cert.residual <= CERT_TOL
    if cert is not None:
        _write(out, cert.dumps())
    if ok:
        print(f"{name}: certified, bound {gamma:.3e}, residual {cert.residual:.2e}")
        return EXIT_OK
    print(f"{name}: not certified (bound {gamma:.3e})")
    return EXIT_NOT_CERTIFIED


def cmd_minimize_sphere(cfg: RunConfig, settings: SolverSettings) -> int:
    name, p = load_polynomial(cfg)
    if cfg.method == "caps":
        res = algorithm1(p, cfg.dprime, cfg.eps_or_default(), cfg.max_m, settings=settings,
                         workers=cfg.workers)
        _write(cfg.out, res.to_csv())
        print(f"{name}: L = {res.L:.8e}, U = {res.U:.8e}, levels = {len(res.levels)}")
        return EXIT_OK if res.converged else EXIT_NOT_CERTIFIED
    res = algorithm2(p, cfg.eps_or_default(), cfg.init, cfg.K_or_default(), cfg.beta,
                     cfg.node_cap, cfg.workers, settings)
    _write(cfg.out, res.log_csv())
    print(f"{name}: L = {res.L:.8e}, U = {res.U:.8e}, subregions = {res.subregion_count}, "
          f"stop = {res.reason}, x = {np.round(res.x, 6).tolist()}")
    return EXIT_OK if res.reason == "converged" else EXIT_NOT_CERTIFIED


def cmd_copositive(cfg: RunConfig, settings: SolverSettings | None) -> int:
    name, Q = load_matrix(cfg)
    res = algorithm3(Q, cfg.eps_or_default(), cfg.K_or_default(), cfg.beta, cfg.node_cap,
                     cfg.workers, settings)
    _write(cfg.out, res.log_csv())
    print(f"{name}: verdict {res.verdict}; min over simplex in [{res.L:.8e}, {res.U:.8e}], "
          f"subregions = {res.subregion_count}, stop = {res.reason}")
    return EXIT_OK if res.verdict in ("copositive", "not_copositive") else EXIT_NOT_CERTIFIED


def cmd_clique(cfg: RunConfig, settings: SolverSettings | None) -> int:
    A = load_graph(cfg)
    lo, hi, res = clique_number_bounds(A, K=cfg.K_or_default(), node_cap=cfg.node_cap,
                                       workers=cfg.workers, settings=settings,
                                       eps=cfg.eps_or_default())
    _write(cfg.out, res.log_csv())
    ub = 1 / res.L if res.L > 0 else math.inf
    lb = 1 / res.U if res.U > 0 else math.inf
    print(f"clique number in [{lo}, {hi}] (continuous bounds {lb:.4f} .. {ub:.4f}), "
          f"subregions = {res.subregion_count}")
    return EXIT_OK if lo == hi else EXIT_NOT_CERTIFIED


# -- reproduction ------------------------------------------------------------

def reproduce_poly_counts(names=None, node_cap: int = 10_000, settings=None, workers: int = 1,
                          time_limit: float | None = 600.0, out=sys.stdout) -> list[dict]:
    """Sphere branch-and-bound subregion counts for the classical forms; checks the count ratios."""
    rows = []
    names = names or bench.FORM_SUITE
    for nm in names:
        p = bench.classic_form(nm)
        hard = nm in ("Lax", "PARTITION")
        for k, init in enumerate(("orthants", "regular")):
            target = bench.FORM_COUNTS[nm][k]
            cap = 500 if hard else node_cap
            t0 = time.perf_counter()
            res = algorithm2(p, 1e-4, init, 1, None, cap, workers, settings, time_limit)
            wall = time.perf_counter() - t0
            ratio = res.subregion_count / target
            ok = res.reason == "converged" and (hard or ratio <= 4)
            rows.append({"name": nm, "init": init, "target": target, "obtained": res.subregion_count,
                         "ratio": ratio, "L": res.L, "U": res.U, "reason": res.reason,
                         "seconds": wall, "pass": ok})
            print(f"{nm:12s} {init:9s} target {target:4d}  obtained {res.subregion_count:4d}  "
                  f"ratio {ratio:5.2f}  L {res.L:+.3e}  U {res.U:+.3e}  {res.reason:9s} "
                  f"{wall:7.1f}s  {'PASS' if ok else 'FAIL'}", file=out, flush=True)
    return rows


def reproduce_qp_counts(settings=None, workers: int = 1, out=sys.stdout) -> list[dict]:
    rows = []
    for k in sorted(bench.QP_COUNTS):
        Q = bench.qp_instance(k)
        t0 = time.perf_counter()
        res = algorithm3(Q, 1e-6, 5, None, 10_000, workers, settings)
        wall = time.perf_counter() - t0
        target = bench.QP_COUNTS[k]
        try:
            oracle = bench.oracle_qp_value(Q, 1 / 120)
        except ValueError:
            oracle = None
        value = res.U
        ok = res.reason == "converged" and res.subregion_count <= 3 * target
        if oracle is not None:
            ok = ok and abs(value - oracle) <= 2e-3
        rows.append({"name": f"Q{k}", "target": target, "obtained": res.subregion_count,
                     "value": value, "oracle": oracle, "seconds": wall, "pass": ok})
        ostr = f"{oracle:+.6f}" if oracle is not None else "   n/a   "
        print(f"Q{k}  target {target:3d}  obtained {res.subregion_count:3d}  value {value:+.6f}  "
              f"grid oracle {ostr}  {wall:6.1f}s  {'PASS' if ok else 'FAIL'}", file=out,
              flush=True)
    return rows


def reproduce_clique(n: int = 20, p: float = 0.5, seeds=range(1, 21), settings=None,
                     workers: int = 1, out=sys.stdout) -> list[dict]:
    rows = []
    for seed in seeds:
        A = bench.erdos_renyi(n, p, seed)
        omega = bench.oracle_clique(A)
        t0 = time.perf_counter()
        lo, hi, res = clique_number_bounds(A, K=10, node_cap=2000, workers=workers,
                                           settings=settings)
        wall = time.perf_counter() - t0
        ok = lo == hi == omega
        rows.append({"seed": seed, "omega": omega, "lower": lo, "upper": hi,
                     "subregions": res.subregion_count, "seconds": wall, "pass": ok})
        print(f"G({n},{p}) seed {seed:3d}  omega {omega}  bounds [{lo}, {hi}]  "
              f"subregions {res.subregion_count:4d}  {wall:6.1f}s  {'PASS' if ok else 'FAIL'}",
              file=out, flush=True)
    return rows


def cmd_reproduce(cfg: RunConfig, settings: SolverSettings | None) -> int:
    table = cfg.extra.get("table")
    if table == "poly_counts":
        names = [cfg.instance] if cfg.instance else None
        rows = reproduce_poly_counts(names, cfg.node_cap, settings, cfg.workers)
    elif table == "qp_counts":
        rows = reproduce_qp_counts(settings, cfg.workers)
    elif table == "clique":
        n = cfg.extra.get("graph_n") or 20
        count = cfg.extra.get("graphs") or 20
        rows = reproduce_clique(n, 0.5, range(cfg.seed + 1, cfg.seed + 1 + count), settings,
                                cfg.workers)
    else:
        raise InputError(f"unknown table {table!r}")
    if cfg.out:
        _write(cfg.out, json.dumps(rows, indent=1, default=float))
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_NOT_CERTIFIED


COMMANDS = {
    "certify": cmd_certify,
    "minimize-sphere": cmd_minimize_sphere,
    "copositive": cmd_copositive,
    "clique": cmd_clique,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="disjsos", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--instance")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--K", type=int)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--node-cap", type=int, default=10_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out")

    for name in ("certify", "minimize-sphere"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--poly-file")
        sp.add_argument("--nvars", type=int)
        sp.add_argument("--method", choices=["sos", "altmax", "nc", "caps", "bnb"],
                        default="altmax" if name == "certify" else "bnb")
        sp.add_argument("--dprime", type=int, default=2)
        sp.add_argument("--init", choices=["orthants", "regular"], default="orthants")
        sp.add_argument("--max-m", type=int, default=8)
        sp.add_argument("--max-level", type=int, default=8)
        sp.add_argument("--dbar", type=int)
        sp.add_argument("--ell", type=int, default=1)
        sp.add_argument("--init-degree", type=int, default=1)
        sp.add_argument("--iters", type=int, default=100)
    sp = sub.add_parser("copositive")
    common(sp)
    sp.add_argument("--matrix-file")
    sp = sub.add_parser("clique")
    common(sp)
    sp.add_argument("--graph", required=True)
    sp = sub.add_parser("reproduce")
    common(sp)
    sp.add_argument("table", choices=["poly_counts", "qp_counts", "clique"])
    sp.add_argument("--graph-n", type=int)
    sp.add_argument("--graphs", type=int)
    return ap


def config_from_args(args) -> RunConfig:
    d = vars(args)
    known = {f for f in RunConfig.__dataclass_fields__ if f != "extra"}
    cfg = RunConfig(**{k: v for k, v in d.items() if k in known and v is not None})
    cfg.extra = {k: v for k, v in d.items() if k not in known and k != "verbose"}
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    cfg = config_from_args(args)
    log.info("config %s", asdict(cfg))
    settings = None
    try:
        return COMMANDS[cfg.command](cfg, settings)
    except (ParseError, InputError, OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``pxnehari solve|spaces|fiber <config.json>``.

Exit codes: 0 success, 1 solver failure or property violation, 2 invalid
configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, Problem, ProblemConfig
from .exponent_field import ExponentField, conjugate_exponent, log_holder_diagnostic
from .grid import ScalarField
from .modular_space import (
    holder_check,
    luxemburg_norm,
    modular,
    poincare_ratio,
)
from .nehari_manifolds import ManifoldError, fibering_root
from .solver import CONVERGED, embedding_constant, solve_three

log = logging.getLogger("pxnehari")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
STATUSES = ("converged", "max_iters", "threshold_exceeded", "degenerate")


# -- field IO ----------------------------------------------------------------------


def write_field_csv(path, u: ScalarField):
    """One row per node: coordinates then value, header ``x[,y],value``."""
    cols = ["x", "y"][: u.grid.dim] + ["value"]
    data = np.column_stack(list(u.grid.coords) + [u.values])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def read_field_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


# -- report ------------------------------------------------------------------------


@dataclass
class RunReport:
    config: dict
    statuses: dict = field(default_factory=dict)
    energies: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    signatures: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    messages: dict = field(default_factory=dict)
    threshold: float | None = None
    sobolev_constant: float | None = None
    lam: float | None = None
    lambdas_tried: list = field(default_factory=list)
    lambda_star: float | None = None
    distances: dict = field(default_factory=dict)
    distinct: bool | None = None
    lemma43_c: float | None = None
    nontrivial: bool | None = None
    f2_passed: bool | None = None
    audits: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    error: dict | None = None
    exit_code: int = EXIT_OK

    def __post_init__(self):
        bad = set(self.statuses.values()) - set(STATUSES)
        if bad:
            raise ValueError(f"unknown statuses {sorted(bad)}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def _write_report(out: Path | None, report: RunReport):
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())


# -- shared ------------------------------------------------------------------------


def _load(path, args) -> Problem:
    cfg = ProblemConfig.load(path)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["rng_seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        tol = dict(cfg.tolerances)
        tol["residual"] = args.tol
        changes["tolerances"] = tol
    if changes:
        cfg = cfg.replace(**changes)
    try:
        return Problem(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _print_table(headers, rows, stream=None):
    stream = sys.stdout if stream is None else stream
    cells = [[str(h) for h in headers]] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    for k, r in enumerate(cells):
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)), file=stream)
        if k == 0:
            print("  ".join("-" * w for w in widths), file=stream)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# -- solve -------------------------------------------------------------------------


def cmd_solve(args) -> int:
    out = Path(args.out) if args.out else None
    try:
        problem = _load(args.config, args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        report = RunReport(config={}, error={"kind": "config", "message": str(exc)})
        report.exit_code = EXIT_CONFIG
        _write_report(out, report)
        return EXIT_CONFIG

    t0 = time.perf_counter()
    res = solve_three(problem, escalate=args.escalate, max_decades=args.max_decades)
    report = RunReport(config=problem.config.to_dict())
    for cp in res.points:
        key = f"K{cp.manifold}"
        report.statuses[key] = cp.status
        report.energies[key] = cp.energy.total
        report.residuals[key] = cp.residual_norm
        report.signatures[key] = cp.sign_signature
        report.iterations[key] = cp.iterations
        if cp.message:
            report.messages[key] = cp.message
    report.threshold = res.threshold
    report.sobolev_constant = res.sobolev
    report.lam = res.lam
    report.lambdas_tried = list(res.lambdas_tried)
    report.lambda_star = res.lambda_star
    report.distances = res.distances
    report.distinct = res.distinct
    report.lemma43_c = res.lemma43_c
    report.nontrivial = res.nontrivial
    report.f2_passed = res.f2_passed
    report.audits = [a.to_dict() for a in res.audits]
    report.timing = dict(res.timings, wall=time.perf_counter() - t0)

    ok = all(cp.status == CONVERGED for cp in res.points)
    if not ok:
        failed = {k: v for k, v in report.statuses.items() if v != CONVERGED}
        report.error = {"kind": "solver", "statuses": failed, "messages": report.messages}
    report.exit_code = EXIT_OK if ok else EXIT_FAIL

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for cp in res.points:
            write_field_csv(out / f"u_K{cp.manifold}.csv", cp.field)
    _write_report(out, report)

    rows = [
        (f"K{cp.manifold}", cp.status, cp.sign_signature, cp.energy.total, cp.residual_norm, cp.iterations)
        for cp in res.points
    ]
    _print_table(["set", "status", "signature", "energy", "residual", "iters"], rows)
    print(f"lambda = {res.lam:g}  threshold = {res.threshold:.6g}  distinct = {res.distinct}")
    return report.exit_code


# -- spaces ------------------------------------------------------------------------


def _random_pair_field(grid, rng, dirichlet=False):
    """Mixture of rough, smooth and localized random fields."""
    kind = rng.integers(3)
    x = [c / L for c, L in zip(grid.coords, grid.extents)]
    if kind == 0:
        v = rng.normal(size=grid.size)
    elif kind == 1:
        v = np.zeros(grid.size)
        for _ in range(3):
            term = rng.normal()
            for xi in x:
                term = term * np.sin(np.pi * rng.integers(1, 5) * xi + rng.uniform(0, np.pi))
            v += term
    else:
        c = rng.uniform(0.1, 0.9, size=grid.dim)
        R = 10 ** rng.uniform(-1.3, -0.3)
        d2 = sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / R**2
        v = np.maximum(1 - d2, 0) ** 2 * rng.choice([-1.0, 1.0])
    v = v * 10 ** rng.uniform(-2, 2)
    if dirichlet:
        v[grid.boundary_mask] = 0.0
        if not np.any(v):
            v[grid.interior[len(grid.interior) // 2]] = 1.0
    return ScalarField(grid, v, dirichlet)


def holder_suite(problem, pairs, rng, conjugate=conjugate_exponent) -> dict:
    worst, bad = -np.inf, 0
    for _ in range(pairs):
        f = _random_pair_field(problem.grid, rng)
        g = f if rng.uniform() < 0.2 else _random_pair_field(problem.grid, rng)
        lhs, rhs = holder_check(f, g, problem.p, conjugate=conjugate)
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
        worst = max(worst, ratio)
        bad += ratio > 1.0
    return {"suite": "holder", "samples": pairs, "violations": int(bad), "worst": float(worst)}


def poincare_suite(problem, pairs, rng, constant=None) -> dict:
    """Ratios ``||u|| / ||grad u||`` against the estimated Poincare constant."""
    C = embedding_constant(problem, problem.p.values, rng=rng) if constant is None else constant
    worst, bad = 0.0, 0
    for _ in range(pairs):
        u = _random_pair_field(problem.grid, rng, dirichlet=True)
        ratio = poincare_ratio(u, problem.p) / C
        worst = max(worst, ratio)
        bad += ratio > 1.0 + 1e-9
    return {
        "suite": "poincare",
        "samples": pairs,
        "violations": int(bad),
        "worst": float(worst),
        "constant": C,
    }


def norm_suite(problem, samples, rng) -> dict:
    """Homogeneity, unit modular, norm-modular bracket and triangle inequality."""
    e = problem.p
    em, ep = e.inf_value, e.sup_value
    bad = {"homogeneity": 0, "unit_modular": 0, "bracket": 0, "triangle": 0}
    for _ in range(samples):
        u = _random_pair_field(problem.grid, rng)
        v = _random_pair_field(problem.grid, rng)
        n = luxemburg_norm(u, e)
        c = rng.normal() * 10 ** rng.uniform(-2, 2)
        if abs(luxemburg_norm(c * u, e) - abs(c) * n) > 1e-9 * abs(c) * n:
            bad["homogeneity"] += 1
        if n > 0 and abs(modular(u.with_values(u.values / n), e) - 1.0) > 1e-8:
            bad["unit_modular"] += 1
        rho = modular(u, e)
        lo, hi = sorted((n**em, n**ep))
        if not lo * (1 - 1e-12) <= rho <= hi * (1 + 1e-12):
            bad["bracket"] += 1
        if luxemburg_norm(u + v, e) > (n + luxemburg_norm(v, e)) * (1 + 1e-9):
            bad["triangle"] += 1
    return {
        "suite": "norm",
        "samples": samples,
        "violations": int(sum(bad.values())),
        "worst": dict(bad),
    }


def _broken_conjugate(p: ExponentField) -> ExponentField:
    return ExponentField(p.grid, p.values)


def cmd_spaces(args) -> int:
    try:
        problem = _load(args.config, args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rng = np.random.default_rng(problem.config.rng_seed)
    conj = _broken_conjugate if args.broken_conjugate else conjugate_exponent
    results = [
        holder_suite(problem, args.pairs, rng, conjugate=conj),
        poincare_suite(problem, args.pairs, rng),
        norm_suite(problem, args.norm_samples, rng),
    ]
    diag = {
        "log_holder_p": log_holder_diagnostic(problem.p),
        "log_holder_q": log_holder_diagnostic(problem.q),
    }
    rows = []
    for r in results:
        worst = r["worst"] if not isinstance(r["worst"], dict) else "-"
        rows.append((r["suite"], r["samples"], r["violations"], worst, "pass" if r["violations"] == 0 else "FAIL"))
    _print_table(["suite", "samples", "violations", "worst", "result"], rows)
    for k, v in diag.items():
        print(f"{k} = {v:.6g} (diagnostic)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "spaces.json").write_text(
            json.dumps({"suites": results, "diagnostics": diag}, indent=2)
        )
    return EXIT_OK if all(r["violations"] == 0 for r in results) else EXIT_FAIL


# -- fiber -------------------------------------------------------------------------


def fiber_sweep(problem, lambdas) -> list[tuple[float, float, float]]:
    w0 = ScalarField(problem.grid, problem.seeds["positive"], True)
    rows = []
    for lam in lambdas:
        p = problem.with_lambda(lam)
        t = fibering_root(w0, p)
        rows.append((float(lam), t, p.energy.value(t * w0.values)))
    return rows


def cmd_fiber(args) -> int:
    try:
        problem = _load(args.config, args)
        lambdas = [float(v) for v in args.lambdas.split(",") if v.strip()]
        if not lambdas or any(not (v > 0 and math.isfinite(v)) for v in lambdas):
            raise ConfigError("--lambdas needs positive numbers")
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = fiber_sweep(problem, lambdas)
    except ManifoldError as exc:
        print(f"fibering failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _print_table(["lambda", "t_lambda", "energy"], rows)
    order = np.argsort([r[0] for r in rows], kind="stable")
    ts = [rows[i][1] for i in order]
    lams = [rows[i][0] for i in order]
    monotone = all(
        (t1 > t2) if l1 < l2 else (t1 == t2) for (l1, t1), (l2, t2) in zip(zip(lams, ts), zip(lams[1:], ts[1:]))
    )
    energies = [rows[i][2] for i in order]
    if lams[-1] >= 100 * lams[0]:
        print(f"energy ratio over the sweep: {energies[-1] / energies[0]:.3g}")
    print("t_lambda strictly decreasing" if monotone else "t_lambda NOT strictly decreasing")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "fiber.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "t_lambda", "energy"])
            for r in rows:
                w.writerow([repr(v) for v in r])
    return EXIT_OK if monotone else EXIT_FAIL


# -- entry -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pxnehari", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="problem config (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config RNG seed")
        p.add_argument("--tol", type=float, help="override the residual tolerance")

    s = sub.add_parser("solve", help="find the positive, negative and sign-changing solutions")
    common(s)
    s.add_argument(
        "--escalate", action="store_true", help="raise lambda by decades until the energy gate passes"
    )
    s.add_argument("--max-decades", type=int, default=3)
    s.set_defaults(func=cmd_solve)

    sp = sub.add_parser("spaces", help="randomized Holder, Poincare and norm suites")
    common(sp)
    sp.add_argument("--pairs", type=int, default=1000)
    sp.add_argument("--norm-samples", type=int, default=200)
    sp.add_argument("--broken-conjugate", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_spaces)

    f = sub.add_parser("fiber", help="fibering roots t_lambda over a lambda sweep")
    common(f)
    f.add_argument("--lambdas", default="1,10,100,1000", help="comma separated list")
    f.set_defaults(func=cmd_fiber)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

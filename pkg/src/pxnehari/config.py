"""JSON problem configuration and its materialization on a grid."""

from __future__ import annotations

import ast
import copy
import json
import operator
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .discretization import discretization_for
from .energy import EnergyFunctional, example_nonlinearity
from .exponent_field import CriticalSet, ExponentField, critical_exponent, critical_set
from .grid import Grid


class ConfigError(ValueError):
    pass


# -- expressions --------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def compile_expression(text: str):
    """Compile ``text`` into ``fn(x, y=0)``.

    Grammar: ``+ - * / ^``, parentheses, the variables ``x`` and ``y`` and
    numeric literals.  Anything else is rejected.
    """
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"empty expression: {text!r}")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            check(node.operand)
        elif isinstance(node, ast.Constant) and type(node.value) in (int, float):
            pass
        elif isinstance(node, ast.Name) and node.id in ("x", "y"):
            pass
        else:
            raise ConfigError(f"unsupported syntax in expression {text!r}")

    check(tree)

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return float(node.value)
        return env[node.id]

    def fn(x, y=None):
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x) if y is None else np.asarray(y, dtype=float)
        return np.broadcast_to(ev(tree, {"x": x, "y": y}), x.shape).astype(float)

    return fn


def _in_box(grid: Grid, box):
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    if len(box) != grid.dim:
        raise ConfigError(f"box {box.tolist()} does not match grid dimension {grid.dim}")
    inside = np.ones(grid.size, dtype=bool)
    for c, (lo, hi) in zip(grid.coords, box):
        inside &= (c >= lo) & (c <= hi)
    return inside


def exponent_from_spec(grid: Grid, spec, name: str = "exponent") -> ExponentField:
    """Constant, expression string, or ``{"piecewise": [...], "default": v}``."""
    if isinstance(spec, bool):
        raise ConfigError(f"{name}: invalid exponent spec {spec!r}")
    if isinstance(spec, (int, float)):
        return ExponentField.constant(grid, float(spec))
    if isinstance(spec, str):
        return ExponentField(grid, grid.evaluate(compile_expression(spec)))
    if isinstance(spec, dict) and "piecewise" in spec:
        if "default" not in spec:
            raise ConfigError(f"{name}: piecewise spec needs a default value")
        vals = np.full(grid.size, float(spec["default"]))
        assigned = np.zeros(grid.size, dtype=bool)
        for region in spec["piecewise"]:
            try:
                inside = _in_box(grid, region["box"]) & ~assigned
                vals[inside] = float(region["value"])
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"{name}: bad region {region!r}") from exc
            assigned |= inside
        return ExponentField(grid, vals)
    raise ConfigError(f"{name}: invalid exponent spec {spec!r}")


def seed_from_spec(grid: Grid, spec, name: str = "seed") -> np.ndarray:
    """Bump ``amplitude (1 - |x-c|^2/R^2)_+^2`` or an expression; zero on the boundary."""
    if isinstance(spec, str):
        vals = grid.evaluate(compile_expression(spec))
    elif isinstance(spec, dict) and "bump" in spec:
        b = spec["bump"]
        try:
            c = np.asarray(b["center"], dtype=float).reshape(-1)
            R = float(b["radius"])
            A = float(b.get("amplitude", 1.0))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{name}: bump needs center and radius") from exc
        if len(c) != grid.dim or R <= 0:
            raise ConfigError(f"{name}: bad bump center/radius")
        d2 = np.sum((grid.points - c) ** 2, axis=1) / R**2
        vals = A * np.maximum(1.0 - d2, 0.0) ** 2
    else:
        raise ConfigError(f"{name}: invalid seed spec {spec!r}")
    vals = np.asarray(vals, dtype=float).copy()
    vals[grid.boundary_mask] = 0.0
    return vals


def default_seeds(extents):
    ext = list(extents)
    if len(ext) == 1:
        pos = {"bump": {"center": [0.3 * ext[0]], "radius": 0.2 * ext[0], "amplitude": 1.0}}
        neg = {"bump": {"center": [0.7 * ext[0]], "radius": 0.2 * ext[0], "amplitude": -1.0}}
    else:
        R = 0.2 * min(ext)
        pos = {"bump": {"center": [0.25 * ext[0], 0.5 * ext[1]], "radius": R, "amplitude": 1.0}}
        neg = {"bump": {"center": [0.75 * ext[0], 0.5 * ext[1]], "radius": R, "amplitude": -1.0}}
    return {"positive": pos, "negative": neg}


DEFAULT_TOLERANCES = {
    "constraint": 1e-8,
    "residual": 1e-6,
    "critical_set": 1e-9,
    "energy": 1e-12,
}


@dataclass
class ProblemConfig:
    extents: list
    resolution: list
    p: object
    q: object
    nonlinearity: dict
    lam: float
    sobolev_constant: object = "estimate"
    sobolev_starts: int = 8
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    max_iterations: int = 5000
    seeds: dict | None = None
    rng_seed: int = 0

    def __post_init__(self):
        self.extents = [float(e) for e in self.extents]
        self.resolution = [int(n) for n in self.resolution]
        self.lam = float(self.lam)
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances or {})
        self.tolerances = {k: float(v) for k, v in tol.items()}
        if self.seeds is None:
            self.seeds = default_seeds(self.extents)

    # -- serialization --

    def to_dict(self) -> dict:
        return {
            "domain": {"extents": list(self.extents)},
            "grid": {"resolution": list(self.resolution)},
            "p": copy.deepcopy(self.p),
            "q": copy.deepcopy(self.q),
            "nonlinearity": copy.deepcopy(self.nonlinearity),
            "lambda": self.lam,
            "sobolev_constant": self.sobolev_constant,
            "sobolev_starts": self.sobolev_starts,
            "tolerances": dict(self.tolerances),
            "max_iterations": self.max_iterations,
            "seeds": copy.deepcopy(self.seeds),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {
            "domain", "grid", "p", "q", "nonlinearity", "lambda", "sobolev_constant",
            "sobolev_starts", "tolerances", "max_iterations", "seeds", "rng_seed",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"domain", "grid", "p", "q", "nonlinearity", "lambda"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            cfg = cls(
                extents=d["domain"]["extents"],
                resolution=d["grid"]["resolution"],
                p=d["p"],
                q=d["q"],
                nonlinearity=dict(d["nonlinearity"]),
                lam=d["lambda"],
                sobolev_constant=d.get("sobolev_constant", "estimate"),
                sobolev_starts=int(d.get("sobolev_starts", 8)),
                tolerances=d.get("tolerances") or {},
                max_iterations=int(d.get("max_iterations", 5000)),
                seeds=d.get("seeds"),
                rng_seed=int(d.get("rng_seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ProblemConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def replace(self, **changes) -> "ProblemConfig":
        d = {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}
        d.update(changes)
        return ProblemConfig(**d)

    def validate(self):
        build_problem(self)
        return self


class Problem:
    """Grid, exponent fields, nonlinearity and energy built from a config."""

    def __init__(self, config: ProblemConfig):
        self.config = config
        try:
            self.grid = Grid(tuple(config.extents), tuple(config.resolution))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if config.lam <= 0:
            raise ConfigError(f"lambda must be positive, got {config.lam}")
        S = config.sobolev_constant
        if not (S == "estimate" or (isinstance(S, (int, float)) and S > 0)):
            raise ConfigError(f"sobolev_constant must be 'estimate' or positive, got {S!r}")
        g = self.grid
        self.disc = discretization_for(g)
        self.p = exponent_from_spec(g, config.p, "p")
        self.q = exponent_from_spec(g, config.q, "q")
        if self.p.inf_value <= 1.0:
            raise ConfigError("need p > 1 everywhere")
        nl = config.nonlinearity
        if "r" not in nl:
            raise ConfigError("nonlinearity needs an 'r' exponent")
        r = exponent_from_spec(g, nl["r"], "r")
        s = None if nl.get("s") is None else exponent_from_spec(g, nl["s"], "s")
        try:
            self.nl = example_nonlinearity(self.p, self.q, r, s, nl.get("constants"))
        except ValueError as exc:
            raise ConfigError(f"nonlinearity: {exc}") from exc
        self.lam = config.lam
        self.tol = dict(config.tolerances)
        self.energy = EnergyFunctional(self.disc, self.p, self.q, self.nl, self.lam)
        self.seeds = {
            k: seed_from_spec(g, v, f"seeds.{k}") for k, v in (config.seeds or {}).items()
        }
        for k, sign in (("positive", 1.0), ("negative", -1.0)):
            if k in self.seeds:
                w = self.seeds[k]
                if np.any(sign * w < 0) or not np.any(sign * w > 0):
                    raise ConfigError(f"seed '{k}' must be nonzero and of one sign")

        # p* is only finite where p < N; otherwise the problem is subcritical
        if self.p.sup_value < g.dim:
            self.p_star = critical_exponent(self.p, g.dim)
            if np.any(self.q.values > self.p_star.values + self.tol["critical_set"]):
                raise ConfigError("need q(x) <= p*(x) at every node")
            self.critical: CriticalSet = critical_set(self.q, self.p_star, self.tol["critical_set"])
        else:
            self.p_star = None
            self.critical = CriticalSet(np.zeros(g.size, dtype=bool), float("inf"))

    @property
    def dim(self) -> int:
        return self.grid.dim

    def with_lambda(self, lam: float) -> "Problem":
        return Problem(self.config.replace(lam=float(lam)))

    def with_config(self, **changes) -> "Problem":
        return Problem(self.config.replace(**changes))


def build_problem(config: ProblemConfig) -> Problem:
    return Problem(config)


def desk_config(lam: float = 100.0, resolution: int = 33, **overrides) -> ProblemConfig:
    """2D unit-square problem with q = 6 = p* on the left half and 5.5 on the right."""
    cfg = dict(
        extents=[1.0, 1.0],
        resolution=[resolution, resolution],
        p=1.5,
        q={"piecewise": [{"box": [[0.0, 0.5], [0.0, 1.0]], "value": 6.0}], "default": 5.5},
        nonlinearity={"r": 4.0, "s": 3.0, "constants": None},
        lam=lam,
    )
    cfg.update(overrides)
    return ProblemConfig(**cfg)

"""Chart-local metric definitions: catalog, custom files, evaluation and jets.

Array layout used throughout the package::

    g[i, j]          = g_ij
    dg[i, j, k]      = d g_ij / dx^k
    d2g[i, j, k, l]  = d^2 g_ij / dx^k dx^l
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import (BadParam, DegenerateMetric, DomainError, GeodynError, LexError,
                     OutOfDomain, ParseError, SchemaError, UnknownMetric, UnknownVariable)
from .exprlang import Const, Expr, compile_jets, eval_scalar, parse, pretty_print
from .rng import XorShift64Star

METRIC_SCHEMA_ID = "geodyn.metric/1"
CONNECTION_SCHEMA_ID = "geodyn.connection/1"

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class Guard:
    source: str
    ast: Expr


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A metric on a single chart.

    ``components[i][j]`` and ``components[j][i]`` are the same object, so the
    component table is symmetric by construction.
    """

    name: str
    dim: int
    variables: tuple[str, ...]
    components: tuple[tuple[Expr, ...], ...]
    signature: str = "riemannian"
    guards: tuple[Guard, ...] = ()
    bounds: tuple[tuple[float, float], ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)
    demo_state: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    @cached_property
    def _slots(self) -> tuple[list[Expr], np.ndarray]:
        unique: list[Expr] = []
        index = np.zeros((self.dim, self.dim), dtype=int)
        for i in range(self.dim):
            for j in range(i + 1):
                index[i, j] = index[j, i] = len(unique)
                unique.append(self.components[i][j])
        return unique, index

    @cached_property
    def _jets2(self):
        return compile_jets(self._slots[0], self.dim, order=2)

    @cached_property
    def _jets1(self):
        return compile_jets(self._slots[0], self.dim, order=1)

    @cached_property
    def _guards0(self):
        return compiled_guards(self.guards, self.dim)

    @cached_property
    def _jets0(self):
        return compile_jets(self._slots[0], self.dim, order=0)

    def describe(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({params})" if params else self.name


@dataclass(frozen=True)
class MetricJet:
    g: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    point: np.ndarray


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def make_metric(name: str, variables: Sequence[str], components: Mapping[tuple[int, int], str],
                guards: Sequence[str] = (), signature: str = "riemannian",
                bounds: Sequence[tuple[float, float]] = (),
                constants: Mapping[str, float] | None = None,
                params: Mapping[str, float] | None = None,
                demo_state=None) -> MetricSpec:
    """Build a metric from zero-based ``(i, j)`` -> expression source.

    Missing entries are zero.  If both ``(i, j)`` and ``(j, i)`` are given they
    must parse to the same tree.
    """
    dim = len(variables)
    if dim < 1:
        raise SchemaError("metric needs at least one coordinate")
    if signature not in ("riemannian", "pseudo"):
        raise SchemaError(f"unknown signature {signature!r}")
    table: dict[tuple[int, int], Expr] = {}
    for (i, j), src in components.items():
        if not (0 <= i < dim and 0 <= j < dim):
            raise SchemaError(f"component ({i + 1},{j + 1}) outside dimension {dim}")
        ast = parse(src, dim, variables, constants)
        key = (max(i, j), min(i, j))
        if key in table and table[key] != ast:
            raise SchemaError(
                f"asymmetric components: g_{i + 1}{j + 1} = {src!r} differs from "
                f"g_{j + 1}{i + 1} = {pretty_print(table[key])!r}")
        table[key] = ast
    zero = Const(0.0)
    rows = []
    for i in range(dim):
        rows.append(tuple(table.get((max(i, j), min(i, j)), zero) for j in range(dim)))
    parsed_guards = tuple(Guard(g, parse(g, dim, variables, constants)) for g in guards)
    if bounds and len(bounds) != dim:
        raise SchemaError(f"{len(bounds)} bounds for dimension {dim}")
    return MetricSpec(
        name=name, dim=dim, variables=tuple(variables), components=tuple(rows),
        signature=signature, guards=parsed_guards,
        bounds=tuple((float(lo), float(hi)) for lo, hi in bounds),
        params=dict(params or {}), demo_state=demo_state,
    )


def _positive(params: Mapping[str, float], key: str) -> float:
    value = float(params[key])
    if not value > 0.0 or not math.isfinite(value):
        raise BadParam(f"parameter {key} must be positive, got {params[key]!r}")
    return value


def _dimension(params: Mapping[str, float], default: int) -> int:
    n = params.get("n", default)
    if int(n) != n or int(n) < 1:
        raise BadParam(f"dimension n must be a positive integer, got {n!r}")
    return int(n)


def _euclidean(p):
    n = _dimension(p, 2)
    names = [f"x{i + 1}" for i in range(n)]
    v0 = tuple(0.3 * (-1) ** i / (i + 1) for i in range(n))
    return make_metric("euclidean", names, {(i, i): "1" for i in range(n)},
                       bounds=[(-2.0, 2.0)] * n, params={"n": n},
                       demo_state=((0.0,) * n, v0))


def _polar2(p):
    return make_metric("polar2", ["r", "theta"], {(0, 0): "1", (1, 1): "r^2"}, guards=["r"],
                       bounds=[(0.5, 3.0), (-math.pi, math.pi)],
                       demo_state=((1.0, 0.0), (0.2, 0.3)))


def _sphere(p):
    r = _positive(p, "r")
    return make_metric("sphere", ["theta", "phi"], {(0, 0): "r^2", (1, 1): "r^2*sin(theta)^2"},
                       guards=["sin(theta)"], constants={"r": r}, params={"r": r},
                       bounds=[(0.3, math.pi - 0.3), (-math.pi, math.pi)],
                       demo_state=((math.pi / 2, 0.0), (0.3, 1.0)))


def _stereographic(p):
    r = _positive(p, "r")
    conformal = "4*r^4/(r^2 + x^2 + y^2)^2"
    return make_metric("sphere-stereographic", ["x", "y"], {(0, 0): conformal, (1, 1): conformal},
                       constants={"r": r}, params={"r": r},
                       bounds=[(-2.0 * r, 2.0 * r)] * 2,
                       demo_state=((0.1 * r, -0.2 * r), (0.1 * r, 0.05 * r)))


def _poincare(p):
    return make_metric("poincare-half-plane", ["x", "y"], {(0, 0): "1/y^2", (1, 1): "1/y^2"},
                       guards=["y"], bounds=[(-2.0, 2.0), (0.5, 3.0)],
                       demo_state=((0.0, 1.0), (0.1, 0.1)))


def _torus(p):
    big, small = _positive(p, "R"), _positive(p, "a")
    if small >= big:
        raise BadParam(f"torus needs R > a, got R={big}, a={small}")
    return make_metric("torus", ["theta", "phi"],
                       {(0, 0): "a^2", (1, 1): "(R + a*cos(theta))^2"},
                       guards=["R + a*cos(theta)"], constants={"R": big, "a": small},
                       params={"R": big, "a": small},
                       bounds=[(-math.pi, math.pi), (-math.pi, math.pi)],
                       demo_state=((0.3, 0.0), (0.2, 0.4)))


def _minkowski(p):
    n = _dimension(p, 4)
    if n < 2:
        raise BadParam("minkowski needs n >= 2")
    names = ["t"] + [f"x{i}" for i in range(1, n)]
    comps = {(0, 0): "-1"}
    comps.update({(i, i): "1" for i in range(1, n)})
    v0 = (1.2,) + tuple(0.3 * (-1) ** i / i for i in range(1, n))
    return make_metric("minkowski", names, comps, signature="pseudo",
                       bounds=[(-2.0, 2.0)] * n, params={"n": n},
                       demo_state=((0.0,) * n, v0))


def _schwarzschild(p):
    rs = _positive(p, "rs")
    return make_metric(
        "schwarzschild", ["t", "r", "theta", "phi"],
        {(0, 0): "-(1 - rs/r)", (1, 1): "1/(1 - rs/r)", (2, 2): "r^2",
         (3, 3): "r^2*sin(theta)^2"},
        guards=["r - rs", "sin(theta)"], signature="pseudo", constants={"rs": rs},
        params={"rs": rs},
        bounds=[(-1.0, 1.0), (2.5 * rs, 8.0 * rs), (0.5, math.pi - 0.5), (-math.pi, math.pi)],
        demo_state=((0.0, 8.0 * rs, 1.4, 0.0), (1.2, 0.05, 0.02, 0.03 / rs)))


def _sphere_cross_line(p):
    return make_metric("sphere-cross-line", ["theta", "phi", "z"],
                       {(0, 0): "1", (1, 1): "sin(theta)^2", (2, 2): "1"},
                       guards=["sin(theta)"],
                       bounds=[(0.3, math.pi - 0.3), (-math.pi, math.pi), (-2.0, 2.0)],
                       demo_state=((math.pi / 2, 0.0, 0.0), (0.2, 0.8, 0.3)))


_BUILDERS = {
    "euclidean": (_euclidean, {"n": 2}),
    "polar2": (_polar2, {}),
    "sphere": (_sphere, {"r": 1.0}),
    "sphere-stereographic": (_stereographic, {"r": 1.0}),
    "poincare-half-plane": (_poincare, {}),
    "torus": (_torus, {"R": 2.0, "a": 1.0}),
    "minkowski": (_minkowski, {"n": 4}),
    "schwarzschild": (_schwarzschild, {"rs": 1.0}),
    "sphere-cross-line": (_sphere_cross_line, {}),
}
_ALIASES = {"poincare": "poincare-half-plane", "stereographic": "sphere-stereographic"}

# the catalog every identity is checked against
CATALOG: tuple[tuple[str, dict], ...] = (
    ("euclidean", {"n": 2}),
    ("euclidean", {"n": 3}),
    ("polar2", {}),
    ("sphere", {"r": 1.0}),
    ("sphere-stereographic", {"r": 1.0}),
    ("poincare-half-plane", {}),
    ("torus", {"R": 2.0, "a": 1.0}),
    ("minkowski", {"n": 4}),
    ("schwarzschild", {"rs": 1.0}),
    ("sphere-cross-line", {}),
)


def builtin_names() -> list[str]:
    return list(_BUILDERS)


def builtin(name: str, params: Mapping[str, float] | None = None) -> MetricSpec:
    """Return a catalog metric, e.g. ``builtin("sphere", {"r": 2})``."""
    name = _ALIASES.get(name, name)
    if name not in _BUILDERS:
        raise UnknownMetric(f"unknown metric {name!r}; known: {', '.join(_BUILDERS)}")
    build, defaults = _BUILDERS[name]
    merged = dict(defaults)
    for key, value in (params or {}).items():
        if key not in defaults:
            raise BadParam(f"metric {name!r} has no parameter {key!r}")
        merged[key] = value
    return build(merged)


def catalog() -> list[MetricSpec]:
    return [builtin(name, params) for name, params in CATALOG]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def compiled_guards(guards: Sequence[Guard], dim: int):
    return compile_jets([g.ast for g in guards], dim, order=0)


def check_domain(spec, point: Sequence[float]) -> np.ndarray:
    """Validate ``point`` against the guards of a metric or connection spec."""
    x = np.asarray(point, dtype=float)
    if x.shape != (spec.dim,):
        raise GeodynError(f"point has shape {x.shape}, metric {spec.name} has dimension {spec.dim}")
    if not spec.guards:
        return x
    try:
        values = spec._guards0(x)[0]
    except DomainError:
        values = None
    if values is not None and min(values) > 0.0:
        return x
    # slow path: find the first failing guard
    for guard in spec.guards:
        try:
            value = eval_scalar(guard.ast, x)
        except DomainError:
            raise OutOfDomain(x, guard.source, math.nan) from None
        if not value > 0.0:
            raise OutOfDomain(x, guard.source, value)
    return x


def in_domain(spec, point: Sequence[float]) -> bool:
    try:
        check_domain(spec, point)
    except OutOfDomain:
        return False
    return True


def metric_at(spec: MetricSpec, point: Sequence[float]) -> np.ndarray:
    x = check_domain(spec, point)
    _, index = spec._slots
    vals, _, _ = spec._jets0(x)
    return np.asarray(vals)[index]


def degeneracy_threshold(g: np.ndarray) -> float:
    n = g.shape[0]
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    return DEGENERACY_RTOL * scale ** n


def inverse_metric(g: np.ndarray) -> np.ndarray:
    """Symmetric inverse of a non-degenerate metric matrix."""
    g = np.asarray(g, dtype=float)
    det = float(np.linalg.det(g))
    threshold = degeneracy_threshold(g)
    if not abs(det) > threshold:
        raise DegenerateMetric(det, threshold)
    inv = np.linalg.inv(g)
    return 0.5 * (inv + inv.T)


def metric_jet(spec: MetricSpec, point: Sequence[float]) -> MetricJet:
    """g with its exact first and second partial derivatives at ``point``."""
    x = check_domain(spec, point)
    n = spec.dim
    _, index = spec._slots
    vals, grads, hess = spec._jets2(x)
    g = np.asarray(vals)[index]
    dg = np.asarray(grads).reshape(-1, n)[index]
    d2g = np.asarray(hess).reshape(-1, n, n)[index]
    return MetricJet(g=g, dg=dg, d2g=d2g, point=x)


def metric_jet1(spec: MetricSpec, point: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """``(g, dg)`` only; the cheap path used inside the integrators."""
    x = check_domain(spec, point)
    n = spec.dim
    _, index = spec._slots
    vals, grads, _ = spec._jets1(x)
    return np.asarray(vals)[index], np.asarray(grads).reshape(-1, n)[index]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_points(spec: MetricSpec, count: int, rng: XorShift64Star,
                  max_tries: int = 10000) -> list[np.ndarray]:
    """Rejection-sample ``count`` in-domain points from the metric's bounding box."""
    if not spec.bounds:
        raise GeodynError(f"metric {spec.name} declares no sampling bounds")
    points = []
    tries = 0
    while len(points) < count:
        tries += 1
        if tries > max_tries * max(count, 1):
            raise GeodynError(f"could not sample {count} in-domain points for {spec.name}")
        x = np.array([rng.uniform(lo, hi) for lo, hi in spec.bounds])
        if in_domain(spec, x):
            points.append(x)
    return points


def sample_vectors(n: int, count: int, rng: XorShift64Star, scale: float = 1.0) -> list[np.ndarray]:
    return [np.array([rng.uniform(-scale, scale) for _ in range(n)]) for _ in range(count)]


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def _load_schema(name: str) -> dict:
    return json.loads(resources.files("geodyn.schemas").joinpath(name).read_text())


def _index_key(key: str, arity: int, dim: int) -> tuple[int, ...]:
    try:
        idx = tuple(int(part) - 1 for part in key.split(","))
    except ValueError:
        raise SchemaError(f"bad index key {key!r}") from None
    if len(idx) != arity or any(not 0 <= i < dim for i in idx):
        raise SchemaError(f"index key {key!r} invalid for dimension {dim}")
    return idx


def load_definition(path: str | Path) -> Any:
    """Load a metric or connection file; returns a MetricSpec or CustomConnection."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return definition_from_dict(data)


def definition_from_dict(data: Mapping[str, Any]) -> Any:
    kind = data.get("schema") if isinstance(data, Mapping) else None
    if kind == METRIC_SCHEMA_ID:
        schema = _load_schema("metric.schema.json")
    elif kind == CONNECTION_SCHEMA_ID:
        schema = _load_schema("connection.schema.json")
    else:
        raise SchemaError(f"unknown or missing schema id {kind!r}")
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"schema violation at {list(exc.absolute_path)}: {exc.message}") from None
    dim = data["dim"]
    variables = data.get("variables") or [f"x{i + 1}" for i in range(dim)]
    if len(variables) != dim:
        raise SchemaError(f"{len(variables)} variable names for dimension {dim}")
    constants = data.get("constants", {})
    bounds = [tuple(b) for b in data.get("bounds", [])]
    try:
        if kind == METRIC_SCHEMA_ID:
            comps = {_index_key(k, 2, dim): v for k, v in data["components"].items()}
            return make_metric(data["name"], variables, comps, guards=data.get("guards", []),
                               signature=data.get("signature", "riemannian"), bounds=bounds,
                               constants=constants)
        from .connection import make_connection
        gamma = {_index_key(k, 3, dim): v for k, v in data["gamma"].items()}
        return make_connection(data["name"], variables, gamma, guards=data.get("guards", []),
                               bounds=bounds, constants=constants)
    except (LexError, ParseError, UnknownVariable) as exc:
        raise SchemaError(f"bad expression: {exc}") from None

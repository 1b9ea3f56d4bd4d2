"""Christoffel symbols, connection forms, torsion and covariant derivatives.

Index convention: ``gamma[k, i, j]`` is Gamma^k_ij with ``i`` the direction of
differentiation, i.e. nabla_{d_i} d_j = Gamma^k_ij d_k.  Derivatives are
stored with the derivative index last: ``dgamma[k, i, j, m]`` = d_m Gamma^k_ij.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, GeodynError, SchemaError
from .exprlang import Const, Expr, compile_jets, parse
from .metric import (Guard, MetricJet, MetricSpec, check_domain, compiled_guards, inverse_metric,
                     metric_jet, metric_jet1)


@dataclass(frozen=True)
class Christoffel:
    gamma: np.ndarray
    point: np.ndarray
    symmetric_lower: bool = True

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True, eq=False)
class CustomConnection:
    """Connection coefficients given directly as expressions, no metric needed."""

    name: str
    dim: int
    variables: tuple[str, ...]
    gamma: tuple  # gamma[k][i][j] -> Expr
    guards: tuple[Guard, ...] = ()
    bounds: tuple[tuple[float, float], ...] = ()

    @cached_property
    def _jets(self):
        flat = [self.gamma[k][i][j] for k in range(self.dim) for i in range(self.dim)
                for j in range(self.dim)]
        return compile_jets(flat, self.dim, order=1)

    @cached_property
    def _guards0(self):
        return compiled_guards(self.guards, self.dim)


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """Component expressions of a vector (or 1-form) field on a chart."""

    dim: int
    components: tuple[Expr, ...]

    @cached_property
    def _jets(self):
        return compile_jets(self.components, self.dim, order=2)


def make_connection(name: str, variables: Sequence[str], gamma: Mapping[tuple[int, int, int], str],
                    guards: Sequence[str] = (), bounds: Sequence[tuple[float, float]] = (),
                    constants: Mapping[str, float] | None = None) -> CustomConnection:
    """Zero-based ``(k, i, j)`` -> source for Gamma^k_ij; missing entries are zero."""
    dim = len(variables)
    table = {}
    for (k, i, j), src in gamma.items():
        if not all(0 <= a < dim for a in (k, i, j)):
            raise SchemaError(f"gamma index ({k + 1},{i + 1},{j + 1}) outside dimension {dim}")
        table[(k, i, j)] = parse(src, dim, variables, constants)
    zero = Const(0.0)
    coeffs = tuple(tuple(tuple(table.get((k, i, j), zero) for j in range(dim))
                         for i in range(dim)) for k in range(dim))
    if bounds and len(bounds) != dim:
        raise SchemaError(f"{len(bounds)} bounds for dimension {dim}")
    return CustomConnection(
        name=name, dim=dim, variables=tuple(variables), gamma=coeffs,
        guards=tuple(Guard(g, parse(g, dim, variables, constants)) for g in guards),
        bounds=tuple((float(a), float(b)) for a, b in bounds),
    )


def make_vector_field(sources: Sequence[str], dim: int, variables: Sequence[str] | None = None,
                      constants: Mapping[str, float] | None = None) -> VectorFieldSpec:
    if len(sources) != dim:
        raise DimensionMismatch(f"{len(sources)} components for dimension {dim}")
    return VectorFieldSpec(dim, tuple(parse(s, dim, variables, constants) for s in sources))


def reference_field(spec) -> VectorFieldSpec:
    """The fixed field used by the identity suite: v^j = sin(x^{j+1}), v^n = cos(x^1).

    On a 2-chart this is (sin x2, cos x1), e.g. (sin phi, cos theta) on the sphere.
    """
    n = spec.dim
    if n == 1:
        return make_vector_field(["cos(x1)"], 1)
    sources = [f"sin(x{j + 2})" for j in range(n - 1)] + ["cos(x1)"]
    return make_vector_field(sources, n)


def field_jet(field: VectorFieldSpec, point: Sequence[float]):
    """Return ``(v, dv, d2v)`` with ``dv[j, i]`` = d_i v^j and ``d2v[j, i, k]`` = d_i d_k v^j."""
    n = field.dim
    vals, grads, hess = field._jets(np.asarray(point, dtype=float))
    return (np.asarray(vals), np.asarray(grads).reshape(n, n),
            np.asarray(hess).reshape(n, n, n))


# ---------------------------------------------------------------------------
# Christoffel symbols
# ---------------------------------------------------------------------------

def _lowered(dg: np.ndarray) -> np.ndarray:
    """Gamma_lij = (d_i g_jl + d_j g_il - d_l g_ij) / 2, exactly symmetric in (i, j)."""
    # dg[a, b, c] = d_c g_ab
    first = dg.transpose(1, 2, 0) + dg.transpose(1, 0, 2)   # [l, i, j]: d_i g_jl + d_j g_il
    return 0.5 * (first - dg.transpose(2, 0, 1))


def _symmetrize(gamma: np.ndarray) -> np.ndarray:
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel_from_derivatives(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Gamma^k_ij = g^{kl} Gamma_lij."""
    return _symmetrize(np.einsum("kl,lij->kij", ginv, _lowered(dg)))


def christoffel(spec: MetricSpec, point: Sequence[float]) -> Christoffel:
    """Levi-Civita connection coefficients of ``spec`` at ``point``."""
    g, dg = metric_jet1(spec, point)
    gamma = christoffel_from_derivatives(inverse_metric(g), dg)
    return Christoffel(gamma, np.asarray(point, dtype=float), True)


@dataclass(frozen=True)
class ConnectionJet:
    """Gamma with its exact first derivatives, plus the metric data it came from."""

    gamma: np.ndarray
    dgamma: np.ndarray
    point: np.ndarray
    symmetric_lower: bool
    jet: MetricJet | None = None
    ginv: np.ndarray | None = None

    @property
    def christoffel(self) -> Christoffel:
        return Christoffel(self.gamma, self.point, self.symmetric_lower)


def christoffel_jet(spec: MetricSpec, point: Sequence[float]) -> ConnectionJet:
    """Gamma and d Gamma by the chain rule on the exact metric jet."""
    jet = metric_jet(spec, point)
    ginv = inverse_metric(jet.g)
    low = _lowered(jet.dg)
    gamma = _symmetrize(np.einsum("kl,lij->kij", ginv, low))
    # d_m L_lij from d2g[a, b, c, m] = d_c d_m g_ab
    d2 = jet.d2g
    dlow = 0.5 * (d2.transpose(1, 2, 0, 3) + d2.transpose(1, 0, 2, 3) - d2.transpose(2, 0, 1, 3))
    # d_m g^{kl} = -g^{ka} d_m g_ab g^{bl}
    dginv = -np.einsum("ka,abm,bl->klm", ginv, jet.dg, ginv)
    dgamma = np.einsum("klm,lij->kijm", dginv, low) + np.einsum("kl,lijm->kijm", ginv, dlow)
    dgamma = 0.5 * (dgamma + dgamma.transpose(0, 2, 1, 3))
    return ConnectionJet(gamma, dgamma, jet.point, True, jet, ginv)


def connection_jet(conn: CustomConnection, point: Sequence[float]) -> ConnectionJet:
    """Coefficients of a custom connection and their exact first derivatives."""
    x = check_domain(conn, point)
    n = conn.dim
    vals, grads, _ = conn._jets(x)
    gamma = np.asarray(vals).reshape(n, n, n)
    dgamma = np.asarray(grads).reshape(n, n, n, n)
    return ConnectionJet(gamma, dgamma, x, False)


def coefficients(source, point: Sequence[float]) -> Christoffel:
    """Christoffel data from either a metric or a custom connection."""
    if isinstance(source, CustomConnection):
        return connection_jet(source, point).christoffel
    return christoffel(source, point)


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def connection_form(chr: Christoffel, direction: Sequence[float]) -> np.ndarray:
    """omega_i^j(X) = Gamma^j_ik X^k, returned as ``out[i, j]``."""
    x = np.asarray(direction, dtype=float)
    if x.shape != (chr.dim,):
        raise DimensionMismatch(f"direction has shape {x.shape}, connection dimension {chr.dim}")
    return np.einsum("jik,k->ij", chr.gamma, x)


def torsion(source) -> np.ndarray:
    """T^k_ij = Gamma^k_ij - Gamma^k_ji for a Christoffel or raw (n, n, n) array."""
    gamma = source.gamma if isinstance(source, (Christoffel, ConnectionJet)) else np.asarray(source)
    return gamma - gamma.transpose(0, 2, 1)


def compatibility_residual(spec: MetricSpec, point: Sequence[float],
                           connection: CustomConnection | None = None) -> np.ndarray:
    """``res[k, i, j]`` = d_k g_ij - g_lj Gamma^l_ki - g_il Gamma^l_kj.

    Vanishes for the Levi-Civita connection; pass ``connection`` to test any
    other coefficients against the same metric.
    """
    g, dg = metric_jet1(spec, point)
    if connection is None:
        gamma = christoffel_from_derivatives(inverse_metric(g), dg)
    else:
        if connection.dim != spec.dim:
            raise DimensionMismatch("connection and metric dimensions differ")
        gamma = connection_jet(connection, point).gamma
    return (dg.transpose(2, 0, 1)
            - np.einsum("lj,lki->kij", g, gamma)
            - np.einsum("il,lkj->kij", g, gamma))


def covariant_derivative_02(tensor: np.ndarray, dtensor: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """nabla_k T_ij for a (0,2) tensor with ``dtensor[i, j, k]`` = d_k T_ij; returns ``[k, i, j]``."""
    return (dtensor.transpose(2, 0, 1)
            - np.einsum("lki,lj->kij", gamma, tensor)
            - np.einsum("lkj,il->kij", gamma, tensor))


def metric_covariant_derivative(spec: MetricSpec, point: Sequence[float]) -> np.ndarray:
    g, dg = metric_jet1(spec, point)
    return covariant_derivative_02(g, dg, christoffel_from_derivatives(inverse_metric(g), dg))


def _require_metric(source):
    if isinstance(source, CustomConnection):
        raise GeodynError("operation needs a metric; custom connections are not accepted")
    return source


def covariant_derivative_vector(field: VectorFieldSpec, spec: MetricSpec,
                                point: Sequence[float]) -> np.ndarray:
    """``out[i, j]`` = nabla_i v^j = d_i v^j + Gamma^j_ik v^k."""
    _require_metric(spec)
    if field.dim != spec.dim:
        raise DimensionMismatch("field and metric dimensions differ")
    gamma = christoffel(spec, point).gamma
    v, dv, _ = field_jet(field, point)
    return dv.T + np.einsum("jik,k->ij", gamma, v)


def covariant_derivative_oneform(field: VectorFieldSpec, spec: MetricSpec,
                                 point: Sequence[float]) -> np.ndarray:
    """``out[i, j]`` = nabla_i v_j = d_i v_j - Gamma^k_ij v_k."""
    _require_metric(spec)
    if field.dim != spec.dim:
        raise DimensionMismatch("field and metric dimensions differ")
    gamma = christoffel(spec, point).gamma
    w, dw, _ = field_jet(field, point)
    return dw.T - np.einsum("kij,k->ij", gamma, w)


def lower_field(field: VectorFieldSpec, spec: MetricSpec) -> VectorFieldSpec:
    """The 1-form v_j = g_jk v^k as a field (expression trees are combined, not evaluated)."""
    from .exprlang import BinOp
    n = spec.dim
    comps = []
    for j in range(n):
        acc: Expr | None = None
        for k in range(n):
            term = BinOp("*", spec.components[j][k], field.components[k])
            acc = term if acc is None else BinOp("+", acc, term)
        comps.append(acc)
    return VectorFieldSpec(n, tuple(comps))

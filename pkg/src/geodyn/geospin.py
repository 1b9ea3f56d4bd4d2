"""The geospin matrix W_i^j = Gamma^j_ik v^k and the identities it satisfies.

Three index placements are kept side by side:

* ``w_mixed[i, j]`` = W_i^j = Gamma^j_ik v^k
* ``w_lower[i, k]`` = W_ik = Gamma^j_ik v_j (symmetric for a torsion-free connection)
* ``w_star[i, j]``  = W*_ij = g_ki W_j^k

As a linear map on column vectors the geodesic system reads dv/dt = -W v
with ``W = w_mixed.T``, because (W v)^k = W_i^k v^i = Gamma^k_ij v^i v^j.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .connection import (VectorFieldSpec, christoffel_from_derivatives, field_jet,
                         lower_field)
from .errors import DimensionMismatch
from .metric import MetricSpec, check_domain, inverse_metric, metric_jet1


@dataclass(frozen=True)
class GeospinMatrix:
    w_mixed: np.ndarray
    w_lower: np.ndarray
    w_star: np.ndarray
    point: np.ndarray
    v: np.ndarray
    v_lower: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray

    @property
    def dim(self) -> int:
        return self.v.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """W acting on column vectors: ``(matrix @ v)[k]`` = W_i^k v^i."""
        return self.w_mixed.T


@dataclass(frozen=True)
class DiagonalElements:
    """Diagonal of W_i^j by two routes, and its trace by two routes."""

    direct: np.ndarray        # W_k^k read off w_mixed
    via_star: np.ndarray      # g^{kp} W*_pk, no sum on k
    trace_metric: float       # (1/2) g^{rp} d_i g_rp v^i
    trace_star: float         # (1/2)(g^{rp} W*_rp + g^{rp} W*_pr)

    def residual(self) -> float:
        return max(float(np.max(np.abs(self.direct - self.via_star))),
                   abs(self.trace_metric - self.trace_star),
                   abs(self.trace_metric - float(np.sum(self.direct))))


def geospin_from_jets(g: np.ndarray, dg: np.ndarray, point: np.ndarray, v: np.ndarray,
                      ginv: np.ndarray | None = None) -> GeospinMatrix:
    if ginv is None:
        ginv = inverse_metric(g)
    gamma = christoffel_from_derivatives(ginv, dg)
    v = np.asarray(v, dtype=float)
    v_lower = g @ v
    w_mixed = np.einsum("jik,k->ij", gamma, v)
    w_lower = np.einsum("jik,j->ik", gamma, v_lower)
    w_star = np.einsum("ki,jk->ij", g, w_mixed)
    return GeospinMatrix(w_mixed, w_lower, w_star, point, v, v_lower, g, ginv, dg, gamma)


def geospin(spec: MetricSpec, point: Sequence[float], v: Sequence[float]) -> GeospinMatrix:
    """All three geospin variants from one Christoffel evaluation."""
    x = check_domain(spec, point)
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.dim,):
        raise DimensionMismatch(f"velocity has shape {v.shape}, metric dimension {spec.dim}")
    g, dg = metric_jet1(spec, x)
    return geospin_from_jets(g, dg, x, v)


def diagonal_elements(gm: GeospinMatrix, ginv: np.ndarray | None = None) -> DiagonalElements:
    ginv = gm.ginv if ginv is None else ginv
    direct = np.diagonal(gm.w_mixed).copy()
    via_star = np.einsum("kp,pk->k", ginv, gm.w_star)
    trace_metric = 0.5 * float(np.einsum("rp,rpi,i->", ginv, gm.dg, gm.v))
    trace_star = 0.5 * float(np.einsum("rp,rp->", ginv, gm.w_star) + np.einsum("rp,pr->", ginv, gm.w_star))
    return DiagonalElements(direct, via_star, trace_metric, trace_star)


@dataclass(frozen=True)
class Acceleration:
    q: np.ndarray             # q^k = W_i^k v^i (equals Gamma^k_ij v^i v^j)
    Q: float                  # q^k v_k
    Q_oracle: float           # (1/2) v^l v^j v^i d_i g_jl
    q_transpose: np.ndarray   # W_k^i v^i, the other contraction

    def residual(self) -> float:
        return abs(self.Q - self.Q_oracle)


def geometric_acceleration(gm: GeospinMatrix) -> Acceleration:
    q = np.einsum("ik,i->k", gm.w_mixed, gm.v)
    Q = float(q @ gm.v_lower)
    v = gm.v
    oracle = 0.5 * float(np.einsum("jli,l,j,i->", gm.dg, v, v, v))
    return Acceleration(q, Q, oracle, gm.w_mixed @ v)


def lowered_symmetry_residual(gm: GeospinMatrix) -> float:
    return float(np.max(np.abs(gm.w_lower - gm.w_lower.T)))


def star_consistency_residual(gm: GeospinMatrix) -> float:
    """W*_ij against the route through w_lower: W*_ij = g_ki Gamma^k_jl v^l."""
    lowered_gamma = np.einsum("ki,kjl->ijl", gm.g, gm.gamma)
    return float(np.max(np.abs(gm.w_star - lowered_gamma @ gm.v)))


def metric_rate_split_residual(gm: GeospinMatrix, dg: np.ndarray | None = None) -> float:
    """max over (i, j) of |d_k g_ij v^k - (W*_ji + W*_ij)|."""
    dg = gm.dg if dg is None else dg
    lhs = dg @ gm.v
    return float(np.max(np.abs(lhs - (gm.w_star + gm.w_star.T))))


def identity_contraction_residual(gm: GeospinMatrix, dg: np.ndarray | None = None) -> float:
    """max over i of |2 W_i^k v_k - v^l v^j d_i g_jl|."""
    dg = gm.dg if dg is None else dg
    lhs = 2.0 * gm.w_mixed @ gm.v_lower
    rhs = np.einsum("jli,l,j->i", dg, gm.v, gm.v)
    return float(np.max(np.abs(lhs - rhs)))


def covariant_rewrite_residual(field: VectorFieldSpec, spec: MetricSpec, point: Sequence[float],
                               kind: str = "vector") -> float:
    """Compare nabla_k v^j assembled from Gamma with d_k v^j + W_k^j (W from the field value).

    ``kind="oneform"`` checks nabla_k v_j = d_k v_j - W_kj on the lowered field instead.
    """
    if field.dim != spec.dim:
        raise DimensionMismatch("field and metric dimensions differ")
    x = check_domain(spec, point)
    g, dg = metric_jet1(spec, x)
    ginv = inverse_metric(g)
    gamma = christoffel_from_derivatives(ginv, dg)
    n = spec.dim
    if kind == "vector":
        v, dv, _ = field_jet(field, x)
        assembled = np.empty((n, n))
        for k in range(n):
            for j in range(n):
                assembled[k, j] = dv[j, k] + sum(gamma[j, k, i] * v[i] for i in range(n))
        gm = geospin_from_jets(g, dg, x, v, ginv)
        rewritten = dv.T + gm.w_mixed
    elif kind == "oneform":
        w, dw, _ = field_jet(lower_field(field, spec), x)
        assembled = np.empty((n, n))
        for k in range(n):
            for j in range(n):
                assembled[k, j] = dw[j, k] - sum(gamma[i, k, j] * w[i] for i in range(n))
        w_lower = np.einsum("jik,j->ik", gamma, w)  # W_kj built from the covector itself
        rewritten = dw.T - w_lower
    else:
        raise ValueError(f"kind must be 'vector' or 'oneform', not {kind!r}")
    return float(np.max(np.abs(assembled - rewritten)))

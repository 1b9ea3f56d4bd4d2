"""Riemann, Ricci and scalar curvature, and the Bianchi/commutator residuals.

``riemann[k, i, j, l]`` is R^k_ijl = d_i Gamma^k_jl - d_j Gamma^k_il
+ Gamma^k_ip Gamma^p_jl - Gamma^k_jp Gamma^p_il, the k-component of
R(d_i, d_j) d_l.  It is antisymmetric in (i, j).  The lowered tensor is
R_ijkl = g_kp R^p_ijl.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .connection import VectorFieldSpec, christoffel_jet, field_jet
from .errors import DimensionMismatch, OutOfDomain, StencilOutOfDomain
from .metric import MetricSpec, check_domain

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class CurvaturePack:
    riemann_mixed: np.ndarray
    riemann_low: np.ndarray
    ricci: np.ndarray
    ricci_mixed: np.ndarray
    scalar: float
    det_ricci_mixed: float
    trace_ricci_mixed: float
    gamma: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    point: np.ndarray


def riemann_from_connection(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """R^k_ijl from coefficients and ``dgamma[k, i, j, m]`` = d_m Gamma^k_ij."""
    half = dgamma.transpose(0, 3, 1, 2) + np.einsum("kip,pjl->kijl", gamma, gamma)
    return half - half.transpose(0, 2, 1, 3)


def riemann_mixed(spec: MetricSpec, point: Sequence[float]) -> np.ndarray:
    cj = christoffel_jet(spec, point)
    return riemann_from_connection(cj.gamma, cj.dgamma)


def lower_riemann(riemann: np.ndarray, g: np.ndarray) -> np.ndarray:
    """R_ijkl = g_kp R^p_ijl."""
    return np.einsum("kp,pijl->ijkl", g, riemann)


def ricci_and_scalar(riemann_low: np.ndarray, ginv: np.ndarray):
    """Return ``(R_ik, R_i^j, R, det R_i^j, tr R_i^j)`` with R_ik = g^{jl} R_ijkl."""
    ricci = np.einsum("jl,ijkl->ik", ginv, riemann_low)
    mixed = np.einsum("jk,ik->ij", ginv, ricci)
    scalar = float(np.einsum("jk,jk->", ginv, ricci))
    return ricci, mixed, scalar, float(np.linalg.det(mixed)), float(np.trace(mixed))


def curvature_pack(spec: MetricSpec, point: Sequence[float]) -> CurvaturePack:
    cj = christoffel_jet(spec, point)
    riem = riemann_from_connection(cj.gamma, cj.dgamma)
    low = lower_riemann(riem, cj.jet.g)
    ricci, mixed, scalar, det, trace = ricci_and_scalar(low, cj.ginv)
    return CurvaturePack(riem, low, ricci, mixed, scalar, det, trace, cj.gamma, cj.jet.g,
                         cj.ginv, cj.point)


def riemann_symmetry_residuals(riemann_low: np.ndarray) -> dict[str, float]:
    """Max deviations from R_ijkl = -R_jikl = -R_ijlk = R_klij."""
    r = riemann_low
    return {
        "antisym_ij": float(np.max(np.abs(r + r.transpose(1, 0, 2, 3)))),
        "antisym_kl": float(np.max(np.abs(r + r.transpose(0, 1, 3, 2)))),
        "pair_symmetry": float(np.max(np.abs(r - r.transpose(2, 3, 0, 1)))),
    }


def first_bianchi_residual(riemann: np.ndarray) -> float:
    """max |R^k_ijl + R^k_jli + R^k_lij|."""
    cyc = riemann + riemann.transpose(0, 3, 1, 2) + riemann.transpose(0, 2, 3, 1)
    return float(np.max(np.abs(cyc)))


def _shifted(spec: MetricSpec, x: np.ndarray, m: int, h: float) -> np.ndarray:
    y = x.copy()
    y[m] += h
    try:
        check_domain(spec, y)
    except OutOfDomain as exc:
        raise StencilOutOfDomain(x, m, h, exc) from None
    return y


def fd_step(x: np.ndarray, m: int) -> float:
    return FD_STEP * max(1.0, abs(float(x[m])))


def riemann_gradient(spec: MetricSpec, point: Sequence[float]) -> np.ndarray:
    """``out[h, i, j, l, m]`` = d_m R^h_ijl by central differences of the exact tensor."""
    x = check_domain(spec, point)
    n = spec.dim
    out = np.empty((n,) * 5)
    for m in range(n):
        h = fd_step(x, m)
        plus = _shifted(spec, x, m, h)
        minus = _shifted(spec, x, m, -h)
        out[..., m] = (riemann_mixed(spec, plus) - riemann_mixed(spec, minus)) / (plus[m] - minus[m])
    return out


def covariant_riemann_gradient(spec: MetricSpec, point: Sequence[float]) -> np.ndarray:
    """``out[h, i, j, l, m]`` = nabla_m R^h_ijl."""
    d = riemann_gradient(spec, point)
    cj = christoffel_jet(spec, point)
    gam = cj.gamma
    r = riemann_from_connection(gam, cj.dgamma)
    return (d
            + np.einsum("hmp,pijl->hijlm", gam, r)
            - np.einsum("pmi,hpjl->hijlm", gam, r)
            - np.einsum("pmj,hipl->hijlm", gam, r)
            - np.einsum("pml,hijp->hijlm", gam, r))


def second_bianchi_residual(spec: MetricSpec, point: Sequence[float]) -> float:
    """max |nabla_m R^h_ijl + nabla_i R^h_jml + nabla_j R^h_mil| (cyclic in m, i, j)."""
    d = covariant_riemann_gradient(spec, point)
    cyc = d + np.einsum("hjmli->hijlm", d) + np.einsum("hmilj->hijlm", d)
    return float(np.max(np.abs(cyc)))


def second_covariant_derivative(field: VectorFieldSpec, spec: MetricSpec,
                                point: Sequence[float]) -> np.ndarray:
    """``out[i, j, l]`` = nabla_i nabla_j v^l from the field's jets and exact d Gamma."""
    if field.dim != spec.dim:
        raise DimensionMismatch("field and metric dimensions differ")
    cj = christoffel_jet(spec, point)
    gam, dgam = cj.gamma, cj.dgamma
    v, dv, d2v = field_jet(field, cj.point)
    first = dv.T + np.einsum("ljk,k->jl", gam, v)              # nabla_j v^l as [j, l]
    dfirst = (d2v.transpose(1, 2, 0)                            # d_i d_j v^l
              + np.einsum("ljki,k->ijl", dgam, v)
              + np.einsum("ljk,ki->ijl", gam, dv))
    return (dfirst
            - np.einsum("pij,pl->ijl", gam, first)
            + np.einsum("lip,jp->ijl", gam, first))


def commutator_curvature_residual(field: VectorFieldSpec, spec: MetricSpec,
                                  point: Sequence[float]) -> float:
    """max |nabla_i nabla_j v^l - nabla_j nabla_i v^l - R^l_ijk v^k|."""
    nn = second_covariant_derivative(field, spec, point)
    lhs = nn - nn.transpose(1, 0, 2)
    v, _, _ = field_jet(field, np.asarray(point, dtype=float))
    rhs = np.einsum("lijk,k->ijl", riemann_mixed(spec, point), v)
    return float(np.max(np.abs(lhs - rhs)))

"""The full identity suite run at seeded sample points, one report per metric or connection."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from . import cartan, curvature
from .cartan import ReportEntry, StructuralReport
from .connection import CustomConnection, compatibility_residual, reference_field
from .errors import StencilOutOfDomain
from .flow import GeodesicState, geodesic_rhs, geodesic_rhs_quadratic
from .geospin import (covariant_rewrite_residual, diagonal_elements, geometric_acceleration,
                      geospin, identity_contraction_residual, metric_rate_split_residual,
                      lowered_symmetry_residual, star_consistency_residual)
from .metric import MetricSpec, sample_points, sample_vectors
from .rng import XorShift64Star

DEFAULT_TOLERANCES: dict[str, float] = {
    "compat": 1e-11,
    "riemann": 1e-10,
    "bianchi1": 1e-10,
    "bianchi2": 1e-6,
    "commutator": 1e-8,
    "geospin-sym": 1e-12,
    "geospin": 1e-11,
    "rewrite": 1e-12,
    "rhs": 1e-13,
    "torsion-form": 1e-12,
    "curvature-form": 1e-9,
    "bianchi-form": 1e-5,
}


@dataclass
class _Acc:
    """Running max of one identity over the sample points."""

    name: str
    interpretation: str
    tol_key: str
    notes: str = ""
    worst: float = 0.0
    count: int = 0
    skipped: int = 0

    def add(self, value: float):
        self.worst = max(self.worst, float(value))
        self.count += 1

    def entry(self, tolerances: Mapping[str, float]) -> ReportEntry:
        notes = self.notes
        if self.skipped:
            notes = (notes + "; " if notes else "") + f"{self.skipped} stencil(s) left the chart, skipped"
        return ReportEntry(self.name, self.interpretation, self.worst if self.count else None, True,
                           self.count, tolerances[self.tol_key], notes,
                           status="" if self.count else "skipped")


def verify_metric(spec: MetricSpec, samples: int = 100, seed: int = 0,
                  tolerances: Mapping[str, float] | None = None) -> StructuralReport:
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    rng = XorShift64Star(seed)
    points = sample_points(spec, samples, rng)
    velocities = sample_vectors(spec.dim, samples, rng)
    field = reference_field(spec)

    acc = {k: _Acc(*args) for k, args in {
        "compat": ("metric compatibility d_k g_ij - g_lj Gamma^l_ki - g_il Gamma^l_kj", "tensor", "compat"),
        "riem_ij": ("Riemann antisymmetry R_ijkl = -R_jikl", "tensor", "riemann"),
        "riem_kl": ("Riemann antisymmetry R_ijkl = -R_ijlk", "tensor", "riemann"),
        "riem_pair": ("Riemann pair symmetry R_ijkl = R_klij", "tensor", "riemann"),
        "bianchi1": ("first Bianchi identity", "tensor", "bianchi1"),
        "bianchi2": ("second Bianchi identity (finite-difference nabla R)", "tensor", "bianchi2"),
        "commutator": ("commutator nabla_i nabla_j v - nabla_j nabla_i v = R v", "tensor", "commutator",
                       "fixed field v^j = sin(x^{j+1}), v^n = cos(x^1)"),
        "w_sym": ("geospin lowered symmetry W_ij = W_ji", "tensor", "geospin-sym"),
        "w_star": ("geospin W*_ij = g_ki W_j^k consistency", "tensor", "geospin-sym"),
        "rate_split": ("geospin d_k g_ij v^k = W*_ji + W*_ij", "tensor", "geospin"),
        "contraction": ("geospin 2 W_i^k v_k = v^l v^j d_i g_jl", "tensor", "geospin"),
        "diagonal": ("geospin diagonal elements, two routes", "tensor", "geospin"),
        "Q": ("invariant Q = q^k v_k, two routes", "tensor", "geospin"),
        "rewrite_v": ("covariant derivative rewrite nabla_k v^j = d_k v^j + W_k^j", "tensor", "rewrite"),
        "rewrite_w": ("covariant derivative rewrite nabla_k v_j = d_k v_j - W_kj", "tensor", "rewrite"),
        "rhs": ("geodesic right-hand side -W v = -Gamma v v", "tensor", "rhs"),
        "torsion_form": ("torsion structure equation (form level)", "form-level", "torsion-form"),
        "curvature_form": ("curvature structure equation (form level)", "form-level", "curvature-form"),
        "bianchi_form_t": ("torsion Bianchi 3-form identity", "form-level", "bianchi-form"),
        "bianchi_form_c": ("curvature Bianchi 3-form identity", "form-level", "bianchi-form"),
    }.items()}

    vacuous = spec.dim < 3
    for x, v in zip(points, velocities):
        acc["compat"].add(np.max(np.abs(compatibility_residual(spec, x))))
        pack = curvature.curvature_pack(spec, x)
        sym = curvature.riemann_symmetry_residuals(pack.riemann_low)
        acc["riem_ij"].add(sym["antisym_ij"])
        acc["riem_kl"].add(sym["antisym_kl"])
        acc["riem_pair"].add(sym["pair_symmetry"])
        acc["bianchi1"].add(curvature.first_bianchi_residual(pack.riemann_mixed))
        try:
            acc["bianchi2"].add(curvature.second_bianchi_residual(spec, x))
        except StencilOutOfDomain:
            acc["bianchi2"].skipped += 1
        acc["commutator"].add(curvature.commutator_curvature_residual(field, spec, x))

        gm = geospin(spec, x, v)
        acc["w_sym"].add(lowered_symmetry_residual(gm))
        acc["w_star"].add(star_consistency_residual(gm))
        acc["rate_split"].add(metric_rate_split_residual(gm))
        acc["contraction"].add(identity_contraction_residual(gm))
        acc["diagonal"].add(diagonal_elements(gm).residual())
        acc["Q"].add(geometric_acceleration(gm).residual())
        acc["rewrite_v"].add(covariant_rewrite_residual(field, spec, x, "vector"))
        acc["rewrite_w"].add(covariant_rewrite_residual(field, spec, x, "oneform"))
        state = GeodesicState(0.0, x, v)
        acc["rhs"].add(np.max(np.abs(geodesic_rhs(spec, state)[1] - geodesic_rhs_quadratic(spec, state)[1])))

        _form_checks(spec, x, acc, vacuous)

    entries = [a.entry(tol) for a in acc.values() if not (vacuous and a.name.endswith("3-form identity"))]
    if vacuous:
        entries += _vacuous_entries(len(points))
    return StructuralReport(spec.describe(), entries, {"samples": len(points), "seed": seed,
                                                        "kind": "metric", "dim": spec.dim})


def _form_checks(source, x, acc, vacuous: bool):
    frame = cartan.form_frame(source, x)
    acc["torsion_form"].add(cartan.max_over_pairs(cartan.torsion_form_check, frame))
    acc["curvature_form"].add(cartan.max_over_pairs(cartan.curvature_form_check, frame))
    if not vacuous:
        try:
            res = cartan.bianchi_form_check(source, x)
        except StencilOutOfDomain:
            acc["bianchi_form_t"].skipped += 1
            acc["bianchi_form_c"].skipped += 1
        else:
            acc["bianchi_form_t"].add(res.torsion_residual)
            acc["bianchi_form_c"].add(res.curvature_residual)


def _vacuous_entries(count: int) -> list[ReportEntry]:
    return [ReportEntry(name, "form-level", None, False, count, None, cartan.VACUOUS_NOTE, status="vacuous")
            for name in ("torsion Bianchi 3-form identity", "curvature Bianchi 3-form identity")]


METRIC_ONLY_NOTICE = "custom connection: metric compatibility, Riemann-vs-metric and geospin checks skipped"


def verify_connection(conn: CustomConnection, samples: int = 100, seed: int = 0,
                      tolerances: Mapping[str, float] | None = None) -> StructuralReport:
    """Form-level checks for a connection given without a metric."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    rng = XorShift64Star(seed)
    points = sample_points(conn, samples, rng)
    acc = {
        "torsion_form": _Acc("torsion structure equation (form level)", "form-level", "torsion-form"),
        "curvature_form": _Acc("curvature structure equation (form level)", "form-level", "curvature-form"),
        "bianchi_form_t": _Acc("torsion Bianchi 3-form identity", "form-level", "bianchi-form"),
        "bianchi_form_c": _Acc("curvature Bianchi 3-form identity", "form-level", "bianchi-form"),
    }
    vacuous = conn.dim < 3
    max_torsion = 0.0
    for x in points:
        frame = cartan.form_frame(conn, x)
        max_torsion = max(max_torsion, float(np.max(np.abs(frame.torsion))))
        _form_checks(conn, x, acc, vacuous)
    entries = [a.entry(tol) for a in acc.values() if not (vacuous and a.name.endswith("3-form identity"))]
    if vacuous:
        entries += _vacuous_entries(len(points))
    entries.append(ReportEntry("metric-dependent identities", "tensor", None, False, len(points), None,
                               METRIC_ONLY_NOTICE, status="skipped"))
    entries.append(ReportEntry("torsion magnitude max |T^k_ij|", "tensor", max_torsion, False, len(points)))
    return StructuralReport(conn.name, entries, {"samples": len(points), "seed": seed,
                                                  "kind": "connection", "dim": conn.dim,
                                                  "notice": METRIC_ONLY_NOTICE})


def verify(source, samples: int = 100, seed: int = 0,
           tolerances: Mapping[str, float] | None = None) -> StructuralReport:
    run: Callable = verify_connection if isinstance(source, CustomConnection) else verify_metric
    return run(source, samples, seed, tolerances)

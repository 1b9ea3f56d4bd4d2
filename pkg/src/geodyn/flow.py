"""Geodesic integration as the first-order system dx/dt = v, dv/dt = -W(x, v) v."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .connection import christoffel_from_derivatives
from .errors import (BadParam, DegenerateMetric, DomainError, DomainExit, MaxStepsExceeded,
                     OutOfDomain)
from .metric import MetricSpec, check_domain, inverse_metric, metric_jet1

# errors that mean "the trajectory has left the chart"
_EXIT_ERRORS = (OutOfDomain, DegenerateMetric, DomainError)

# Fehlberg 4(5) tableau
_RKF_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_RKF_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_RKF_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)


@dataclass(frozen=True)
class GeodesicState:
    t: float
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    dt: float = 1e-3
    t_end: float = 1.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_steps: int = 1_000_000
    on_domain_exit: str = "stop"  # or "raise"

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise BadParam(f"unknown method {self.method!r}; use rk4 or rk45")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise BadParam("dt must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise BadParam("tolerances must be positive")
        if not math.isfinite(self.t_end) or self.t_end < 0:
            raise BadParam("t_end must be finite and non-negative")
        if self.max_steps < 1:
            raise BadParam("max_steps must be at least 1")
        if self.on_domain_exit not in ("stop", "raise"):
            raise BadParam("on_domain_exit must be 'stop' or 'raise'")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    speed2: np.ndarray
    Q: np.ndarray
    status: str = "completed"          # or "domain_exit"
    exit_reason: str = ""
    method: str = "rk4"
    accepted_steps: int = 0
    rejected_steps: int = 0
    rhs_evaluations: int = 0
    metric: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(float(self.t[i]), self.x[i].copy(), self.v[i].copy())

    @property
    def final(self) -> GeodesicState:
        return self.state(-1)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def _gamma(spec: MetricSpec, x: np.ndarray):
    g, dg = metric_jet1(spec, x)
    return g, dg, christoffel_from_derivatives(inverse_metric(g), dg)


def geodesic_rhs(spec: MetricSpec, state: GeodesicState) -> tuple[np.ndarray, np.ndarray]:
    """(dx/dt, dv/dt) = (v, -W v) with W^k_j = Gamma^k_jl v^l.

    W is formed with its upper index lowered, W_lj = Gamma_ljk v^k, and raised by
    a linear solve, which avoids building g^{-1} and the full Gamma on every call.
    """
    v = np.asarray(state.v, dtype=float)
    g, dg = metric_jet1(spec, state.x)
    a = dg @ v                              # a[l, j] = d_k g_lj v^k
    b = np.tensordot(v, dg, axes=(0, 0))    # b[l, j] = d_j g_kl v^k
    w_low = 0.5 * (b + a - b.T)
    try:
        return v.copy(), -np.linalg.solve(g, w_low @ v)
    except np.linalg.LinAlgError:
        raise DegenerateMetric(float(np.linalg.det(g)), 0.0) from None


def geodesic_rhs_quadratic(spec: MetricSpec, state: GeodesicState) -> tuple[np.ndarray, np.ndarray]:
    """Same system assembled as -Gamma^k_ij v^i v^j."""
    v = np.asarray(state.v, dtype=float)
    _, _, gamma = _gamma(spec, state.x)
    return v.copy(), -np.einsum("kij,i,j->k", gamma, v, v)


def speed_and_Q(spec: MetricSpec, x: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """g(v, v) and Q = q^k v_k = (1/2) d_i g_jl v^i v^j v^l."""
    g, dg = metric_jet1(spec, x)
    return float(v @ g @ v), 0.5 * float(np.einsum("jli,l,j,i->", dg, v, v, v))


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

RHS = Callable[[MetricSpec, GeodesicState], tuple[np.ndarray, np.ndarray]]


class _Recorder:
    def __init__(self, spec: MetricSpec, n: int):
        self.spec = spec
        self.n = n
        self.rows: list[tuple[float, np.ndarray, np.ndarray, float, float]] = []

    def add(self, t: float, y: np.ndarray):
        x, v = y[: self.n], y[self.n:]
        s2, q = speed_and_Q(self.spec, x, v)
        self.rows.append((t, x.copy(), v.copy(), s2, q))

    def build(self, **kw) -> Trajectory:
        t = np.array([r[0] for r in self.rows])
        x = np.array([r[1] for r in self.rows]).reshape(len(self.rows), self.n)
        v = np.array([r[2] for r in self.rows]).reshape(len(self.rows), self.n)
        return Trajectory(t, x, v, np.array([r[3] for r in self.rows]),
                          np.array([r[4] for r in self.rows]), **kw)


def integrate(spec: MetricSpec, state0: GeodesicState, config: IntegratorConfig,
              rhs: RHS | None = None) -> Trajectory:
    """Integrate from ``state0`` to ``state0.t + config.t_end``.

    Leaving the chart ends the trajectory with ``status="domain_exit"`` and the
    last valid state retained, unless ``config.on_domain_exit == "raise"``.
    ``rhs`` replaces :func:`geodesic_rhs` (used for negative controls).
    """
    rhs = rhs or geodesic_rhs
    n = spec.dim
    x0 = check_domain(spec, state0.x)
    v0 = np.asarray(state0.v, dtype=float)
    if v0.shape != (n,):
        raise BadParam(f"v0 has {v0.size} components, metric dimension is {n}")
    evals = 0

    def f(t: float, y: np.ndarray) -> np.ndarray:
        nonlocal evals
        evals += 1
        dx, dv = rhs(spec, GeodesicState(t, y[:n], y[n:]))
        return np.concatenate([dx, dv])

    rec = _Recorder(spec, n)
    y = np.concatenate([x0, v0])
    t0 = float(state0.t)
    t = t0
    t_stop = t0 + config.t_end
    rec.add(t, y)
    accepted = rejected = 0
    status, reason = "completed", ""
    h = config.dt
    try:
        if config.method == "rk4":
            count = max(1, math.ceil(config.t_end / config.dt - 1e-9)) if config.t_end > 0 else 0
            for i in range(count):
                if accepted >= config.max_steps:
                    raise MaxStepsExceeded(config.max_steps, t)
                t_next = t_stop if i == count - 1 else t0 + (i + 1) * config.dt
                y = _rk4_step(f, t, y, t_next - t)
                rec.add(t_next, y)  # raises if the new point left the chart
                t = t_next
                accepted += 1
        else:
            while t < t_stop:
                if accepted + rejected >= config.max_steps:
                    raise MaxStepsExceeded(config.max_steps, t)
                h = min(h, t_stop - t)
                y_new, err = _rkf45_step(f, t, y, h, config)
                if err <= 1.0:
                    t_new = t_stop if t_stop - (t + h) <= 1e-14 * max(1.0, abs(t_stop)) else t + h
                    rec.add(t_new, y_new)
                    t, y = t_new, y_new
                    accepted += 1
                else:
                    rejected += 1
                factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h = h * factor
    except _EXIT_ERRORS as exc:
        status, reason = "domain_exit", str(exc)
        if config.on_domain_exit == "raise":
            traj = rec.build(status=status, exit_reason=reason, method=config.method,
                             accepted_steps=accepted, rejected_steps=rejected,
                             rhs_evaluations=evals, metric=spec.describe())
            raise DomainExit(traj.final, exc) from exc
    return rec.build(status=status, exit_reason=reason, method=config.method,
                     accepted_steps=accepted, rejected_steps=rejected, rhs_evaluations=evals,
                     metric=spec.describe())


def _rk4_step(f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rkf45_step(f, t: float, y: np.ndarray, h: float, config: IntegratorConfig):
    ks = []
    for c, row in zip(_RKF_C, _RKF_A):
        yi = y + h * sum((a * k for a, k in zip(row, ks)), np.zeros_like(y))
        ks.append(f(t + c * h, yi))
    y4 = y + h * sum((b * k for b, k in zip(_RKF_B4, ks)), np.zeros_like(y))
    y5 = y + h * sum((b * k for b, k in zip(_RKF_B5, ks)), np.zeros_like(y))
    scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y4))
    err = float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))
    return y4, err


# ---------------------------------------------------------------------------
# diagnostics and export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedReport:
    drift: float               # max |g(v,v)(t) - g(v,v)(0)|
    relative_drift: float
    q_link: float              # max |Q + g_ij a^i v^j|
    samples: int


def conserved_speed_report(traj: Trajectory, spec: MetricSpec, rhs: RHS | None = None) -> SpeedReport:
    rhs = rhs or geodesic_rhs
    s0 = traj.speed2[0]
    drift = float(np.max(np.abs(traj.speed2 - s0)))
    link = 0.0
    for i in range(len(traj)):
        x, v = traj.x[i], traj.v[i]
        _, a = rhs(spec, GeodesicState(float(traj.t[i]), x, v))
        g, _ = metric_jet1(spec, x)
        link = max(link, abs(traj.Q[i] + float(a @ g @ v)))
    return SpeedReport(drift, drift / max(abs(s0), 1e-300), link, len(traj))


def trajectory_columns(n: int) -> list[str]:
    return ["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["speed2", "Q"]


def fmt(value: float, digits: int = 17) -> str:
    return format(float(value), f".{digits}g")


def trajectory_rows(traj: Trajectory):
    for i in range(len(traj)):
        yield [traj.t[i], *traj.x[i], *traj.v[i], traj.speed2[i], traj.Q[i]]


def to_csv(traj: Trajectory, header: bool = True, digits: int = 17) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(trajectory_columns(traj.x.shape[1]))
    for row in trajectory_rows(traj):
        w.writerow([fmt(val, digits) for val in row])
    return buf.getvalue()


def to_jsonl(traj: Trajectory) -> str:
    cols = trajectory_columns(traj.x.shape[1])
    lines = []
    for row in trajectory_rows(traj):
        rec = dict(zip(cols, (float(fmt(val)) for val in row)))
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"

"""Mild solutions of du/dt = A u + F(t, u_t) via the damped variation-of-constants form.

For any r >= 0 the solution satisfies

    u(t) = T_r(t) phi(0) + int_0^t T_r(t - s) G(s, u_s) ds,
    T_r(t) = exp(-r t) T(t),  G(t, psi) = r psi(0) + F(t, psi),

and the solver advances it node to node with the exponential-trapezoid rule

    u_{n+1} = T_r(h) (u_n + h/2 G_n) + h/2 G_{n+1},

resolving the implicit G_{n+1} by Picard iteration.  The step must divide
tau so that every delayed argument falls on a stored node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, ModelError, StiffnessError, UsageError
from .semigroups import SemigroupModel, damped
from .state_space import HistorySegment, SpatialField, _readonly_view


@dataclass(frozen=True)
class FdeProblem:
    semigroup: SemigroupModel
    F: Callable[[float, HistorySegment], SpatialField]
    tau: float
    initial: HistorySegment
    period_omega: Optional[float] = None
    name: str = "fde"

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"delay tau must be > 0, got {self.tau}")
        if not math.isclose(self.initial.tau, self.tau, rel_tol=1e-12):
            raise DimensionError(f"initial segment has tau={self.initial.tau}, problem tau={self.tau}")
        if self.initial.field_shape != self.semigroup.field_shape:
            raise DimensionError(
                f"initial field shape {self.initial.field_shape} does not match semigroup "
                f"{self.semigroup.field_shape}")
        if self.period_omega is not None and not self.period_omega > 0:
            raise DomainError(f"period must be > 0, got {self.period_omega}")
        out = _field_values(self.F(0.0, self.initial))
        if out.shape != self.initial.field_shape:
            raise DimensionError(f"F returns shape {out.shape}, state shape is {self.initial.field_shape}")

    def with_initial(self, phi):
        return replace(self, initial=phi)


@dataclass(frozen=True)
class SolverConfig:
    h: float
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    r: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"step h must be > 0, got {self.h}")
        if not self.picard_tol > 0:
            raise DomainError(f"picard_tol must be > 0, got {self.picard_tol}")
        if self.picard_max_iters < 1:
            raise DomainError("picard_max_iters must be >= 1")
        if not self.r >= 0:
            raise DomainError(f"r must be >= 0, got {self.r}")

    def steps_per_delay(self, tau):
        k = round(tau / self.h)
        if k < 1 or abs(k * self.h - tau) > 1e-12 * tau:
            raise UsageError(f"step h={self.h} does not divide tau={tau}")
        return int(k)

    def steps_to(self, t):
        n = round(t / self.h)
        if abs(n * self.h - t) > 1e-9 * max(1.0, abs(t)):
            raise UsageError(f"time t={t} is not on the step grid h={self.h}")
        return int(n)

    @property
    def quadrature_tol(self):
        """Accuracy to which the discrete integral identity is expected to hold."""
        return self.picard_tol


def _field_values(out):
    return out.values if isinstance(out, SpatialField) else np.asarray(out, dtype=float)


@dataclass
class Trajectory:
    """Dense record of u on the grid -tau, -tau + h, ..., T_end."""

    t_nodes: np.ndarray
    values: np.ndarray
    tau: float
    h: float
    nodes: np.ndarray
    problem: FdeProblem = field(repr=False)
    config: SolverConfig = field(repr=False)
    picard_iterations: np.ndarray = field(default=None, repr=False)

    @property
    def n_delay(self):
        return round(self.tau / self.h)

    @property
    def t_end(self):
        return float(self.t_nodes[-1])

    def index(self, t):
        n = self.config.steps_to(t)
        i = n + self.n_delay
        if i < self.n_delay or i >= self.t_nodes.size:
            raise UsageError(f"t={t} outside the solved range [0, {self.t_end}]")
        return i

    def field(self, t):
        i = self.config.steps_to(t) + self.n_delay
        if not 0 <= i < self.t_nodes.size:
            raise UsageError(f"t={t} outside the solved range")
        return SpatialField._trusted(_readonly_view(self.values[i]), self.nodes)

    def segment(self, t):
        """u_t as a HistorySegment (t must lie on the grid)."""
        i = self.index(t)
        k = self.n_delay
        vals = self.values[i - k: i + 1].copy()
        return HistorySegment(self.tau, vals, self.nodes)

    def max_norm(self):
        return float(np.max(np.abs(self.values)))


def _segment_view(tau, theta, vals, i, k, nodes):
    v = vals[i - k: i + 1].view()
    v.setflags(write=False)
    return HistorySegment._trusted(tau, theta, v, nodes)


def _ghat(p, r, t, seg):
    out = _field_values(p.F(t, seg))
    if r:
        out = out + r * seg.values[-1]
    return out


def _integrate(p, cfg, phi, n_steps):
    """Core stepping loop.  Returns (values, picard_iterations)."""
    tau = p.tau
    k = cfg.steps_per_delay(tau)
    if phi.n_intervals != k:
        raise DimensionError(
            f"initial segment has {phi.n_intervals} intervals, the step h={cfg.h} needs {k}; "
            f"use phi.resample({k})")
    if phi.field_shape != p.semigroup.field_shape:
        raise DimensionError(f"initial field shape {phi.field_shape} does not match the model")
    h = cfg.h
    r = cfg.r
    that = damped(p.semigroup, r)
    nodes = phi.nodes
    theta = phi.theta
    vals = np.empty((k + n_steps + 1,) + phi.field_shape)
    vals[: k + 1] = phi.values
    iters = np.zeros(n_steps, dtype=np.int64)
    half = 0.5 * h
    for n in range(n_steps):
        i = k + n
        t_n = n * h
        t_next = (n + 1) * h
        g_n = _ghat(p, r, t_n, _segment_view(tau, theta, vals, i, k, nodes))
        if not np.all(np.isfinite(g_n)):
            raise ModelError(f"F returned a non-finite value at t={t_n:.6g} (node {n})")
        base = that.apply_array(h, vals[i] + half * g_n)
        guess = vals[i].copy()
        residuals = []
        for it in range(cfg.picard_max_iters):
            vals[i + 1] = guess
            g_next = _ghat(p, r, t_next, _segment_view(tau, theta, vals, i + 1, k, nodes))
            if not np.all(np.isfinite(g_next)):
                raise ModelError(f"F returned a non-finite value at t={t_next:.6g} (node {n + 1})")
            new = base + half * g_next
            res = float(np.max(np.abs(new - guess)))
            residuals.append(res)
            guess = new
            if res <= cfg.picard_tol:
                break
            if it >= 1 and res > residuals[-2]:
                raise StiffnessError(
                    f"Picard residuals grew at t={t_next:.6g} (node {n + 1}): "
                    f"{residuals[-2]:.3g} -> {res:.3g}", t=t_next, index=n + 1, residuals=residuals)
        else:
            raise StiffnessError(
                f"Picard iteration did not reach {cfg.picard_tol:g} in {cfg.picard_max_iters} "
                f"iterations at t={t_next:.6g} (node {n + 1}); last residual {residuals[-1]:.3g}",
                t=t_next, index=n + 1, residuals=residuals)
        if not np.all(np.isfinite(guess)):
            raise ModelError(f"solution became non-finite at t={t_next:.6g} (node {n + 1})")
        vals[i + 1] = guess
        iters[n] = len(residuals)
    return vals, iters


def solve(p, cfg, T_end, initial=None):
    """Integrate from the initial segment (``p.initial`` unless overridden) up to T_end."""
    T_end = float(T_end)
    if not T_end > 0:
        raise DomainError(f"T_end must be > 0, got {T_end}")
    phi = p.initial if initial is None else initial
    n_steps = cfg.steps_to(T_end)
    vals, iters = _integrate(p, cfg, phi, n_steps)
    k = cfg.steps_per_delay(p.tau)
    t_nodes = (np.arange(-k, n_steps + 1)) * cfg.h
    t_nodes[0] = -p.tau
    vals.setflags(write=False)
    return Trajectory(t_nodes, vals, p.tau, cfg.h, phi.nodes, p, cfg, iters)


def solution_map(p, cfg, t, phi):
    """Q(t) phi = u_t; t must be a grid time."""
    t = float(t)
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    cfg.steps_to(t)
    if t == 0:
        return phi
    return solve(p, cfg, t, initial=phi).segment(t)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    error: float
    observed_order: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    reference_h: float
    t_end: float

    @property
    def min_order(self):
        orders = [row.observed_order for row in self.rows if np.isfinite(row.observed_order)]
        return min(orders) if orders else float("nan")


def convergence_study(p, steps, T_end, cfg=None):
    """Errors of u_{T_end} (segment sup norm at the coarse nodes) against the finest step.

    ``cfg`` supplies the non-step solver settings.  The observed order between
    consecutive steps is log(e_i / e_{i+1}) / log(h_i / h_{i+1}).
    """
    steps = [float(h) for h in steps]
    if len(steps) < 3:
        raise UsageError(f"convergence study needs at least 3 steps, got {len(steps)}")
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise UsageError("steps must be strictly descending")
    base = cfg or SolverConfig(h=steps[0])
    segments = []
    for h in steps:
        c = replace(base, h=h)
        k = c.steps_per_delay(p.tau)
        phi = p.initial if p.initial.n_intervals == k else p.initial.resample(k)
        segments.append(solve(p, c, T_end, initial=phi).segment(T_end))
    ref = segments[-1]
    rows = []
    prev = None
    for h, seg in zip(steps[:-1], segments[:-1]):
        stride = ref.n_intervals // seg.n_intervals
        diff = seg.values - ref.values[::stride]
        err = float(np.max(np.abs(diff)))
        if prev is None or prev[1] == 0 or err == 0:
            order = float("nan")
        else:
            order = math.log(prev[1] / err) / math.log(prev[0] / h)
        rows.append(ConvergenceRow(h, err, order))
        prev = (h, err)
    return ConvergenceTable(tuple(rows), steps[-1], float(T_end))


def bounded_sup(traj):
    """sup over the solved range of segment_sup_norm(u_t)."""
    return traj.max_norm()

"""Periodically forced delayed reaction-diffusion on an interval with Neumann ends.

The demo reaction is the delayed logistic (Hutchinson) law with a
sinusoidally modulated growth rate,

    f(t, phi)(x) = phi(0)(x) * (a(t) - b * phi(-tau)(x)),
    a(t) = a0 * (1 + eps_f * sin(2 pi t / omega)),

applied to each component.  Periodic orbits are fixed points of the period
map P = Q(omega).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import NoConvergence, newton_krylov

from .errors import DomainError, SolverError, UsageError
from .mild_solver import FdeProblem, solution_map, solve
from .semigroups import SpectralNeumannSemigroup
from .state_space import HistorySegment, RenormWeights, renorm, renorm_distance


@dataclass(frozen=True)
class RdModel:
    diffusivities: tuple = (0.1,)
    length: float = 1.0
    tau: float = 0.5
    omega: float = 1.0
    a0: float = 1.0
    b: float = 1.0
    forcing: float = 0.0
    modes: int = 16
    n_nodes: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "diffusivities", tuple(float(d) for d in np.atleast_1d(self.diffusivities)))
        if not all(d > 0 for d in self.diffusivities):
            raise DomainError(f"diffusivities must be positive, got {self.diffusivities}")
        for name in ("length", "tau", "omega"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def equilibrium(self):
        return self.a0 / self.b

    def growth_rate(self, t):
        return self.a0 * (1.0 + self.forcing * math.sin(2.0 * math.pi * t / self.omega))


def build_delayed_logistic(model, initial=None, n_intervals=64, validate=True):
    """FdeProblem for the forced delayed logistic model.

    ``initial`` defaults to the constant segment a0 / (2 |b|).  ``validate=False``
    lets non-confining models (b <= 0) through, for negative controls.
    """
    if validate:
        if not model.a0 > 0:
            raise DomainError(f"a0 must be > 0, got {model.a0}")
        if not model.b > 0:
            raise DomainError(f"b must be > 0 for a bounded model, got {model.b}")
        if model.forcing < 0:
            raise DomainError(f"forcing amplitude must be >= 0, got {model.forcing}")
    semigroup = SpectralNeumannSemigroup(model.diffusivities, model.length, model.modes, model.n_nodes)
    if initial is None:
        start = model.a0 / (2.0 * abs(model.b)) if model.b != 0 else model.a0
        initial = HistorySegment.constant(model.tau, n_intervals, start, semigroup.nodes,
                                          semigroup.components)

    a0, b, eps_f, omega = model.a0, model.b, model.forcing, model.omega
    two_pi_over = 2.0 * math.pi / omega

    def reaction(t, phi):
        a = a0 * (1.0 + eps_f * math.sin(two_pi_over * t))
        now = phi.values[-1]
        return now * (a - b * phi.values[0])

    return FdeProblem(semigroup, reaction, model.tau, initial, period_omega=omega,
                      name="delayed_logistic")


def period_map(p, cfg, phi):
    """P(phi) = Q(omega) phi."""
    if p.period_omega is None:
        raise UsageError("period_map needs a problem with period_omega set")
    return solution_map(p, cfg, p.period_omega, phi)


@dataclass
class PeriodicOrbitResult:
    phi: HistorySegment
    residual: float
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = False
    method: str = "picard"
    r: float = 1.0


def _residual(p, cfg, phi, w):
    return renorm_distance(period_map(p, cfg, phi), phi, w)


def find_periodic(p, cfg, phi0, max_iters=200, tol=1e-8, r=None, newton=True):
    """Fixed point of the period map, measured in the r-renorm (r defaults to 1 / omega).

    Damped fixed-point iteration phi <- (1 - s) phi + s P(phi): the step s
    halves when the residual grows and doubles (up to 1) after a success.
    After 5 stalled steps (ratio > 0.9) or s < 1/64 the search switches to a
    matrix-free Newton-Krylov solve of P(phi) - phi = 0.  Exhausting
    ``max_iters`` is reported, not raised.
    """
    if not tol > 0:
        raise UsageError(f"tol must be > 0, got {tol}")
    if p.period_omega is None:
        raise UsageError("find_periodic needs a problem with period_omega set")
    r = 1.0 / p.period_omega if r is None else float(r)
    w = RenormWeights(r, p.tau)
    phi = phi0
    image = period_map(p, cfg, phi)
    res = renorm_distance(image, phi, w)
    history = [res]
    best = (res, phi)
    s = 1.0
    stall = 0
    it = 0
    method = "picard"
    while res > tol and it < max_iters:
        it += 1
        cand = phi.with_values((1.0 - s) * phi.values + s * image.values)
        cand_image = period_map(p, cfg, cand)
        cand_res = renorm_distance(cand_image, cand, w)
        if cand_res < res:
            stall = stall + 1 if cand_res > 0.9 * res else 0
            phi, image, res = cand, cand_image, cand_res
            s = min(1.0, 2.0 * s)
            history.append(res)
            if res < best[0]:
                best = (res, phi)
        else:
            s *= 0.5
            stall += 1
        if newton and res > tol and (stall >= 5 or s < 1.0 / 64):
            method = "newton-krylov"
            phi, res, used = _newton(p, cfg, phi, w, tol, max(1, max_iters - it))
            it += used
            history.append(res)
            if res < best[0]:
                best = (res, phi)
            break
    res, phi = best
    converged = res <= tol
    return PeriodicOrbitResult(phi, res, it, history, converged, method, r)


def _newton(p, cfg, phi, w, tol, budget):
    shape = phi.values.shape
    count = [0]

    def residual(x):
        count[0] += 1
        seg = phi.with_values(x.reshape(shape))
        return (period_map(p, cfg, seg).values - seg.values).ravel()

    try:
        x = newton_krylov(residual, phi.values.ravel(), f_tol=tol, maxiter=budget,
                          method="lgmres")
    except (NoConvergence, SolverError, ValueError) as exc:
        x = getattr(exc, "args", [None])[0] if isinstance(exc, NoConvergence) else None
        if x is None or np.shape(x) != (phi.values.size,):
            return phi, _residual(p, cfg, phi, w), count[0]
    cand = phi.with_values(np.asarray(x).reshape(shape))
    cand_res = _residual(p, cfg, cand, w)
    base_res = _residual(p, cfg, phi, w)
    if cand_res <= base_res:
        return cand, cand_res, count[0]
    return phi, base_res, count[0]


def _worker_count(requested, jobs):
    if requested is None:
        env = os.environ.get("FDE_LAB_THREADS", "").strip()
        requested = int(env) if env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    return max(1, min(int(requested), jobs))


def find_periodic_many(p, cfg, starts, workers=None, **kwargs):
    """Run :func:`find_periodic` from several starting segments concurrently.

    Each search is sequential; searches share nothing, so they run on a
    thread pool (``workers`` defaults to FDE_LAB_THREADS, else the CPU count).
    Results come back in the order of ``starts``.
    """
    starts = list(starts)
    if not starts:
        raise UsageError("find_periodic_many needs at least one start")
    n = _worker_count(workers, len(starts))
    if n == 1:
        return [find_periodic(p, cfg, phi, **kwargs) for phi in starts]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda phi: find_periodic(p, cfg, phi, **kwargs), starts))


def perturbed_starts(phi, count, rng, amplitude=0.2):
    """``phi`` followed by ``count - 1`` copies shifted by random constants in [-amplitude, amplitude]."""
    out = [phi]
    for _ in range(count - 1):
        out.append(phi.with_values(phi.values + rng.uniform(-amplitude, amplitude)))
    return out


def periodic_residual(p, cfg, phi, r=None):
    """Independent recomputation of renorm(P(phi) - phi)."""
    r = 1.0 / p.period_omega if r is None else r
    return _residual(p, cfg, phi, RenormWeights(r, p.tau))


@dataclass
class PeriodicityCheck:
    defect: float
    scale: float
    tol: float

    @property
    def passed(self):
        return self.defect <= self.tol * (1.0 + self.scale)


def verify_periodicity(p, cfg, phi_star, tol):
    """Solve over [0, 2 omega] and compare u(t + omega) with u(t) for t in [-tau, omega]."""
    if p.period_omega is None:
        raise UsageError("verify_periodicity needs a problem with period_omega set")
    omega = p.period_omega
    traj = solve(p, cfg, 2.0 * omega, initial=phi_star)
    shift = cfg.steps_to(omega)
    k = traj.n_delay
    first = traj.values[: k + shift + 1]
    second = traj.values[shift: shift + k + shift + 1]
    defect = float(np.max(np.abs(second - first)))
    return PeriodicityCheck(defect, traj.max_norm(), float(tol))


@dataclass
class BoundednessReport:
    bound: float
    blow_up: bool
    detail: str = ""

    @property
    def hypothesis_violated(self):
        return self.blow_up


def boundedness_probe(p, cfg, B0, horizon, ceiling=1e6):
    """sup over t <= horizon and phi in B0 of |u_t|, flagging blow-up.

    Blow-up (a solver failure, non-finite values or crossing ``ceiling``) is a
    reported outcome: the model is then outside the uniform-boundedness
    hypothesis.
    """
    if p.period_omega is not None and horizon < p.period_omega:
        raise UsageError(f"horizon {horizon} shorter than the period {p.period_omega}")
    bound = 0.0
    for phi in B0:
        bound = max(bound, float(np.max(np.abs(phi.values))))
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                traj = solve(p, cfg, horizon, initial=phi)
        except SolverError as exc:
            return BoundednessReport(math.inf, True, f"solver failure: {exc}")
        peak = traj.max_norm()
        if not math.isfinite(peak) or peak > ceiling:
            return BoundednessReport(peak, True, f"trajectory exceeded ceiling {ceiling:g}")
        bound = max(bound, peak)
    return BoundednessReport(bound, False)


def distinct_orbits(results, tol=1e-6):
    """Group converged orbit results whose fixed segments differ by more than ``tol`` (renorm)."""
    reps = []
    for res in results:
        if not res.converged:
            continue
        w = RenormWeights(res.r, res.phi.tau)
        if all(renorm_distance(res.phi, other.phi, w) > tol for other in reps):
            reps.append(res)
    return reps

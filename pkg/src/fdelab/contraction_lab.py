"""Splitting of the solution map into a history-shift part and an integral part.

Q(t) phi = L(t) phi + Qbar(t) phi with

    (L(t) phi)(theta)    = T_r(t + theta) phi(0)     if t + theta > 0
                         = phi(t + theta)            otherwise
    (Qbar(t) phi)(theta) = int_0^{t+theta} T_r(t + theta - s) G(s, u_s) ds   (0 if t + theta <= 0)

The functions here check, sample by sample, the inequalities that make Q(t)
an alpha-contraction in the exponential renorm: L(t) shrinks renorms by
exp(-r t), the two norms are equivalent, Qbar(t) is equicontinuous with the
(t+5) K eps / (t+3) K eps moduli, and its tail vanishes linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import PropertyFailure, UsageError
from .mild_solver import _ghat, _segment_view, solve
from .semigroups import DampedSemigroup, damped, uniform_continuity_delta
from .state_space import (HistorySegment, RenormWeights, renorm, renorm_distance,
                          segment_sup_norm)

SLACK = 1e-12


# -- samples ----------------------------------------------------------------


def sample_segments(count, tau, n_intervals, field_shape, nodes, rng, r=1.0, families="mixed"):
    """Random segments with entries in [-1, 1] plus adversarial families.

    ``families="mixed"`` cycles through: uniform noise (half of the draws),
    spikes at theta = -tau, constants, exp(-r theta) profiles that attain the
    renorm at every node, and segments with phi(0) = 0.
    """
    m, n = field_shape
    k = int(n_intervals)
    theta = np.linspace(-tau, 0.0, k + 1)
    out = []
    kinds = ("uniform", "uniform", "spike", "constant", "exponential", "uniform", "zero_head", "uniform")
    for i in range(count):
        kind = "uniform" if families == "uniform" else kinds[i % len(kinds)]
        if kind == "uniform":
            vals = rng.uniform(-1.0, 1.0, size=(k + 1, m, n))
        elif kind == "spike":
            vals = rng.uniform(-1.0, 1.0, size=(k + 1, m, n)) * 1e-3
            vals[0] = rng.choice([-1.0, 1.0], size=(m, n))
        elif kind == "constant":
            vals = np.broadcast_to(rng.uniform(-1.0, 1.0, size=(m, n)), (k + 1, m, n)).copy()
        elif kind == "exponential":
            c = rng.uniform(-1.0, 1.0, size=(m, n))
            # scaled so the theta = -tau value stays in [-1, 1]
            vals = np.exp(-r * theta)[:, None, None] * c * math.exp(-r * tau)
        else:
            vals = rng.uniform(-1.0, 1.0, size=(k + 1, m, n))
            vals[-1] = 0.0
        out.append(HistorySegment(tau, vals, nodes, theta))
    return out


def spike_segment(tau, n_intervals, field_shape, nodes, amplitude=1.0):
    """Zero everywhere except theta = -tau, where every entry equals ``amplitude``."""
    vals = np.zeros((int(n_intervals) + 1,) + tuple(field_shape))
    vals[0] = amplitude
    return HistorySegment(tau, vals, nodes)


# -- the two parts of the solution map ----------------------------------------


def L_op(t, phi, r, S):
    """History-shift part L(t) phi on the theta-grid of ``phi``."""
    t = float(t)
    if t < 0:
        raise UsageError(f"t must be >= 0, got {t}")
    shifted = t + phi.theta
    vals = np.empty_like(phi.values)
    ahead = shifted > 0
    if np.any(ahead):
        times = shifted[ahead]
        stack = np.broadcast_to(phi.values[-1], (times.size,) + phi.field_shape)
        vals[ahead] = damped(S, r).propagate(times, stack)
    for j in np.flatnonzero(~ahead):
        vals[j] = phi.value_at(shifted[j])
    return HistorySegment(phi.tau, vals, phi.nodes, phi.theta)


def _source_terms(traj, n):
    """G(t_k, u_{t_k}) for k = 0..n along a solved trajectory."""
    p, cfg = traj.problem, traj.config
    k = traj.n_delay
    theta = np.linspace(-p.tau, 0.0, k + 1)
    return np.stack([
        _ghat(p, cfg.r, j * cfg.h, _segment_view(p.tau, theta, traj.values, k + j, k, traj.nodes))
        for j in range(n + 1)])


def _qbar_from_sources(g, k, n, h, that):
    """Composite exponential-trapezoid values of the integral term on the segment ending at step n."""
    shape = g.shape[1:]
    vals = np.zeros((k + 1,) + shape)
    for j in range(k + 1):
        m = n - k + j  # number of steps from 0 to t + theta_j
        if m <= 0:
            continue
        lags = (m - np.arange(m + 1)) * h
        prop = that.propagate(lags, g[: m + 1])
        w = np.ones(m + 1)
        w[0] = w[-1] = 0.5
        vals[j] = h * np.tensordot(w, prop, axes=1)
    return vals


def Qbar_direct(t, p, cfg, phi, trajectory=None):
    """Integral part Qbar(t) phi, evaluated by direct quadrature over the solved trajectory."""
    n = cfg.steps_to(t)
    k = cfg.steps_per_delay(p.tau)
    traj = trajectory if trajectory is not None else solve(p, cfg, max(t, cfg.h), initial=phi)
    g = _source_terms(traj, n)
    vals = _qbar_from_sources(g, k, n, cfg.h, damped(p.semigroup, cfg.r))
    return HistorySegment(p.tau, vals, phi.nodes, phi.theta)


# -- reports ---------------------------------------------------------------


@dataclass
class DecompositionReport:
    t: float
    r: float
    max_L_ratio: float
    bound: float
    margin: float
    consistency_residual: Optional[float] = None
    samples: int = 0

    @property
    def passed(self):
        ok = self.margin >= -SLACK
        return ok


@dataclass
class NormEquivalenceReport:
    r: float
    tau: float
    worst_lower_margin: float
    worst_upper_margin: float
    spike_gap: float
    samples: int

    @property
    def passed(self):
        return self.worst_lower_margin >= -SLACK and self.worst_upper_margin >= -SLACK


@dataclass
class EquicontinuityReport:
    t: float
    eps: float
    delta: float
    K: float
    measured_modulus: float
    modulus_bound: float
    tail_ok: bool
    tail_excess: float
    lags_within_delta: int = 0

    @property
    def margin(self):
        return self.modulus_bound - self.measured_modulus

    @property
    def passed(self):
        return self.measured_modulus <= self.modulus_bound and self.tail_ok


@dataclass
class FiniteSetReport:
    t: float
    r: float
    diam_before: float
    diam_after: float
    factor: float

    @property
    def ratio(self):
        return self.diam_after / self.diam_before if self.diam_before > 0 else 0.0

    @property
    def passed(self):
        return self.diam_after <= self.factor * self.diam_before + SLACK


@dataclass
class MncEstimate:
    lower: float
    upper: float
    balls: int
    diameter: float


# -- verifications ------------------------------------------------------------


def verify_L_contraction(S, r, t_grid, sample_count=200, *, tau, n_intervals=64, seed=42,
                         samples=None, l_op=None, raise_on_failure=True):
    """Check renorm(L(t) phi) <= exp(-r t) renorm(phi) for every sample and every t.

    Returns one :class:`DecompositionReport` per t.
    """
    if sample_count < 1 and samples is None:
        raise UsageError("sample_count must be >= 1")
    l_op = l_op or L_op
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = sample_segments(sample_count, tau, n_intervals, S.field_shape, S.nodes, rng, r=r)
    w = RenormWeights(r, tau)
    reports = []
    for t in t_grid:
        bound = math.exp(-r * t)
        worst = 0.0
        for phi in samples:
            before = renorm(phi, w)
            after = renorm(l_op(t, phi, r, S), w)
            if after > bound * before + SLACK:
                if raise_on_failure:
                    raise PropertyFailure(
                        f"L-contraction violated at t={t}, r={r}: {after:.17g} > "
                        f"{bound:.17g} * {before:.17g}", witness=phi)
            if before > 0:
                worst = max(worst, after / before)
        reports.append(DecompositionReport(float(t), float(r), worst, bound, bound - worst,
                                           samples=len(samples)))
    return reports


def verify_norm_equivalence(r, sample_count=500, *, tau=1.0, n_intervals=64, field_shape=(1, 9),
                            nodes=None, seed=42, samples=None):
    """exp(-r tau) |phi| <= renorm(phi) <= |phi| on random and adversarial samples."""
    if sample_count < 1 and samples is None:
        raise UsageError("sample_count must be >= 1")
    if nodes is None:
        nodes = np.linspace(0.0, 1.0, field_shape[1]) if field_shape[1] > 1 else np.array([0.0])
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = sample_segments(sample_count, tau, n_intervals, field_shape, nodes, rng, r=r)
    w = RenormWeights(r, tau)
    low = math.exp(-r * tau)
    worst_lower = math.inf
    worst_upper = math.inf
    for phi in samples:
        sup = segment_sup_norm(phi)
        rn = renorm(phi, w)
        lower_margin = rn - low * sup
        upper_margin = sup - rn
        if lower_margin < -SLACK or upper_margin < -SLACK:
            raise PropertyFailure(
                f"norm equivalence violated for r={r}: sup={sup!r}, renorm={rn!r}", witness=phi)
        worst_lower = min(worst_lower, lower_margin)
        worst_upper = min(worst_upper, upper_margin)
    spike = spike_segment(tau, n_intervals, field_shape, nodes)
    spike_gap = abs(renorm(spike, w) - low * segment_sup_norm(spike))
    return NormEquivalenceReport(float(r), float(tau), worst_lower, worst_upper, spike_gap, len(samples))


def finite_set_contraction(B_finite, t, r, S, l_op=None):
    """Pairwise renorm diameter of L(t) B against exp(-r t) times the diameter of B."""
    B_finite = list(B_finite)
    if len(B_finite) < 2:
        raise UsageError("finite_set_contraction needs at least two segments")
    l_op = l_op or L_op
    tau = B_finite[0].tau
    w = RenormWeights(r, tau).inverse(B_finite[0].theta)
    before = _diameter(B_finite, w)
    images = [l_op(t, phi, r, S) for phi in B_finite]
    after = _diameter(images, w)
    factor = math.exp(-r * t)
    rep = FiniteSetReport(float(t), float(r), before, after, factor)
    if not rep.passed:
        dist = _pairwise(images, w)
        i, j = np.unravel_index(np.argmax(dist), dist.shape)
        raise PropertyFailure(
            f"finite-set diameter grew: {after:.17g} > {factor:.17g} * {before:.17g}",
            witness=(B_finite[i], B_finite[j]))
    return rep


def _pairwise(segments, weights):
    stack = np.stack([s.values.reshape(s.values.shape[0], -1) for s in segments])
    return _kernels.pairwise_weighted_sup(stack, weights)


def _diameter(segments, weights):
    return float(_pairwise(segments, weights).max())


def decomposition_consistency(t, p, cfg, samples, l_op=None):
    """Largest sup-norm residual of Q(t) phi - L(t) phi - Qbar(t) phi over the samples.

    The L-ratio fields of the report are filled from the same samples.
    """
    l_op = l_op or L_op
    w = RenormWeights(cfg.r, p.tau)
    worst_resid = 0.0
    worst_ratio = 0.0
    for phi in samples:
        traj = solve(p, cfg, t, initial=phi)
        q = traj.segment(t)
        lp = l_op(t, phi, cfg.r, p.semigroup)
        qb = Qbar_direct(t, p, cfg, phi, trajectory=traj)
        worst_resid = max(worst_resid, float(np.max(np.abs(q.values - lp.values - qb.values))))
        before = renorm(phi, w)
        if before > 0:
            worst_ratio = max(worst_ratio, renorm(lp, w) / before)
    bound = math.exp(-cfg.r * t)
    return DecompositionReport(float(t), cfg.r, worst_ratio, bound, bound - worst_ratio,
                               consistency_residual=worst_resid, samples=len(samples))


def equicontinuity_report(t, p, cfg, sample_B, eps):
    """Measured oscillation of Qbar(t) B over theta-pairs closer than delta(eps).

    K is the largest sup norm of G(s, u_s(phi)) over grid times s in [0, t]
    and phi in B.  The bound is (t + 5) K eps for t <= tau and (t + 3) K eps
    beyond.  The tail check asserts |Qbar(t) phi (theta)| <= K (t + theta) for
    t + theta in (0, eps] and exact zeros for t + theta <= 0.
    """
    t = float(t)
    eps = float(eps)
    if not 0 < eps < t:
        raise UsageError(f"need 0 < eps < t, got eps={eps}, t={t}")
    sample_B = list(sample_B)
    if not sample_B:
        raise UsageError("equicontinuity needs a non-empty sample")
    delta = uniform_continuity_delta(DampedSemigroup(p.semigroup, cfg.r), eps, t)
    n = cfg.steps_to(t)
    k = cfg.steps_per_delay(p.tau)
    that = damped(p.semigroup, cfg.r)
    qbars = []
    K = 0.0
    for phi in sample_B:
        traj = solve(p, cfg, t, initial=phi)
        g = _source_terms(traj, n)
        K = max(K, float(np.max(np.abs(g))))
        qbars.append(_qbar_from_sources(g, k, n, cfg.h, that))
    theta = sample_B[0].theta
    shifted = t + theta
    modulus = 0.0
    tail_excess = -math.inf
    tail_ok = True
    for vals in qbars:
        flat = vals.reshape(vals.shape[0], -1)
        modulus = max(modulus, _kernels.modulus(flat, theta, delta))
        dead = shifted <= 0
        if np.any(flat[dead] != 0.0):
            tail_ok = False
        near = (shifted > 0) & (shifted <= eps)
        if np.any(near):
            excess = float(np.max(np.max(np.abs(flat[near]), axis=1) - K * shifted[near]))
            tail_excess = max(tail_excess, excess)
            if excess > SLACK * max(1.0, K):
                tail_ok = False
    factor = t + 5.0 if t <= p.tau else t + 3.0
    lags = int(np.count_nonzero(theta[1:] - theta[0] < delta))
    return EquicontinuityReport(t, eps, delta, K, modulus, factor * K * eps, tail_ok, tail_excess, lags)


def mnc_surrogate(segments, resolution, r=0.0):
    """Covering diagnostic for a finite sample of segments in the r-renorm.

    Greedy farthest-point clustering adds balls until every segment lies
    within ``resolution`` of a center.  Each cluster is then re-centred at its
    entrywise midrange, which is the exact minimal enclosing ball for a
    weighted sup norm, giving ``upper``.  ``lower`` is half the distance of
    the next farthest point, which bounds the optimal radius with the same
    number of balls from below.  Diagnostic only; nothing here is asserted.
    """
    segments = list(segments)
    if not segments:
        raise UsageError("mnc_surrogate needs at least one segment")
    if not resolution > 0:
        raise UsageError(f"resolution must be > 0, got {resolution}")
    n = len(segments)
    if n == 1:
        return MncEstimate(0.0, 0.0, 1, 0.0)
    weights = RenormWeights(r, segments[0].tau).inverse(segments[0].theta)
    stack = np.stack([s.values.reshape(s.values.shape[0], -1) for s in segments])
    dist = _kernels.pairwise_weighted_sup(stack, weights)
    diameter = float(dist.max())
    k = 1
    while True:
        centers, assign, radius = _kernels.farthest_point(dist, k)
        if radius <= resolution or k == n:
            break
        k += 1
    # the k centers plus the farthest point are pairwise >= radius apart
    lower = 0.5 * radius if k < n else 0.0
    upper = 0.0
    for c in range(k):
        members = stack[assign == c]
        if members.shape[0] < 2:
            continue
        mid = 0.5 * (members.max(axis=0) + members.min(axis=0))
        rad = max(_kernels.weighted_sup(mem - mid, weights) for mem in members)
        upper = max(upper, rad)
    return MncEstimate(lower, upper, k, diameter)

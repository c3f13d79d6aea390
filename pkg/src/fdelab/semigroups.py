"""Linear semigroups T(t) on grid fields, their damped versions and norms.

Models act on raw ``(m, n)`` arrays internally (``apply_array`` and the
batched ``propagate``); the public :func:`apply` works on SpatialField.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.fft import dct, idct
from scipy.linalg import expm

from .errors import DimensionError, DomainError, UnsupportedModelError, UsageError
from .state_space import SpatialField, default_nodes, sup_norm


def _check_time(t):
    t = float(t)
    if not t >= 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    return t


class SemigroupModel:
    """Common interface.  Subclasses set ``components``, ``nodes``, ``bound_M``,
    ``is_contraction``, ``compact_for_positive_t`` and implement ``propagate``.
    """

    components: int
    nodes: np.ndarray
    bound_M: float
    is_contraction: bool
    compact_for_positive_t: bool

    @property
    def field_shape(self):
        return (self.components, self.nodes.size)

    def propagate(self, times, stack):
        """Apply T(times[b]) to stack[b] for every b; ``stack`` has shape (B, m, n)."""
        raise NotImplementedError

    def apply_array(self, t, values):
        return self.propagate(np.array([t]), values[None])[0]

    def apply(self, t, x):
        t = _check_time(t)
        if x.shape != self.field_shape:
            raise DimensionError(f"field shape {x.shape} does not match model {self.field_shape}")
        return SpatialField(self.apply_array(t, x.values), self.nodes)

    def decay_rate(self):
        """Slowest exponential decay rate (>= 0); 0 when some mode does not decay."""
        raise NotImplementedError

    def node_matrix(self, t):
        """T(t) as a dense (m*n, m*n) matrix acting on flattened fields."""
        m, n = self.field_shape
        size = m * n
        basis = np.eye(size).reshape(size, m, n)
        out = self.propagate(np.full(size, float(t)), basis)
        return out.reshape(size, size).T

    def operator_norm(self, t):
        t = _check_time(t)
        if t == 0:
            return 1.0
        return float(np.abs(self.node_matrix(t)).sum(axis=1).max())


class SpectralNeumannSemigroup(SemigroupModel):
    """Neumann heat semigroup du/dt = D u_xx on [0, ell], diagonal in the cosine basis.

    Fields are sampled on ``n_nodes`` uniform nodes (endpoints included) and
    expanded in cos(k pi x / ell) by a type-I DCT.  Mode k of component i
    decays with the discrete Neumann symbol
    ``d_i (2/dx)^2 sin^2(k pi / (2 (n-1)))``, which tends to d_i (k pi / ell)^2
    for k << n and makes T(t) an exact sup-norm contraction on the grid
    (nonnegative kernel, unit row sums).
    """

    is_contraction = True
    compact_for_positive_t = True
    bound_M = 1.0

    def __init__(self, diffusivities, length=1.0, modes=16, n_nodes=None):
        d = np.atleast_1d(np.asarray(diffusivities, dtype=float))
        if d.ndim != 1 or d.size < 1 or not np.all(d > 0):
            raise DomainError(f"diffusivities must be positive, got {diffusivities}")
        if not length > 0:
            raise DomainError(f"domain length must be > 0, got {length}")
        modes = int(modes)
        if modes < 1:
            raise DomainError(f"mode count must be >= 1, got {modes}")
        if n_nodes is None:
            n_nodes = 2 * modes + 1
        n_nodes = int(n_nodes)
        if n_nodes < max(2, 2 * modes):
            raise DomainError(f"need at least 2N = {2 * modes} nodes (and >= 2), got {n_nodes}")
        self.diffusivities = d
        self.length = float(length)
        self.modes = modes
        self.components = d.size
        self.nodes = default_nodes(n_nodes, self.length)
        k = np.arange(n_nodes)
        dx = self.length / (n_nodes - 1)
        symbol = (2.0 / dx) ** 2 * np.sin(k * np.pi / (2 * (n_nodes - 1))) ** 2
        self.eigenvalues = d[:, None] * symbol[None, :]
        self.eigenvalues[:, 0] = 0.0
        self.continuum_eigenvalues = d[:, None] * (k[None, :] * np.pi / self.length) ** 2

    def __repr__(self):
        return (f"SpectralNeumannSemigroup(d={self.diffusivities.tolist()}, ell={self.length}, "
                f"N={self.modes}, nodes={self.nodes.size})")

    def to_modes(self, values):
        return dct(values, type=1, axis=-1)

    def from_modes(self, coeffs):
        return idct(coeffs, type=1, axis=-1)

    def propagate(self, times, stack, rate_shift=0.0):
        times = np.asarray(times, dtype=float)
        coeffs = self.to_modes(np.asarray(stack, dtype=float))
        factors = np.exp(-(self.eigenvalues[None, :, :] + rate_shift) * times[:, None, None])
        return self.from_modes(coeffs * factors)

    def decay_rate(self):
        return 0.0

    def operator_norm(self, t):
        _check_time(t)
        # nonnegative kernel with unit row sums; the k = 0 mode attains it
        return 1.0


class MatrixSemigroup(SemigroupModel):
    """T(t) = expm(t A) acting on the component axis at every spatial node."""

    def __init__(self, generator, nodes=None, compact_for_positive_t=None):
        a = np.atleast_2d(np.asarray(generator, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"generator must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("generator has non-finite entries")
        self.generator = a
        self.components = a.shape[0]
        self.nodes = default_nodes(1) if nodes is None else np.asarray(nodes, dtype=float)
        # the zero generator (identity semigroup) stands in for a non-compact model
        if compact_for_positive_t is None:
            compact_for_positive_t = bool(np.any(a != 0))
        self.compact_for_positive_t = bool(compact_for_positive_t)
        self._cache = {}
        eig = np.linalg.eigvals(a)
        self.spectral_abscissa = float(np.max(eig.real))
        if self.spectral_abscissa > 1e-12:
            raise DomainError(
                f"generator has spectral abscissa {self.spectral_abscissa:.3g} > 0; T(t) is unbounded")
        self.bound_M = self._sup_bound()
        self.is_contraction = self.bound_M <= 1.0 + 1e-12

    def __repr__(self):
        return f"MatrixSemigroup(A={self.generator.tolist()})"

    def exp(self, t):
        key = float(t)
        e = self._cache.get(key)
        if e is None:
            e = expm(key * self.generator)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = e
        return e

    def decay_rate(self):
        return max(0.0, -self.spectral_abscissa)

    def star_horizon(self):
        sigma = self.decay_rate()
        if sigma > 0:
            return 12.0 * math.log(10.0) / sigma
        return 100.0

    def _sup_bound(self):
        t_max = self.star_horizon()
        grid = np.concatenate([[0.0], np.logspace(-6, math.log10(t_max), 400)])
        norms = np.array([np.abs(self.exp(t)).sum(axis=1).max() for t in grid])
        if self.spectral_abscissa > -1e-12:
            # marginal spectrum: reject polynomial growth from a nontrivial Jordan block
            late = np.abs(self.exp(t_max)).sum(axis=1).max()
            mid = np.abs(self.exp(t_max / 2)).sum(axis=1).max()
            if late > mid * (1 + 1e-9) + 1e-12:
                raise DomainError("generator with marginal spectrum has growing T(t)")
        return float(max(1.0, norms.max()))

    def propagate(self, times, stack):
        times = np.asarray(times, dtype=float)
        stack = np.asarray(stack, dtype=float)
        out = np.empty_like(stack)
        for b, t in enumerate(times):
            out[b] = self.exp(t) @ stack[b]
        return out

    def operator_norm(self, t):
        t = _check_time(t)
        return float(np.abs(self.exp(t)).sum(axis=1).max())


class DampedSemigroup(SemigroupModel):
    """exp(-r t) T(t) for a base model T."""

    def __init__(self, base, r):
        r = float(r)
        if not r >= 0:
            raise DomainError(f"damping rate r must be >= 0, got {r}")
        self.base = base
        self.r = r
        self.components = base.components
        self.nodes = base.nodes
        self.bound_M = base.bound_M
        self.is_contraction = base.is_contraction
        self.compact_for_positive_t = base.compact_for_positive_t or (
            r > 0 and isinstance(base, MatrixSemigroup))

    def __repr__(self):
        return f"DampedSemigroup({self.base!r}, r={self.r})"

    def propagate(self, times, stack):
        times = np.asarray(times, dtype=float)
        if isinstance(self.base, SpectralNeumannSemigroup):
            return self.base.propagate(times, stack, rate_shift=self.r)
        return np.exp(-self.r * times)[:, None, None] * self.base.propagate(times, stack)

    def decay_rate(self):
        return self.base.decay_rate() + self.r

    def operator_norm(self, t):
        t = _check_time(t)
        return math.exp(-self.r * t) * self.base.operator_norm(t)


def damped(base, r):
    """T-hat(t) = exp(-r t) T(t); returns ``base`` itself for r == 0."""
    return base if float(r) == 0.0 else DampedSemigroup(base, r)


# -- module-level operations --------------------------------------------


def apply(model, t, x):
    return model.apply(t, x)


def operator_norm(model, t):
    """Induced sup-norm of T(t)."""
    return model.operator_norm(t)


def default_star_grid(model, n=400):
    """Log-spaced grid on [0, t_max] with exp(-sigma t_max) < 1e-12 for the slowest rate sigma."""
    sigma = model.decay_rate()
    t_max = 12.0 * math.log(10.0) / sigma * 1.01 if sigma > 0 else 100.0
    return np.concatenate([[0.0], np.logspace(-6, math.log10(t_max), n)])


def star_norm(model, x, t_grid=None):
    """max over t in t_grid of |T(t) x|; exact shortcut for contraction models."""
    if t_grid is None:
        t_grid = default_star_grid(model)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise UsageError("star_norm needs a non-empty time grid")
    if not np.any(t_grid == 0.0):
        raise UsageError("star_norm time grid must contain 0")
    if np.any(t_grid < 0):
        raise DomainError("star_norm time grid has negative times")
    if model.is_contraction:
        return sup_norm(x)
    stack = np.broadcast_to(x.values, (t_grid.size,) + x.shape)
    out = model.propagate(t_grid, stack)
    return float(np.max(np.abs(out)))


def _diff_norm(model, s, delta):
    return float(np.abs(model.node_matrix(s) - model.node_matrix(s + delta)).sum(axis=1).max())


def uniform_continuity_delta(model, eps, t, scan=64):
    """A delta < eps with |T(s1) - T(s2)| < eps for s1, s2 in [eps, t], |s1 - s2| < delta.

    Norms are induced sup-norms computed from dense node matrices.  For
    contraction models T(s1) - T(s1 + d) = T(s1 - eps)(T(eps) - T(eps + d)),
    so the worst case sits at s1 = eps; otherwise s1 is scanned on ``scan``
    points.  delta is located by bisection.
    """
    eps = float(eps)
    t = float(t)
    if not (0 < eps < t):
        raise UsageError(f"need 0 < eps < t, got eps={eps}, t={t}")
    if not model.compact_for_positive_t:
        raise UnsupportedModelError(
            f"{model!r} is not norm-continuous for t > 0 (compactness flag is false)")

    def worst(d):
        if model.is_contraction:
            return _diff_norm(model, eps, d)
        starts = np.linspace(eps, max(eps, t - d), scan)
        return max(_diff_norm(model, s, d) for s in starts)

    hi = min(eps, t - eps)
    if worst(hi) < eps:
        return hi * (1 - 1e-9) if hi == eps else hi
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if worst(mid) < eps:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise UnsupportedModelError("could not find a positive delta; model is not norm-continuous")
    return lo

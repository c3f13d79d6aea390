"""Spatial fields, history segments and their norms.

X is realised as grid-sampled continuous functions on [0, ell] with values
in R^m and the sup norm.  A history segment is a piecewise-linear function
on a uniform theta-grid over [-tau, 0] with values in X; both are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DimensionError, DomainError, InvalidFieldError


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _readonly_view(a):
    v = a.view()
    v.setflags(write=False)
    return v


def default_nodes(n, length=1.0):
    """Uniform spatial grid with ``n`` nodes on [0, length]."""
    if n == 1:
        return _frozen([0.0])
    return _frozen(np.linspace(0.0, length, n))


class SpatialField:
    """An element of X: ``values[i, j]`` is component i at spatial node j."""

    __slots__ = ("values", "nodes")

    def __init__(self, values, nodes=None):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            # 1-D input: a column of components when there is a single node, else a scalar profile
            values = values[:, None] if nodes is not None and len(nodes) == 1 else values[None, :]
        if values.ndim != 2:
            raise InvalidFieldError(f"field values must be 2-D (m, n), got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidFieldError(f"empty field of shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("field contains non-finite values")
        if nodes is None:
            nodes = default_nodes(values.shape[1])
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size != values.shape[1]:
            raise InvalidFieldError(
                f"{values.shape[1]} value columns but {nodes.size} spatial nodes")
        if nodes[0] != 0.0 or (nodes.size > 1 and np.any(np.diff(nodes) <= 0)):
            raise InvalidFieldError("spatial nodes must start at 0 and increase strictly")
        values.setflags(write=False)
        if nodes.flags.writeable:
            nodes = _frozen(nodes)
        self.values = values
        self.nodes = nodes

    @classmethod
    def _trusted(cls, values, nodes):
        obj = cls.__new__(cls)
        obj.values = values
        obj.nodes = nodes
        return obj

    @classmethod
    def constant(cls, value, nodes, components=1):
        nodes = np.asarray(nodes, dtype=float)
        return cls(np.full((components, nodes.size), float(value)), nodes)

    @property
    def shape(self):
        return self.values.shape

    @property
    def components(self):
        return self.values.shape[0]

    @property
    def length(self):
        return float(self.nodes[-1])

    def __add__(self, other):
        return SpatialField(self.values + _vals(other), self.nodes)

    def __sub__(self, other):
        return SpatialField(self.values - _vals(other), self.nodes)

    def __mul__(self, c):
        return SpatialField(self.values * float(c), self.nodes)

    __rmul__ = __mul__

    def __neg__(self):
        return SpatialField(-self.values, self.nodes)

    def __repr__(self):
        return f"SpatialField(shape={self.shape}, sup={sup_norm(self):.6g})"


def _vals(x):
    return x.values if isinstance(x, (SpatialField, HistorySegment)) else np.asarray(x, dtype=float)


def sup_norm(x):
    """Max over components and nodes of |value|."""
    v = x.values if isinstance(x, SpatialField) else np.asarray(x, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidFieldError("sup_norm of a non-finite field")
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass(frozen=True)
class RenormWeights:
    """Exponential weight h(theta) = exp(-r theta) on [-tau, 0]."""

    r: float
    tau: float

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError(f"renorm parameter r must be >= 0, got {self.r}")
        if not self.tau > 0:
            raise DomainError(f"delay tau must be > 0, got {self.tau}")

    def h(self, theta):
        return np.exp(-self.r * np.asarray(theta, dtype=float))

    def inverse(self, theta):
        """1 / h(theta) = exp(r theta), the factor applied inside the renorm."""
        return np.exp(self.r * np.asarray(theta, dtype=float))


class HistorySegment:
    """An element of C([-tau, 0], X) stored on a uniform theta-grid.

    ``values`` has shape ``(n_theta, m, n_nodes)``; ``values[-1]`` is phi(0).
    """

    __slots__ = ("tau", "theta", "values", "nodes", "__dict__")

    def __init__(self, tau, values, nodes=None, theta=None):
        tau = float(tau)
        if not tau > 0:
            raise DomainError(f"delay tau must be > 0, got {tau}")
        values = np.array(values, dtype=float)
        if values.ndim == 2:
            values = values[:, None, :]
        if values.ndim != 3 or values.shape[0] < 2:
            raise DimensionError(
                f"segment values must have shape (n_theta >= 2, m, n), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("segment contains non-finite values")
        k = values.shape[0] - 1
        if theta is None:
            theta = np.linspace(-tau, 0.0, k + 1)
        else:
            theta = np.asarray(theta, dtype=float)
            if theta.shape != (k + 1,) or theta[0] != -tau or theta[-1] != 0.0:
                raise DimensionError("theta nodes must run from -tau to 0 with one node per field")
            if np.any(np.diff(theta) <= 0):
                raise DimensionError("theta nodes must increase strictly")
            if not np.allclose(np.diff(theta), tau / k, rtol=1e-9, atol=0):
                raise DimensionError("theta grid must be uniform")
        if nodes is None:
            nodes = default_nodes(values.shape[2])
        SpatialField(values[-1], nodes)  # validates the spatial grid
        values.setflags(write=False)
        self.tau = tau
        self.theta = _frozen(theta)
        self.values = values
        self.nodes = nodes if not np.asarray(nodes).flags.writeable else _frozen(nodes)

    @classmethod
    def _trusted(cls, tau, theta, values, nodes):
        obj = cls.__new__(cls)
        obj.tau = tau
        obj.theta = theta
        obj.values = values
        obj.nodes = nodes
        return obj

    # -- constructors ----------------------------------------------------

    @classmethod
    def from_fields(cls, tau, fields):
        fields = list(fields)
        shapes = {f.shape for f in fields}
        if len(shapes) != 1:
            raise DimensionError(f"fields have differing shapes {sorted(shapes)}")
        return cls(tau, np.stack([f.values for f in fields]), fields[0].nodes)

    @classmethod
    def from_function(cls, tau, n_intervals, fn, nodes, components=1):
        """Sample ``fn(theta, x)`` (broadcasting over x) on a uniform grid.

        ``fn`` may return shape ``(n,)`` for scalar problems or ``(m, n)``.
        """
        nodes = np.asarray(nodes, dtype=float)
        theta = np.linspace(-float(tau), 0.0, int(n_intervals) + 1)
        vals = np.empty((theta.size, components, nodes.size))
        for j, th in enumerate(theta):
            vals[j] = np.broadcast_to(np.asarray(fn(th, nodes), dtype=float), (components, nodes.size))
        return cls(tau, vals, nodes, theta)

    @classmethod
    def constant(cls, tau, n_intervals, value, nodes, components=1):
        nodes = np.asarray(nodes, dtype=float)
        vals = np.full((int(n_intervals) + 1, components, nodes.size), float(value))
        return cls(tau, vals, nodes)

    @classmethod
    def zeros_like(cls, other):
        return cls._trusted(other.tau, other.theta, _frozen(np.zeros_like(other.values)), other.nodes)

    # -- accessors -------------------------------------------------------

    @property
    def n_intervals(self):
        return self.values.shape[0] - 1

    @property
    def field_shape(self):
        return self.values.shape[1:]

    @property
    def step(self):
        return self.tau / self.n_intervals

    @cached_property
    def head(self):
        """phi(0) as a SpatialField."""
        return SpatialField._trusted(_readonly_view(self.values[-1]), self.nodes)

    def at_index(self, j):
        return SpatialField._trusted(_readonly_view(self.values[j]), self.nodes)

    @property
    def fields(self):
        return tuple(self.at_index(j) for j in range(self.values.shape[0]))

    def value_at(self, theta):
        """Raw (m, n) array of the linear interpolant at ``theta``."""
        theta = float(theta)
        tol = 1e-12 * self.tau
        if theta < -self.tau - tol or theta > tol:
            raise DomainError(f"theta={theta} outside [-{self.tau}, 0]")
        theta = min(max(theta, -self.tau), 0.0)
        pos = (theta + self.tau) / self.step
        j = int(np.floor(pos))
        if j >= self.n_intervals:
            return self.values[-1]
        frac = pos - j
        if abs(frac) < 1e-12:
            return self.values[j]
        if abs(frac - 1.0) < 1e-12:
            return self.values[j + 1]
        return (1.0 - frac) * self.values[j] + frac * self.values[j + 1]

    def evaluate(self, theta):
        return SpatialField._trusted(_readonly_view(np.asarray(self.value_at(theta))), self.nodes)

    def resample(self, n_intervals):
        """Re-sample onto a uniform grid with ``n_intervals`` intervals by interpolation."""
        theta = np.linspace(-self.tau, 0.0, int(n_intervals) + 1)
        vals = np.stack([self.value_at(th) for th in theta])
        return HistorySegment(self.tau, vals, self.nodes, theta)

    def with_values(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise DimensionError(f"expected shape {self.values.shape}, got {values.shape}")
        return HistorySegment(self.tau, values, self.nodes, self.theta)

    def _check_compatible(self, other):
        if not isinstance(other, HistorySegment):
            return
        if other.values.shape != self.values.shape or other.tau != self.tau:
            raise DimensionError("segments live on different grids")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values - _vals(other))

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return (f"HistorySegment(tau={self.tau}, n_theta={self.values.shape[0]}, "
                f"field_shape={self.field_shape})")


def segment_sup_norm(phi):
    """sup over theta of the sup norm; exact on piecewise-linear segments (attained at nodes)."""
    return float(np.max(np.abs(phi.values)))


def _weights(phi, w):
    if not isinstance(w, RenormWeights):
        w = RenormWeights(float(w), phi.tau)
    if w.tau != phi.tau and not np.isclose(w.tau, phi.tau, rtol=1e-12, atol=0):
        raise DimensionError(f"renorm weights for tau={w.tau} applied to segment with tau={phi.tau}")
    return w.inverse(phi.theta)


def renorm(phi, w):
    """Exponentially weighted norm: max over theta-nodes of exp(r theta) * |phi(theta)|_sup.

    ``w`` is a :class:`RenormWeights` or just the rate ``r``.
    """
    weights = _weights(phi, w)
    flat = phi.values.reshape(phi.values.shape[0], -1)
    return _kernels.weighted_sup(flat, weights)


def renorm_distance(a, b, w):
    a._check_compatible(b)
    weights = _weights(a, w)
    diff = (a.values - b.values).reshape(a.values.shape[0], -1)
    return _kernels.weighted_sup(diff, weights)


def evaluate(phi, theta):
    return phi.evaluate(theta)

"""Truncated Taylor series ("jets") and their propagation through networks.

A :class:`TruncatedSeries` stores normalized Taylor coefficients
``coeffs[k] = f^(k)(x0) / k!``.  The leading axis of ``coeffs`` is the
coefficient index; any trailing axes are batch axes, so a single series can
carry a whole layer of neurons at many points at once.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError, StructuralError

SUPPORTED_ACTIVATIONS = ("sin", "tanh")


class TruncatedSeries:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 0:
            raise StructuralError("series needs at least one coefficient")
        self.coeffs = coeffs

    @classmethod
    def constant(cls, value, degree):
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((degree + 1,) + value.shape)
        coeffs[0] = value
        return cls(coeffs)

    @classmethod
    def variable(cls, value, degree, slope=1.0):
        """Series of ``value + slope * h`` (the seed for differentiation)."""
        series = cls.constant(value, degree)
        if degree >= 1:
            series.coeffs[1] = slope
        return series

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __len__(self):
        return self.coeffs.shape[0]

    def __repr__(self):
        return f"TruncatedSeries({self.coeffs.tolist()!r})"

    def _check(self, other):
        if not isinstance(other, TruncatedSeries):
            raise StructuralError(f"expected TruncatedSeries, got {type(other).__name__}")
        if other.degree != self.degree:
            raise StructuralError(
                f"degree mismatch: {self.degree} vs {other.degree}"
            )

    def __add__(self, other):
        self._check(other)
        return TruncatedSeries(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return TruncatedSeries(self.coeffs - other.coeffs)

    def __neg__(self):
        return TruncatedSeries(-self.coeffs)

    def scale(self, factor):
        return TruncatedSeries(self.coeffs * factor)

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self.scale(other)
        self._check(other)
        return TruncatedSeries(_cauchy(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def derivatives(self) -> np.ndarray:
        """Derivative values ``k! * coeffs[k]``."""
        fact = np.array([math.factorial(k) for k in range(len(self))], dtype=float)
        return self.coeffs * fact.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))

    def sin(self):
        return sin_cos(self)[0]

    def cos(self):
        return sin_cos(self)[1]

    def tanh(self):
        return tanh(self)


def series_add_mul(a, b, op):
    """Dispatch helper: ``op`` is one of ``add``, ``sub``, ``mul``, ``scale``."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        if not isinstance(b, TruncatedSeries):
            raise StructuralError("mul needs two series; use 'scale' for scalars")
        return a * b
    if op == "scale":
        return a.scale(b)
    raise ConfigurationError(f"unknown series op {op!r}")


def _cauchy(a, b):
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(out.shape[0]):
        acc = a[0] * b[k]
        for i in range(1, k + 1):
            acc = acc + a[i] * b[k - i]
        out[k] = acc
    return out


def sin_cos(a: TruncatedSeries):
    """Coefficients of ``sin(a)`` and ``cos(a)`` via s' = c a', c' = -s a'."""
    ac = a.coeffs
    s = np.empty_like(ac)
    c = np.empty_like(ac)
    s[0] = np.sin(ac[0])
    c[0] = np.cos(ac[0])
    for k in range(1, ac.shape[0]):
        acc_s = ac[1] * c[k - 1]
        acc_c = ac[1] * s[k - 1]
        for j in range(2, k + 1):
            acc_s = acc_s + j * ac[j] * c[k - j]
            acc_c = acc_c + j * ac[j] * s[k - j]
        s[k] = acc_s / k
        c[k] = -acc_c / k
    return TruncatedSeries(s), TruncatedSeries(c)


def tanh(a: TruncatedSeries):
    """Coefficients of ``tanh(a)`` via t' = (1 - t^2) a'."""
    ac = a.coeffs
    t = np.empty_like(ac)
    p = np.empty_like(ac)  # p = 1 - t^2
    t[0] = np.tanh(ac[0])
    p[0] = 1.0 - t[0] * t[0]
    for k in range(1, ac.shape[0]):
        acc = ac[1] * p[k - 1]
        for j in range(2, k + 1):
            acc = acc + j * ac[j] * p[k - j]
        t[k] = acc / k
        sq = t[0] * t[k]
        for i in range(1, k + 1):
            sq = sq + t[i] * t[k - i]
        p[k] = -sq
    return TruncatedSeries(t)


def series_elementary(a: TruncatedSeries, fn: str) -> TruncatedSeries:
    if fn == "sin":
        return sin_cos(a)[0]
    if fn == "tanh":
        return tanh(a)
    raise ConfigurationError(f"unsupported activation {fn!r}")


def affine(a: TruncatedSeries, weight, bias) -> TruncatedSeries:
    """Apply ``h @ weight + bias`` to every coefficient; bias only shifts the value."""
    out = [a.coeffs[0] @ weight + bias]
    out.extend(c @ weight for c in a.coeffs[1:])
    return TruncatedSeries(np.stack(out))


def derivative_jets(net, x, t, axis: str, max_order: int) -> np.ndarray:
    """Pure derivatives of ``net`` along one input axis at many points.

    Returns an array of shape ``(max_order + 1, n_points)`` where row ``k``
    holds the k-th derivative with respect to ``axis`` in physical units.
    """
    if axis not in ("x", "t"):
        raise ConfigurationError(f"axis must be 'x' or 't', got {axis!r}")
    if net.activation not in SUPPORTED_ACTIVATIONS:
        raise ConfigurationError(f"unsupported activation {net.activation!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xi, ti = net.normalize_inputs(x, t)
    if axis == "x":
        first = TruncatedSeries.variable(xi, max_order, 1.0 / net.x_scale)
        second = TruncatedSeries.constant(ti, max_order)
    else:
        first = TruncatedSeries.constant(xi, max_order)
        second = TruncatedSeries.variable(ti, max_order, 1.0 / net.t_scale)
    h = TruncatedSeries(np.stack([first.coeffs, second.coeffs], axis=-1))
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = affine(h, w, b)
        if i < n_layers - 1:
            h = series_elementary(h, net.activation)
    out = h.coeffs[..., 0]
    out = out * net.u_scale
    out[0] = out[0] + net.u_shift
    return TruncatedSeries(out).derivatives()


def derivatives_at(net, point, axis: str, max_order: int) -> np.ndarray:
    """Value and derivatives ``d^k u / d axis^k`` for ``k = 0..max_order`` at one point."""
    x, t = point
    return derivative_jets(net, [x], [t], axis, max_order)[:, 0]

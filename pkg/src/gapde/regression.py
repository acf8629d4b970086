"""Least-squares fitting for genome fitness and the STRidge sparse baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StructuralError
from .genome import module_name
from .linear_system import LinearSystem, module_column

CONDITION_LIMIT = 1e10


@dataclass
class FitResult:
    coeffs: np.ndarray
    mse: float
    condition_flag: bool = False
    support: tuple = ()
    history: list = field(default_factory=list)


def _column_norms(design):
    norms = np.linalg.norm(design, axis=0)
    return norms


def least_squares(sys: LinearSystem) -> FitResult:
    """Minimum-norm least squares via SVD.

    The condition number is estimated after scaling every column to unit
    norm, so it reflects near-collinearity rather than mixed units.
    """
    design, target = sys.design, sys.target
    n, m = design.shape
    if n < m:
        raise StructuralError(f"underdetermined system: {n} rows, {m} columns")
    norms = _column_norms(design)
    flag = bool(np.any(norms == 0) or not np.all(np.isfinite(design)))
    if flag:
        coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
    else:
        scaled = design / norms
        w, _, _, sv = np.linalg.lstsq(scaled, target, rcond=None)
        coeffs = w / norms
        flag = bool(sv[-1] == 0 or sv[0] / sv[-1] > CONDITION_LIMIT)
    resid = target - design @ coeffs
    return FitResult(coeffs, float(resid @ resid) / n, flag, tuple(range(m)))


@dataclass
class FixedLibrary:
    """Pre-enumerated candidate terms, each a module (``()`` is the constant 1)."""

    terms: list

    @classmethod
    def powers_times_derivatives(cls, max_power, max_order):
        """``u^p * d^k u/dx^k`` for p <= max_power, k <= max_order (k = 0 means none)."""
        terms = []
        for k in range(max_order + 1):
            for p in range(max_power + 1):
                terms.append(tuple([0] * p + ([k] if k > 0 else [])))
        return cls(terms)

    @classmethod
    def named(cls, name):
        if name == "burgers12":
            return cls.powers_times_derivatives(2, 3)
        if name == "chaffee16":
            return cls.powers_times_derivatives(3, 3)
        raise ConfigurationError(f"unknown library {name!r}")

    def __len__(self):
        return len(self.terms)

    def names(self):
        return ["1" if not t else module_name(t) for t in self.terms]

    def columns(self, data) -> np.ndarray:
        return np.column_stack([module_column(t, data.spatial) for t in self.terms])


def _ridge(x, y, lam):
    if lam == 0:
        return np.linalg.lstsq(x, y, rcond=None)[0]
    d = x.shape[1]
    return np.linalg.solve(x.T @ x + lam * np.eye(d), x.T @ y)


def stridge(library, target, ridge_lambda=None, threshold=0.0, max_iters=10,
            normalize=True) -> FitResult:
    """Sequential threshold ridge regression.

    ``library`` is an ``(N, d)`` column matrix.  With ``normalize`` the
    columns are scaled to unit 2-norm and ``threshold`` applies to the
    coefficients of the scaled problem; returned coefficients are in the
    original units.  ``ridge_lambda=None`` means ``1e-5 * N``.
    """
    x0 = np.asarray(library, dtype=float)
    y = np.asarray(target, dtype=float)
    n, d = x0.shape
    if threshold < 0:
        raise ConfigurationError("threshold must be non-negative")
    lam = 1e-5 * n if ridge_lambda is None else float(ridge_lambda)
    scale = _column_norms(x0) if normalize else np.ones(d)
    scale = np.where(scale == 0, 1.0, scale)
    x = x0 / scale

    w = _ridge(x, y, lam)
    support = np.arange(d)
    history = [tuple(support.tolist())]
    for _ in range(max_iters):
        keep = support[np.abs(w[support]) >= threshold]
        if keep.size == support.size:
            break
        w = np.zeros(d)
        support = keep
        history.append(tuple(support.tolist()))
        if support.size == 0:
            break
        w[support] = _ridge(x[:, support], y, lam)
    coeffs = np.zeros(d)
    if support.size:
        coeffs[support] = np.linalg.lstsq(x[:, support], y, rcond=None)[0]
    coeffs = coeffs / scale
    resid = y - x0 @ coeffs
    return FitResult(coeffs, float(resid @ resid) / n, False,
                     tuple(support.tolist()), history)


def stridge_search(library, target, thresholds=None, l0_penalty=1e-3, ridge_lambda=None,
                   max_iters=10, seed=0, test_fraction=0.2) -> FitResult:
    """Sweep thresholds and keep the fit with the lowest penalized test loss.

    Loss is ``test_mse / mean(test_target^2) + l0_penalty * |support|``.  The
    default threshold grid spans 1e-4 to 1 times the largest scaled ridge
    coefficient on 25 log-spaced values (plus zero).
    """
    x = np.asarray(library, dtype=float)
    y = np.asarray(target, dtype=float)
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    test, train = perm[:n_test], perm[n_test:]
    if thresholds is None:
        norms = _column_norms(x[train])
        norms = np.where(norms == 0, 1.0, norms)
        lam = 1e-5 * train.size if ridge_lambda is None else ridge_lambda
        w0 = _ridge(x[train] / norms, y[train], lam)
        top = float(np.max(np.abs(w0)))
        thresholds = np.concatenate([[0.0], top * np.logspace(-4, 0, 25)])
    y_ref = float(np.mean(y[test] ** 2)) or 1.0
    best, best_loss = None, math.inf
    for tol in thresholds:
        fit = stridge(x[train], y[train], ridge_lambda, tol, max_iters)
        r = y[test] - x[test] @ fit.coeffs
        loss = float(r @ r) / test.size / y_ref + l0_penalty * len(fit.support)
        if loss < best_loss:
            best, best_loss = (tol, fit), loss
    tol, fit = best
    # refit the chosen support on all rows
    coeffs = np.zeros(x.shape[1])
    if fit.support:
        idx = list(fit.support)
        coeffs[idx] = np.linalg.lstsq(x[:, idx], y, rcond=None)[0]
    resid = y - x @ coeffs
    return FitResult(coeffs, float(resid @ resid) / n, False, fit.support, fit.history)

"""Autoregressive models: sequentially discounted (SDAR) and local OLS fits.

The discounted model keeps exponentially weighted sufficient statistics and
re-solves the Yule-Walker system after every observation. Weights are
normalized by their running sum, so ``r = 0`` gives plain equal-weight
(batch) estimates and ``r > 0`` converges to the ``(1 - r) * old + r * new``
recursion once the weight sum saturates at ``1 / r``.
"""

from __future__ import annotations

from collections import deque
from typing import NamedTuple, Optional

import numpy as np


def levinson_durbin(c: np.ndarray, order: int) -> np.ndarray:
    """Solve ``toeplitz(c[:order]) @ w = c[1:order + 1]`` recursively.

    Returns AR coefficients ``w[j-1]`` for lag ``j``. If the autocovariance
    sequence stops being positive definite at some order (zero variance,
    prediction error <= 0 or a reflection coefficient of magnitude >= 1) the
    recursion stops and the remaining coefficients stay zero.
    """
    c = np.asarray(c, dtype=float)
    w = np.zeros(order)
    if order == 0 or not c[0] > 1e-300 or not np.isfinite(c[: order + 1]).all():
        return w
    err = c[0]
    for m in range(order):
        acc = c[m + 1] - np.dot(w[:m], c[m:0:-1])
        refl = acc / err
        if not np.isfinite(refl) or abs(refl) >= 1.0:
            break
        prev = w[:m].copy()
        w[:m] = prev - refl * prev[::-1]
        w[m] = refl
        err *= 1.0 - refl * refl
        if err <= 1e-300 * c[0]:
            break
    return w


class SdarModel:
    """Sequentially discounting AR(k) model with parameters {w, mu, sigma}.

    ``update(v)`` folds ``v`` into the statistics, re-estimates the
    parameters, and returns the squared one-step error ``(v - v_hat)**2``
    where ``v_hat`` uses the *updated* parameters and the previous ``k``
    values. During warm-up (fewer than ``k`` previous values) it returns None.
    """

    def __init__(self, order: int = 4, discount: float = 0.01):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not 0.0 <= discount < 1.0:
            raise ValueError("discount r must be in [0, 1)")
        self.order = order
        self.discount = discount
        self.n = 0
        self.ref: Optional[float] = None  # shift for numerical stability
        self._w_mu = 0.0
        self._sum_v = 0.0
        # per lag j, discounted sums over the rows m >= j that have a lag-j partner
        self._w_lag = np.zeros(order + 1)   # sum of row weights
        self._sum_xy = np.zeros(order + 1)  # sum v_m * v_{m-j}
        self._sum_x = np.zeros(order + 1)   # sum v_m
        self._sum_y = np.zeros(order + 1)   # sum v_{m-j}
        self._w_e = 0.0
        self._sum_e2 = 0.0
        self.history: deque = deque(maxlen=order)
        self.coef = np.zeros(order)
        self.mean = 0.0
        self.autocov = np.zeros(order + 1)
        self.variance = 0.0
        self.last_prediction: Optional[float] = None

    @property
    def ready(self) -> bool:
        return len(self.history) == self.order

    def update(self, v: float) -> Optional[float]:
        v = float(v)
        if self.ref is None:
            self.ref = v
        x = v - self.ref
        keep = 1.0 - self.discount
        self.n += 1
        self._w_mu = keep * self._w_mu + 1.0
        self._sum_v = keep * self._sum_v + x
        mu = self._sum_v / self._w_mu

        # lag-j partners of x; rows without one contribute nothing to C_j
        avail = len(self.history) + 1
        lags = np.zeros(self.order + 1)
        lags[0] = x
        for j in range(1, avail):
            lags[j] = self.history[-j]
        has = np.arange(self.order + 1) < avail
        self._w_lag = keep * self._w_lag + has
        self._sum_xy = keep * self._sum_xy + x * lags
        self._sum_x = keep * self._sum_x + x * has
        self._sum_y = keep * self._sum_y + lags

        self.mean = mu + self.ref
        # every C_j is normalized by the total weight (the biased estimator),
        # which keeps the Toeplitz system positive semi-definite at r = 0
        w = self._w_mu
        self.autocov = (self._sum_xy - mu * (self._sum_x + self._sum_y) + mu * mu * self._w_lag) / w
        self.coef = levinson_durbin(self.autocov, self.order)
        lags = lags if self.ready else None

        score = None
        if lags is not None:
            pred = mu + float(np.dot(self.coef, lags[1:] - mu))
            self.last_prediction = pred + self.ref
            err = x - pred
            score = err * err
            self._w_e = keep * self._w_e + 1.0
            self._sum_e2 = keep * self._sum_e2 + score
            self.variance = self._sum_e2 / self._w_e
        self.history.append(x)
        return score

    def predict_next(self) -> Optional[float]:
        """Forecast of the next value from the current state."""
        if not self.ready:
            return None
        mu = self.mean - self.ref
        lags = np.array([self.history[-j] for j in range(1, self.order + 1)])
        return mu + float(np.dot(self.coef, lags - mu)) + self.ref


def sdar_update(model: SdarModel, value: float) -> Optional[float]:
    """Functional alias of :meth:`SdarModel.update`; returns the squared error."""
    return model.update(value)


class ArFit(NamedTuple):
    coef: np.ndarray
    mean: float
    variance: float


def fit_ar(values, order: int, ridge: float = 1e-6) -> ArFit:
    """Ridge least-squares AR(order) fit on one mean-centered window.

    Rows are the positions of the window that have ``order`` predecessors
    inside it. With no rows (window no longer than the order) the
    coefficients are zero and the model reduces to the window mean.
    """
    v = np.asarray(values, dtype=float)
    mu = float(v.mean())
    z = v - mu
    n_rows = len(z) - order
    if n_rows <= 0:
        return ArFit(np.zeros(order), mu, float(z.var()))
    X = np.column_stack([z[order - j : len(z) - j] for j in range(1, order + 1)])
    y = z[order:]
    A = X.T @ X + ridge * np.eye(order)
    coef = np.linalg.solve(A, X.T @ y)
    resid = y - X @ coef
    return ArFit(coef, mu, float(np.mean(resid * resid)))


def ar_predict(fit: ArFit, previous) -> float:
    """One-step forecast given the previous values (oldest first)."""
    prev = np.asarray(previous, dtype=float)
    order = len(fit.coef)
    lags = prev[::-1][:order]
    return fit.mean + float(np.dot(fit.coef, lags - fit.mean))


def fit_predict_batch(windows: np.ndarray, order: int, ridge: float = 1e-6,
                      inputs: Optional[np.ndarray] = None) -> np.ndarray:
    """Fit one ridge AR(order) model per row of ``windows`` and forecast the
    value that follows each row.

    Vectorized equivalent of ``ar_predict(fit_ar(row, order), row)`` applied
    row by row. With ``inputs`` (same shape) the fitted models are applied to
    the lags of ``inputs`` rather than of ``windows``.
    """
    W = np.asarray(windows, dtype=float)
    n_win, width = W.shape
    mu = W.mean(axis=1, keepdims=True)
    Z = W - mu
    n_rows = width - order
    if n_rows <= 0:
        return mu[:, 0].copy()
    Zin = Z if inputs is None else np.asarray(inputs, dtype=float) - mu
    # X[b, row, j-1] = Z[b, order + row - j]
    X = np.stack([Z[:, order - j : width - j] for j in range(1, order + 1)], axis=2)
    y = Z[:, order:]
    A = np.einsum("bri,brj->bij", X, X) + ridge * np.eye(order)
    rhs = np.einsum("bri,br->bi", X, y)
    coef = np.linalg.solve(A, rhs[..., None])[..., 0]
    lags = Zin[:, ::-1][:, :order]
    return mu[:, 0] + np.einsum("bi,bi->b", coef, lags)

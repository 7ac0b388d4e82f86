import threading

import numpy as np
from cachetools import LRUCache


class GeometryError(Exception):
    """Base class for every failure raised by the toolkit."""


class DomainError(GeometryError, ValueError):
    """A field was evaluated outside its declared chart of validity."""


class JetOrderError(GeometryError):
    """Not enough Taylor coefficients for the requested derivatives."""


class SingularCoframeError(GeometryError):
    """The coframe matrix is not invertible (degenerate contact structure)."""


class QuadratureError(GeometryError):
    """A quadrature or extrapolation did not converge."""


class InconsistentBundleError(GeometryError, ValueError):
    """Normal-coordinate data violating the constraints at the center."""


class InvariantViolation(GeometryError, ValueError):
    """Configuration outside the documented parameter ranges."""


class Memo:
    """Bounded LRU memo table safe to share between threads.

    Values are computed outside the lock; when two threads race on a key the
    first stored value wins.
    """

    def __init__(self, maxsize: int):
        self._data: LRUCache = LRUCache(maxsize=maxsize)
        self._lock = threading.Lock()

    def get(self, key, default=None):
        with self._lock:
            return self._data.get(key, default)

    def put(self, key, value):
        with self._lock:
            hit = self._data.get(key)
            if hit is None:
                self._data[key] = value
                return value
            return hit

    def __setitem__(self, key, value) -> None:
        with self._lock:
            self._data[key] = value

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)

    @property
    def maxsize(self) -> int:
        return self._data.maxsize


def relative_error(value: complex, reference: complex) -> float:
    """|value - reference| / |reference|, or the absolute error when reference is 0."""
    scale = abs(reference)
    return abs(value - reference) / scale if scale > 0 else abs(value - reference)


def fit_decay_slope(radii, values) -> float:
    """Least-squares slope of log|values| against log(radii)."""
    radii = np.asarray(radii, dtype=float)
    values = np.abs(np.asarray(values))
    if np.any(values <= 0):
        raise ValueError("decay fit needs nonzero values")
    slope, _ = np.polyfit(np.log(radii), np.log(values), 1)
    return float(slope)


def extrapolate_inverse_power(xs, values, power: float = 1.0, terms: int = 1) -> tuple[float, float]:
    """Fit values ~ v_inf + sum_k c_k x^(-k*power) and return (v_inf, error estimate).

    The error estimate is the spread between the limit and the last sample
    when the fit is exact, otherwise the least-squares residual norm.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    cols = [np.ones_like(xs)] + [xs ** (-k * power) for k in range(1, terms + 1)]
    matrix = np.stack(cols, axis=1)
    coef, res, _, _ = np.linalg.lstsq(matrix, values, rcond=None)
    limit = float(coef[0])
    if res.size and res[0] > 0:
        return limit, float(np.sqrt(res[0]))
    return limit, float(abs(values[-1] - limit))


def geometric_tail(contributions) -> float:
    """Sum of the geometric continuation of the last two contributions."""
    if len(contributions) < 2:
        return 0.0
    last, prev = contributions[-1], contributions[-2]
    if prev == 0:
        return 0.0
    q = last / prev
    if not 0 <= q < 1:
        return 0.0
    return last * q / (1 - q)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)

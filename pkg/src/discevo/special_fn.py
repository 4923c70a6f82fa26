"""Bessel functions of integer order and log-domain envelope helpers.

Both Bessel families are evaluated with Miller's backward recurrence,
normalized a posteriori by the generating-function identities

    e^x = I_0(x) + 2 * sum_{k>=1} I_k(x)
    1   = J_0(x) + 2 * sum_{k>=1} J_{2k}(x)

The recurrence carries a running log-scale so orders whose values lie far
below the double-precision range are still available through the
``log_*`` variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

X_MAX = 700.0

_RESCALE = 1e200
_LOG_RESCALE = math.log(_RESCALE)
# relative size of the start-order term below which Miller has converged
_LOG_TAIL_TOL = math.log(1e-20)


@dataclass(frozen=True)
class LogMagnitude:
    """A number stored as ``phase * exp(log_abs)``.

    ``log_abs`` is ``-inf`` for zero, in which case ``phase`` is ignored.
    """

    log_abs: float
    phase: complex = 1.0

    @classmethod
    def from_value(cls, z) -> "LogMagnitude":
        z = complex(z)
        if z == 0:
            return cls(-math.inf, 1.0)
        return cls(math.log(abs(z)), z / abs(z))

    @property
    def value(self) -> complex:
        if self.log_abs == -math.inf:
            return 0j
        return self.phase * math.exp(self.log_abs)

    @property
    def is_zero(self) -> bool:
        return self.log_abs == -math.inf


def _miller_pass(x: float, nmax: int, start: int, kind: str):
    sgn = 1.0 if kind == "i" else -1.0
    f = np.empty(start + 1)
    off = np.empty(start + 1)
    f_next, f_cur, offset = 0.0, 1e-30, 0.0
    f[start], off[start] = f_cur, 0.0
    for k in range(start, 0, -1):
        f_prev = (2.0 * k / x) * f_cur + sgn * f_next
        f_next, f_cur = f_cur, f_prev
        if abs(f_cur) > _RESCALE:
            f_cur /= _RESCALE
            f_next /= _RESCALE
            offset += _LOG_RESCALE
        f[k - 1] = f_cur
        off[k - 1] = offset

    terms = f * np.exp(off - offset)
    if kind == "i":
        norm = terms[0] + 2.0 * math.fsum(terms[1:])
    else:
        norm = terms[0] + 2.0 * math.fsum(terms[2::2])
    log_norm = math.log(abs(norm))
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(f)) + (off - offset) - log_norm
    sign = np.sign(f) * math.copysign(1.0, norm)
    converged = log_abs[start - 1] < _LOG_TAIL_TOL
    return log_abs[: nmax + 1], sign[: nmax + 1], converged


def _miller(x: float, nmax: int, kind: str):
    """Log-magnitudes and signs of orders 0..nmax at x > 0 (I scaled by e^-x)."""
    start = 2 * max(nmax, int(math.ceil(x))) + 40
    for _ in range(12):
        log_abs, sign, converged = _miller_pass(x, nmax, start, kind)
        if converged:
            return log_abs, sign
        start *= 2
    raise ArithmeticError(f"Miller recurrence did not converge for x={x}")


def _check_args(nmax: int, x: float) -> None:
    if nmax < 0:
        raise ValueError("order must be non-negative")
    if not math.isfinite(x) or abs(x) > X_MAX:
        raise OverflowError(f"|x| = {abs(x)} exceeds the supported range {X_MAX}")


def log_bessel_i_array(nmax: int, x: float):
    """Return ``(log|I_n(x)|, sign I_n(x))`` for ``n = 0..nmax``."""
    _check_args(nmax, x)
    if x == 0:
        log_abs = np.full(nmax + 1, -np.inf)
        log_abs[0] = 0.0
        return log_abs, np.ones(nmax + 1)
    log_abs, sign = _miller(abs(x), nmax, "i")
    log_abs = log_abs + abs(x)
    if x < 0:
        sign = sign * (-1.0) ** np.arange(nmax + 1)
    return log_abs, sign


def log_bessel_j_array(nmax: int, x: float):
    """Return ``(log|J_n(x)|, sign J_n(x))`` for ``n = 0..nmax``."""
    _check_args(nmax, x)
    if x == 0:
        log_abs = np.full(nmax + 1, -np.inf)
        log_abs[0] = 0.0
        return log_abs, np.ones(nmax + 1)
    log_abs, sign = _miller(abs(x), nmax, "j")
    if x < 0:
        sign = sign * (-1.0) ** np.arange(nmax + 1)
    return log_abs, sign


def bessel_i_array(nmax: int, x: float) -> np.ndarray:
    """Modified Bessel functions I_0(x), ..., I_nmax(x)."""
    log_abs, sign = log_bessel_i_array(nmax, x)
    return sign * np.exp(log_abs)


def bessel_j_array(nmax: int, x: float) -> np.ndarray:
    """Bessel functions J_0(x), ..., J_nmax(x)."""
    log_abs, sign = log_bessel_j_array(nmax, x)
    return sign * np.exp(log_abs)


def bessel_i(n: int, x: float) -> float:
    """Modified Bessel function of the first kind of integer order ``n >= 0``.

    Raises
    ------
    OverflowError
        If ``|x| > 700``.
    """
    return float(bessel_i_array(n, x)[n])


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind of integer order ``n >= 0``."""
    return float(bessel_j_array(n, x)[n])


def _series(n: int, x: float, alternating: bool) -> float:
    if x == 0:
        return 1.0 if n == 0 else 0.0
    half = abs(x) / 2.0
    terms = []
    k = 0
    while True:
        log_t = (n + 2 * k) * math.log(half) - math.lgamma(k + 1) - math.lgamma(n + k + 1)
        t = math.exp(log_t)
        terms.append(-t if (alternating and k % 2) else t)
        if k > half and t < 1e-18 * abs(math.fsum(terms)):
            break
        k += 1
    val = math.fsum(terms)
    return -val if (x < 0 and n % 2) else val


def bessel_i_series(n: int, x: float) -> float:
    """Power-series oracle for I_n(x); accurate for moderate |x|."""
    return _series(n, x, alternating=False)


def bessel_j_series(n: int, x: float) -> float:
    """Alternating power-series oracle for J_n(x); use only for small |x|."""
    return _series(n, x, alternating=True)


def log_envelope_values(k, T: float, delta: float, eps: float = 0.0, C: float = 1.0):
    """Vectorized log of ``C e^k (2+eps)^-k k^-k T^k delta^k`` for k >= 1."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("envelope index k must be >= 1")
    if T <= 0 or delta <= 0 or C <= 0 or eps < 0:
        raise ValueError("need T > 0, delta > 0, C > 0, eps >= 0")
    return math.log(C) + k * (1.0 + math.log(T) + math.log(delta) - math.log(2.0 + eps) - np.log(k))


def log_envelope(k: int, T: float, delta: float, eps: float = 0.0, C: float = 1.0) -> LogMagnitude:
    """Critical two-time decay envelope in log form."""
    return LogMagnitude(float(log_envelope_values(k, T, delta, eps, C)))


def model_envelope_values(q, T: float):
    """Vectorized log of ``q^(-1/2) (e T / 2q)^q``."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 1):
        raise ValueError("q must be >= 1")
    if T <= 0:
        raise ValueError("T must be positive")
    return -0.5 * np.log(q) + q * (1.0 + math.log(T) - math.log(2.0) - np.log(q))


def model_envelope(q: int, T: float) -> LogMagnitude:
    """Decay rate attained by the Bessel model solutions, in log form."""
    return LogMagnitude(float(model_envelope_values(q, T)))

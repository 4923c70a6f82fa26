"""Decay limits for stationary solutions ``A u = 0`` and lattice
Schrödinger eigenfunctions ``Delta_d u + V u = 0``.

For a banded ``A`` the external blocks give
``M_j >= (2s)^-1 delta a^-1 M_{j-1}`` with
``M_j = max_{-s < m <= s} ||u_{j+m}||``, so a nonzero kernel vector cannot
decay faster than ``q^j`` for ``q < delta / (2 s a)``.  On ``Z^d`` the
sup-norm shells satisfy

    S_{N-1} <= (4d - 2 + ||V||_inf) S_N + S_{N+1},

which bounds the decay rate of a nonzero eigenfunction by
``-||V||_inf - 4d + 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .eigen_engine import extend_eigenvector
from .exceptions import InvalidArgument, PreconditionViolation
from .lattice_ops import BandConstants, BandedOperator, LatticeState, adjoint, apply, audit_constants

KERNEL_TOL = 1e-10
SLOPE_WINDOW = 10


@dataclass
class StationaryVerdict:
    """``rate_estimate`` is a finite-range surrogate for ``liminf ln M_j / j``."""

    rate_estimate: float
    threshold: float
    forces_zero: bool
    M_profile: np.ndarray
    j_values: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    degenerate: bool = False
    log_rate_threshold: float = field(init=False)

    def __post_init__(self):
        self.log_rate_threshold = math.log(self.threshold) if self.threshold > 0 else -math.inf


def kernel_decay_threshold(consts: BandConstants, s: int) -> float:
    """``delta / (2 s a)``."""
    if consts.a <= 0 or consts.delta <= 0 or s < 1:
        raise InvalidArgument("need a > 0, delta > 0 and s >= 1")
    return consts.delta / (consts.a * 2 * s)


def kernel_vector(A: BandedOperator, seeds) -> LatticeState:
    """Exact kernel element of ``A`` on the window interior, grown from ``2s`` seed blocks."""
    fam = extend_eigenvector(adjoint(A), seeds, 0.0)
    return LatticeState(A.window, 0.0, fam.values)


def _interior_residual(u: LatticeState, A: BandedOperator) -> float:
    lo, hi = A.interior
    res = apply(A, u).values[lo - A.window[0]:hi - A.window[0] + 1]
    norm_u = float(np.linalg.norm(u.values))
    return float(np.linalg.norm(res)) / norm_u


def _window_slopes(j: np.ndarray, logs: np.ndarray, width: int) -> np.ndarray:
    slopes = []
    for i in range(len(j) - width + 1):
        jj, ll = j[i:i + width], logs[i:i + width]
        if np.all(np.isfinite(ll)):
            slopes.append(np.polyfit(jj, ll, 1)[0])
    return np.array(slopes)


def check_stationary_decay(u: LatticeState, A: BandedOperator,
                           consts: BandConstants | None = None) -> StationaryVerdict:
    """Profile ``M_j`` for ``j >= 0`` and its smallest slope over windows of 10.

    Raises
    ------
    PreconditionViolation
        If ``||A u|| > 1e-10 ||u||`` on the interior rows.
    """
    if u.window != A.window or u.m != A.m:
        raise InvalidArgument("state must live on the operator's window")
    consts = audit_constants(A) if consts is None else consts
    s = A.s
    threshold = kernel_decay_threshold(consts, s)
    if not np.any(u.values != 0):
        return StationaryVerdict(-math.inf, threshold, True, np.zeros(0), degenerate=True)
    residual = _interior_residual(u, A)
    if residual > KERNEL_TOL:
        raise PreconditionViolation(
            f"state is not in the kernel: relative interior residual {residual:.3e}", residual=residual)
    norms = u.norms()
    j_min, j_max = u.window
    j = np.arange(max(0, j_min + s - 1), j_max - s + 1)
    M = np.array([norms[jj - s + 1 - j_min:jj + s + 1 - j_min].max() for jj in j])
    with np.errstate(divide="ignore"):
        logs = np.log(M)
    slopes = _window_slopes(j, logs, SLOPE_WINDOW)
    if slopes.size == 0:
        raise InvalidArgument("window too short for a decay-rate estimate")
    rate = float(np.min(slopes))
    return StationaryVerdict(rate, threshold, rate < math.log(threshold), M, j_values=j)


def schrodinger_threshold(d: int, v_inf: float) -> float:
    """Log-rate threshold ``-v_inf - 4d + 1`` for sup-norm shells."""
    if d < 1 or v_inf < 0:
        raise InvalidArgument("need d >= 1 and v_inf >= 0")
    return -v_inf - 4 * d + 1


def lattice_laplacian(u: np.ndarray) -> np.ndarray:
    """``Delta_d u`` on the points whose neighbours are all inside the array."""
    inner = tuple(slice(1, -1) for _ in range(u.ndim))
    out = -2 * u.ndim * u[inner]
    for ax in range(u.ndim):
        for shift in (0, 2):
            sl = [slice(1, -1)] * u.ndim
            sl[ax] = slice(shift, u.shape[ax] - 2 + shift)
            out = out + u[tuple(sl)]
    return out


def shell_radius(shape) -> np.ndarray:
    """``|n|_inf = max_i |n_i|`` on a centred grid."""
    grids = np.meshgrid(*[np.arange(n) - n // 2 for n in shape], indexing="ij")
    return np.max(np.abs(np.stack(grids)), axis=0)


@dataclass
class ShellAudit:
    N: np.ndarray
    shell_max: np.ndarray
    inequality_slack: np.ndarray
    violations: int
    rate_estimate: float
    threshold: float
    forces_zero: bool
    vacuous: bool = False

    @property
    def log_shell_max(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.shell_max)

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N", "shell_max", "log_shell_max", "inequality_slack"])
        for n, m, lm, sl in zip(self.N, self.shell_max, self.log_shell_max, self.inequality_slack):
            writer.writerow([int(n), repr(float(m)), repr(float(lm)), repr(float(sl))])


def shell_decay_audit(u: np.ndarray, V: np.ndarray, d: int | None = None,
                      tol: float = 1e-10) -> ShellAudit:
    """Shell maxima, the three-shell inequality, and the decay rate of ``u``.

    ``u`` and ``V`` are arrays of odd side ``2L+1`` centred at the origin.
    The rate is ``min ln(max(S_N, S_{N+1})) / N`` over the outer half of
    the shells; ``inequality_slack`` is right side minus left side for
    ``N = 1 .. L-1`` (``nan`` elsewhere).

    Raises
    ------
    PreconditionViolation
        If ``Delta_d u + V u`` exceeds ``tol * max|u|`` on the interior.
    """
    u = np.asarray(u, dtype=complex)
    V = np.asarray(V, dtype=complex)
    d = u.ndim if d is None else d
    if u.ndim != d or V.shape != u.shape:
        raise InvalidArgument("u and V must be d-dimensional arrays of equal shape")
    if any(n % 2 == 0 or n < 5 for n in u.shape) or len(set(u.shape)) != 1:
        raise InvalidArgument("expected a centred cube of odd side >= 5")
    L = u.shape[0] // 2
    v_inf = float(np.max(np.abs(V)))
    threshold = schrodinger_threshold(d, v_inf)
    scale = float(np.max(np.abs(u)))
    N = np.arange(L + 1)
    if scale == 0:
        return ShellAudit(N, np.zeros(L + 1), np.full(L + 1, np.nan), 0, -math.inf,
                          threshold, True, vacuous=True)
    inner = tuple(slice(1, -1) for _ in range(d))
    residual = float(np.max(np.abs(lattice_laplacian(u) + V[inner] * u[inner])))
    if residual > tol * scale:
        raise PreconditionViolation(f"eigen-equation residual {residual:.3e}", residual=residual)
    radius = shell_radius(u.shape)
    absu = np.abs(u)
    S = np.array([absu[radius == n].max() for n in N])
    slack = np.full(L + 1, np.nan)
    c = 4 * d - 2 + v_inf
    slack[1:L] = c * S[1:L] + S[2:] - S[:L - 1]
    violations = int(np.sum(slack[1:L] < -tol * scale))
    pair = np.maximum(S[1:L], S[2:])
    with np.errstate(divide="ignore"):
        ratios = np.log(pair) / N[1:L]
    start = max(0, (L - 1) // 2)
    rate = float(np.min(ratios[start:])) if ratios[start:].size else math.nan
    return ShellAudit(N, S, slack, violations, rate, threshold, rate < threshold)


def exponential_eigenfunction_1d(L: int):
    """``u_n = z^|n|`` with ``z = 2 - sqrt 3`` and the potential making it exact.

    Off the origin ``V = -2``; at the origin ``V_0 = 2 - 2z``.
    """
    z = 2.0 - math.sqrt(3.0)
    n = np.arange(-L, L + 1)
    u = z ** np.abs(n)
    V = np.full(n.size, -2.0)
    V[L] = 2.0 - 2.0 * z
    return u, V


def separable_eigenfunction(factors) -> tuple[np.ndarray, np.ndarray]:
    """Product ``u = prod_i f_i(n_i)`` with ``V = sum_i V_i(n_i)`` from 1-d pairs."""
    u = np.ones(())
    V = np.zeros(())
    for f, v in factors:
        u = np.multiply.outer(u, f)
        V = np.add.outer(V, v)
    return u, V

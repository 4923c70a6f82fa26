"""Time evolution ``du/dt = A u`` on a window, closed-form model solutions,
and the weighted-energy audit ``f_B(t) = sum_j B^|j| ||u_j(t)||^2``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import InvalidArgument, NumericError, ResourceError, UnsupportedArgument
from .lattice_ops import BandedOperator, LatticeState, _as_window
from .special_fn import log_bessel_i_array, log_bessel_j_array

DENSE_CAP = 2048

# Pade(13,13) coefficients and the 1-norm bound under which it is accurate
# to unit roundoff (Higham 2005).
_PADE13 = (64764752532480000., 32382376266240000., 7771770303897600.,
           1187353796428800., 129060195264000., 10559470521600.,
           670442572800., 33522128640., 1323241920., 40840800., 960960.,
           16380., 182., 1.)
_THETA13 = 5.371920351148152


def expm(M: np.ndarray) -> np.ndarray:
    """Dense matrix exponential by scaling and squaring with Pade order 13."""
    M = np.asarray(M)
    n = M.shape[0]
    norm1 = np.linalg.norm(M, 1) if n else 0.0
    squarings = 0
    if norm1 > _THETA13:
        squarings = max(0, int(math.ceil(math.log2(norm1 / _THETA13))))
        M = M / 2.0 ** squarings
    b = _PADE13
    ident = np.eye(n, dtype=M.dtype)
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M2 @ M4
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
             + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2) + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident
    F = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        F = F @ F
    return F


@dataclass
class Trajectory:
    operator: BandedOperator | None
    times: np.ndarray
    states: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.states) != len(self.times):
            raise InvalidArgument("one state per time required")
        for t, st in zip(self.times, self.states):
            if st.window != self.states[0].window:
                raise InvalidArgument("all states must share the window")
            if st.t != t:
                raise InvalidArgument(f"state stamped {st.t} listed at time {t}")

    @property
    def window(self):
        return self.states[0].window

    def to_csv(self, fh, extra_columns: dict | None = None) -> None:
        """Write rows ``t, n, block_index, re, im, log_abs`` to an open text file."""
        write_states_csv(fh, self.states, extra_columns)


def write_states_csv(fh, states, extra_columns: dict | None = None) -> None:
    extra_columns = extra_columns or {}
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "n", "block_index", "re", "im", "log_abs", *extra_columns])
    extra = [repr(float(v)) for v in extra_columns.values()]
    for st in states:
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(st.values))
        if st.log_abs is not None and st.m == 1:
            log_abs = st.log_abs[:, None]
        for i, n in enumerate(st.indices):
            for b in range(st.m):
                z = st.values[i, b]
                writer.writerow([repr(st.t), int(n), b, repr(float(z.real)), repr(float(z.imag)),
                                 repr(float(log_abs[i, b])), *extra])


def propagate(A: BandedOperator, u0: LatticeState, times) -> Trajectory:
    """Evaluate ``u(t) = exp((t - t0) A) u0`` at each requested time.

    Raises
    ------
    ResourceError
        If the dense dimension ``window * m`` exceeds 2048.
    NumericError
        If the result contains NaN or inf.
    """
    if u0.window != A.window or u0.m != A.m:
        raise InvalidArgument("initial state does not live on the operator's window")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidArgument("times must be a non-empty list")
    if times[0] != u0.t:
        raise InvalidArgument(f"times[0]={times[0]} differs from u0.t={u0.t}")
    if np.any(np.diff(times) <= 0):
        raise InvalidArgument("times must be strictly increasing")
    dim = A.size * A.m
    if dim > DENSE_CAP:
        raise ResourceError(f"dense dimension {dim} exceeds cap {DENSE_CAP}")
    dense = A.to_dense()
    x0 = u0.values.reshape(-1)
    states = [u0]
    for t in times[1:]:
        x = expm((t - times[0]) * dense) @ x0
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite values at t={t}")
        states.append(LatticeState(A.window, t, x.reshape(A.size, A.m)))
    return Trajectory(A, times, states)


def _i_power(n: np.ndarray) -> np.ndarray:
    return np.array([1, 1j, -1, -1j])[np.mod(n, 4)]


def model_solution_heat(alpha, t: float, t0: float, window) -> LatticeState:
    """``u_n(t) = I_n(2 alpha (t - t0)) exp(-2 alpha (t - t0))``.

    Solves ``du/dt = alpha * Delta_1 u``.  ``alpha`` must be real or purely
    imaginary; the imaginary case uses ``I_n(iy) = i^n J_n(y)``.
    """
    window = _as_window(window)
    n = np.arange(window[0], window[1] + 1)
    an = np.abs(n)
    nmax = int(an.max())
    alpha = complex(alpha)
    tau = float(t) - float(t0)
    if alpha.imag == 0:
        x = 2 * alpha.real * tau
        log_i, sign = log_bessel_i_array(nmax, abs(x))
        log_abs = log_i[an] - x
        sgn = sign[an] * (np.where(an % 2 == 1, -1.0, 1.0) if x < 0 else 1.0)
        phase = sgn.astype(complex)
    elif alpha.real == 0:
        y = 2 * alpha.imag * tau
        log_j, sign = log_bessel_j_array(nmax, y)
        log_abs = log_j[an]
        phase = _i_power(an) * sign[an] * np.exp(-1j * y)
    else:
        raise UnsupportedArgument("alpha must be real or purely imaginary")
    return LatticeState(window, t, phase * np.exp(log_abs), log_abs=log_abs, phase=phase)


def model_solution_schrodinger(t: float, window, amplitude=1.0) -> LatticeState:
    """``u_n(t) = amplitude * i^-n * exp(-2it) * J_n(1 - 2t)``.

    This sequence satisfies ``du/dt = +i Delta_1 u``; its complex conjugate
    solves ``du/dt = -i Delta_1 u``.
    """
    window = _as_window(window)
    n = np.arange(window[0], window[1] + 1)
    an = np.abs(n)
    log_j, sign = log_bessel_j_array(int(an.max()), 1.0 - 2.0 * t)
    # J_{-n} = (-1)^n J_n
    sgn = sign[an] * np.where((n < 0) & (an % 2 == 1), -1.0, 1.0)
    amp = complex(amplitude)
    values = amp * _i_power(-n) * np.exp(-2j * t) * sgn * np.exp(log_j[an])
    if amp == 0:
        return LatticeState(window, t, values)
    phase = amp / abs(amp) * _i_power(-n) * np.exp(-2j * t) * sgn
    log_abs = log_j[an] + math.log(abs(amp))
    return LatticeState(window, t, values, log_abs=log_abs, phase=phase)


def model_solution_higher(s: int, C, t: float, t0: float, window, damped: bool = False) -> LatticeState:
    """``u_n(t) = C_r I_q(2 (t - t0))`` with ``n = q s + r``, ``0 <= r < s``.

    The bare sequence solves the evolution for ``A + 2I`` where ``A`` is
    :func:`~discevo.lattice_ops.build_higher_order_model`; ``damped=True``
    multiplies by ``exp(-2 (t - t0))`` so that it solves ``du/dt = A u``.
    """
    if s < 1:
        raise InvalidArgument("s must be >= 1")
    C = np.broadcast_to(np.asarray(C, dtype=complex), (s,))
    window = _as_window(window)
    n = np.arange(window[0], window[1] + 1)
    q, r = np.divmod(n, s)
    aq = np.abs(q)
    x = 2.0 * (float(t) - float(t0))
    log_i, sign = log_bessel_i_array(int(aq.max()), abs(x))
    shift = -x if damped else 0.0
    log_abs = log_i[aq] + shift
    sgn = sign[aq] * (np.where(aq % 2 == 1, -1.0, 1.0) if x < 0 else 1.0)
    values = C[r] * sgn * np.exp(log_abs)
    absC = np.abs(C[r])
    with np.errstate(divide="ignore"):
        log_abs = log_abs + np.log(absC)
    phase = np.where(absC > 0, C[r] / np.where(absC > 0, absC, 1.0), 1.0) * sgn
    return LatticeState(window, t, values, log_abs=log_abs, phase=phase)


@dataclass
class WeightedEnergyReport:
    """Audit of ``f_B(t) <= exp(C1 B^s t) f_B(0)`` on a sampling grid."""

    B: float
    times: np.ndarray
    log_f_values: np.ndarray
    fitted_C1: float
    bound_satisfied: bool
    diverged: bool = False
    sharp_C1: float = math.nan
    f_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        with np.errstate(over="ignore"):
            self.f_values = np.exp(self.log_f_values)


def log_weighted_energy(state: LatticeState, B: float) -> float:
    """``log sum_j B^|j| ||u_j||^2`` computed without forming the terms."""
    terms = np.abs(state.indices) * math.log(B) + 2.0 * state.log_norms()
    if np.all(terms == -np.inf):
        return -math.inf
    return float(logsumexp(terms))


def sharp_growth_constant(A: BandedOperator, B: float) -> float:
    """Smallest ``C1`` with ``f_B(t) <= exp(C1 B^s t) f_B(0)`` for every solution.

    Equals ``2 lambda_max(H) / B^s`` where ``H`` is the Hermitian part of
    ``W^(1/2) A W^(-1/2)`` and ``W = diag(B^|j|)``.
    """
    if B <= 1:
        raise InvalidArgument(f"B must exceed 1, got {B}")
    dim = A.size * A.m
    if dim > DENSE_CAP:
        raise ResourceError(f"dense dimension {dim} exceeds cap {DENSE_CAP}")
    j = A.indices
    k = j[:, None] + np.arange(-A.s, A.s + 1)[None, :]
    weight = np.power(float(B), 0.5 * (np.abs(j)[:, None] - np.abs(k)))
    scaled = BandedOperator(A.s, A.window, A.blocks * weight[:, :, None, None], check_external=False)
    M = scaled.to_dense()
    top = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[-1])
    return 2.0 * top / B ** A.s


def weighted_energy_audit(traj: Trajectory, B_list, s: int | None = None) -> list:
    """One :class:`WeightedEnergyReport` per weight ``B > 1``.

    ``C1`` is the largest observed growth rate
    ``[log f_B(t_{i+1}) - log f_B(t_i)] / (B^s (t_{i+1} - t_i))``.  When
    the trajectory carries its operator the sharp constant from
    :func:`sharp_growth_constant` is attached for comparison.
    """
    if s is None:
        if traj.operator is None:
            raise InvalidArgument("band width s required when the trajectory has no operator")
        s = traj.operator.s
    reports = []
    times = traj.times
    for B in B_list:
        if B <= 1:
            raise InvalidArgument(f"B must exceed 1, got {B}")
        logs = np.array([log_weighted_energy(st, B) for st in traj.states])
        diverged = bool(np.any(np.isnan(logs)) or np.any(logs == np.inf))
        if diverged:
            reports.append(WeightedEnergyReport(B, times, logs, math.nan, False, True))
            continue
        if np.all(logs == -np.inf):
            reports.append(WeightedEnergyReport(B, times, logs, 0.0, True))
            continue
        if len(times) < 2:
            reports.append(WeightedEnergyReport(B, times, logs, 0.0, True))
            continue
        rates = np.diff(logs) / (B ** s * np.diff(times))
        c1 = float(np.max(rates))
        predicted = logs[0] + c1 * B ** s * (times - times[0])
        ok = bool(np.all(logs <= predicted + math.log1p(1e-8)))
        sharp = math.nan
        if traj.operator is not None and traj.operator.size * traj.operator.m <= DENSE_CAP:
            sharp = sharp_growth_constant(traj.operator, B)
        reports.append(WeightedEnergyReport(B, times, logs, c1, ok, sharp_C1=sharp))
    return reports


def lemma_log_bound(state: LatticeState, j: int, s: int) -> float:
    """Bound on ``log ||u_j||`` from ``||u_j||^2 <= B^-|j| f_B`` with ``B = k``.

    Here ``k = [|j|/s] + 1``; for ``k = 1`` the weight ``B = 2`` is used.
    """
    k = abs(j) // s + 1
    B = max(float(k), 2.0)
    return 0.5 * (log_weighted_energy(state, B) - abs(j) * math.log(B))

"""Entire-function probe ``phi(t, lam) = sum_j <e_j(lam), u_j(t)>``.

``e(lam)`` is the analytic family of generalized eigenvectors of ``A*``
through fixed seeds.  Along a solution of ``du/dt = A u`` the probe obeys
``phi(t, lam) = exp(lam t) phi(0, lam)``; two-time decay of ``u`` caps its
exponential type, and the two facts together are incompatible unless
``phi`` vanishes.  This module evaluates ``phi`` in the log domain,
audits the identity and the growth cap, fits indicator slopes, and
classifies decay against the critical envelope.

Pairing convention: the family is built at ``conj(lam)`` and paired as
``sum_j e_j^H u_j``.  Then ``d/dt phi = sum_j e_j^H (A u)_j =
sum_j ((A* e)_j)^H u_j = lam phi``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .eigen_engine import EigenFamily, extend_eigenvector, unit_seeds
from .exceptions import InvalidArgument, PreconditionViolation
from .lattice_ops import BandedOperator, LatticeState, audit_constants
from .special_fn import LogMagnitude, log_envelope_values, model_envelope_values

TAIL_STEPS = 10
TAIL_TOL = 1e-14
DEFECT_FLOOR_LOG = math.log(1e-300)
K0 = 5
MARGIN_TOL = 1e-9
SUB_CRITICAL = "sub_critical"
CRITICAL = "critical"
SUPER_CRITICAL = "super_critical"


@dataclass
class PhiSample:
    """One value of ``phi(t, lam)`` stored as ``phase * exp(log_abs)``."""

    lam: complex
    t: float
    log_abs: float
    phase: complex = 1.0
    truncation_warning: bool = False

    @property
    def value(self) -> complex:
        return LogMagnitude(self.log_abs, self.phase).value

    @property
    def is_zero(self) -> bool:
        return self.log_abs == -math.inf


def _log_sum(log_abs: np.ndarray, phase: np.ndarray):
    """``log|sum|`` and phase of ``sum phase_i exp(log_abs_i)``, index-ascending."""
    finite = log_abs > -np.inf
    if not np.any(finite):
        return -math.inf, 1.0 + 0j
    ref = float(np.max(log_abs[finite]))
    scaled = phase[finite] * np.exp(log_abs[finite] - ref)
    total = complex(math.fsum(scaled.real), math.fsum(scaled.imag))
    if total == 0:
        return -math.inf, 1.0 + 0j
    return ref + math.log(abs(total)), total / abs(total)


def _tail_negligible(log_terms: np.ndarray, width: int) -> bool:
    if log_terms.size <= 2 * width:
        return True
    head = logsumexp(log_terms) if np.any(log_terms > -np.inf) else -np.inf
    if head == -np.inf:
        return True
    tail = np.concatenate([log_terms[:width], log_terms[-width:]])
    if not np.any(tail > -np.inf):
        return True
    return float(logsumexp(tail)) - float(head) < math.log(TAIL_TOL)


def _phi_terms(u: LatticeState, fam: EigenFamily):
    if u.window != fam.window or u.m != fam.m:
        raise InvalidArgument("state and eigenfamily must share window and block size")
    u_log, u_dir = u.log_parts()
    inner = np.einsum("ja,ja->j", np.conj(fam.mantissa), u_dir)
    absin = np.abs(inner)
    with np.errstate(divide="ignore"):
        log_terms = np.where(absin > 0, np.log(np.where(absin > 0, absin, 1.0)), -np.inf) \
            + fam.log_scale + u_log
    phase = np.where(absin > 0, inner / np.where(absin > 0, absin, 1.0), 1.0)
    log_terms = np.where(np.isnan(log_terms), -np.inf, log_terms)
    return log_terms, phase


def phi(u: LatticeState, fam: EigenFamily) -> PhiSample:
    """``sum_j e_j^H u_j`` for a family built at ``conj(lam)``.

    The returned sample carries ``lam = conj(fam.lam)``.  The truncation
    flag is raised when the outermost 10 band-steps hold more than 1e-14 of
    the absolute sum.
    """
    log_terms, phase = _phi_terms(u, fam)
    log_abs, ph = _log_sum(log_terms, phase)
    warn = not _tail_negligible(log_terms, TAIL_STEPS * fam.s)
    return PhiSample(lam=complex(np.conj(fam.lam)), t=u.t, log_abs=log_abs, phase=ph,
                     truncation_warning=warn)


def phi_at(u: LatticeState, A: BandedOperator, lam, seeds=None) -> PhiSample:
    """Build the family at ``conj(lam)`` and pair it with ``u``."""
    if seeds is None:
        seeds = unit_seeds(A.s, 0, A.m)
    return phi(u, extend_eigenvector(A, seeds, np.conj(complex(lam))))


def default_lambda_grid(radius: float = 2.0, rings: int = 4, angles: int = 6) -> np.ndarray:
    """``0`` plus ``rings x angles`` points on circles up to ``radius``."""
    pts = [0j]
    for i in range(1, rings + 1):
        r = radius * i / rings
        pts.extend(r * np.exp(2j * np.pi * np.arange(angles) / angles))
    return np.array(pts)


@dataclass
class EntireIdentityReport:
    defect_max: float
    lambdas: np.ndarray
    defects: np.ndarray
    boundary_spill: float
    samples: list = field(repr=False, default_factory=list)


def _relative_defect(a: PhiSample, log_ref: float, phase_ref: complex) -> float:
    """``|a - ref| / max(|ref|, floor)`` evaluated relative to ``ref``."""
    denom = max(log_ref, DEFECT_FLOOR_LOG)
    if a.is_zero and log_ref == -math.inf:
        return 0.0
    da = a.phase * math.exp(a.log_abs - denom) if not a.is_zero else 0.0
    dr = phase_ref * math.exp(log_ref - denom) if log_ref > -math.inf else 0.0
    return abs(da - dr)


def check_entire_identity(traj, A: BandedOperator, seeds=None, lambda_grid=None) -> EntireIdentityReport:
    """Largest ``|phi(t,lam) - exp(lam t) phi(0,lam)| / max(|exp(lam t) phi(0,lam)|, 1e-300)``.

    ``boundary_spill`` is the largest share of ``|phi|`` carried by the
    outer ``s`` sites of the window, where the truncated operator differs
    from the infinite one.
    """
    if seeds is None:
        seeds = unit_seeds(A.s, 0, A.m)
    lambda_grid = default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=complex)
    t0 = traj.times[0]
    defects = np.zeros(len(lambda_grid))
    spill = 0.0
    samples = []
    for i, lam in enumerate(lambda_grid):
        fam = extend_eigenvector(A, seeds, np.conj(lam))
        p0 = phi(traj.states[0], fam)
        samples.append(p0)
        worst = 0.0
        for st in traj.states[1:]:
            pt = phi(st, fam)
            samples.append(pt)
            growth = lam * (st.t - t0)
            log_ref = p0.log_abs + growth.real if not p0.is_zero else -math.inf
            phase_ref = p0.phase * np.exp(1j * growth.imag)
            worst = max(worst, _relative_defect(pt, log_ref, phase_ref))
            log_terms, _ = _phi_terms(st, fam)
            if not pt.is_zero:
                edge = np.concatenate([log_terms[:A.s], log_terms[-A.s:]])
                if np.any(edge > -np.inf):
                    spill = max(spill, math.exp(min(0.0, float(logsumexp(edge)) - pt.log_abs)))
        defects[i] = worst
    return EntireIdentityReport(defect_max=float(np.max(defects)), lambdas=lambda_grid,
                                defects=defects, boundary_spill=spill, samples=samples)


@dataclass
class DecayReport:
    """Per-class audit of ``log ||u_j||`` at ``t = 0, T`` against the critical envelope."""

    k: np.ndarray
    observed: np.ndarray
    envelope: np.ndarray
    margins: np.ndarray
    verdict: str
    log_C: float
    eps: float
    k0: int = K0

    @property
    def band(self) -> np.ndarray:
        return np.log(self.k) + 5.0


def _class_index(indices: np.ndarray, s: int) -> np.ndarray:
    return np.abs(np.floor_divide(indices, s))


def decay_audit(u0: LatticeState, uT: LatticeState, T: float, delta: float, eps: float,
                s: int, C: float | None = None, k0: int = K0, k_max: int | None = None) -> DecayReport:
    """Compare ``max(log||u_j(0)||, log||u_j(T)||)`` per class ``k = |[j/s]|`` with
    ``log(C e^k (2+eps)^-k k^-k T^k delta^k)`` for ``k0 <= k <= k_max``.

    ``C`` is calibrated so that the margin at ``k0`` is zero unless given.
    The verdict is

    * ``sub_critical`` when every margin is ``<= 0`` and either ``eps > 0``
      or the last margin has dropped below ``-(ln k + 5)``;
    * ``super_critical`` when some margin exceeds ``ln k + 5``;
    * ``critical`` otherwise.

    The band ``ln k + 5`` absorbs the polynomial factors hidden in the
    two-sided ``≍`` comparison with the model solution.
    """
    if u0.window != uT.window:
        raise InvalidArgument("states must share the window")
    idx = u0.indices
    j_min, j_max = u0.window
    if k_max is None:
        k_max = min((j_max - s + 1) // s, -j_min // s)
    if k_max < k0:
        raise InvalidArgument(f"window {u0.window} too small to audit classes from k0={k0}")
    k = np.arange(k0, k_max + 1)
    both = np.maximum(u0.log_norms(), uT.log_norms())
    cls = _class_index(idx, s)
    observed = np.array([np.max(both[cls == kk]) for kk in k])
    env1 = log_envelope_values(k, T, delta, eps)
    if C is not None:
        log_C = math.log(C)
    elif observed[0] > -np.inf:
        log_C = float(observed[0] - env1[0])
    else:
        log_C = 0.0
    envelope = env1 + log_C
    margins = observed - envelope
    band = np.log(k) + 5.0
    if np.all(margins <= MARGIN_TOL) and (eps > 0 or margins[-1] < -band[-1]):
        verdict = SUB_CRITICAL
    elif np.any(margins > band):
        verdict = SUPER_CRITICAL
    else:
        verdict = CRITICAL
    return DecayReport(k=k, observed=observed, envelope=envelope, margins=margins,
                       verdict=verdict, log_C=log_C, eps=eps, k0=k0)


def envelope_state(window, T: float, delta: float, eps: float, s: int = 1, C: float = 1.0,
                   t: float = 0.0) -> LatticeState:
    """Positive scalar state with ``u_j`` equal to the envelope at ``k = |[j/s]|``
    (and ``C`` on the ``k = 0`` class)."""
    st = LatticeState.zeros(window, 1, t)
    k = _class_index(st.indices, s)
    log_abs = np.full(st.size, math.log(C))
    pos = k >= 1
    log_abs[pos] = log_envelope_values(k[pos], T, delta, eps, C)
    phase = np.ones(st.size, dtype=complex)
    return LatticeState(st.window, t, np.exp(log_abs), log_abs=log_abs, phase=phase)


# eigenvector growth (|lam| + b)^(k+2) summed against the envelope leaves a
# factor (|lam| + b)^2 times the sqrt(|lam|) of the saddle-point sum
POLY_ALLOWANCE = 2.5


@dataclass
class GrowthBoundReport:
    """``margins`` exclude the polynomial allowance, so ``max(margins) <= 0`` is the
    bound with a constant fitted at ``lam = 0`` alone."""

    holds: bool
    worst_margin: float
    log_C_fit: float
    margins: np.ndarray
    lambdas: np.ndarray
    poly_allowance: float = POLY_ALLOWANCE

    @property
    def holds_without_allowance(self) -> bool:
        return bool(np.max(self.margins) <= MARGIN_TOL)


def growth_bound_check(u0: LatticeState, uT: LatticeState, A: BandedOperator, T: float,
                       eps: float, lambda_grid, delta: float | None = None,
                       poly_allowance: float = POLY_ALLOWANCE) -> GrowthBoundReport:
    """Check ``ln|phi(t,lam)| <= ln C_fit + T|lam|/(2+eps) + p ln(1+|lam|)`` for ``t = 0, T``.

    ``C_fit`` is the largest ``|phi(t, 0)|`` over unit seeds; every unit
    seed is probed on the grid.  The term ``p ln(1+|lam|)`` (``p = 2.5`` by
    default) admits the polynomial factor that a constant fitted at
    ``lam = 0`` cannot absorb; it does not change the exponential type.

    Raises
    ------
    PreconditionViolation
        If the pair does not pass :func:`decay_audit` as sub-critical.
    """
    if delta is None:
        delta = audit_constants(A).delta
    rep = decay_audit(u0, uT, T, delta, eps, A.s)
    if rep.verdict != SUB_CRITICAL:
        raise PreconditionViolation(f"decay audit verdict is {rep.verdict}",
                                    residual=float(np.max(rep.margins)))
    lambda_grid = np.asarray(lambda_grid, dtype=complex)
    seed_list = [unit_seeds(A.s, r, A.m, c) for r in range(-A.s, A.s) for c in range(A.m)]
    log_C = -math.inf
    logs = np.full((len(seed_list), len(lambda_grid)), -np.inf)
    for a, seeds in enumerate(seed_list):
        for b, lam in enumerate(lambda_grid):
            fam = extend_eigenvector(A, seeds, np.conj(lam))
            logs[a, b] = max(phi(u0, fam).log_abs, phi(uT, fam).log_abs)
        fam0 = extend_eigenvector(A, seeds, 0.0)
        log_C = max(log_C, phi(u0, fam0).log_abs, phi(uT, fam0).log_abs)
    if log_C == -math.inf:
        return GrowthBoundReport(True, -math.inf, log_C, np.full(len(lambda_grid), -np.inf),
                                 lambda_grid, poly_allowance)
    margins = np.max(logs, axis=0) - log_C - T * np.abs(lambda_grid) / (2.0 + eps)
    slack = margins - poly_allowance * np.log1p(np.abs(lambda_grid))
    return GrowthBoundReport(bool(np.max(slack) <= MARGIN_TOL), float(np.max(slack)), log_C,
                             margins, lambda_grid, poly_allowance)


@dataclass
class IndicatorEstimate:
    """Least-squares slope of ``ln|phi(r e^{i theta})|`` against ``r``.

    A finite-range surrogate for the indicator ``limsup ln|phi| / r``.
    """

    theta: float
    slope: float
    r_range: tuple[float, float]
    undefined: bool = False
    near_zero: bool = False


def indicator_estimate(samples, theta: float | None = None, r_range=None,
                       near_zero_tol: float = 0.05) -> IndicatorEstimate:
    """Fit the slope from :class:`PhiSample` values along one ray.

    ``samples`` needs at least 8 distinct radii inside ``r_range``.
    """
    lams = np.array([s.lam for s in samples])
    radii = np.abs(lams)
    if theta is None:
        nz = radii > 0
        theta = float(np.angle(lams[nz][0])) if np.any(nz) else 0.0
    logs = np.array([s.log_abs for s in samples])
    if r_range is None:
        r_range = (float(radii.min()), float(radii.max()))
    sel = (radii >= r_range[0]) & (radii <= r_range[1])
    if np.unique(radii[sel]).size < 8:
        raise InvalidArgument("indicator fit needs at least 8 radii")
    keep = sel & (logs > -np.inf)
    if not np.any(keep):
        return IndicatorEstimate(theta, math.nan, tuple(r_range), undefined=True)
    if np.unique(radii[keep]).size < 2:
        return IndicatorEstimate(theta, math.nan, tuple(r_range), undefined=True)
    slope = float(np.polyfit(radii[keep], logs[keep], 1)[0])
    return IndicatorEstimate(theta, slope, tuple(r_range), near_zero=abs(slope) < near_zero_tol)


def ray_samples(u: LatticeState, A: BandedOperator, theta: float, radii, seeds=None) -> list:
    if seeds is None:
        seeds = unit_seeds(A.s, 0, A.m)
    return [phi_at(u, A, r * np.exp(1j * theta), seeds) for r in radii]


def weighted_alpha_norm(c, alpha: float, origin: int = 0) -> float:
    """``sqrt(sum_m (1 + |m|)^alpha |c_m|^2)`` with ``m = i - origin`` for entry ``i``."""
    c = np.asarray(c, dtype=complex).ravel()
    m = np.arange(c.size) - origin
    return float(np.sqrt(np.sum((1.0 + np.abs(m)) ** alpha * np.abs(c) ** 2)))


def phi_norm(state: LatticeState, alpha: float, origin: int = 0) -> float:
    """``sqrt(sum_k exp(|k|^(1/2)) ||c_k||_alpha^2)`` over the lattice sites."""
    w = np.array([weighted_alpha_norm(state.values[i], alpha, origin) for i in range(state.size)])
    with np.errstate(divide="ignore"):
        terms = np.sqrt(np.abs(state.indices)) + 2.0 * np.log(w)
    if np.all(terms == -np.inf):
        return 0.0
    return float(np.exp(0.5 * logsumexp(terms)))


def model_margins(u0: LatticeState, uT: LatticeState, T: float, q_range=(10, 60)):
    """``log(|u_q(0)| + |u_q(T)|) - log model_envelope(q, T)`` for scalar states."""
    q = np.arange(q_range[0], q_range[1] + 1)
    if q[-1] > u0.window[1]:
        raise InvalidArgument("window does not reach the requested q range")
    pos = q - u0.window[0]
    both = np.logaddexp(u0.log_norms()[pos], uT.log_norms()[pos])
    return q, both - model_envelope_values(q, T)


def write_phi_csv(fh, samples) -> None:
    """Rows ``lambda_re, lambda_im, t, log_abs_phi, arg_phi``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["lambda_re", "lambda_im", "t", "log_abs_phi", "arg_phi"])
    for smp in samples:
        arg = float(np.angle(smp.phase)) if not smp.is_zero else 0.0
        writer.writerow([repr(float(smp.lam.real)), repr(float(smp.lam.imag)), repr(smp.t),
                         repr(float(smp.log_abs)), repr(arg)])


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def experiment_report(experiment: str, defect_max=None, verdict=None, indicator=(), margins=(),
                      **extra) -> str:
    """JSON document with the standard experiment keys (sorted, stable floats)."""
    doc = {
        "experiment": experiment,
        "defect_max": None if defect_max is None else _finite(defect_max),
        "verdict": verdict,
        "indicator": [{"theta": _finite(e.theta), "slope": _finite(e.slope)} for e in indicator],
        "margins": [_finite(m) for m in margins],
    }
    doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=2)


@dataclass
class SharpnessResult:
    """Model-solution margins, its decay verdict, and the sub-critical candidates."""

    T: float
    q: np.ndarray
    model_margins: np.ndarray
    within_band: bool
    decay: DecayReport
    candidates: dict


def sharpness_experiment(T: float = 1.0, q_range=(10, 60), window=(-80, 80), rng=None,
                         n_random: int = 3) -> SharpnessResult:
    """Heat model started at ``t0 = T/2`` against the critical envelope.

    Candidate solutions of the truncated evolution (zero data, a unit
    impulse, and small random compact data) are also audited; any that is
    sub-critical at both times must have vanishing moment functionals.
    """
    from .evolution import model_solution_heat, propagate
    from .favard import build_all_families, moment_functional
    from .lattice_ops import build_laplacian_1d

    u0 = model_solution_heat(1.0, 0.0, T / 2, window)
    uT = model_solution_heat(1.0, T, T / 2, window)
    q, mm = model_margins(u0, uT, T, q_range)
    within = bool(np.all(np.abs(mm) <= np.log(q) + 5.0))
    decay = decay_audit(u0, uT, T, 1.0, 0.0, 1, k_max=q_range[1])

    A = build_laplacian_1d(1.0, (-30, 30))
    rng = np.random.default_rng(0) if rng is None else rng
    data = {"zero": LatticeState.zeros(A.window), "impulse": LatticeState.delta(A.window, 0)}
    for i in range(n_random):
        vals = np.zeros(A.size, dtype=complex)
        vals[25:36] = 1e-3 * (rng.normal(size=11) + 1j * rng.normal(size=11))
        data[f"random_{i}"] = LatticeState(A.window, 0.0, vals)
    fams = build_all_families(A)
    candidates = {}
    for name, start in data.items():
        traj = propagate(A, start, [0.0, T])
        rep = decay_audit(traj.states[0], traj.states[1], T, 1.0, 0.0, 1)
        moments = max(float(np.max(np.abs(moment_functional(traj.states[0], f, 0.0).moments)))
                      for f in fams)
        candidates[name] = {"verdict": rep.verdict, "max_moment": moments}
    return SharpnessResult(T=T, q=q, model_margins=mm, within_band=within, decay=decay,
                           candidates=candidates)

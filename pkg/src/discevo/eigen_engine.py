"""Generalized eigenvectors ``A* e = lam e`` grown from ``2s`` seed blocks.

Seeds fix ``e_{-s}, ..., e_{s-1}``.  Row ``k >= 0`` of the eigen-equation
is solved for its rightmost unknown ``e_{k+s}``; row ``-k`` (``k >= 1``)
for its leftmost unknown ``e_{-k-s}``.  Values are kept as a mantissa
block times ``exp(log_scale)`` so families with large ``|lam|`` do not
overflow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConstraintViolation, InvalidArgument
from .lattice_ops import SINGULAR_TOL, BandConstants, BandedOperator, adjoint

_LOG_RESCALE_AT = 300.0


@dataclass
class EigenFamily:
    """One generalized eigenvector of ``A*`` on a window."""

    lam: complex
    s: int
    window: tuple[int, int]
    seeds: np.ndarray
    mantissa: np.ndarray
    log_scale: np.ndarray
    residuals: np.ndarray
    seed_norm_M: float

    @property
    def m(self) -> int:
        return self.mantissa.shape[1]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    @property
    def values(self) -> np.ndarray:
        """Materialized blocks ``e_j``; entries beyond double range become inf."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self.mantissa * np.exp(self.log_scale)[:, None]

    def log_norms(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.linalg.norm(self.mantissa, axis=1)) + self.log_scale

    def at(self, j: int) -> np.ndarray:
        i = j - self.window[0]
        return self.mantissa[i] * math.exp(self.log_scale[i])

    def to_csv(self, fh) -> None:
        """Rows ``t, n, block_index, re, im, log_abs, lambda_re, lambda_im``; ``t`` is empty."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "n", "block_index", "re", "im", "log_abs", "lambda_re", "lambda_im"])
        vals = self.values
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(self.mantissa)) + self.log_scale[:, None]
        lam = complex(self.lam)
        for i, n in enumerate(self.indices):
            for b in range(self.m):
                z = vals[i, b]
                writer.writerow(["", int(n), b, repr(float(z.real)), repr(float(z.imag)),
                                 repr(float(log_abs[i, b])), repr(lam.real), repr(lam.imag)])


def _as_seeds(seeds, s: int, m: int) -> np.ndarray:
    seeds = np.array(seeds, dtype=complex)
    if seeds.ndim == 1 and m == 1:
        seeds = seeds[:, None]
    if seeds.shape != (2 * s, m):
        raise InvalidArgument(f"expected {2 * s} seed blocks of size {m}, got shape {seeds.shape}")
    return seeds


def unit_seeds(s: int, r: int, m: int = 1, component: int = 0) -> np.ndarray:
    """Seeds with ``e_r`` the ``component``-th basis vector and all others zero."""
    if not -s <= r < s:
        raise InvalidArgument(f"seed index {r} outside [-{s}, {s - 1}]")
    seeds = np.zeros((2 * s, m), dtype=complex)
    seeds[r + s, component] = 1.0
    return seeds


def _solve_pivot(block: np.ndarray, rhs: np.ndarray, row: int) -> np.ndarray:
    sv = np.linalg.svd(block, compute_uv=False)
    if sv[-1] <= SINGULAR_TOL * max(1.0, sv[0]):
        raise ConstraintViolation(f"singular external block of A* in row {row}", index=row)
    return np.linalg.solve(block, rhs)


def _row_terms(Astar: BandedOperator, mant, scale, row: int, cols, lam, base):
    """Scaled ``lam e_row - sum_{l in cols} (A*)_{row,l} e_l`` relative to ``exp(ref)``."""
    idx = [row - base] + [l - base for l in cols]
    ref = max(scale[i] for i in idx)
    acc = lam * mant[row - base] * math.exp(scale[row - base] - ref)
    for l in cols:
        acc = acc - Astar.entry(row, l) @ mant[l - base] * math.exp(scale[l - base] - ref)
    return acc, ref


def extend_eigenvector(A: BandedOperator, seeds, lam) -> EigenFamily:
    """Grow the eigenvector of ``A*`` with eigenvalue ``lam`` from its seeds.

    Raises
    ------
    ConstraintViolation
        If an external block needed by the recurrence is singular.
    InvalidArgument
        If the window cannot hold the seeds plus one step each way.
    """
    s, m = A.s, A.m
    j_min, j_max = A.window
    if j_min > -s - 1 or j_max < s:
        raise InvalidArgument(f"window {A.window} must contain [{-s - 1}, {s}]")
    seeds = _as_seeds(seeds, s, m)
    lam = complex(lam)
    Astar = adjoint(A)
    n = A.size
    mant = np.zeros((n, m), dtype=complex)
    scale = np.zeros(n)
    mant[-s - j_min:s - j_min] = seeds

    def store(j, x, ref):
        nrm = np.linalg.norm(x)
        if nrm > 0 and math.log(nrm) > _LOG_RESCALE_AT:
            x = x / nrm
            ref += math.log(nrm)
        mant[j - j_min] = x
        scale[j - j_min] = ref

    k = 0
    while k + s <= j_max:
        rhs, ref = _row_terms(Astar, mant, scale, k, range(k - s, k + s), lam, j_min)
        store(k + s, _solve_pivot(Astar.entry(k, k + s), rhs, k), ref)
        k += 1
    k = 1
    while -k - s >= j_min:
        rhs, ref = _row_terms(Astar, mant, scale, -k, range(-k - s + 1, -k + s + 1), lam, j_min)
        store(-k - s, _solve_pivot(Astar.entry(-k, -k - s), rhs, -k), ref)
        k += 1

    fam = EigenFamily(lam=lam, s=s, window=A.window, seeds=seeds, mantissa=mant,
                      log_scale=scale, residuals=np.full(n, np.nan),
                      seed_norm_M=float(np.max(np.linalg.norm(seeds, axis=1))))
    fam.residuals = _relative_residuals(Astar, fam, lam)
    return fam


def _row_residuals(Astar: BandedOperator, fam: EigenFamily, lam: complex):
    """Absolute and relative residuals of each interior row, in log form."""
    s, j_min = fam.s, fam.window[0]
    lo, hi = fam.window[0] + s, fam.window[1] - s
    n = fam.mantissa.shape[0]
    log_abs = np.full(n, np.nan)
    rel = np.full(n, np.nan)
    for j in range(lo, hi + 1):
        cols = [l for l in range(j - s, j + s + 1) if l != j]
        idx = [j - j_min] + [l - j_min for l in cols]
        ref = max(fam.log_scale[i] for i in idx)
        diag = Astar.entry(j, j) - lam * np.eye(fam.m)
        acc = diag @ fam.mantissa[j - j_min] * math.exp(fam.log_scale[j - j_min] - ref)
        size = np.linalg.norm(Astar.entry(j, j) @ fam.mantissa[j - j_min]) * math.exp(
            fam.log_scale[j - j_min] - ref)
        size += abs(lam) * np.linalg.norm(fam.mantissa[j - j_min]) * math.exp(
            fam.log_scale[j - j_min] - ref)
        for l in cols:
            term = Astar.entry(j, l) @ fam.mantissa[l - j_min] * math.exp(fam.log_scale[l - j_min] - ref)
            acc = acc + term
            size += np.linalg.norm(term)
        res = np.linalg.norm(acc)
        with np.errstate(divide="ignore"):
            log_abs[j - j_min] = math.log(res) + ref if res > 0 else -np.inf
        rel[j - j_min] = res / size if size > 0 else 0.0
    return log_abs, rel


def _relative_residuals(Astar, fam, lam):
    return _row_residuals(Astar, fam, lam)[1]


def verify_eigen(A: BandedOperator, fam: EigenFamily, lam=None, relative: bool = True) -> float:
    """Maximum interior residual ``||((A* - lam) e)_j||``.

    ``lam`` defaults to the family's eigenvalue.  With ``relative=True``
    each row residual is divided by the sum of the norms of its terms.
    """
    lam = fam.lam if lam is None else complex(lam)
    log_abs, rel = _row_residuals(adjoint(A), fam, lam)
    if relative:
        return float(np.nanmax(rel))
    return float(np.exp(np.nanmax(log_abs)))


def interpolate_in_lambda(A: BandedOperator, seeds, n_points: int, radius: float = 1.0) -> np.ndarray:
    """Coefficients of ``e_j(lam)`` in powers of ``lam`` up to degree ``n_points - 1``.

    Samples the family at ``n_points`` points on the circle ``|lam| = radius``
    and inverts the discrete Fourier transform.  Exact whenever every
    ``e_j`` has degree below ``n_points``.  Returns shape ``(n_points, N, m)``.
    """
    nodes = radius * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    samples = np.array([extend_eigenvector(A, seeds, z).values for z in nodes])
    coeffs = np.fft.fft(samples, axis=0) / n_points
    return coeffs / (radius ** np.arange(n_points))[:, None, None]


def band_step(j: int, s: int) -> int:
    """Band-step index ``k`` with ``j = k s + r`` (``0 < r <= s``) for ``j > 0``
    or ``j = -k s - r - 1`` for ``j < 0``; returns -1 for seed-adjacent sites."""
    if j > 0:
        return (j - 1) // s
    return (-j - 2) // s if j <= -2 else -1


@dataclass
class GrowthAuditReport:
    lam: complex
    fitted_b: float
    fitted_C: float
    bound_holds: bool
    per_k_log_norms: list
    b_cap: float
    degenerate: bool = False

    def bound_line(self, M: float, delta: float) -> np.ndarray:
        """``log(C M delta^-k (|lam| + b)^(k+2))`` for each audited ``k = 1, 2, ...``."""
        k = np.arange(1, len(self.per_k_log_norms) + 1)
        return (math.log(self.fitted_C * M) - k * math.log(delta)
                + (k + 2) * math.log(abs(self.lam) + self.fitted_b))


def growth_audit(fam: EigenFamily, consts: BandConstants, C_allow: float | None = None,
                 b_step: float = 0.05, min_steps: int = 10) -> GrowthAuditReport:
    """Fit the smallest ``b`` so that, with a constant ``C <= C_allow``,

        log ||e_j|| <= log(C M) - k log(delta) + (k + 2) log(|lam| + b)

    for every audited band-step ``k >= 1`` on both sides.  ``C`` is then the
    tightest constant at that ``b``.  ``C_allow`` defaults to
    ``max(1, delta^-2)``.
    """
    s, delta = fam.s, consts.delta
    if C_allow is None:
        C_allow = max(1.0, delta ** -2)
    logs = fam.log_norms()
    by_k: dict[int, float] = {}
    for j, v in zip(fam.indices, logs):
        k = band_step(int(j), s)
        if k >= 1:
            by_k[k] = max(by_k.get(k, -np.inf), v)
    ks = sorted(k for k in by_k if k >= 1)
    # keep a contiguous run 1..K
    K = 0
    while K + 1 in by_k:
        K += 1
    if K < min_steps:
        raise InvalidArgument(f"family spans {K} band-steps, need {min_steps}")
    ks = np.arange(1, K + 1)
    per_k = np.array([by_k[k] for k in ks])
    cap = 10.0 * (consts.a / delta + 1.0)
    lam_abs = abs(fam.lam)
    M = fam.seed_norm_M
    if M == 0 or np.all(per_k == -np.inf):
        return GrowthAuditReport(fam.lam, 0.0, 0.0, True, per_k.tolist(), cap, degenerate=True)

    def needed_log_c(b):
        return float(np.max(per_k - math.log(M) + ks * math.log(delta)
                            - (ks + 2) * math.log(lam_abs + b)))

    log_allow = math.log(C_allow)
    grid = np.arange(0.0, cap + b_step / 2, b_step)
    for b in grid:
        if lam_abs + b <= 0:
            continue
        lc = needed_log_c(b)
        if lc <= log_allow:
            return GrowthAuditReport(fam.lam, float(b), math.exp(lc), True, per_k.tolist(), cap)
    return GrowthAuditReport(fam.lam, float(cap), math.exp(needed_log_c(cap)), False,
                             per_k.tolist(), cap)

"""Finite-window block-banded operators and lattice states.

An operator with half-bandwidth ``s`` and block size ``m`` on the integer
window ``[j_min, j_max]`` acts by

    (A x)_j = sum_{k=j-s}^{j+s} A_{j,k} x_k,

with out-of-window blocks treated as zero (Dirichlet truncation).  Blocks
are stored densely as an array of shape ``(N, 2s+1, m, m)`` where slot
``d`` of row ``j`` holds ``A_{j, j+d-s}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConstraintViolation, InvalidArgument

# an external block counts as singular below this smallest singular value
SINGULAR_TOL = 1e-13


def _as_window(window) -> tuple[int, int]:
    try:
        j_min, j_max = (int(w) for w in window)
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(f"window must be a pair of integers, got {window!r}") from exc
    if j_max < j_min:
        raise InvalidArgument(f"empty window [{j_min}, {j_max}]")
    return j_min, j_max


@dataclass
class LatticeState:
    """A time-stamped function on an integer window with ``m``-vector values.

    ``log_abs``, when given, holds exact ``log ||u_j||`` values for entries
    that may underflow in ``values`` (closed-form model solutions set it);
    ``phase`` optionally carries the unit phase of scalar entries alongside.
    """

    window: tuple[int, int]
    t: float
    values: np.ndarray
    log_abs: np.ndarray | None = field(default=None, repr=False)
    phase: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.window = _as_window(self.window)
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.size:
            raise InvalidArgument(
                f"values of shape {vals.shape} do not fit window {self.window}")
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("state values must be finite")
        self.values = vals
        self.t = float(self.t)
        if self.log_abs is not None:
            self.log_abs = np.asarray(self.log_abs, dtype=float)
            if self.log_abs.shape != (self.size,):
                raise InvalidArgument("log_abs must have one entry per index")
        if self.phase is not None:
            self.phase = np.asarray(self.phase, dtype=complex)
            if self.log_abs is None or self.m != 1 or self.phase.shape != (self.size,):
                raise InvalidArgument("phase needs scalar values and log_abs")

    @property
    def size(self) -> int:
        return self.window[1] - self.window[0] + 1

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    def at(self, j: int) -> np.ndarray:
        if not self.window[0] <= j <= self.window[1]:
            return np.zeros(self.m, dtype=complex)
        return self.values[j - self.window[0]]

    def norms(self) -> np.ndarray:
        """Block norms ``||u_j||`` per index."""
        return np.linalg.norm(self.values, axis=1)

    def log_norms(self) -> np.ndarray:
        """``log ||u_j||`` per index, exact where ``log_abs`` is known."""
        if self.log_abs is not None:
            return self.log_abs.copy()
        with np.errstate(divide="ignore"):
            return np.log(self.norms())

    def log_parts(self):
        """``(log ||u_j||, u_j / ||u_j||)``; directions are zero for zero entries."""
        logs = self.log_norms()
        if self.phase is not None:
            return logs, self.phase[:, None].copy()
        norms = self.norms()
        direction = np.zeros_like(self.values)
        nz = norms > 0
        direction[nz] = self.values[nz] / norms[nz, None]
        return logs, direction

    def scalar(self) -> np.ndarray:
        if self.m != 1:
            raise InvalidArgument("state is block valued")
        return self.values[:, 0]

    def with_values(self, values, t=None) -> "LatticeState":
        return LatticeState(self.window, self.t if t is None else t, values)

    @classmethod
    def zeros(cls, window, m: int = 1, t: float = 0.0) -> "LatticeState":
        window = _as_window(window)
        return cls(window, t, np.zeros((window[1] - window[0] + 1, m), dtype=complex))

    @classmethod
    def delta(cls, window, n: int, m: int = 1, t: float = 0.0, block=None) -> "LatticeState":
        """Unit vector at site ``n`` (``block`` defaults to the first basis vector)."""
        state = cls.zeros(window, m, t)
        if not state.window[0] <= n <= state.window[1]:
            raise InvalidArgument(f"site {n} outside window {state.window}")
        vals = state.values.copy()
        if block is None:
            block = np.eye(m)[0]
        vals[n - state.window[0]] = block
        return cls(state.window, t, vals)


@dataclass(frozen=True)
class BandConstants:
    """Uniform bounds ``||A_{j,k}|| <= a`` and ``||A_{j,j+-s}^{-1}|| <= 1/delta``."""

    a: float
    delta: float


class BandedOperator:
    """Block-banded operator on a finite window with zero-padding boundary.

    Parameters
    ----------
    s : int
        Half-bandwidth, ``s >= 1``.
    window : pair of int
        Inclusive index range ``[j_min, j_max]``.
    blocks : array_like, shape (N, 2s+1, m, m) or (N, 2s+1)
        ``blocks[i, d]`` is ``A_{j, j+d-s}`` for ``j = j_min + i``.  Entries
        pointing outside the window are discarded.
    check_external : bool
        Require every external block with both indices interior to be
        invertible.
    """

    boundary_policy = "zero_pad"

    def __init__(self, s: int, window, blocks, *, check_external: bool = True):
        if int(s) != s or s < 1:
            raise InvalidArgument(f"half-bandwidth must be a positive integer, got {s}")
        self.s = int(s)
        self.window = _as_window(window)
        b = np.array(blocks, dtype=complex)
        if b.ndim == 2:
            b = b[:, :, None, None]
        n = self.window[1] - self.window[0] + 1
        if b.ndim != 4 or b.shape[:2] != (n, 2 * self.s + 1) or b.shape[2] != b.shape[3]:
            raise InvalidArgument(
                f"blocks of shape {b.shape} inconsistent with s={self.s}, window={self.window}")
        if not np.all(np.isfinite(b)):
            raise InvalidArgument("operator entries must be finite")
        rows = np.arange(n)[:, None]
        cols = rows + np.arange(-self.s, self.s + 1)[None, :]
        b[(cols < 0) | (cols >= n)] = 0.0
        b.setflags(write=False)
        self.blocks = b
        if check_external:
            self._check_external()

    # -- structure -----------------------------------------------------
    @property
    def m(self) -> int:
        return self.blocks.shape[2]

    @property
    def size(self) -> int:
        return self.window[1] - self.window[0] + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    @property
    def interior(self) -> tuple[int, int]:
        """Rows whose full band lies inside the window (may be empty)."""
        return self.window[0] + self.s, self.window[1] - self.s

    def entry(self, j: int, k: int) -> np.ndarray:
        """The block ``A_{j,k}`` (zero outside band or window)."""
        d = k - j + self.s
        if not (0 <= d <= 2 * self.s and self.window[0] <= j <= self.window[1]
                and self.window[0] <= k <= self.window[1]):
            return np.zeros((self.m, self.m), dtype=complex)
        return self.blocks[j - self.window[0], d]

    def _check_external(self):
        lo, hi = self.interior
        for j in range(lo, hi + 1):
            for k in (j - self.s, j + self.s):
                if not lo <= k <= hi:
                    continue
                sv = np.linalg.svd(self.entry(j, k), compute_uv=False)
                if sv[-1] <= SINGULAR_TOL * max(1.0, sv[0]):
                    raise ConstraintViolation(
                        f"external block A[{j},{k}] is singular", index=(j, k))

    def to_dense(self) -> np.ndarray:
        n, m, s = self.size, self.m, self.s
        out = np.zeros((n * m, n * m), dtype=complex)
        for i in range(n):
            for d in range(2 * s + 1):
                k = i + d - s
                if 0 <= k < n:
                    out[i * m:(i + 1) * m, k * m:(k + 1) * m] = self.blocks[i, d]
        return out

    @classmethod
    def from_dense(cls, matrix, s: int, window, m: int = 1, **kw) -> "BandedOperator":
        window = _as_window(window)
        n = window[1] - window[0] + 1
        matrix = np.asarray(matrix, dtype=complex)
        blocks = np.zeros((n, 2 * s + 1, m, m), dtype=complex)
        for i in range(n):
            for d in range(2 * s + 1):
                k = i + d - s
                if 0 <= k < n:
                    blocks[i, d] = matrix[i * m:(i + 1) * m, k * m:(k + 1) * m]
        return cls(s, window, blocks, **kw)

    def __eq__(self, other):
        return (isinstance(other, BandedOperator) and self.s == other.s
                and self.window == other.window and self.blocks.shape == other.blocks.shape
                and np.array_equal(self.blocks, other.blocks))

    def __repr__(self):
        return f"BandedOperator(s={self.s}, m={self.m}, window={self.window})"

    def scaled(self, c) -> "BandedOperator":
        return BandedOperator(self.s, self.window, c * self.blocks, check_external=c != 0)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        entries = []
        for i, j in enumerate(self.indices):
            for d in range(2 * self.s + 1):
                blk = self.blocks[i, d]
                if np.any(blk != 0):
                    entries.append({
                        "j": int(j),
                        "k": int(j + d - self.s),
                        "block": [[float(z.real), float(z.imag)] for z in blk.ravel()],
                    })
        return {"s": self.s, "m": self.m, "window": list(self.window), "entries": entries}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict, **kw) -> "BandedOperator":
        try:
            s, m = int(doc["s"]), int(doc["m"])
            window = _as_window(doc["window"])
            entries = doc["entries"]
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed operator document: {exc}") from exc
        n = window[1] - window[0] + 1
        blocks = np.zeros((n, 2 * s + 1, m, m), dtype=complex)
        for e in entries:
            j, k = int(e["j"]), int(e["k"])
            if abs(j - k) > s or not (window[0] <= j <= window[1] and window[0] <= k <= window[1]):
                raise InvalidArgument(f"entry ({j},{k}) outside band or window")
            flat = np.array([complex(re, im) for re, im in e["block"]])
            if flat.size != m * m:
                raise InvalidArgument(f"entry ({j},{k}) has {flat.size} values, expected {m * m}")
            blocks[j - window[0], k - j + s] = flat.reshape(m, m)
        return cls(s, window, blocks, **kw)

    @classmethod
    def from_json(cls, text: str, **kw) -> "BandedOperator":
        return cls.from_dict(json.loads(text), **kw)


def apply(A: BandedOperator, x: LatticeState) -> LatticeState:
    """Banded matrix-vector product; the time stamp of ``x`` is kept."""
    if x.window != A.window:
        raise InvalidArgument(f"state window {x.window} != operator window {A.window}")
    if x.m != A.m:
        raise InvalidArgument(f"state block size {x.m} != operator block size {A.m}")
    return LatticeState(A.window, x.t, _apply_values(A.blocks, A.s, x.values))


def _apply_values(blocks: np.ndarray, s: int, values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    padded = np.zeros((n + 2 * s,) + values.shape[1:], dtype=complex)
    padded[s:s + n] = values
    out = np.zeros(values.shape, dtype=complex)
    for d in range(2 * s + 1):
        out += np.einsum("nab,nb...->na...", blocks[:, d], padded[d:d + n])
    return out


def adjoint(A: BandedOperator) -> BandedOperator:
    """The operator with blocks ``(A*)_{j,k} = (A_{k,j})^H``."""
    n, s = A.size, A.s
    out = np.zeros_like(A.blocks)
    for d in range(2 * s + 1):
        shift = d - s
        lo, hi = max(0, -shift), min(n, n - shift)
        out[lo:hi, d] = np.conj(np.swapaxes(A.blocks[lo + shift:hi + shift, 2 * s - d], -1, -2))
    return BandedOperator(s, A.window, out, check_external=False)


def entrywise_adjoint(A: BandedOperator) -> BandedOperator:
    """The "conjugate" operator with block ``(A_{j,k})^H`` kept at position (j, k)."""
    return BandedOperator(A.s, A.window, np.conj(np.swapaxes(A.blocks, -1, -2)),
                          check_external=False)


def audit_constants(A: BandedOperator) -> BandConstants:
    """Compute ``a`` and ``delta`` over entries with both indices interior.

    Raises
    ------
    ConstraintViolation
        If an interior external block is singular.
    """
    lo, hi = A.interior
    if hi < lo:
        raise InvalidArgument(f"window {A.window} has no interior rows for s={A.s}")
    a = 0.0
    delta = np.inf
    for j in range(lo, hi + 1):
        for k in range(max(lo, j - A.s), min(hi, j + A.s) + 1):
            sv = np.linalg.svd(A.entry(j, k), compute_uv=False)
            a = max(a, float(sv[0]))
            if abs(k - j) == A.s:
                if sv[-1] <= SINGULAR_TOL * max(1.0, sv[0]):
                    raise ConstraintViolation(f"external block A[{j},{k}] is singular",
                                              index=(j, k))
                delta = min(delta, float(sv[-1]))
    if not np.isfinite(delta):
        raise InvalidArgument("window too small to contain an interior external block")
    return BandConstants(a=a, delta=delta)


def build_laplacian_1d(alpha, window) -> BandedOperator:
    """``alpha * Delta_1``: off-diagonals ``alpha``, diagonal ``-2 alpha``."""
    window = _as_window(window)
    n = window[1] - window[0] + 1
    blocks = np.zeros((n, 3), dtype=complex)
    blocks[:, 0] = blocks[:, 2] = alpha
    blocks[:, 1] = -2 * alpha
    return BandedOperator(1, window, blocks, check_external=alpha != 0)


def build_higher_order_model(s: int, window) -> BandedOperator:
    """Scalar operator with ``A_{j,j+-s} = 1``, ``A_{j,j} = -2`` and zeros elsewhere."""
    window = _as_window(window)
    if s < 1:
        raise InvalidArgument("s must be >= 1")
    n = window[1] - window[0] + 1
    if n <= 2 * s:
        raise InvalidArgument(f"window of length {n} too small for s={s}")
    blocks = np.zeros((n, 2 * s + 1), dtype=complex)
    blocks[:, 0] = blocks[:, 2 * s] = 1.0
    blocks[:, s] = -2.0
    return BandedOperator(s, window, blocks)


def build_schrodinger_with_potential(alpha, V, window=None) -> BandedOperator:
    """``alpha * (Delta_1 + V)`` on the window carried by ``V``.

    ``V`` is a real sequence; if ``window`` is omitted it is centred,
    ``[-(len(V)//2), len(V) - 1 - len(V)//2]``.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 1 or V.size == 0:
        raise InvalidArgument("V must be a non-empty 1-d sequence")
    if window is None:
        window = (-(V.size // 2), V.size - 1 - V.size // 2)
    window = _as_window(window)
    if window[1] - window[0] + 1 != V.size:
        raise InvalidArgument(f"V has {V.size} entries, window {window} needs "
                              f"{window[1] - window[0] + 1}")
    if not np.all(np.isfinite(V)):
        raise InvalidArgument("V must be bounded")
    blocks = np.zeros((V.size, 3), dtype=complex)
    blocks[:, 0] = blocks[:, 2] = alpha
    blocks[:, 1] = alpha * (V - 2.0)
    return BandedOperator(1, window, blocks, check_external=alpha != 0)


def _random_block(rng, m, norm_lo, norm_hi, sigma_min=None):
    if m == 1:
        mag = rng.uniform(norm_lo, norm_hi)
        return np.array([[mag * np.exp(2j * np.pi * rng.uniform())]])
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    u, _, vh = np.linalg.svd(z)
    lo = norm_lo if sigma_min is None else sigma_min
    sv = np.sort(rng.uniform(lo, norm_hi, size=m))[::-1]
    if sigma_min is None:
        sv[0] = rng.uniform(norm_lo, norm_hi)
        sv[1:] = np.minimum(sv[1:], sv[0])
    return (u * sv) @ vh


def random_banded(rng, s: int, window, m: int = 1, a_max: float = 2.0,
                  delta_min: float = 0.5) -> BandedOperator:
    """Random operator whose external blocks have singular values in
    ``[delta_min, a_max]`` and whose other blocks have norm at most ``a_max``."""
    window = _as_window(window)
    n = window[1] - window[0] + 1
    blocks = np.zeros((n, 2 * s + 1, m, m), dtype=complex)
    for i in range(n):
        for d in range(2 * s + 1):
            if d in (0, 2 * s):
                blocks[i, d] = _random_block(rng, m, delta_min, a_max, sigma_min=delta_min)
            else:
                blocks[i, d] = _random_block(rng, m, 0.0, a_max)
    return BandedOperator(s, window, blocks)


def retime(state: LatticeState, t: float) -> LatticeState:
    return replace(state, t=float(t))

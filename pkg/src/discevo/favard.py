"""Operator-polynomial families ``P_j^(r)(lam) = sum_m lam^m C_{j,m}^(r)``.

For each seed residue ``-s <= r < s`` the family is fixed by
``P_r^(r) = I``, ``P_j^(r) = 0`` for the other seed indices, and

    lam P_j(lam) = sum_{k=j-s}^{j+s} (A_{k,j})^H P_k(lam),

so ``{P_j^(r)(lam) x}_j`` is a generalized eigenvector of ``A*`` for every
``x``.  Evaluated at the "conjugate" operator (blocks ``(A_{j,k})^H`` kept
in place) the families reproduce coordinate vectors:
``sum_r P_n^(r)(conj A) sigma_r = sigma_n``.  Pairing them with a state
gives the moment functionals whose vanishing forces the state to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .eigen_engine import _solve_pivot
from .exceptions import InvalidArgument, UnsupportedArgument
from .lattice_ops import BandedOperator, LatticeState, _apply_values, adjoint, entrywise_adjoint

COMMUTE_TOL = 1e-10
# the outermost TAIL_STEPS band-steps must carry less than TAIL_TOL of the sum
TAIL_STEPS = 10
TAIL_TOL = 1e-14


@dataclass
class PolyFamily:
    """Coefficients ``coeffs[j - j_lo, p]`` holding ``C_{j,p}^(r)`` (``m x m``)."""

    r: int
    s: int
    j_range: tuple[int, int]
    coeffs: np.ndarray

    @property
    def m(self) -> int:
        return self.coeffs.shape[2]

    @property
    def max_j(self) -> int:
        return max(-self.j_range[0], self.j_range[1])

    def _row(self, j: int) -> np.ndarray:
        if not self.j_range[0] <= j <= self.j_range[1]:
            raise InvalidArgument(f"index {j} outside family range {self.j_range}")
        return self.coeffs[j - self.j_range[0]]

    def coeff(self, j: int, p: int) -> np.ndarray:
        row = self._row(j)
        if p >= row.shape[0]:
            return np.zeros((self.m, self.m), dtype=complex)
        return row[p]

    def degree(self, j: int) -> int:
        """Largest power with a nonzero coefficient (-1 for the zero polynomial)."""
        row = self._row(j)
        nz = np.nonzero(np.any(row != 0, axis=(1, 2)))[0]
        return int(nz[-1]) if nz.size else -1

    def evaluate(self, j: int, lam) -> np.ndarray:
        row = self._row(j)
        out = np.zeros((self.m, self.m), dtype=complex)
        for c in row[::-1]:
            out = lam * out + c
        return out

    def evaluate_all(self, lam) -> np.ndarray:
        """``P_j(lam)`` for every ``j`` in range, shape ``(N, m, m)``."""
        out = np.zeros(self.coeffs.shape[:1] + self.coeffs.shape[2:], dtype=complex)
        for p in range(self.coeffs.shape[1] - 1, -1, -1):
            out = lam * out + self.coeffs[:, p]
        return out

    def to_dict(self) -> dict:
        items = []
        for i, j in enumerate(range(self.j_range[0], self.j_range[1] + 1)):
            for p in range(self.coeffs.shape[1]):
                blk = self.coeffs[i, p]
                if np.any(blk != 0):
                    items.append({"j": j, "m": p,
                                  "block": [[float(z.real), float(z.imag)] for z in blk.ravel()]})
        return {"r": self.r, "s": self.s, "j_range": list(self.j_range),
                "block_dim": self.m, "degree_slots": int(self.coeffs.shape[1]), "coeffs": items}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "PolyFamily":
        items = doc["coeffs"]
        m = int(doc.get("block_dim") or (round(len(items[0]["block"]) ** 0.5) if items else 1))
        if "j_range" in doc:
            j_lo, j_hi = (int(v) for v in doc["j_range"])
        else:
            js = [int(e["j"]) for e in items]
            j_lo, j_hi = min(js), max(js)
        slots = int(doc.get("degree_slots") or (max(int(e["m"]) for e in items) + 1))
        coeffs = np.zeros((j_hi - j_lo + 1, slots, m, m), dtype=complex)
        for e in items:
            flat = np.array([complex(re, im) for re, im in e["block"]])
            coeffs[int(e["j"]) - j_lo, int(e["m"])] = flat.reshape(m, m)
        s = int(doc.get("s", 1))
        return cls(r=int(doc["r"]), s=s, j_range=(j_lo, j_hi), coeffs=coeffs)

    @classmethod
    def from_json(cls, text: str) -> "PolyFamily":
        return cls.from_dict(json.loads(text))


@dataclass
class CommutingFamilySpec:
    """Entries ``A_{j,k} = p_{j,k}(G)`` for scalar polynomials of one generator.

    ``entry_polynomials[(j, k)]`` lists coefficients in increasing power.
    """

    generator: np.ndarray
    entry_polynomials: dict

    def block(self, j: int, k: int) -> np.ndarray:
        G = np.asarray(self.generator, dtype=complex)
        out = np.zeros_like(G)
        for c in np.asarray(self.entry_polynomials.get((j, k), []), dtype=complex)[::-1]:
            out = out @ G + c * np.eye(G.shape[0])
        return out

    def build(self, s: int, window) -> BandedOperator:
        j_min, j_max = window
        m = np.asarray(self.generator).shape[0]
        n = j_max - j_min + 1
        blocks = np.zeros((n, 2 * s + 1, m, m), dtype=complex)
        for (j, k), _ in self.entry_polynomials.items():
            if j_min <= j <= j_max and j_min <= k <= j_max and abs(j - k) <= s:
                blocks[j - j_min, k - j + s] = self.block(j, k)
        return BandedOperator(s, window, blocks)


def random_commuting_spec(rng, s: int, window, m: int = 2, a_max: float = 2.0,
                          delta_min: float = 0.5, max_cond: float = 3.0) -> CommutingFamilySpec:
    """Random generator ``G = V diag(mu) V^-1`` with ``cond(V) <= max_cond`` and
    entry polynomials interpolating random target eigenvalues.

    External entries keep singular values in ``[delta_min, a_max]``; the rest
    have norm at most ``a_max`` (rejection sampling on the targets).
    """
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    u, _, vh = np.linalg.svd(z)
    V = (u * np.linspace(max_cond, 1.0, m)) @ vh
    mu = np.exp(2j * np.pi * (np.arange(m) + rng.uniform(0, 0.5, size=m)) / m)
    Vinv = np.linalg.inv(V)
    G = V @ np.diag(mu) @ Vinv
    vander = np.vander(mu, m, increasing=True)
    j_min, j_max = window
    polys = {}
    for j in range(j_min, j_max + 1):
        for k in range(max(j_min, j - s), min(j_max, j + s) + 1):
            external = abs(j - k) == s
            for _ in range(1000):
                if external:
                    tau = rng.uniform(1.0, 2.0, size=m) * np.exp(2j * np.pi * rng.uniform(size=m))
                else:
                    tau = rng.uniform(0.0, 1.0, size=m) * np.exp(2j * np.pi * rng.uniform(size=m))
                blk = V @ np.diag(tau) @ Vinv
                sv = np.linalg.svd(blk, compute_uv=False)
                if sv[0] <= a_max and (not external or sv[-1] >= delta_min):
                    break
            else:
                raise RuntimeError("could not sample an admissible commuting block")
            polys[(j, k)] = np.linalg.solve(vander, tau)
    return CommutingFamilySpec(generator=G, entry_polynomials=polys)


def _blocks_commute(A: BandedOperator) -> bool:
    flat = A.blocks.reshape(-1, A.m, A.m)
    flat = flat[np.any(flat != 0, axis=(1, 2))]
    if flat.shape[0] < 2:
        return True
    flat = np.unique(flat, axis=0)
    scale = max(1.0, float(np.max(np.abs(flat))))
    for i in range(0, flat.shape[0], 64):
        chunk = flat[i:i + 64]
        comm = (np.einsum("iab,nbc->inac", chunk, flat)
                - np.einsum("nab,ibc->inac", flat, chunk))
        if np.max(np.abs(comm)) > COMMUTE_TOL * scale ** 2:
            return False
    return True


def build_poly_family(A: BandedOperator, r: int, max_j: int | None = None) -> PolyFamily:
    """Coefficients of ``P_j^(r)`` for ``|j| <= max_j`` (default: the whole window).

    Raises
    ------
    UnsupportedArgument
        For block operators whose entries do not commute.
    ConstraintViolation
        If an external block used by the recurrence is singular.
    """
    if A.m > 1 and not _blocks_commute(A):
        raise UnsupportedArgument("block entries of A do not commute")
    return _build_family(A, r, max_j)


def _build_family(A: BandedOperator, r: int, max_j: int | None) -> PolyFamily:
    s, m = A.s, A.m
    if not -s <= r < s:
        raise InvalidArgument(f"residue {r} outside [-{s}, {s - 1}]")
    j_lo, j_hi = A.window
    if max_j is not None:
        j_lo, j_hi = max(j_lo, -max_j), min(j_hi, max_j)
    if j_lo > -s or j_hi < s - 1:
        raise InvalidArgument(f"range [{j_lo}, {j_hi}] does not contain the seed indices")
    slots = max(-j_lo, j_hi) // s + 2
    Astar = adjoint(A)
    C = np.zeros((j_hi - j_lo + 1, slots, m, m), dtype=complex)
    C[r - j_lo, 0] = np.eye(m)

    def shifted(j):
        out = np.zeros((slots, m, m), dtype=complex)
        out[1:] = C[j - j_lo, :-1]
        return out

    def solve(block, rhs, row):
        flat = rhs.transpose(1, 0, 2).reshape(m, -1)
        return _solve_pivot(block, flat, row).reshape(m, slots, m).transpose(1, 0, 2)

    j = 0
    while j + s <= j_hi:
        rhs = shifted(j)
        for k in range(j - s, j + s):
            rhs -= np.einsum("ab,pbc->pac", Astar.entry(j, k), C[k - j_lo])
        C[j + s - j_lo] = solve(Astar.entry(j, j + s), rhs, j)
        j += 1
    j = -1
    while j - s >= j_lo:
        rhs = shifted(j)
        for k in range(j - s + 1, j + s + 1):
            rhs -= np.einsum("ab,pbc->pac", Astar.entry(j, k), C[k - j_lo])
        C[j - s - j_lo] = solve(Astar.entry(j, j - s), rhs, j)
        j -= 1
    return PolyFamily(r=r, s=s, j_range=(j_lo, j_hi), coeffs=C)


def build_all_families(A: BandedOperator, max_j: int | None = None) -> list:
    """The ``2s`` families ordered by residue ``r = -s, ..., s-1``."""
    if A.m > 1 and not _blocks_commute(A):
        raise UnsupportedArgument("block entries of A do not commute")
    return [_build_family(A, r, max_j) for r in range(-A.s, A.s)]


def degree_bound_holds(fam: PolyFamily) -> bool:
    """``deg P_j < [|j|/s] + 1`` for every ``j`` in range."""
    return all(fam.degree(j) < abs(j) // fam.s + 1
               for j in range(fam.j_range[0], fam.j_range[1] + 1))


@dataclass
class MomentResult:
    value: complex
    moments: np.ndarray
    truncation_warning: bool


def _tail_negligible(abs_terms: np.ndarray, width: int) -> bool:
    total = float(np.sum(abs_terms))
    if total == 0:
        return True
    tail = float(np.sum(abs_terms[:width]) + np.sum(abs_terms[-width:]))
    return tail < TAIL_TOL * total


def moment_functional(u: LatticeState, fam: PolyFamily, lam, x=None) -> MomentResult:
    """``sum_j <u_j, P_j(lam) x>`` and the moments ``sum_j (C_{j,p})^H u_j``.

    The inner product is linear in its first argument; ``x`` defaults to
    the first basis vector.
    """
    m = fam.m
    if u.m != m:
        raise InvalidArgument("state and family block sizes differ")
    x = np.eye(m)[0] if x is None else np.asarray(x, dtype=complex)
    lo = max(u.window[0], fam.j_range[0])
    hi = min(u.window[1], fam.j_range[1])
    uv = u.values[lo - u.window[0]:hi - u.window[0] + 1]
    C = fam.coeffs[lo - fam.j_range[0]:hi - fam.j_range[0] + 1]
    moments = np.einsum("jpba,jb->pa", np.conj(C), uv)
    P = fam.evaluate_all(lam)[lo - fam.j_range[0]:hi - fam.j_range[0] + 1]
    vecs = P @ x
    terms = np.einsum("ja,ja->j", np.conj(vecs), uv)
    value = complex(np.sum(terms))
    warn = not _tail_negligible(np.abs(terms), TAIL_STEPS * fam.s)
    return MomentResult(value=value, moments=moments, truncation_warning=warn)


def reconstruct_coordinate(A: BandedOperator, n: int, families, v=None) -> LatticeState:
    """``sum_r sum_p conjA^p i_r C_{n,p}^(r) v``, which equals ``i_n v``.

    Raises
    ------
    InvalidArgument
        If the polynomial spread ``|r| + s deg`` reaches past the window.
    """
    s, m = A.s, A.m
    v = np.eye(m)[0] if v is None else np.asarray(v, dtype=complex)
    Abar = entrywise_adjoint(A)
    j_min, j_max = A.window
    out = np.zeros((A.size, m), dtype=complex)
    for fam in families:
        deg = fam.degree(n)
        if deg < 0:
            continue
        if fam.r - s * deg < j_min or fam.r + s * deg > j_max:
            raise InvalidArgument(
                f"window {A.window} too small for P_{n}^({fam.r}) of degree {deg}")
        acc = np.zeros((A.size, m), dtype=complex)
        for p in range(deg, -1, -1):
            acc = _apply_values(Abar.blocks, s, acc)
            acc[fam.r - j_min] += fam.coeff(n, p) @ v
        out += acc
    return LatticeState(A.window, 0.0, out)


@dataclass
class CompletenessResult:
    """Per-site values ``sum_r alpha_k^(r)``; they equal ``<u_k, x>``."""

    window: tuple[int, int]
    values: np.ndarray
    moments: list
    truncation_warning: bool


def completeness_probe(u: LatticeState, A: BandedOperator, x=None, families=None) -> CompletenessResult:
    """Reassemble ``<u_k, x>`` from the moments ``sum_j (C_{j,p}^(r))^H u_j``.

    ``alpha_k^(r) = sum_p < mu_p^(r), pi_k conjA^p i_r x >``; summing over
    ``r`` returns ``<u_k, x>``, so vanishing moments force ``u = 0``.
    """
    if u.window != A.window or u.m != A.m:
        raise InvalidArgument("state must live on the operator's window")
    s, m = A.s, A.m
    x = np.eye(m)[0] if x is None else np.asarray(x, dtype=complex)
    if families is None:
        families = build_all_families(A)
    Abar = entrywise_adjoint(A)
    j_min = A.window[0]
    total = np.zeros(A.size, dtype=complex)
    all_moments = []
    warn = False
    for fam in families:
        res = moment_functional(u, fam, 0.0, x)
        mu = res.moments
        all_moments.append(mu)
        # contributions per j for the tail test use |C_{j,p}^H u_j| summed over p
        lo = max(u.window[0], fam.j_range[0])
        hi = min(u.window[1], fam.j_range[1])
        C = fam.coeffs[lo - fam.j_range[0]:hi - fam.j_range[0] + 1]
        per_j = np.linalg.norm(np.einsum("jpba,jb->jpa", np.conj(C),
                                         u.values[lo - u.window[0]:hi - u.window[0] + 1]),
                               axis=(1, 2))
        warn = warn or not _tail_negligible(per_j, TAIL_STEPS * s)
        w = np.zeros((A.size, m), dtype=complex)
        w[fam.r - j_min] = x
        acc = np.zeros(A.size, dtype=complex)
        for p in range(mu.shape[0]):
            if p:
                w = _apply_values(Abar.blocks, s, w)
            acc += np.einsum("ka,a->k", np.conj(w), mu[p])
        total += acc
    return CompletenessResult(window=A.window, values=total, moments=all_moments,
                              truncation_warning=warn)


def commutation_defect(A: BandedOperator, fam: PolyFamily) -> float:
    """Largest relative ``||A*_{k,j} C - C A*_{k,j}||`` over band entries and coefficients."""
    blocks = A.blocks.reshape(-1, A.m, A.m)
    blocks = np.conj(np.swapaxes(blocks[np.any(blocks != 0, axis=(1, 2))], -1, -2))
    coeffs = fam.coeffs.reshape(-1, fam.m, fam.m)
    coeffs = coeffs[np.any(coeffs != 0, axis=(1, 2))]
    worst = 0.0
    for c in coeffs:
        comm = np.einsum("nab,bc->nac", blocks, c) - np.einsum("ab,nbc->nac", c, blocks)
        denom = np.linalg.norm(blocks, axis=(1, 2)) * np.linalg.norm(c)
        worst = max(worst, float(np.max(np.linalg.norm(comm, axis=(1, 2)) / denom)))
    return worst

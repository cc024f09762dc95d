"""Orthonormal bases of the bidegree harmonic spaces H_{j,l} on S^{2n+1}.

H_{j,l} is the restriction to the sphere of polynomials homogeneous of
degree j in z and l in zbar that are annihilated by the flat Laplacian
sum_i d^2/dz_i dzbar_i.  Bases are constructed exactly: the harmonicity
constraint is solved over the rationals and Gram matrices are assembled
from closed-form monomial moments, so quadrature never enters the
construction (it is used afterwards to cross-check orthonormality and for
analysis of sampled functions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import CutoffExceededError, QuadratureInsufficientError
from .geometry import QuadratureRule, build_quadrature
from .polynomials import (
    MonomialKey,
    PolyDict,
    exponent_tuples,
    flat_laplacian,
    monomial_values,
    rational_nullspace,
    total_volume,
    uniform_moment,
)

PRUNE_TOL = 1e-13

_nullspace_cache: Dict[Tuple[int, int, int], List[List[Fraction]]] = {}


def _block_keys(n: int, j: int, l: int) -> List[MonomialKey]:
    return [(a, b) for a in exponent_tuples(n + 1, j) for b in exponent_tuples(n + 1, l)]


def _harmonic_nullspace(n: int, j: int, l: int) -> List[List[Fraction]]:
    """Rational coefficient vectors spanning harmonic bidegree-(j,l) polynomials."""
    key = (n, j, l)
    if key in _nullspace_cache:
        return _nullspace_cache[key]
    keys = _block_keys(n, j, l)
    if j == 0 or l == 0:
        # no mixed derivatives: everything is harmonic
        basis = []
        for i in range(len(keys)):
            vec = [Fraction(0)] * len(keys)
            vec[i] = Fraction(1)
            basis.append(vec)
        _nullspace_cache[key] = basis
        return basis
    targets = {k: idx for idx, k in enumerate(_block_keys(n, j - 1, l - 1))}
    rows = [[Fraction(0)] * len(keys) for _ in targets]
    for col, mono in enumerate(keys):
        lap = flat_laplacian({mono: Fraction(1)})
        for tkey, c in lap.items():
            rows[targets[tkey]][col] = c
    basis = rational_nullspace(rows, len(keys))
    _nullspace_cache[key] = basis
    return basis


def basis_dimension(n: int, j: int, l: int) -> int:
    """dim H_{j,l}, computed from the rank of the harmonicity constraint."""
    if j < 0 or l < 0:
        return 0
    return len(_harmonic_nullspace(n, j, l))


def harmonic_polynomials_exact(n: int, j: int, l: int) -> List[PolyDict]:
    """A spanning set of H_{j,l} with exact rational coefficients (not orthonormal)."""
    keys = _block_keys(n, j, l)
    out = []
    for vec in _harmonic_nullspace(n, j, l):
        out.append({keys[i]: c for i, c in enumerate(vec) if c})
    return out


def _monomial_pairing(n: int, keys_left: List[MonomialKey], keys_right: List[MonomialKey]) -> np.ndarray:
    """Matrix of L2 pairings <mono_left, mono_right> in units of the total volume."""
    M = np.zeros((len(keys_left), len(keys_right)))
    for r, (a1, b1) in enumerate(keys_left):
        for c, (a2, b2) in enumerate(keys_right):
            alpha = tuple(x + y for x, y in zip(a1, b2))
            beta = tuple(x + y for x, y in zip(b1, a2))
            if alpha == beta:
                M[r, c] = float(uniform_moment(n, alpha, beta))
    return M


@dataclass(frozen=True)
class BasisBlock:
    """Orthonormal basis of one H_{j,l}: rows of `coeffs` over monomials `keys`."""

    j: int
    l: int
    keys: List[MonomialKey]
    coeffs: np.ndarray  # (dim, nmono) real

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis element values at sphere points, shape (dim, N)."""
        return self.coeffs @ monomial_values(points, self.keys)


@dataclass(frozen=True)
class HarmonicBasis:
    """All H_{j,l} blocks with j, l <= J_max, orthonormal in L2 of the contact volume."""

    n: int
    J_max: int
    blocks: Dict[Tuple[int, int], BasisBlock]
    _mult_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def block(self, j: int, l: int) -> BasisBlock:
        return self.blocks[(j, l)]

    def bidegrees(self) -> List[Tuple[int, int]]:
        return sorted(self.blocks.keys())

    def save(self, path: str, quadrature_id: str = "exact-moments") -> None:
        with open(path, "w") as fh:
            fh.write(f"# crsphere-basis v1 n={self.n} J_max={self.J_max} quadrature={quadrature_id}\n")
            for (j, l) in self.bidegrees():
                blk = self.blocks[(j, l)]
                fh.write(f"# block j={j} l={l} dim={blk.dim} nmono={len(blk.keys)}\n")
                for m, (a, b) in enumerate(blk.keys):
                    astr = ",".join(map(str, a))
                    bstr = ",".join(map(str, b))
                    row = " ".join(f"{blk.coeffs[r, m]:.17g}" for r in range(blk.dim))
                    fh.write(f"{astr}|{bstr} {row}\n")

    @classmethod
    def load(cls, path: str) -> "HarmonicBasis":
        with open(path) as fh:
            header = fh.readline().strip()
            meta = dict(kv.split("=") for kv in header.lstrip("# ").split() if "=" in kv)
            n = int(meta["n"])
            J_max = int(meta["J_max"])
            blocks = {}
            cur = None
            rows: List[List[float]] = []
            keys: List[MonomialKey] = []

            def flush():
                if cur is not None:
                    coeffs = np.array(rows).T if rows else np.zeros((0, len(keys)))
                    blocks[cur] = BasisBlock(cur[0], cur[1], list(keys), coeffs)

            for line in fh:
                line = line.strip()
                if line.startswith("# block"):
                    flush()
                    meta = dict(kv.split("=") for kv in line.lstrip("# ").split() if "=" in kv)
                    cur = (int(meta["j"]), int(meta["l"]))
                    rows, keys = [], []
                elif line:
                    keypart, *vals = line.split()
                    astr, bstr = keypart.split("|")
                    keys.append((tuple(map(int, astr.split(","))), tuple(map(int, bstr.split(",")))))
                    rows.append([float(v) for v in vals])
            flush()
        return cls(n, J_max, blocks)


def build_basis(n: int, J_max: int, rule: Optional[QuadratureRule] = None) -> HarmonicBasis:
    """Construct orthonormal bases of all H_{j,l} with j, l <= J_max.

    If a quadrature rule is supplied it must be exact at degree 2*J_max
    (raises QuadratureInsufficientError otherwise); the rule is not used in
    the construction, only validated for later analysis calls.
    """
    if J_max < 0:
        raise ValueError("J_max must be nonnegative")
    if rule is not None and rule.degree < 2 * J_max:
        raise QuadratureInsufficientError(
            f"rule degree {rule.degree} < 2*J_max = {2 * J_max}")
    V = total_volume(n)
    blocks = {}
    for j in range(J_max + 1):
        for l in range(J_max + 1):
            keys = _block_keys(n, j, l)
            null = _harmonic_nullspace(n, j, l)
            C = np.array([[float(c) for c in vec] for vec in null])
            M = _monomial_pairing(n, keys, keys)
            G = C @ M @ C.T  # Gram in units of V
            evals, evecs = np.linalg.eigh(G)
            if np.min(evals) <= 0:
                raise RuntimeError(f"Gram matrix of H_({j},{l}) not positive definite")
            orth = (evecs / np.sqrt(evals)).T @ C / math.sqrt(V)
            blocks[(j, l)] = BasisBlock(j, l, keys, orth)
    return HarmonicBasis(n, J_max, blocks)


# ---------------------------------------------------------------------------
# Expansions
# ---------------------------------------------------------------------------

@dataclass
class HarmonicExpansion:
    """Coefficients of a function against a HarmonicBasis, per bidegree block."""

    n: int
    cutoff: int
    coeffs: Dict[Tuple[int, int], np.ndarray]

    def copy(self) -> "HarmonicExpansion":
        return HarmonicExpansion(self.n, self.cutoff, {k: v.copy() for k, v in self.coeffs.items()})

    def norm2_sq(self) -> float:
        return float(sum(np.sum(np.abs(v) ** 2) for v in self.coeffs.values()))

    def scaled(self, c) -> "HarmonicExpansion":
        return HarmonicExpansion(self.n, self.cutoff, {k: c * v for k, v in self.coeffs.items()})

    def plus(self, other: "HarmonicExpansion") -> "HarmonicExpansion":
        out = self.copy()
        out.cutoff = max(self.cutoff, other.cutoff)
        for k, v in other.coeffs.items():
            if k in out.coeffs:
                out.coeffs[k] = out.coeffs[k] + v
            else:
                out.coeffs[k] = v.copy()
        return out

    def support(self, tol: float = PRUNE_TOL) -> List[Tuple[int, int]]:
        return sorted(k for k, v in self.coeffs.items() if np.max(np.abs(v)) > tol)


def analyze(values: np.ndarray, basis: HarmonicBasis, rule: QuadratureRule,
            cutoff: Optional[int] = None) -> HarmonicExpansion:
    """Quadrature inner products of sampled values against all basis elements."""
    cutoff = basis.J_max if cutoff is None else cutoff
    if cutoff > basis.J_max:
        raise CutoffExceededError(f"cutoff {cutoff} exceeds basis J_max {basis.J_max}")
    wv = rule.weights * values
    coeffs = {}
    for (j, l) in basis.bidegrees():
        if j > cutoff or l > cutoff:
            continue
        bv = basis.block(j, l).values(rule.nodes)
        coeffs[(j, l)] = np.conj(bv) @ wv
    return HarmonicExpansion(basis.n, cutoff, coeffs)


def synthesize(e: HarmonicExpansion, basis: HarmonicBasis, points: np.ndarray) -> np.ndarray:
    """Pointwise values of the expansion at the given sphere points."""
    if e.cutoff > basis.J_max:
        raise CutoffExceededError(f"expansion cutoff {e.cutoff} exceeds basis J_max {basis.J_max}")
    vals = np.zeros(points.shape[0], dtype=complex)
    for (j, l), c in e.coeffs.items():
        if np.all(c == 0):
            continue
        vals += c @ basis.block(j, l).values(points)
    return vals


def _transfer_matrices(basis: HarmonicBasis, i: int):
    """Exact transfer matrices for multiplication by z_i between basis blocks.

    Returns dict ((j,l) -> (j',l')) -> matrix mapping coefficients in (j,l)
    to coefficients in (j',l'), where (j',l') ranges over the two blocks
    (j+1,l) and (j,l-1) that z_i * H_{j,l} meets.
    """
    cache_key = ("mult", i)
    if cache_key in basis._mult_cache:
        return basis._mult_cache[cache_key]
    n = basis.n
    out = {}
    for (j, l) in basis.bidegrees():
        src = basis.block(j, l)
        shifted = [(tuple(x + (1 if q == i else 0) for q, x in enumerate(a)), b)
                   for (a, b) in src.keys]
        for (j2, l2) in ((j + 1, l), (j, l - 1)):
            if (j2, l2) not in basis.blocks:
                continue
            dst = basis.block(j2, l2)
            P = _monomial_pairing(n, shifted, dst.keys)  # <z_i mono, mono'> / V
            # T[m', m] = <z_i b_m, b'_{m'}>; coefficients are real
            T = total_volume(n) * dst.coeffs @ P.T @ src.coeffs.T
            out[((j, l), (j2, l2))] = T
    basis._mult_cache[cache_key] = out
    return out


def multiply_by_coordinate(e: HarmonicExpansion, i: int, basis: HarmonicBasis) -> HarmonicExpansion:
    """Expansion of z_i * F, supported on the (j+1,l) and (j,l-1) blocks of F."""
    top = max((j for (j, l) in e.coeffs.keys()), default=0)
    if top + 1 > basis.J_max:
        raise CutoffExceededError(
            f"multiplication needs headroom: top degree {top}+1 > basis J_max {basis.J_max}")
    transfers = _transfer_matrices(basis, i)
    out: Dict[Tuple[int, int], np.ndarray] = {}
    for (j, l), c in e.coeffs.items():
        for (j2, l2) in ((j + 1, l), (j, l - 1)):
            key = ((j, l), (j2, l2))
            if key not in transfers:
                continue
            v = transfers[key] @ c
            if (j2, l2) in out:
                out[(j2, l2)] = out[(j2, l2)] + v
            else:
                out[(j2, l2)] = v
    scale = max(1.0, max((np.max(np.abs(v)) for v in out.values()), default=1.0))
    for k in list(out.keys()):
        v = out[k]
        v[np.abs(v) < PRUNE_TOL * scale] = 0.0
    return HarmonicExpansion(e.n, min(e.cutoff + 1, basis.J_max), out)


def multiply_by_conjugate_coordinate(e: HarmonicExpansion, i: int,
                                     basis: HarmonicBasis) -> HarmonicExpansion:
    """Expansion of zbar_i * F, supported on the (j,l+1) and (j-1,l) blocks.

    Uses the adjoint of the z_i transfer matrices: <zbar_i b, b'> = <b, z_i b'>.
    """
    top = max((l for (j, l) in e.coeffs.keys()), default=0)
    if top + 1 > basis.J_max:
        raise CutoffExceededError(
            f"multiplication needs headroom: top degree {top}+1 > basis J_max {basis.J_max}")
    transfers = _transfer_matrices(basis, i)
    out: Dict[Tuple[int, int], np.ndarray] = {}
    for (j, l), c in e.coeffs.items():
        for (j2, l2) in ((j, l + 1), (j - 1, l)):
            if (j2, l2) not in basis.blocks:
                continue
            key = ((j2, l2), (j, l))  # z_i maps (j2,l2) into (j,l)
            if key not in transfers:
                continue
            v = transfers[key].T @ c
            if (j2, l2) in out:
                out[(j2, l2)] = out[(j2, l2)] + v
            else:
                out[(j2, l2)] = v
    scale = max(1.0, max((np.max(np.abs(v)) for v in out.values()), default=1.0))
    for k in list(out.keys()):
        v = out[k]
        v[np.abs(v) < PRUNE_TOL * scale] = 0.0
    return HarmonicExpansion(e.n, min(e.cutoff + 1, basis.J_max), out)


# ---------------------------------------------------------------------------
# Real orthonormal basis (for optimization over real-valued functions)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealHarmonicBasis:
    """Orthonormal basis of real-valued band-limited functions.

    Each element is the real part of a complex-coefficient monomial table and
    is tagged with its bidegree pair {j,l} so that multipliers with
    lambda(j,l) = lambda(l,j) act diagonally.
    """

    n: int
    J_max: int
    keys: List[MonomialKey]
    tables: np.ndarray  # (dim, nmono) complex; element r is Re(tables[r] . monomials)
    bidegree: List[Tuple[int, int]]  # per element, with j >= l

    @property
    def dim(self) -> int:
        return self.tables.shape[0]

    def values(self, points: np.ndarray) -> np.ndarray:
        """(dim, N) real-valued basis values."""
        mv = monomial_values(points, self.keys)
        return np.real(self.tables @ mv)


def build_real_basis(basis: HarmonicBasis) -> RealHarmonicBasis:
    n = basis.n
    V = total_volume(n)
    key_index: Dict[MonomialKey, int] = {}
    all_keys: List[MonomialKey] = []

    def key_id(k: MonomialKey) -> int:
        if k not in key_index:
            key_index[k] = len(all_keys)
            all_keys.append(k)
        return key_index[k]

    rows = []
    tags = []
    for (j, l) in basis.bidegrees():
        if j < l:
            continue
        blk = basis.block(j, l)
        ids = [key_id(k) for k in blk.keys]
        if j > l:
            # sqrt(2) Re(b) and sqrt(2) Im(b) = Re(-i sqrt(2) b)
            for r in range(blk.dim):
                for factor in (math.sqrt(2.0), -1j * math.sqrt(2.0)):
                    row = {}
                    for m, idx in enumerate(ids):
                        row[idx] = row.get(idx, 0) + factor * blk.coeffs[r, m]
                    rows.append(row)
                    tags.append((j, l))
        else:
            # candidates b + conj(b) and i(conj(b) - b); conj swaps (a,b) keys
            swap_ids = [key_id((b, a)) for (a, b) in blk.keys]
            cands = []
            for r in range(blk.dim):
                for mode in (0, 1):
                    row: Dict[int, complex] = {}
                    for m in range(len(ids)):
                        c = blk.coeffs[r, m]
                        if mode == 0:
                            row[ids[m]] = row.get(ids[m], 0) + c
                            row[swap_ids[m]] = row.get(swap_ids[m], 0) + c
                        else:
                            row[ids[m]] = row.get(ids[m], 0) - 1j * c
                            row[swap_ids[m]] = row.get(swap_ids[m], 0) + 1j * c
                    cands.append(row)
            # orthonormalize the real-valued candidates, trimming to dim H_{j,j}
            keys_local = sorted({idx for row in cands for idx in row})
            local_pos = {idx: q for q, idx in enumerate(keys_local)}
            Cm = np.zeros((len(cands), len(keys_local)), dtype=complex)
            for r, row in enumerate(cands):
                for idx, c in row.items():
                    Cm[r, local_pos[idx]] = c
            Mm = _monomial_pairing(n, [all_keys[i] for i in keys_local],
                                   [all_keys[i] for i in keys_local])
            G = np.real(Cm @ Mm @ np.conj(Cm).T) * V
            evals, evecs = np.linalg.eigh(G)
            keep = evals > 1e-9 * np.max(evals)
            comb = (evecs[:, keep] / np.sqrt(evals[keep])).T @ Cm
            assert comb.shape[0] == blk.dim, "real span of H_(j,j) has wrong dimension"
            for r in range(comb.shape[0]):
                rows.append({keys_local[q]: comb[r, q] for q in range(len(keys_local))
                             if comb[r, q] != 0})
                tags.append((j, j))

    tables = np.zeros((len(rows), len(all_keys)), dtype=complex)
    for r, row in enumerate(rows):
        for idx, c in row.items():
            tables[r, idx] = c
    return RealHarmonicBasis(n, basis.J_max, all_keys, tables, tags)

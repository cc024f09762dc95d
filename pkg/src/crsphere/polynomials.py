"""Exact arithmetic for polynomials in (z, zbar) restricted to the unit sphere.

A sphere polynomial is stored as a dict mapping (alpha, beta) -> coefficient,
where alpha and beta are exponent tuples over the n+1 complex coordinates and
the coefficient is a Fraction (or complex float for numeric tables).  All
integrals against the contact volume reduce to the closed-form moments of
monomials, so inner products of polynomials are exact rational multiples of
the total volume.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Iterable, List, Tuple

import numpy as np

Exponent = Tuple[int, ...]
MonomialKey = Tuple[Exponent, Exponent]
PolyDict = Dict[MonomialKey, Fraction]


def total_volume(n: int) -> float:
    """Total mass of the contact volume form on the (2n+1)-sphere: (2*pi)^(n+1)."""
    return (2.0 * math.pi) ** (n + 1)


def uniform_moment(n: int, alpha: Exponent, beta: Exponent) -> Fraction:
    """Exact normalized moment of z^alpha zbar^beta against the contact volume.

    Returns (1/V) * integral of z^alpha zbar^beta, which vanishes unless
    alpha == beta and otherwise equals n! alpha! / (n + |alpha|)!.
    """
    if alpha != beta:
        return Fraction(0)
    num = math.factorial(n)
    for a in alpha:
        num *= math.factorial(a)
    return Fraction(num, math.factorial(n + sum(alpha)))


def poly_add(p: PolyDict, q: PolyDict) -> PolyDict:
    out = dict(p)
    for key, c in q.items():
        c2 = out.get(key, Fraction(0)) + c
        if c2:
            out[key] = c2
        elif key in out:
            del out[key]
    return out


def poly_scale(p: PolyDict, c) -> PolyDict:
    if not c:
        return {}
    return {key: coef * c for key, coef in p.items()}


def poly_mul(p: PolyDict, q: PolyDict) -> PolyDict:
    out: PolyDict = {}
    for (a1, b1), c1 in p.items():
        for (a2, b2), c2 in q.items():
            key = (tuple(x + y for x, y in zip(a1, a2)),
                   tuple(x + y for x, y in zip(b1, b2)))
            c = out.get(key, Fraction(0)) + c1 * c2
            if c:
                out[key] = c
            elif key in out:
                del out[key]
    return out


def poly_conj(p: PolyDict) -> PolyDict:
    """Complex conjugate; valid for real (Fraction) coefficients."""
    return {(b, a): c for (a, b), c in p.items()}


def monomial(nvars: int, alpha: Exponent, beta: Exponent, coeff=Fraction(1)) -> PolyDict:
    return {(tuple(alpha), tuple(beta)): Fraction(coeff) if not isinstance(coeff, complex) else coeff}


def flat_laplacian(p: PolyDict) -> PolyDict:
    """Flat Laplacian sum_i d^2/dz_i dzbar_i acting on a polynomial dict."""
    out: PolyDict = {}
    for (a, b), c in p.items():
        for i in range(len(a)):
            if a[i] and b[i]:
                key = (tuple(x - (1 if j == i else 0) for j, x in enumerate(a)),
                       tuple(x - (1 if j == i else 0) for j, x in enumerate(b)))
                c2 = out.get(key, Fraction(0)) + c * a[i] * b[i]
                if c2:
                    out[key] = c2
                elif key in out:
                    del out[key]
    return out


def wirtinger_derivative(p: PolyDict, i: int, conjugate: bool = False) -> PolyDict:
    """d/dz_i (or d/dzbar_i when conjugate=True) of a polynomial dict."""
    out: PolyDict = {}
    for (a, b), c in p.items():
        e = b[i] if conjugate else a[i]
        if not e:
            continue
        if conjugate:
            key = (a, tuple(x - (1 if j == i else 0) for j, x in enumerate(b)))
        else:
            key = (tuple(x - (1 if j == i else 0) for j, x in enumerate(a)), b)
        c2 = out.get(key, Fraction(0)) + c * e
        if c2:
            out[key] = c2
        elif key in out:
            del out[key]
    return out


def inner_product_exact(n: int, p: PolyDict, q: PolyDict) -> Fraction:
    """Exact (1/V)-normalized L2 inner product <p, q> = (1/V) * int p conj(q).

    Requires rational coefficients.  conj(q) swaps exponent roles, so the
    integrand monomials are z^(a+b') zbar^(b+a').
    """
    total = Fraction(0)
    for (a1, b1), c1 in p.items():
        for (a2, b2), c2 in q.items():
            alpha = tuple(x + y for x, y in zip(a1, b2))
            beta = tuple(x + y for x, y in zip(b1, a2))
            if alpha == beta:
                total += c1 * c2 * uniform_moment(n, alpha, beta)
    return total


def reduce_on_sphere(p: PolyDict) -> PolyDict:
    """Canonical form of a polynomial modulo the sphere relation sum |z_i|^2 = 1.

    Eliminates every occurrence of z_last*zbar_last by substituting
    1 - sum_{i<last} z_i zbar_i.  Two polynomials agree on the sphere iff
    their reduced forms are identical.
    """
    work = dict(p)
    out: PolyDict = {}
    while work:
        (a, b), c = work.popitem()
        if not c:
            continue
        last = len(a) - 1
        if a[last] and b[last]:
            a2 = tuple(x - (1 if j == last else 0) for j, x in enumerate(a))
            b2 = tuple(x - (1 if j == last else 0) for j, x in enumerate(b))
            rep: PolyDict = {(a2, b2): c}
            for i in range(last):
                ai = tuple(x + (1 if j == i else 0) for j, x in enumerate(a2))
                bi = tuple(x + (1 if j == i else 0) for j, x in enumerate(b2))
                rep[(ai, bi)] = rep.get((ai, bi), Fraction(0)) - c
            for key, cc in rep.items():
                c2 = work.get(key, Fraction(0)) + cc
                if c2:
                    work[key] = c2
                elif key in work:
                    del work[key]
        else:
            c2 = out.get((a, b), Fraction(0)) + c
            if c2:
                out[(a, b)] = c2
            elif (a, b) in out:
                del out[(a, b)]
    return out


def evaluate(p: PolyDict, points: np.ndarray) -> np.ndarray:
    """Evaluate at an (N, n+1) array of complex coordinates."""
    vals = np.zeros(points.shape[0], dtype=complex)
    conj = np.conj(points)
    for (a, b), c in p.items():
        term = np.full(points.shape[0], complex(c))
        for i, e in enumerate(a):
            if e:
                term *= points[:, i] ** e
        for i, e in enumerate(b):
            if e:
                term *= conj[:, i] ** e
        vals += term
    return vals


def monomial_values(points: np.ndarray, keys: List[MonomialKey]) -> np.ndarray:
    """Values of a list of monomials at sphere points, shape (len(keys), N)."""
    conj = np.conj(points)
    out = np.empty((len(keys), points.shape[0]), dtype=complex)
    for r, (a, b) in enumerate(keys):
        term = np.ones(points.shape[0], dtype=complex)
        for i, e in enumerate(a):
            if e:
                term *= points[:, i] ** e
        for i, e in enumerate(b):
            if e:
                term *= conj[:, i] ** e
        out[r] = term
    return out


def exponent_tuples(nvars: int, degree: int) -> List[Exponent]:
    """All exponent tuples over nvars variables with total degree == degree."""
    if nvars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in exponent_tuples(nvars - 1, degree - first):
            out.append((first,) + rest)
    return out


def rational_nullspace(rows: List[List[Fraction]], ncols: int) -> List[List[Fraction]]:
    """Nullspace basis of a rational matrix via fraction-exact Gauss elimination.

    `rows` is a list of length-ncols rational rows; returns basis vectors of
    the right nullspace, each of length ncols.
    """
    mat = [list(r) for r in rows]
    nrows = len(mat)
    pivot_cols: List[int] = []
    r = 0
    for c in range(ncols):
        pivot = None
        for rr in range(r, nrows):
            if mat[rr][c]:
                pivot = rr
                break
        if pivot is None:
            continue
        mat[r], mat[pivot] = mat[pivot], mat[r]
        pv = mat[r][c]
        mat[r] = [x / pv for x in mat[r]]
        for rr in range(nrows):
            if rr != r and mat[rr][c]:
                f = mat[rr][c]
                mat[rr] = [x - f * y for x, y in zip(mat[rr], mat[r])]
        pivot_cols.append(c)
        r += 1
        if r == nrows:
            break
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivot_cols):
            vec[pc] = -mat[i][fc]
        basis.append(vec)
    return basis

"""Cochains, mass-matrix inner products and the operators d, delta, Laplacian.

The codifferential is the adjoint of the coboundary with respect to the
mass inner products, ``delta_p = M_{p-1}^{-1} D_{p-1}^T M_p``, so that
``<d a, b> = <a, delta b>`` holds up to round-off for any SPD masses.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import permutations
from math import factorial
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import splu

from . import linsolve
from .config import DEFAULT, Tolerances
from .mesh import MeshError, SimplicialComplex, boundary_matrix

SCHEMES = ("combinatorial", "lumped-barycentric", "lumped-circumcentric")


class DegreeWarning(UserWarning):
    """An operator was applied outside the degree range of the complex."""


@dataclass(frozen=True)
class Cochain:
    degree: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def __add__(self, other: "Cochain") -> "Cochain":
        _same_degree(self, other)
        return Cochain(self.degree, self.values + other.values)

    def __sub__(self, other: "Cochain") -> "Cochain":
        _same_degree(self, other)
        return Cochain(self.degree, self.values - other.values)

    def __mul__(self, c: float) -> "Cochain":
        return Cochain(self.degree, c * self.values)

    __rmul__ = __mul__

    def to_json(self) -> str:
        return json.dumps({"degree": self.degree, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str, count: Optional[int] = None) -> "Cochain":
        """Read ``{"degree": p, "values": [...]}``; ``count`` enforces the length."""
        data = json.loads(text)
        try:
            degree, values = int(data["degree"]), data["values"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed cochain document: {exc}") from None
        if count is not None and len(values) != count:
            raise ValueError(f"cochain has {len(values)} values, degree {degree} has {count} simplices")
        return cls(degree, np.asarray(values, dtype=float))


def _same_degree(a: Cochain, b: Cochain):
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")


# ---------------------------------------------------------------------------
# geometry

def _volume(P: np.ndarray) -> float:
    """Unsigned k-volume of the simplex with rows of ``P`` as vertices."""
    k = P.shape[0] - 1
    if k == 0:
        return 1.0
    E = (P[1:] - P[0]).T
    g = np.linalg.det(E.T @ E)
    return float(np.sqrt(max(g, 0.0)) / factorial(k))


def _circumcenter(P: np.ndarray) -> np.ndarray:
    if P.shape[0] == 1:
        return P[0].copy()
    E = (P[1:] - P[0]).T
    G = E.T @ E
    a = np.linalg.solve(2.0 * G, np.diag(G))
    return P[0] + E @ a


def _dual_volumes(K: SimplicialComplex, p: int, circumcentric: bool) -> np.ndarray:
    """Barycentric or signed circumcentric dual volumes of all p-simplices."""
    n = K.dim
    pos = K.positions
    index = K.index(p)
    out = np.zeros(len(K.simplices[p]))
    center_cache: dict = {}

    def center(s):
        c = center_cache.get(s)
        if c is None:
            P = pos[list(s)]
            c = _circumcenter(P) if circumcentric else P.mean(axis=0)
            center_cache[s] = c
        return c

    for top in K.simplices[n]:
        for order in permutations(top):
            # a flag s_p < ... < s_n = top built by adding vertices in this order;
            # each flag appears (p+1)! times, once per ordering of its first p+1 vertices
            if list(order[: p + 1]) != sorted(order[: p + 1]):
                continue
            chain = [tuple(sorted(order[: k + 1])) for k in range(p, n + 1)]
            pts = np.array([center(s) for s in chain])
            vol = _volume(pts)
            if circumcentric:
                sign = 1.0
                for k in range(len(chain) - 1):
                    lo, hi = chain[k], chain[k + 1]
                    (v,) = set(hi) - set(lo)
                    s = np.dot(center(hi) - center(lo), pos[v] - center(lo))
                    sign *= np.sign(s)
                vol *= sign
            out[index[chain[0]]] += vol
    return out


def _primal_volumes(K: SimplicialComplex, p: int) -> np.ndarray:
    return np.array([_volume(K.positions[list(s)]) for s in K.simplices[p]])


# ---------------------------------------------------------------------------
# spaces and operators

@dataclass(frozen=True, eq=False)
class CochainSpace:
    """Degree-p cochains with the inner product ``<a, b> = a^T M b``."""

    degree: int
    count: int
    mass: sparse.csr_matrix = field(repr=False)
    scheme: str = "combinatorial"

    def inner(self, a, b) -> float:
        return float(np.asarray(a) @ (self.mass @ np.asarray(b)))

    def norm(self, a) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    @property
    def is_diagonal(self) -> bool:
        M = self.mass.tocoo()
        return bool(np.all(M.row == M.col))


def mass_matrix(K: SimplicialComplex, p: int, scheme: str = "combinatorial") -> CochainSpace:
    """Diagonal mass matrix of degree ``p`` under one of the three schemes.

    Geometric entries are ``dual volume / primal volume`` with the primal
    volume of a vertex and the dual volume of a top cell taken as 1.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if not 0 <= p <= K.dim:
        raise ValueError(f"degree {p} out of range 0..{K.dim}")
    count = len(K.simplices[p])
    if scheme == "combinatorial":
        return CochainSpace(p, count, sparse.identity(count, format="csr"), scheme)
    if K.positions is None:
        raise MeshError(f"scheme {scheme!r} needs vertex positions")
    if not K.is_pure():
        raise MeshError(f"scheme {scheme!r} needs a pure complex")
    scale = max(np.ptp(K.positions, axis=0).max(), 1.0)
    for q in range(1, K.dim + 1):
        vols = _primal_volumes(K, q)
        bad = np.flatnonzero(vols <= 1e-12 * scale**q)
        if bad.size:
            raise MeshError(f"degenerate {q}-simplex {K.simplices[q][bad[0]]}")
    dual = _dual_volumes(K, p, circumcentric=(scheme == "lumped-circumcentric"))
    primal = _primal_volumes(K, p)
    diag = dual / primal
    if np.any(diag <= 0):
        i = int(np.argmin(diag))
        raise MeshError(
            f"non-positive dual volume {diag[i]:.3e} at {K.simplices[p][i]}: mesh is not well-centered"
        )
    return CochainSpace(p, count, sparse.diags(diag, format="csr"), scheme)


class OperatorSet:
    """Coboundaries, codifferentials and Laplacians over all degrees of a complex.

    Arrays passed to the ``apply_*`` methods may be vectors or stacks of
    column vectors.
    """

    def __init__(self, K: SimplicialComplex, spaces, tol: Tolerances = DEFAULT, check: bool = True):
        self.complex = K
        self.spaces = tuple(spaces)
        self.tol = tol
        if len(self.spaces) != K.dim + 1:
            raise ValueError("need one cochain space per degree")
        for p, sp in enumerate(self.spaces):
            if sp.count != len(K.simplices[p]) or sp.mass.shape != (sp.count, sp.count):
                raise ValueError(f"mass of degree {p} does not match the complex")
            if check:
                _check_mass(sp, tol)
        self.D = tuple(
            sparse.csr_matrix(boundary_matrix(K, p + 1).T, dtype=float) for p in range(K.dim)
        )
        self._Dt = tuple(sparse.csr_matrix(Dp.T) for Dp in self.D)
        self._minv = [_mass_solver(sp) for sp in self.spaces]
        self._stiffness: dict[int, sparse.csr_matrix] = {}
        self._cache: dict = {}

    @classmethod
    def build(cls, K: SimplicialComplex, scheme: str = "combinatorial", tol: Tolerances = DEFAULT):
        return cls(K, [mass_matrix(K, p, scheme) for p in range(K.dim + 1)], tol)

    @property
    def dim(self) -> int:
        return self.complex.dim

    @property
    def scheme(self) -> str:
        return self.spaces[0].scheme

    def count(self, p: int) -> int:
        return self.spaces[p].count

    def mass(self, p: int) -> sparse.csr_matrix:
        return self.spaces[p].mass

    def solve_mass(self, p: int, x):
        return self._minv[p](x)

    def inner(self, p: int, a, b):
        """Mass inner product; columnwise for 2-D inputs."""
        Mb = self.spaces[p].mass @ b
        return np.sum(np.asarray(a) * Mb, axis=0)

    def norm(self, p: int, a):
        return np.sqrt(np.maximum(self.inner(p, a, a), 0.0))

    def apply_d(self, p: int, x):
        if p >= self.dim:
            return np.zeros((0,) + np.shape(x)[1:])
        return self.D[p] @ x

    def apply_delta(self, p: int, y):
        if p <= 0:
            return np.zeros((0,) + np.shape(y)[1:])
        return self._minv[p - 1](self._Dt[p - 1] @ (self.spaces[p].mass @ y))

    def apply_laplacian(self, p: int, x):
        out = np.zeros(np.shape(x))
        if p < self.dim:
            out = out + self.apply_delta(p + 1, self.apply_d(p, x))
        if p > 0:
            out = out + self.apply_d(p - 1, self.apply_delta(p, x))
        return out

    def stiffness(self, p: int) -> sparse.csr_matrix:
        """``K_p = D_p^T M_{p+1} D_p + M_p D_{p-1} M_{p-1}^{-1} D_{p-1}^T M_p``."""
        if p not in self._stiffness:
            n = self.count(p)
            Kp = sparse.csr_matrix((n, n))
            if p < self.dim:
                Kp = Kp + self.D[p].T @ self.mass(p + 1) @ self.D[p]
            if p > 0:
                B = self.mass(p) @ self.D[p - 1]
                if self.spaces[p - 1].is_diagonal:
                    inv = sparse.diags(1.0 / self.mass(p - 1).diagonal())
                    Kp = Kp + B @ inv @ B.T
                else:
                    Kp = Kp + sparse.csr_matrix(B @ self._minv[p - 1](B.T.toarray()))
            self._stiffness[p] = sparse.csr_matrix(Kp)
        return self._stiffness[p]

    def pencil(self, p: int):
        """Dense generalized eigenpairs of ``(K_p, M_p)`` by Cholesky congruence.

        Returns ascending eigenvalues and M-orthonormal eigenvectors (columns).
        """
        key = ("pencil", p)
        if key not in self._cache:
            M = self.mass(p).toarray()
            fac = linsolve.cholesky(M, self.tol)
            if fac.failed:
                raise linsolve.NumericalError(f"mass matrix of degree {p} is not positive definite")
            L = fac.lower
            Kd = self.stiffness(p).toarray()
            C = solve_triangular(L, solve_triangular(L, Kd, lower=True).T, lower=True)
            C = 0.5 * (C + C.T)
            w, Y = linsolve.sym_eig(C, self.tol)
            X = solve_triangular(L.T, Y, lower=False)
            self._cache[key] = (w, X)
        return self._cache[key]


def _check_mass(sp: CochainSpace, tol: Tolerances):
    M = sp.mass
    scale = abs(M).max() if M.nnz else 0.0
    asym = abs(M - M.T).max() if M.nnz else 0.0
    if asym > tol.mass_symmetry * scale:
        raise ValueError(f"mass of degree {sp.degree} is not symmetric")
    if sp.is_diagonal:
        if sp.count and M.diagonal().min() <= 0:
            raise ValueError(f"mass of degree {sp.degree} is not positive definite")
    elif linsolve.cholesky(M.toarray()).failed:
        raise ValueError(f"mass of degree {sp.degree} is not positive definite")


def _mass_solver(sp: CochainSpace):
    if sp.is_diagonal:
        inv = 1.0 / sp.mass.diagonal()

        def solve(x):
            x = np.asarray(x)
            return x * (inv if x.ndim == 1 else inv[:, None])

        return solve
    lu = splu(sparse.csc_matrix(sp.mass))

    def solve(x):
        return lu.solve(np.asarray(x, dtype=float))

    return solve


# ---------------------------------------------------------------------------
# cochain-level operations

def d(ops: OperatorSet, a: Cochain) -> Cochain:
    """Coboundary; at the top degree returns an empty cochain and warns."""
    if a.degree >= ops.dim:
        warnings.warn(f"d of a top-degree cochain (degree {a.degree})", DegreeWarning, stacklevel=2)
        return Cochain(a.degree + 1, np.zeros(0))
    return Cochain(a.degree + 1, ops.apply_d(a.degree, a.values))


def delta(ops: OperatorSet, b: Cochain) -> Cochain:
    """Codifferential; on 0-cochains returns an empty cochain and warns."""
    if b.degree <= 0:
        warnings.warn("delta of a 0-cochain", DegreeWarning, stacklevel=2)
        return Cochain(-1, np.zeros(0))
    return Cochain(b.degree - 1, ops.apply_delta(b.degree, b.values))


def laplacian(ops: OperatorSet, a: Cochain) -> Cochain:
    return Cochain(a.degree, ops.apply_laplacian(a.degree, a.values))


def inner(space: CochainSpace, a: Cochain, b: Cochain) -> float:
    if a.degree != space.degree or b.degree != space.degree:
        raise ValueError(f"degree mismatch: space {space.degree}, cochains {a.degree}, {b.degree}")
    return space.inner(a.values, b.values)

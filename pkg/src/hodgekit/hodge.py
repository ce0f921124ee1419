"""Harmonic cochains, the harmonic projector and the three-way Hodge split."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linsolve
from .cochain import Cochain, OperatorSet
from .config import DEFAULT
from .linsolve import NumericalError
from .mesh import SimplicialComplex, boundary_matrix


class SpectralGapError(NumericalError):
    """The kernel threshold does not sit inside a clear spectral gap."""


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """M-orthonormal basis of the harmonic p-cochains, stored as columns."""

    degree: int
    vectors: np.ndarray
    threshold: float
    mass: object = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.dim

    def __getitem__(self, i) -> Cochain:
        return Cochain(self.degree, self.vectors[:, i])

    def coefficients(self, x):
        """Coefficients ``<x, e_i>`` (rows) of a vector or column stack."""
        return self.vectors.T @ (self.mass @ x)

    def project(self, x):
        return self.vectors @ self.coefficients(x)

    def complement(self, x):
        return x - self.project(x)


def _kernel_split(w: np.ndarray, threshold: float, tol=DEFAULT) -> int:
    """Number of leading eigenvalues treated as zero."""
    lam_max = w[-1] if w.size else 0.0
    if w.size == 0 or lam_max <= np.finfo(float).tiny:
        return w.size
    m = int(np.sum(w < threshold * lam_max))
    if 0 < m < w.size:
        largest_zero = np.abs(w[:m]).max()
        if w[m] <= tol.gap_factor * largest_zero:
            raise SpectralGapError(
                f"no spectral gap at threshold {threshold:g}: "
                f"kept {w[m]:.3e}, discarded {largest_zero:.3e}"
            )
    return m


def harmonic_basis(ops: OperatorSet, p: int, threshold: Optional[float] = None) -> HarmonicBasis:
    """Null space of the pencil ``(K_p, M_p)`` from the dense Cholesky-reduced eigensolve."""
    threshold = ops.tol.kernel if threshold is None else threshold
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    w, X = ops.pencil(p)
    m = _kernel_split(w, threshold, ops.tol)
    return HarmonicBasis(p, X[:, :m].copy(), threshold, ops.mass(p))


def project_H(basis: HarmonicBasis, a: Cochain) -> Cochain:
    """Harmonic part ``sum_i <a, e_i> e_i``."""
    if a.degree != basis.degree:
        raise ValueError(f"degree mismatch: basis {basis.degree}, cochain {a.degree}")
    return Cochain(a.degree, basis.project(a.values))


@dataclass(frozen=True)
class HodgeSplit:
    exact: Cochain
    coexact: Cochain
    harmonic: Cochain
    exact_potential: Optional[Cochain] = None
    coexact_potential: Optional[Cochain] = None
    residual: float = 0.0
    orthogonality: float = 0.0

    def to_json(self) -> str:
        return json.dumps({
            "exact": self.exact.values.tolist(),
            "coexact": self.coexact.values.tolist(),
            "harmonic": self.harmonic.values.tolist(),
            "residual": self.residual,
            "orthogonality": self.orthogonality,
        })


def _least_squares_d(ops: OperatorSet, q: int, r: np.ndarray):
    """Minimize ``||d_q x - r||_M`` over q-cochains via CG on ``delta d x = delta r``."""
    rhs = ops.apply_delta(q + 1, r)
    cap = ops.tol.cg_cap_factor * max(ops.count(q), 1)
    res = linsolve.cg_solve(
        lambda x: ops.apply_delta(q + 1, ops.apply_d(q, x)),
        rhs,
        tol=ops.tol.cg_rtol,
        cap=cap,
        mass=lambda x: ops.mass(q) @ x,
    )
    if not res.converged:
        raise NumericalError(f"exact-part solve stalled after {res.iterations} iterations", res.residual)
    return res.x


def _least_squares_delta(ops: OperatorSet, q: int, r: np.ndarray):
    """Minimize ``||delta_q y - r||_M`` over q-cochains via CG on ``d delta y = d r``."""
    rhs = ops.apply_d(q - 1, r)
    cap = ops.tol.cg_cap_factor * max(ops.count(q), 1)
    res = linsolve.cg_solve(
        lambda y: ops.apply_d(q - 1, ops.apply_delta(q, y)),
        rhs,
        tol=ops.tol.cg_rtol,
        cap=cap,
        mass=lambda y: ops.mass(q) @ y,
    )
    if not res.converged:
        raise NumericalError(f"coexact-part solve stalled after {res.iterations} iterations", res.residual)
    return res.x


def decompose(ops: OperatorSet, basis: HarmonicBasis, a: Cochain) -> HodgeSplit:
    """Split ``a`` into exact, coexact and harmonic parts.

    The exact part comes from a least-squares potential, the coexact part is
    the remainder, and a second least-squares solve certifies that the
    remainder really is coexact.
    """
    p = a.degree
    if p != basis.degree:
        raise ValueError(f"degree mismatch: basis {basis.degree}, cochain {p}")
    x = a.values
    harm = basis.project(x)
    rest = x - harm
    norm_a = float(ops.norm(p, x))

    exact = np.zeros_like(x)
    beta = None
    if p > 0:
        beta = _least_squares_d(ops, p - 1, rest)
        exact = ops.apply_d(p - 1, beta)
    coexact = rest - exact

    gamma = None
    if p < ops.dim:
        gamma = _least_squares_delta(ops, p + 1, coexact)
        miss = float(ops.norm(p, ops.apply_delta(p + 1, gamma) - coexact))
    else:
        miss = float(ops.norm(p, coexact))
    if miss > ops.tol.uniqueness * max(norm_a, np.finfo(float).tiny):
        raise NumericalError(f"remainder is not coexact (misfit {miss:.3e})", miss)

    parts = (exact, coexact, harm)
    residual = float(ops.norm(p, x - exact - coexact - harm))
    ortho = max(abs(float(ops.inner(p, parts[i], parts[j])))
                for i, j in ((0, 1), (0, 2), (1, 2)))
    scale = norm_a if norm_a > 0 else 1.0
    return HodgeSplit(
        Cochain(p, exact),
        Cochain(p, coexact),
        Cochain(p, harm),
        None if beta is None else Cochain(p - 1, beta),
        None if gamma is None else Cochain(p + 1, gamma),
        residual / scale,
        ortho / scale**2,
    )


def _float_rank(B: np.ndarray):
    """Rank from singular values, or None when the cutoff is ambiguous."""
    if B.size == 0:
        return 0
    s = np.linalg.svd(B, compute_uv=False)
    cut = max(B.shape) * np.finfo(float).eps * s[0]
    if s[0] == 0:
        return 0
    r = int(np.sum(s > cut))
    # demand a clear gap around the cutoff
    if np.any((s > cut) & (s < 1e6 * cut)):
        return None
    return r


def boundary_rank(K: SimplicialComplex, p: int) -> int:
    if p < 1 or p > K.dim:
        return 0
    B = boundary_matrix(K, p).toarray()
    r = _float_rank(B.astype(float))
    return linsolve.rank_exact(B) if r is None else r


def betti(K: SimplicialComplex, p: int) -> int:
    """``dim ker boundary_p - rank boundary_{p+1}``, mass independent."""
    if not 0 <= p <= K.dim:
        return 0
    return len(K.simplices[p]) - boundary_rank(K, p) - boundary_rank(K, p + 1)

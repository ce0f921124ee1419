"""Small dense/iterative linear algebra kernel.

Dense routines wrap LAPACK through numpy; the exact integer rank and the
conjugate gradient iteration are written out here because callers rely on
their precise stopping and fallback behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import DEFAULT


class NumericalError(RuntimeError):
    """A factorization or iteration failed to meet its contract."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


def _check_symmetric(A: np.ndarray, rtol: float) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square array, got shape {A.shape}")
    scale = max(np.abs(A).max(initial=0.0), np.finfo(float).tiny)
    asym = np.abs(A - A.T).max(initial=0.0)
    if asym > rtol * scale:
        raise ValueError(f"array is not symmetric (relative asymmetry {asym / scale:.3e})")


@dataclass(frozen=True)
class SymmetricFactor:
    """Lower triangular Cholesky factor, or a failure flag."""

    size: int
    lower: Optional[np.ndarray]
    failed: bool = False

    def reconstruct(self) -> np.ndarray:
        if self.failed:
            raise NumericalError("matrix is not positive definite")
        return self.lower @ self.lower.T


def cholesky(A, tol=DEFAULT) -> SymmetricFactor:
    """Cholesky factor ``A = L L^T``.

    Pivots at or below ``size * 1e-14 * max(diag(A))`` mark the input as
    not positive definite instead of raising.
    """
    A = np.asarray(A, dtype=float)
    _check_symmetric(A, tol.symmetric_input)
    n = A.shape[0]
    if n == 0:
        return SymmetricFactor(0, np.zeros((0, 0)))
    floor = n * tol.cholesky_pivot * max(np.diag(A).max(), 0.0)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return SymmetricFactor(n, None, failed=True)
    if np.any(np.diag(L) ** 2 <= floor):
        return SymmetricFactor(n, None, failed=True)
    return SymmetricFactor(n, L)


def sym_eig(A, tol=DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    A = np.asarray(A, dtype=float)
    _check_symmetric(A, tol.symmetric_input)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}") from exc
    return w, V


def rank_exact(B) -> int:
    """Rank over the rationals by fraction-free (Bareiss) elimination."""
    rows = [[int(x) for x in row] for row in np.asarray(B).tolist()]
    if not rows or not rows[0]:
        return 0
    m, n = len(rows), len(rows[0])
    rank = 0
    prev = 1
    for col in range(n):
        if rank == m:
            break
        pivot = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pr = rows[rank]
        p = pr[col]
        for r in range(rank + 1, m):
            row = rows[r]
            f = row[col]
            if f == 0:
                if p != prev:
                    rows[r] = [(p * x) // prev for x in row]
                continue
            rows[r] = [(p * x - f * y) // prev for x, y in zip(row, pr)]
        prev = p
        rank += 1
    return rank


@dataclass
class CGResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def cg_solve(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = DEFAULT.cg_rtol,
    cap: Optional[int] = None,
    mass: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> CGResult:
    """Conjugate gradients for an operator self-adjoint in a weighted inner product.

    Parameters
    ----------
    apply : callable
        Operator application ``x -> A x``.
    b : ndarray
        Right-hand side, assumed to lie in the range of ``A``.
    tol : float
        Relative residual target measured in the weighted norm.
    cap : int, optional
        Iteration cap; defaults to ``10 * len(b)``.
    mass : callable, optional
        Applies the Gram matrix ``W`` of the inner product ``<x, y> = x^T W y``
        in which ``A`` is self-adjoint. Euclidean when omitted.
    project : callable, optional
        Projector applied to residual and search directions, used to deflate
        a known null space.

    A non-converged run returns the best iterate with ``converged=False``.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    cap = DEFAULT.cg_cap_factor * max(n, 1) if cap is None else cap
    W = mass if mass is not None else (lambda v: v)
    P = project if project is not None else (lambda v: v)

    def norm(v):
        return float(np.sqrt(max(v @ W(v), 0.0)))

    x = np.zeros(n)
    r = P(b.copy())
    bnorm = norm(r)
    if bnorm == 0.0:
        return CGResult(x, 0.0, 0, True)
    z = r
    rz = float(r @ W(r))
    best_x, best_res = x.copy(), 1.0
    for it in range(1, cap + 1):
        Az = P(apply(z))
        zAz = float(z @ W(Az))
        if zAz <= 0.0:
            break
        step = rz / zAz
        x = x + step * z
        r = r - step * Az
        res = norm(r) / bnorm
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            # replace the recursive residual by the true one before accepting
            true_res = norm(P(b - apply(x))) / bnorm
            if true_res <= tol:
                return CGResult(x, true_res, it, True)
            r = P(b - apply(x))
            rz = float(r @ W(r))
            z = r
            continue
        rz_new = float(r @ W(r))
        z = r + (rz_new / rz) * z
        rz = rz_new
    true_res = norm(P(b - apply(best_x))) / bnorm
    return CGResult(best_x, true_res, cap, False)

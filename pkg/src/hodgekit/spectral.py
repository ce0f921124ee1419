"""Green operator, Laplacian spectrum and spectral expansion.

``G`` inverts the Laplacian on the M-orthogonal complement of the harmonic
cochains and vanishes on them. Three interchangeable routes evaluate it:

* ``spectral`` sums over the dense pencil eigenpairs,
* ``direct`` solves the bordered system ``[[K, M E], [E^T M, 0]]``,
* ``cg`` runs deflated conjugate gradients on the Laplacian.

The routes share no code beyond the operators, so they cross-check each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import solve_triangular
from scipy.sparse.linalg import ArpackError, eigsh

from . import linsolve
from .cochain import Cochain, OperatorSet
from .hodge import HarmonicBasis, _kernel_split
from .linsolve import NumericalError

METHODS = ("auto", "spectral", "direct", "cg")


@dataclass(frozen=True)
class GreenSolve:
    input: Cochain
    output: Cochain
    harmonic: Cochain
    residual: float

    def to_json(self) -> str:
        return json.dumps({
            "degree": self.input.degree,
            "green": self.output.values.tolist(),
            "harmonic": self.harmonic.values.tolist(),
            "residual": self.residual,
        })


def _pick(ops: OperatorSet, p: int, method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "auto":
        return "spectral" if ops.count(p) <= ops.tol.dense_limit else "cg"
    return method


def _bordered(ops: OperatorSet, basis: HarmonicBasis):
    key = ("bordered", basis.degree, basis.dim)
    if key not in ops._cache:
        p = basis.degree
        ME = ops.mass(p) @ basis.vectors
        m = basis.dim
        A = np.block([[ops.stiffness(p).toarray(), ME], [ME.T, np.zeros((m, m))]])
        ops._cache[key] = A
    return ops._cache[key]


def apply_green(ops: OperatorSet, basis: HarmonicBasis, X, method: str = "auto"):
    """Apply G to a vector or a stack of column vectors."""
    p = basis.degree
    method = _pick(ops, p, method)
    X = np.asarray(X, dtype=float)
    R = basis.complement(X)
    if method == "spectral":
        w, V = ops.pencil(p)
        m = basis.dim
        coef = V[:, m:].T @ (ops.mass(p) @ R)
        coef = coef / (w[m:] if coef.ndim == 1 else w[m:, None])
        Y = V[:, m:] @ coef
    elif method == "direct":
        A = _bordered(ops, basis)
        rhs = ops.mass(p) @ R
        pad = np.zeros((basis.dim,) + R.shape[1:])
        Y = np.linalg.solve(A, np.concatenate([rhs, pad]))[: ops.count(p)]
    else:
        cols = R if R.ndim == 2 else R[:, None]
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            res = linsolve.cg_solve(
                lambda x: ops.apply_laplacian(p, x),
                cols[:, j],
                tol=ops.tol.cg_rtol,
                cap=ops.tol.cg_cap_factor * max(ops.count(p), 1),
                mass=lambda x: ops.mass(p) @ x,
                project=basis.complement,
            )
            if not res.converged:
                raise NumericalError(f"Green solve stalled after {res.iterations} iterations", res.residual)
            out[:, j] = res.x
        Y = out if R.ndim == 2 else out[:, 0]
    return basis.complement(Y)


def green(ops: OperatorSet, basis: HarmonicBasis, a: Cochain, method: str = "auto") -> GreenSolve:
    """Solve ``Delta b = a - H(a)`` for the b orthogonal to the harmonic cochains."""
    if a.degree != basis.degree:
        raise ValueError(f"degree mismatch: basis {basis.degree}, cochain {a.degree}")
    p = a.degree
    g = apply_green(ops, basis, a.values, method)
    h = basis.project(a.values)
    miss = ops.apply_laplacian(p, g) + h - a.values
    scale = float(ops.norm(p, a.values)) or 1.0
    return GreenSolve(a, Cochain(p, g), Cochain(p, h), float(ops.norm(p, miss)) / scale)


# ---------------------------------------------------------------------------
# spectrum

@dataclass(frozen=True, eq=False)
class Spectrum:
    """Leading nonzero eigenpairs of the Laplacian in one degree.

    ``vectors`` holds M-orthonormal eigencochains as columns; zero modes are
    excluded and only counted in ``harmonic_dim``.
    """

    degree: int
    eigenvalues: np.ndarray
    vectors: np.ndarray
    harmonic_dim: int
    lambda_max: float
    residuals: np.ndarray
    group_tol: float = 1e-6

    def __len__(self):
        return self.eigenvalues.shape[0]

    def mode(self, j: int) -> Cochain:
        return Cochain(self.degree, self.vectors[:, j])

    def groups(self) -> list[list[int]]:
        """Indices of numerically equal eigenvalues, relative gap ``group_tol``."""
        out: list[list[int]] = []
        for j, lam in enumerate(self.eigenvalues):
            if out and lam - self.eigenvalues[out[-1][-1]] <= self.group_tol * abs(lam):
                out[-1].append(j)
            else:
                out.append([j])
        return out

    def to_json(self) -> str:
        return json.dumps({
            "degree": self.degree,
            "harmonic_dim": self.harmonic_dim,
            "eigenvalues": self.eigenvalues.tolist(),
            "residuals": self.residuals.tolist(),
        })


def _lanczos_pairs(ops: OperatorSet, p: int, count: int):
    """Smallest generalized eigenpairs by shift-invert Lanczos (ARPACK)."""
    Kp = sparse.csc_matrix(ops.stiffness(p))
    Mp = sparse.csc_matrix(ops.mass(p))
    scale = abs(Kp).sum(axis=1).max() / max(Mp.diagonal().min(), np.finfo(float).tiny)
    # fixed-seed start vector: deterministic, and not an eigenvector like the constant one
    v0 = np.random.default_rng(0).standard_normal(Kp.shape[0])
    try:
        w, X = eigsh(Kp, k=count, M=Mp, sigma=-1e-6 * scale, which="LM", v0=v0)
        lam_max = float(eigsh(Kp, k=1, M=Mp, which="LA", return_eigenvectors=False, v0=v0)[0])
    except ArpackError as exc:
        raise NumericalError(f"Lanczos eigensolver failed: {exc}") from exc
    order = np.argsort(w, kind="stable")
    w, X = w[order], X[:, order]
    # re-orthonormalize in the M inner product; needed inside clustered eigenspaces
    G = X.T @ (Mp @ X)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    X = solve_triangular(L, X.T, lower=True).T
    return w, X, lam_max


def spectrum(ops: OperatorSet, basis: HarmonicBasis, p: Optional[int] = None, k: Optional[int] = None,
             method: str = "auto") -> Spectrum:
    """The first ``k`` nonzero eigenpairs of ``(K_p, M_p)``, ascending.

    ``k=None`` returns every nonzero mode.
    """
    p = basis.degree if p is None else p
    if p != basis.degree:
        raise ValueError(f"degree mismatch: basis {basis.degree}, requested {p}")
    n = ops.count(p)
    m = basis.dim
    available = n - m
    k = available if k is None else k
    if not 0 <= k <= available:
        raise ValueError(f"k={k} outside 0..{available} (count {n}, harmonic dim {m})")
    if method == "auto":
        # Lanczos only pays off for a few modes of a large pencil
        method = "dense" if n <= ops.tol.dense_limit or m + k >= n else "lanczos"
    if method == "dense":
        w, X = ops.pencil(p)
        lam_max = float(w[-1]) if n else 0.0
        w, X = w[m:m + k], X[:, m:m + k]
    elif method == "lanczos":
        if m + k >= n:
            raise ValueError("Lanczos path needs fewer modes than unknowns; use the dense path")
        w, X, lam_max = _lanczos_pairs(ops, p, m + k)
        zero = _kernel_split(np.append(w, lam_max), basis.threshold, ops.tol)
        if zero != m:
            raise NumericalError(f"Lanczos found {zero} zero modes, harmonic basis has {m}")
        w, X = w[m:], X[:, m:]
    else:
        raise ValueError(f"unknown method {method!r}")
    R = ops.apply_laplacian(p, X) - X * w
    residuals = ops.norm(p, R) if k else np.zeros(0)
    return Spectrum(p, np.array(w), np.array(X), m, lam_max, np.asarray(residuals),
                    ops.tol.multiplicity_gap)


def coercivity_constant(spec: Spectrum) -> float:
    """Sharp constant k in ``||g|| <= k ||Delta g||`` on the complement of the harmonic space."""
    if len(spec) == 0:
        raise ValueError("spectrum has no nonzero eigenvalue")
    return 1.0 / float(spec.eigenvalues[0])


def _complement_basis(ops: OperatorSet, p: int, span: np.ndarray) -> np.ndarray:
    """M-orthonormal basis of the M-orthogonal complement of ``span`` (M-orthonormal columns)."""
    fac = linsolve.cholesky(ops.mass(p).toarray(), ops.tol)
    if fac.failed:
        raise NumericalError(f"mass matrix of degree {p} is not positive definite")
    L = fac.lower
    Y = L.T @ span
    n, k = Y.shape
    if k == 0:
        Q = np.eye(n)
    else:
        Q = np.linalg.qr(Y, mode="complete")[0][:, k:]
    return solve_triangular(L.T, Q, lower=False)


def restricted_green_eigenvalues(ops: OperatorSet, basis: HarmonicBasis,
                                 exclude: Optional[np.ndarray] = None, method: str = "direct"):
    """Ascending eigenvalues of G compressed to ``(H + span(exclude))^perp``."""
    p = basis.degree
    span = basis.vectors if exclude is None else np.hstack([basis.vectors, exclude])
    Q = _complement_basis(ops, p, span)
    if Q.shape[1] == 0:
        return np.zeros(0)
    GQ = apply_green(ops, basis, Q, method)
    S = Q.T @ (ops.mass(p) @ GQ)
    return linsolve.sym_eig(0.5 * (S + S.T), ops.tol)[0]


def mu_variational(ops: OperatorSet, basis: HarmonicBasis, spec: Spectrum, n: int,
                   method: str = "direct") -> float:
    """``sup ||G b||`` over unit b orthogonal to the harmonic space and the first n modes.

    G is symmetric positive semidefinite there, so the supremum is its top
    eigenvalue on that subspace.
    """
    if not 0 <= n <= len(spec):
        raise ValueError(f"n={n} outside 0..{len(spec)}")
    if basis.dim + n >= ops.count(basis.degree):
        raise ValueError("complement subspace is empty")
    w = restricted_green_eigenvalues(ops, basis, spec.vectors[:, :n], method)
    return float(w[-1])


# ---------------------------------------------------------------------------
# expansion

def _full_basis(basis: HarmonicBasis, spec: Spectrum):
    lams = np.concatenate([np.zeros(basis.dim), spec.eigenvalues])
    return np.hstack([basis.vectors, spec.vectors]), lams


def expand(ops: OperatorSet, spec: Spectrum, basis: HarmonicBasis, a: Cochain, n: int):
    """Partial eigen-expansion over harmonic modes first, then ascending nonzero modes.

    Returns the partial sum of the first ``n`` terms and ``||a - partial||_M``.
    """
    W, _ = _full_basis(basis, spec)
    if not 0 <= n <= W.shape[1]:
        raise ValueError(f"n={n} outside 0..{W.shape[1]}")
    c = W[:, :n].T @ (ops.mass(a.degree) @ a.values)
    part = W[:, :n] @ c
    return Cochain(a.degree, part), float(ops.norm(a.degree, a.values - part))


def expansion_trace(ops: OperatorSet, spec: Spectrum, basis: HarmonicBasis, a: Cochain,
                    slack: float = 1e-8):
    """Rows ``(n, residual, bound)`` for every truncation order.

    The bound is ``||Delta a||_M / lambda_{n+1} + slack ||a||_M``; it is
    infinite while the next term is still a harmonic mode.
    """
    p = a.degree
    W, lams = _full_basis(basis, spec)
    x = a.values
    c = W.T @ (ops.mass(p) @ x)
    lap_norm = float(ops.norm(p, ops.apply_laplacian(p, x)))
    norm_a = float(ops.norm(p, x))
    rows = []
    part = np.zeros_like(x)
    for n in range(W.shape[1] + 1):
        if n:
            part = part + c[n - 1] * W[:, n - 1]
        res = float(ops.norm(p, x - part))
        if n == W.shape[1]:
            head = 0.0
        elif lams[n] <= 0:
            head = float("inf")
        else:
            head = lap_norm / lams[n]
        rows.append((n, res, head + slack * norm_a))
    return rows


def trace_csv(rows) -> str:
    lines = ["n,residual,bound"]
    lines += [f"{n},{res:.17g},{bound:.17g}" for n, res, bound in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commutation

def check_commutation(ops: OperatorSet, bases: Sequence[HarmonicBasis], p: int, samples: int = 100,
                      rng=None, method: str = "auto") -> dict:
    """Worst relative residuals of ``G d - d G``, ``G delta - delta G`` and ``G Delta - Delta G``.

    Each residual is scaled by ``||a|| * ||op|| * ||G||``, the common bound on
    both sides.
    """
    rng = np.random.default_rng(rng)
    X = rng.standard_normal((ops.count(p), samples))

    def lam_max(q):
        return float(ops.pencil(q)[0][-1]) if ops.count(q) else 0.0

    def g_norm(q):
        w = ops.pencil(q)[0][bases[q].dim:]
        return 1.0 / float(w[0]) if w.size else 0.0

    norms = ops.norm(p, X)
    G = lambda q, Y: apply_green(ops, bases[q], Y, method)  # noqa: E731
    report = {}
    GX = G(p, X)
    if p < ops.dim:
        lhs, rhs = G(p + 1, ops.apply_d(p, X)), ops.apply_d(p, GX)
        scale = np.sqrt(max(lam_max(p), lam_max(p + 1))) * max(g_norm(p), g_norm(p + 1))
        report["d"] = float(np.max(ops.norm(p + 1, lhs - rhs) / (norms * max(scale, 1e-300))))
    if p > 0:
        lhs, rhs = G(p - 1, ops.apply_delta(p, X)), ops.apply_delta(p, GX)
        scale = np.sqrt(max(lam_max(p), lam_max(p - 1))) * max(g_norm(p), g_norm(p - 1))
        report["delta"] = float(np.max(ops.norm(p - 1, lhs - rhs) / (norms * max(scale, 1e-300))))
    lhs, rhs = G(p, ops.apply_laplacian(p, X)), ops.apply_laplacian(p, GX)
    scale = lam_max(p) * g_norm(p)
    report["laplacian"] = float(np.max(ops.norm(p, lhs - rhs) / (norms * max(scale, 1e-300))))
    return report

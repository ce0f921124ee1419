"""Seeded property suite run by ``hodgekit verify``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import spectral
from .cochain import SCHEMES, Cochain, OperatorSet
from .hodge import betti, decompose, harmonic_basis
from .mesh import SimplicialComplex, validate


@dataclass
class PropertyResult:
    mesh: str
    scheme: str
    degree: int
    name: str
    anchor: str
    worst: float
    tol: float
    passed: bool
    error: str = ""

    def as_dict(self) -> dict:
        d = {
            "mesh": self.mesh,
            "scheme": self.scheme,
            "degree": self.degree,
            "property": self.name,
            "anchor": self.anchor,
            "worst": f"{self.worst:.3e}",
            "tol": f"{self.tol:.0e}",
            "passed": self.passed,
        }
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class Report:
    results: list[PropertyResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[PropertyResult]:
        return [r for r in self.results if not r.passed]

    def to_json(self) -> str:
        body = {
            "ok": self.ok,
            "checked": len(self.results),
            "failed": len(self.failures()),
            "properties": [r.as_dict() for r in self.results],
        }
        return json.dumps(body, indent=1)


class Context:
    """Lazily computed per-mesh, per-scheme objects shared by the properties."""

    def __init__(self, ops: OperatorSet, samples: int):
        self.ops = ops
        self.samples = samples

    @cached_property
    def bases(self):
        return [harmonic_basis(self.ops, p) for p in range(self.ops.dim + 1)]

    @cached_property
    def spectra(self):
        return [spectral.spectrum(self.ops, b) for b in self.bases]

    def random(self, rng, p, k=None):
        return rng.standard_normal((self.ops.count(p), self.samples if k is None else k))


def _rel(x, scale):
    return float(np.max(np.abs(x) / np.maximum(scale, 1e-300))) if np.size(x) else 0.0


# Every property returns its worst measured value; it passes when worst <= tol.
Property = Callable[[Context, int, np.random.Generator], float]
REGISTRY: list[tuple[str, str, float, str, Property]] = []


def prop(name: str, anchor: str, tol: float, degrees: str = "all"):
    def wrap(fn):
        REGISTRY.append((name, anchor, tol, degrees, fn))
        return fn
    return wrap


@prop("adjointness", "Eq. (3)", 1e-10, degrees="below-top")
def _adjoint(ctx, p, rng):
    ops = ctx.ops
    A, B = ctx.random(rng, p), ctx.random(rng, p + 1)
    lhs = ops.inner(p + 1, ops.apply_d(p, A), B)
    # argument order swapped on purpose: a non-symmetric mass shows up here
    rhs = ops.inner(p, ops.apply_delta(p + 1, B), A)
    return _rel(lhs - rhs, ops.norm(p, A) * ops.norm(p + 1, B))


@prop("laplacian self-adjoint", "Sec. 1 self-adjointness", 1e-10)
def _lap_sym(ctx, p, rng):
    ops = ctx.ops
    A, B = ctx.random(rng, p), ctx.random(rng, p)
    lhs = ops.inner(p, ops.apply_laplacian(p, A), B)
    rhs = ops.inner(p, ops.apply_laplacian(p, B), A)
    lam = max(float(ops.pencil(p)[0][-1]), 1e-300)
    return _rel(lhs - rhs, lam * ops.norm(p, A) * ops.norm(p, B))


@prop("laplacian positive", "Sec. 4 non-negativity", 1e-12)
def _lap_pos(ctx, p, rng):
    ops = ctx.ops
    A = ctx.random(rng, p)
    q = ops.inner(p, ops.apply_laplacian(p, A), A)
    lam = max(float(ops.pencil(p)[0][-1]), 1e-300)
    return float(max(0.0, np.max(-q / (lam * ops.inner(p, A, A)))))


@prop("stiffness symmetric", "Sec. 1 self-adjointness", 1e-12)
def _stiff_sym(ctx, p, rng):
    Kp = ctx.ops.stiffness(p)
    scale = abs(Kp).max() if Kp.nnz else 1.0
    return float(abs(Kp - Kp.T).max() / scale) if Kp.nnz else 0.0


@prop("dd = 0", "coboundary", 1e-12, degrees="below-top-1")
def _dd(ctx, p, rng):
    ops = ctx.ops
    A = ctx.random(rng, p)
    return _rel(ops.norm(p + 2, ops.apply_d(p + 1, ops.apply_d(p, A))),
                ops.norm(p, A) * float(ops.pencil(p)[0][-1]))


@prop("d commutes with laplacian", "Theorem 3 premise", 1e-10, degrees="below-top")
def _d_lap(ctx, p, rng):
    ops = ctx.ops
    A = ctx.random(rng, p)
    diff = ops.apply_d(p, ops.apply_laplacian(p, A)) - ops.apply_laplacian(p + 1, ops.apply_d(p, A))
    lam = max(float(ops.pencil(p)[0][-1]), float(ops.pencil(p + 1)[0][-1]))
    return _rel(ops.norm(p + 1, diff), lam ** 1.5 * ops.norm(p, A))


@prop("harmonic dimension = Betti", "Theorem 1", 0.0)
def _betti(ctx, p, rng):
    return float(abs(ctx.bases[p].dim - betti(ctx.ops.complex, p)))


@prop("harmonic basis orthonormal", "Lemma 1", 1e-10)
def _harm_on(ctx, p, rng):
    E = ctx.bases[p].vectors
    G = E.T @ (ctx.ops.mass(p) @ E)
    return float(np.abs(G - np.eye(E.shape[1])).max(initial=0.0))


@prop("projector idempotent", "Lemma 1 (ii)", 1e-10)
def _proj(ctx, p, rng):
    b = ctx.bases[p]
    A = ctx.random(rng, p)
    H = b.project(A)
    return _rel(ctx.ops.norm(p, b.project(H) - H), ctx.ops.norm(p, A))


@prop("range of laplacian orthogonal to harmonic", "Sec. 2 necessity", 1e-9)
def _range(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    A = ctx.random(rng, p)
    LA = ops.apply_laplacian(p, A)
    c = b.coefficients(LA)
    return _rel(np.max(np.abs(c), axis=0, initial=0.0), ops.norm(p, LA) + ops.norm(p, A))


def _hodge_cases(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    k = min(ctx.samples, 20)
    out = []
    for _ in range(k):
        x = rng.standard_normal(ops.count(p))
        out.append((x, decompose(ops, b, Cochain(p, x))))
    return out


@prop("hodge reconstruction + orthogonality", "HdR 1", 1e-9)
def _hodge(ctx, p, rng):
    worst = 0.0
    for _, split in _hodge_cases(ctx, p, rng):
        worst = max(worst, split.residual, split.orthogonality)
    return worst


@prop("hodge uniqueness under gauge shift", "HdR 1 uniqueness", 1e-8, degrees="above-zero")
def _gauge(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    worst = 0.0
    for x, split in _hodge_cases(ctx, p, rng):
        shift = ops.apply_d(p - 1, rng.standard_normal(ops.count(p - 1)))
        moved = decompose(ops, b, Cochain(p, x + shift))
        n = float(ops.norm(p, x))
        worst = max(
            worst,
            float(ops.norm(p, moved.exact.values - split.exact.values - shift)) / n,
            float(ops.norm(p, moved.coexact.values - split.coexact.values)) / n,
            float(ops.norm(p, moved.harmonic.values - split.harmonic.values)) / n,
        )
    return worst


@prop("closed orthogonal to coexact", "Sec. 1 closed iff orthogonal", 1e-9, degrees="below-top")
def _closed(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    # closed = exact + harmonic; in degree 0 only the harmonic part exists
    A = b.vectors @ rng.standard_normal((b.dim, ctx.samples))
    if p > 0:
        A = A + ops.apply_d(p - 1, ctx.random(rng, p - 1))
    C = ops.apply_delta(p + 1, ctx.random(rng, p + 1))
    return _rel(ops.inner(p, A, C), ops.norm(p, A) * ops.norm(p, C))


@prop("green equation", "Theorem 2, Eq. (12)", 1e-8)
def _green_eq(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    A = ctx.random(rng, p)
    G = spectral.apply_green(ops, b, A)
    miss = ops.apply_laplacian(p, G) + b.project(A) - A
    return _rel(ops.norm(p, miss), ops.norm(p, A))


@prop("green orthogonal to harmonic", "Eq. (12) side condition", 1e-9)
def _green_side(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    if b.dim == 0:
        return 0.0
    G = spectral.apply_green(ops, b, ctx.random(rng, p))
    c = np.max(np.abs(b.coefficients(G)), axis=0)
    return _rel(c, ops.norm(p, G))


@prop("green self-adjoint", "Theorem 4, Eq. (13)", 1e-9)
def _green_sym(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    A, B = ctx.random(rng, p), ctx.random(rng, p)
    lhs = ops.inner(p, spectral.apply_green(ops, b, A), B)
    rhs = ops.inner(p, A, spectral.apply_green(ops, b, B))
    return _rel(lhs - rhs, ops.norm(p, A) * ops.norm(p, B))


@prop("green positive", "Theorem 4, Eq. (14)", 1e-12)
def _green_pos(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    A = ctx.random(rng, p)
    q = ops.inner(p, spectral.apply_green(ops, b, A), A)
    return float(max(0.0, np.max(-q / ops.inner(p, A, A))))


@prop("green form vanishes only on harmonic", "Theorem 4 (ii)", 1e-10)
def _green_zero(ctx, p, rng):
    ops, b = ctx.ops, ctx.bases[p]
    worst = 0.0
    if b.dim:
        H = b.vectors @ rng.standard_normal((b.dim, ctx.samples))
        q = ops.inner(p, spectral.apply_green(ops, b, H), H) / ops.inner(p, H, H)
        worst = float(np.max(np.abs(q)))
    if b.dim < ops.count(p):
        # cochains far from harmonic must give a form above the cutoff
        A = b.complement(ctx.random(rng, p))
        q = ops.inner(p, spectral.apply_green(ops, b, A), A) / ops.inner(p, A, A)
        if np.any(q <= 1e-10):
            worst = float("inf")
    return worst


@prop("eigenpair residuals", "Sec. 4 eigenfunctions", 1e-8)
def _eig_res(ctx, p, rng):
    s = ctx.spectra[p]
    if not len(s):
        return 0.0
    return float(np.max(s.residuals) / max(s.lambda_max, 1e-300))


@prop("eigenvalues non-negative", "Sec. 4 non-negativity", 1e-10)
def _eig_nonneg(ctx, p, rng):
    w = ctx.ops.pencil(p)[0]
    return float(max(0.0, -w.min(initial=0.0)) / max(w.max(initial=0.0), 1e-300))


@prop("eigencochains orthonormal", "Sec. 4 orthogonality", 1e-9)
def _eig_on(ctx, p, rng):
    s = ctx.spectra[p]
    G = s.vectors.T @ (ctx.ops.mass(p) @ s.vectors)
    return float(np.abs(G - np.eye(len(s))).max(initial=0.0))


@prop("multiplicities finite", "Sec. 4 finite eigenspaces", 0.0)
def _mult(ctx, p, rng):
    s = ctx.spectra[p]
    return float(sum(len(g) > ctx.ops.count(p) for g in s.groups()))


@prop("reciprocal spectra", "Theorem 5", 1e-8)
def _recip(ctx, p, rng):
    ops, b, s = ctx.ops, ctx.bases[p], ctx.spectra[p]
    if not len(s):
        return 0.0
    g = np.sort(spectral.restricted_green_eigenvalues(ops, b))
    inv = np.sort(1.0 / s.eigenvalues)
    return float(np.max(np.abs(g - inv) / inv))


@prop("variational eigenvalues", "Theorem 6, Eqs. (15)-(16)", 1e-8)
def _mu(ctx, p, rng):
    ops, b, s = ctx.ops, ctx.bases[p], ctx.spectra[p]
    k = min(len(s), 4, ops.count(p) - b.dim - 1)
    worst, prev = 0.0, np.inf
    for n in range(max(k, 0)):
        mu = spectral.mu_variational(ops, b, s, n)
        worst = max(worst, abs(mu * s.eigenvalues[n] - 1.0))
        if mu > prev * (1 + 1e-12):
            worst = max(worst, (mu - prev) / prev)
        prev = mu
    return worst


@prop("spectral expansion", "Theorem 7, Eq. (21)", 1e-8)
def _expand(ctx, p, rng):
    ops, b, s = ctx.ops, ctx.bases[p], ctx.spectra[p]
    worst = 0.0
    for _ in range(min(ctx.samples, 10)):
        x = rng.standard_normal(ops.count(p))
        rows = np.array(spectral.expansion_trace(ops, s, b, Cochain(p, x)))
        n = float(ops.norm(p, x))
        res, bound = rows[:, 1], rows[:, 2]
        if np.any(res > bound):
            return float("inf")
        worst = max(worst, float(np.max(np.diff(res), initial=0.0)) / n, res[-1] / n)
    return worst


@prop("coercivity", "Lemma 2, Eq. (10)", 1e-8)
def _coerc(ctx, p, rng):
    ops, b, s = ctx.ops, ctx.bases[p], ctx.spectra[p]
    if not len(s):
        return 0.0
    k = spectral.coercivity_constant(s)
    A = b.complement(ctx.random(rng, p))
    ratio = ops.norm(p, A) / (k * ops.norm(p, ops.apply_laplacian(p, A)))
    w = s.vectors[:, 0]
    sharp = abs(ops.norm(p, w) / (k * ops.norm(p, ops.apply_laplacian(p, w))) - 1.0)
    return float(max(np.max(ratio) - 1.0, sharp, 0.0))


@prop("green commutes", "Theorem 3", 1e-8)
def _commute(ctx, p, rng):
    rep = spectral.check_commutation(ctx.ops, ctx.bases, p, ctx.samples, rng)
    return max(rep.values())


def _degrees(kind: str, n: int):
    return {
        "all": range(n + 1),
        "below-top": range(n),
        "below-top-1": range(n - 1),
        "above-zero": range(1, n + 1),
    }[kind]


def verify_ops(name: str, ops: OperatorSet, seed: int, samples: int = 50) -> list[PropertyResult]:
    ctx = Context(ops, samples)
    out = []
    vr = validate(ops.complex)
    out.append(PropertyResult(name, ops.scheme, -1, "complex valid", "mesh", float(len(vr.violations)),
                              0.0, vr.ok, "; ".join(vr.violations)))
    for i, (pname, anchor, tol, kind, fn) in enumerate(REGISTRY):
        for p in _degrees(kind, ops.dim):
            rng = np.random.default_rng([seed, i, p])
            try:
                worst = fn(ctx, p, rng)
                err = ""
            except Exception as exc:  # a crashing property is a failed property
                worst, err = float("inf"), f"{type(exc).__name__}: {exc}"
            ok = bool(worst <= tol) and not err
            out.append(PropertyResult(name, ops.scheme, p, pname, anchor, float(worst), tol, ok, err))
    return out


def run_suite(meshes: dict[str, SimplicialComplex], schemes=SCHEMES, seed: int = 0,
              samples: int = 50) -> Report:
    report = Report()
    for name, K in meshes.items():
        for scheme in schemes:
            try:
                ops = OperatorSet.build(K, scheme)
            except Exception as exc:
                report.results.append(PropertyResult(name, scheme, -1, "operators assemble", "Eq. (1)",
                                                     float("inf"), 0.0, False,
                                                     f"{type(exc).__name__}: {exc}"))
                continue
            report.results.extend(verify_ops(name, ops, seed, samples))
    return report

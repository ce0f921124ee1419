"""Simplicial complexes, signed boundary incidence and the OFF dialect."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

Simplex = tuple[int, ...]


class MeshError(ValueError):
    """Raised for malformed meshes and OFF documents."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _incidence(faces: Sequence[Simplex], cells: Sequence[Simplex]) -> sparse.csr_matrix:
    index = {f: i for i, f in enumerate(faces)}
    rows, cols, vals = [], [], []
    for j, s in enumerate(cells):
        for i in range(len(s)):
            f = s[:i] + s[i + 1:]
            if f not in index:  # left for validate() to report
                continue
            rows.append(index[f])
            cols.append(j)
            vals.append(-1 if i % 2 else 1)
    return sparse.csr_matrix(
        (np.array(vals, dtype=np.int64), (rows, cols)),
        shape=(len(faces), len(cells)),
        dtype=np.int64,
    )


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """A finite oriented simplicial complex of dimension at most 3.

    Every simplex is a strictly increasing vertex tuple and ``simplices[p]``
    is sorted lexicographically, so list positions are stable indices.
    ``boundary[p]`` (``1 <= p <= dim``) maps p-chains to (p-1)-chains with
    sign ``(-1)**i`` for the face omitting vertex ``i``; ``boundary[0]`` is
    an empty placeholder.
    """

    simplices: tuple[tuple[Simplex, ...], ...]
    positions: Optional[np.ndarray] = None
    boundary: tuple[sparse.csr_matrix, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.boundary:
            bd = [sparse.csr_matrix((0, len(self.simplices[0])), dtype=np.int64)]
            for p in range(1, len(self.simplices)):
                bd.append(_incidence(self.simplices[p - 1], self.simplices[p]))
            object.__setattr__(self, "boundary", tuple(bd))
        if self.positions is not None:
            pos = np.array(self.positions, dtype=float)
            pos.setflags(write=False)
            object.__setattr__(self, "positions", pos)

    @classmethod
    def from_cells(cls, cells: Iterable[Sequence[int]], n_vertices: Optional[int] = None,
                   positions=None) -> "SimplicialComplex":
        """Close a list of top cells under taking faces."""
        cells = [tuple(sorted(int(v) for v in c)) for c in cells]
        for c in cells:
            if len(set(c)) != len(c):
                raise MeshError(f"repeated vertex in cell {c}")
        if n_vertices is None:
            n_vertices = 1 + max((v for c in cells for v in c), default=-1)
        dim = max((len(c) - 1 for c in cells), default=0)
        if dim > 3:
            raise MeshError(f"dimension {dim} exceeds 3")
        levels: list[set] = [set() for _ in range(dim + 1)]
        levels[0].update((v,) for v in range(n_vertices))
        for c in cells:
            for p in range(len(c)):
                levels[p].update(combinations(c, p + 1))
        simplices = tuple(tuple(sorted(level)) for level in levels)
        return cls(simplices, positions)

    @property
    def dim(self) -> int:
        return len(self.simplices) - 1

    def counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.simplices)

    def index(self, p: int) -> dict[Simplex, int]:
        return {s: i for i, s in enumerate(self.simplices[p])}

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * n for p, n in enumerate(self.counts()))

    def is_pure(self) -> bool:
        if self.dim == 0:
            return True
        # every lower simplex must have a coface
        for p in range(self.dim):
            hit = np.asarray(abs(self.boundary[p + 1]).sum(axis=1)).ravel()
            if np.any(hit == 0):
                return False
        return True


def boundary_matrix(K: SimplicialComplex, p: int) -> sparse.csr_matrix:
    """Signed incidence of shape ``(#(p-1)-simplices, #p-simplices)``."""
    if not 1 <= p <= K.dim:
        raise ValueError(f"degree {p} out of range 1..{K.dim}")
    return K.boundary[p]


@dataclass
class ValidationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(K: SimplicialComplex) -> ValidationReport:
    """Check face closure, ordering and ``boundary o boundary = 0``."""
    out = []
    for p, level in enumerate(K.simplices):
        for s in level:
            if len(s) != p + 1 or any(a >= b for a, b in zip(s, s[1:])):
                out.append(f"simplex {s} in degree {p} is not a strictly increasing {p + 1}-tuple")
        if list(level) != sorted(set(level)):
            out.append(f"degree {p} simplices are not sorted and duplicate-free")
    for p in range(1, K.dim + 1):
        lower = set(K.simplices[p - 1])
        for s in K.simplices[p]:
            for i in range(len(s)):
                f = s[:i] + s[i + 1:]
                if f not in lower:
                    out.append(f"face absent: {f} of {s}")
    for p in range(1, K.dim):
        a, b = K.boundary[p], K.boundary[p + 1]
        if a.shape[1] != b.shape[0]:
            out.append(f"boundary shapes in degrees {p}, {p + 1} do not compose")
            continue
        prod = (a @ b).tocoo()
        if np.any(prod.data != 0):
            out.append(f"∂∂ ≠ 0 between degrees {p + 1} and {p - 1}")
    if K.positions is not None and K.positions.shape[0] != len(K.simplices[0]):
        out.append("positions do not match vertex count")
    return ValidationReport(out)


# ---------------------------------------------------------------------------
# OFF dialect

def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_off(text: str) -> SimplicialComplex:
    """Parse an OFF document.

    Besides triangle lists, two extensions are understood: ``OFF TET`` turns
    polygon lines into ``4 i j k l`` tetrahedra, and a zero face count
    followed by an ``EDGES m`` block of ``i j`` pairs gives a 1-complex.
    """
    lines = _tokens(text)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise MeshError("empty document", 1) from None
    if head[0] != "OFF":
        raise MeshError(f"expected OFF header, got {head[0]!r}", lineno)
    tet = False
    rest = head[1:]
    if rest and rest[0] == "TET":
        tet, rest = True, rest[1:]
    if not rest:
        try:
            lineno, rest = next(lines)
        except StopIteration:
            raise MeshError("missing counts line", lineno) from None
        if rest[0] == "TET" and not tet:
            tet = True
            try:
                lineno, rest = next(lines)
            except StopIteration:
                raise MeshError("missing counts line", lineno) from None
    try:
        counts = [int(x) for x in rest]
    except ValueError:
        raise MeshError(f"malformed counts {' '.join(rest)!r}", lineno) from None
    if len(counts) not in (2, 3) or min(counts) < 0:
        raise MeshError(f"malformed counts {' '.join(rest)!r}", lineno)
    nv, nf = counts[0], counts[1]
    if nv < 1:
        raise MeshError("vertex count must be at least 1", lineno)

    positions = np.zeros((nv, 3))
    for i in range(nv):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshError(f"expected {nv} vertices, found {i}", lineno) from None
        if len(tok) not in (2, 3):
            raise MeshError(f"vertex line needs 2 or 3 coordinates, got {len(tok)}", lineno)
        try:
            positions[i, : len(tok)] = [float(x) for x in tok]
        except ValueError:
            raise MeshError(f"bad coordinate in {' '.join(tok)!r}", lineno) from None

    arity = 4 if tet else 3
    cells = []

    def read_cell(lineno, tok, k):
        try:
            idx = [int(x) for x in tok]
        except ValueError:
            raise MeshError(f"bad index in {' '.join(tok)!r}", lineno) from None
        if len(idx) != k:
            raise MeshError(f"expected {k} indices, got {len(idx)}", lineno)
        for v in idx:
            if not 0 <= v < nv:
                raise MeshError(f"vertex index {v} out of range 0..{nv - 1}", lineno)
        if len(set(idx)) != k:
            raise MeshError(f"repeated vertex in {idx}", lineno)
        cells.append(idx)

    for i in range(nf):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise MeshError(f"expected {nf} faces, found {i}", lineno) from None
        try:
            k = int(tok[0])
        except ValueError:
            raise MeshError(f"bad polygon size {tok[0]!r}", lineno) from None
        if k != arity:
            kind = "tetrahedron" if tet else "triangle"
            raise MeshError(f"polygon with {k} vertices where a {kind} was expected", lineno)
        read_cell(lineno, tok[1:], arity)

    extra = next(lines, None)
    if extra is not None:
        lineno, tok = extra
        if nf != 0 or tok[0] != "EDGES":
            raise MeshError(f"unexpected trailing content {' '.join(tok)!r}", lineno)
        try:
            m = int(tok[1])
        except (IndexError, ValueError):
            raise MeshError("malformed EDGES header", lineno) from None
        for i in range(m):
            try:
                lineno, tok = next(lines)
            except StopIteration:
                raise MeshError(f"expected {m} edges, found {i}", lineno) from None
            read_cell(lineno, tok, 2)
        extra = next(lines, None)
        if extra is not None:
            raise MeshError(f"unexpected trailing content {' '.join(extra[1])!r}", extra[0])
    return SimplicialComplex.from_cells(cells, n_vertices=nv, positions=positions)


def write_off(K: SimplicialComplex) -> str:
    """Serialize the top cells of a pure complex in the dialect read by `parse_off`."""
    if not K.is_pure():
        raise MeshError("only pure complexes can be written as OFF")
    pos = K.positions if K.positions is not None else np.zeros((len(K.simplices[0]), 3))
    buf = io.StringIO()
    top = K.simplices[K.dim]
    if K.dim == 3:
        buf.write("OFF TET\n")
    else:
        buf.write("OFF\n")
    nf = len(top) if K.dim >= 2 else 0
    buf.write(f"{len(pos)} {nf} 0\n")
    for x in pos:
        buf.write(" ".join(format(float(c), ".17g") for c in x) + "\n")
    if K.dim >= 2:
        for s in top:
            buf.write(f"{len(s)} " + " ".join(map(str, s)) + "\n")
    elif K.dim == 1:
        buf.write(f"EDGES {len(top)}\n")
        for s in top:
            buf.write(" ".join(map(str, s)) + "\n")
    return buf.getvalue()


def read_off(path) -> SimplicialComplex:
    with open(path, encoding="utf-8") as fh:
        return parse_off(fh.read())

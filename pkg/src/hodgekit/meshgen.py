"""Bundled test meshes."""

import numpy as np

from .mesh import SimplicialComplex


def triangle() -> SimplicialComplex:
    """Equilateral triangle with unit sides."""
    pos = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3.0) / 2, 0.0]]
    return SimplicialComplex.from_cells([(0, 1, 2)], positions=pos)


def cycle(n: int) -> SimplicialComplex:
    """Edge cycle C_n as a 1-complex on a regular polygon."""
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    t = 2 * np.pi * np.arange(n) / n
    pos = np.column_stack([np.cos(t), np.sin(t), np.zeros(n)])
    return SimplicialComplex.from_cells([(i, (i + 1) % n) for i in range(n)], positions=pos)


def octahedron() -> SimplicialComplex:
    pos = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    faces = [(x, y, z) for x in (0, 1) for y in (2, 3) for z in (4, 5)]
    return SimplicialComplex.from_cells(faces, positions=np.array(pos, dtype=float))


def torus(n: int, m: int | None = None, twist: int = 0, major: float = 3.0, minor: float = 1.0,
          conformal: bool = False) -> SimplicialComplex:
    """n x m grid triangulation of a torus of revolution.

    Vertex ``(i, j)`` (ring position ``i``, tube position ``j``) has index
    ``i * m + j``. Each grid cell ``(i, j)`` is split along the diagonal from
    ``(i+1, j)`` to ``(i, j+1)``. Row ``j`` is shifted by ``j * twist / m`` cells
    around the ring, and crossing the seam of the tube lands ``twist`` cells
    further on, so the quotient lattice stays a torus for any integer twist.

    With ``conformal=True`` tube angles are spaced uniformly in the isothermal
    coordinate of the surface, making all grid cells similar, which keeps the
    triangles close to their parameter-plane shape.
    """
    m = n if m is None else m
    if n < 3 or m < 3:
        raise ValueError("torus grid needs at least 3 x 3 vertices")
    if major <= minor:
        raise ValueError("major radius must exceed minor radius")

    def vid(i, j):
        return ((i + twist * (j // m)) % n) * m + (j % m)

    faces = []
    for i in range(n):
        for j in range(m):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces += [(a, b, d), (b, c, d)]
    I = np.repeat(np.arange(n), m)
    J = np.tile(np.arange(m), n)
    u = 2 * np.pi * (I + J * twist / m) / n
    v = 2 * np.pi * J / m
    if conformal:
        k = np.sqrt((major - minor) / (major + minor))
        v = 2 * np.arctan2(np.sin(v / 2), k * np.cos(v / 2))
    rho = major + minor * np.cos(v)
    pos = np.column_stack([rho * np.cos(u), rho * np.sin(u), minor * np.sin(v)])
    return SimplicialComplex.from_cells(faces, n_vertices=n * m, positions=pos)


def torus3() -> SimplicialComplex:
    """3 x 3 torus; the one-cell shear keeps every circumcentric dual positive."""
    return torus(3, twist=-3, major=1.75, minor=1.0)


def torus8() -> SimplicialComplex:
    """8 x 8 torus on a half-cell twisted (hexagonal) lattice, conformally spaced.

    The radii ratio sqrt(7/3) makes the conformal modulus match an
    equilateral lattice, so the triangles are nearly equilateral.
    """
    return torus(8, twist=4, major=np.sqrt(7.0 / 3.0), minor=1.0, conformal=True)


BUNDLED = {
    "triangle": triangle,
    "c4": lambda: cycle(4),
    "c12": lambda: cycle(12),
    "octahedron": octahedron,
    "torus3": torus3,
    "torus8": torus8,
}


def bundled(name: str) -> SimplicialComplex:
    try:
        return BUNDLED[name]()
    except KeyError:
        raise ValueError(f"unknown bundled mesh {name!r}; choose from {sorted(BUNDLED)}") from None

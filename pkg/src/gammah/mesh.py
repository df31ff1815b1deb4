"""1D grids and conforming triangulations with newest-vertex bisection.

Meshes are immutable: every array is read-only and refinement returns a new
mesh. Triangles are stored counter-clockwise; ``refinement_edge[t]`` is the
local index of the vertex *opposite* the edge that the next bisection of
``t`` will split.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gammah.errors import InvalidArgumentError

_GEOM_TOL = 1e-12


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Mesh1D:
    """Grid on [0, 1] given by its increasing node coordinates."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgumentError("a 1D mesh needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgumentError("nodes must be strictly increasing")
        if abs(nodes[0]) > _GEOM_TOL or abs(nodes[-1] - 1.0) > _GEOM_TOL:
            raise InvalidArgumentError("nodes must span [0, 1]")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        return float(self.widths.max())

    @property
    def is_uniform(self) -> bool:
        w = self.widths
        return bool(np.all(np.abs(w - 1.0 / self.n_cells) <= 1e-12))

    @property
    def cells(self) -> np.ndarray:
        idx = np.arange(self.n_cells)
        return np.stack([idx, idx + 1], axis=1)


def uniform_mesh_1d(n_cells: int) -> Mesh1D:
    """Uniform grid ``{i / n_cells}`` on [0, 1]."""
    if int(n_cells) != n_cells or n_cells < 2:
        raise InvalidArgumentError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    n_cells = int(n_cells)
    return Mesh1D(np.arange(n_cells + 1, dtype=np.float64) / n_cells)


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with per-element refinement bookkeeping."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    level: np.ndarray = field(default=None)
    refinement_edge: np.ndarray = field(default=None)

    def __post_init__(self):
        v = _frozen(self.vertices, dtype=np.float64).reshape(-1, 2)
        t = _frozen(self.triangles, dtype=np.int64).reshape(-1, 3)
        b = _frozen(self.boundary, dtype=bool)
        if b.shape != (len(v),):
            raise InvalidArgumentError("one boundary flag per vertex is required")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidArgumentError("triangle references a missing vertex")
        lvl = np.zeros(len(t), dtype=np.int64) if self.level is None else self.level
        ref = _longest_edge_opposite(v, t) if self.refinement_edge is None else self.refinement_edge
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary", b)
        object.__setattr__(self, "level", _frozen(lvl, dtype=np.int64))
        object.__setattr__(self, "refinement_edge", _frozen(ref, dtype=np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1])

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.linalg.norm(e, axis=2).max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters().max())

    def edges(self):
        """Unique edges as sorted vertex pairs and their triangle counts."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def dof_map(self) -> np.ndarray:
        """Vertex -> DOF index for interior vertices, -1 on the boundary."""
        dof = np.full(self.n_vertices, -1, dtype=np.int64)
        inner = self.interior_vertices()
        dof[inner] = np.arange(inner.size)
        return dof

    def vertex_triangles(self) -> list[np.ndarray]:
        """Triangles incident to each vertex."""
        t = self.triangles
        owners = np.repeat(np.arange(len(t)), 3)
        verts = t.ravel()
        order = np.argsort(verts, kind="stable")
        bounds = np.searchsorted(verts[order], np.arange(self.n_vertices + 1))
        return [owners[order[bounds[i]:bounds[i + 1]]] for i in range(self.n_vertices)]


def _longest_edge_opposite(v, t):
    if len(t) == 0:
        return np.zeros(0, dtype=np.int64)
    p = v[t]
    # length of the edge opposite local vertex k
    opp = np.stack([np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                    np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
                    np.linalg.norm(p[:, 1] - p[:, 0], axis=1)], axis=1)
    return np.argmax(opp, axis=1).astype(np.int64)


def _lattice_mesh(blocks, n, on_boundary):
    """Triangulate unit lattice squares; ``blocks`` are lower-left integer offsets."""
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    span = 4 * n + 4
    keys = []
    for bx, by in blocks:
        keys.append(((by * n + j) + 2 * n + 1) * span + (bx * n + i) + 2 * n + 1)
    # row-major vertex order (by y, then x); shared lattice points merge
    uniq = np.unique(np.concatenate([k.ravel() for k in keys]))
    I = uniq % span - 2 * n - 1
    J = uniq // span - 2 * n - 1
    xy = np.stack([I / n, J / n], axis=1)
    tris = []
    for k in keys:
        ids = np.searchsorted(uniq, k)
        a, b = ids[:-1, :-1].ravel(), ids[:-1, 1:].ravel()
        c, d = ids[1:, 1:].ravel(), ids[1:, :-1].ravel()
        # lower-left to upper-right diagonal; (a,b,c) and (a,c,d) interleaved per cell
        tris.append(np.stack([np.stack([a, b, c], 1), np.stack([a, c, d], 1)], 1).reshape(-1, 3))
    bnd = on_boundary(xy[:, 0], xy[:, 1])
    return TriMesh(xy, np.concatenate(tris), bnd)


def structured_square_mesh(n: int) -> TriMesh:
    """Uniform ``n x n`` grid of the unit square, two triangles per cell."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")

    def on_boundary(x, y):
        return ((np.abs(x) < _GEOM_TOL) | (np.abs(x - 1) < _GEOM_TOL)
                | (np.abs(y) < _GEOM_TOL) | (np.abs(y - 1) < _GEOM_TOL))

    return _lattice_mesh([(0, 0)], int(n), on_boundary)


def lshape_mesh(n: int) -> TriMesh:
    """L-shaped domain (-1,1)^2 minus the closed upper-right quadrant.

    Built from the three unit squares [-1,0]x[-1,0], [0,1]x[-1,0] and
    [-1,0]x[0,1], each gridded ``n x n``.
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")

    def on_boundary(x, y):
        tol = _GEOM_TOL
        return ((np.abs(x + 1) < tol) | (np.abs(y + 1) < tol)
                | ((np.abs(x - 1) < tol) & (y <= tol))
                | ((np.abs(y - 1) < tol) & (x <= tol))
                | ((np.abs(y) < tol) & (x >= -tol))
                | ((np.abs(x) < tol) & (y >= -tol)))

    return _lattice_mesh([(-1, -1), (0, -1), (-1, 0)], int(n), on_boundary)


def bisect_refine(mesh: TriMesh, marked, l_max: int) -> TriMesh:
    """Newest-vertex bisection of ``marked`` triangles with conforming closure.

    Marked triangles already at level ``l_max`` are skipped. Neighbours that
    must be split to remove hanging nodes are bisected regardless of their
    level, since conformity takes precedence over the cap.
    """
    marked = sorted({int(k) for k in marked})
    if marked and (marked[0] < 0 or marked[-1] >= mesh.n_triangles):
        raise InvalidArgumentError("marked triangle index out of range")
    if l_max < 0:
        raise InvalidArgumentError("l_max must be >= 0")
    if not any(mesh.level[k] < l_max for k in marked):
        return mesh

    verts = [tuple(p) for p in mesh.vertices]
    bnd = list(mesh.boundary)
    tris = []
    for (a, b, c), k in zip(mesh.triangles.tolist(), mesh.refinement_edge.tolist()):
        # rotate so the refinement edge is (tri[0], tri[1])
        r = (k + 1) % 3
        tris.append([(a, b, c)[r], (a, b, c)[(r + 1) % 3], (a, b, c)[(r + 2) % 3]])
    level = list(mesh.level)
    edge_tris: dict[tuple[int, int], set[int]] = {}

    def key(u, w):
        return (u, w) if u < w else (w, u)

    def link(t):
        a, b, c = tris[t]
        for e in (key(a, b), key(b, c), key(c, a)):
            edge_tris.setdefault(e, set()).add(t)

    def unlink(t):
        a, b, c = tris[t]
        for e in (key(a, b), key(b, c), key(c, a)):
            s = edge_tris[e]
            s.discard(t)
            if not s:
                del edge_tris[e]

    for t in range(len(tris)):
        link(t)

    n_orig = len(tris)
    split_orig = set()

    def split(t, m):
        a, b, c = tris[t]
        unlink(t)
        tris[t] = [c, a, m]
        tris.append([b, c, m])
        level[t] += 1
        level.append(level[t])
        link(t)
        link(len(tris) - 1)
        if t < n_orig:
            split_orig.add(t)

    def refine(t):
        a, b, c = tris[t]
        e = key(a, b)
        others = edge_tris[e] - {t}
        if others:
            t2 = next(iter(others))
            a2, b2, _ = tris[t2]
            if key(a2, b2) != e:
                refine(t2)
                others = edge_tris[e] - {t}
                t2 = next(iter(others))
        pa, pb = verts[a], verts[b]
        verts.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
        bnd.append(not others)
        m = len(verts) - 1
        if others:
            split(t2, m)
        split(t, m)

    for t in marked:
        if t in split_orig or mesh.level[t] >= l_max:
            continue
        refine(t)

    return TriMesh(np.array(verts), np.array(tris, dtype=np.int64), np.array(bnd),
                   level=np.array(level, dtype=np.int64),
                   refinement_edge=np.full(len(tris), 2, dtype=np.int64))


def is_conforming(mesh: TriMesh) -> bool:
    """Exhaustive check: no edge used more than twice and no hanging nodes."""
    uniq, counts = mesh.edges()
    if np.any(counts > 2):
        return False
    v = mesh.vertices
    # a hanging node is a vertex strictly inside some edge
    for chunk in np.array_split(np.arange(len(uniq)), max(1, len(uniq) // 512)):
        e = uniq[chunk]
        p, q = v[e[:, 0]], v[e[:, 1]]
        d = q - p
        rel = v[None, :, :] - p[:, None, :]
        cross = d[:, None, 0] * rel[:, :, 1] - d[:, None, 1] * rel[:, :, 0]
        dot = np.einsum("ek,evk->ev", d, rel)
        len2 = np.einsum("ek,ek->e", d, d)
        scale = np.sqrt(len2)[:, None]
        inside = (np.abs(cross) <= 1e-12 * scale * scale) & (dot > 1e-12 * len2[:, None]) \
            & (dot < (1 - 1e-12) * len2[:, None])
        if inside.any():
            return False
    return True


def write_mesh(mesh: TriMesh, target) -> None:
    """Plain-text export: header, ``x y boundary_flag`` lines, ``v0 v1 v2 level`` lines."""
    buf = io.StringIO()
    buf.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}\n")
    for (x, y), b in zip(mesh.vertices, mesh.boundary):
        buf.write(f"{x:.17g} {y:.17g} {int(b)}\n")
    for (a, b, c), lv in zip(mesh.triangles, mesh.level):
        buf.write(f"{a} {b} {c} {lv}\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)


def read_mesh(source) -> TriMesh:
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    lines = text.splitlines()
    head = lines[0].split()
    if len(head) != 4 or head[0] != "vertices" or head[2] != "triangles":
        raise InvalidArgumentError("bad mesh header")
    nv, nt = int(head[1]), int(head[3])
    vrows = [ln.split() for ln in lines[1:1 + nv]]
    trows = [ln.split() for ln in lines[1 + nv:1 + nv + nt]]
    xy = np.array([[float(r[0]), float(r[1])] for r in vrows])
    bnd = np.array([r[2] == "1" for r in vrows])
    tri = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in trows], dtype=np.int64)
    lvl = np.array([int(r[3]) for r in trows], dtype=np.int64)
    return TriMesh(xy, tri, bnd, level=lvl)

"""Delaunay triangulation and piecewise-planar interpolation of dBm samples.

The triangulation is built by incremental Bowyer-Watson insertion on a
structure that includes "ghost" triangles: one per convex-hull edge, closed
off by a symbolic vertex at infinity. Points outside the current hull are
then handled by the same cavity-retriangulation step as interior points, so
no bounding super-triangle (and no cleanup of it) is needed. All geometric
decisions go through the exact-sign predicates.

Sites are inserted in index order and a site only conflicts with triangles
whose circumcircle it lies *strictly* inside, so co-circular configurations
resolve in favour of the lower-indexed sites already present.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractError, DegenerateInputError
from .pointprocess import Region
from .predicates import incircle, orient2d, orient2d_many

logger = logging.getLogger(__name__)

_GHOST = -1


class _Builder:
    def __init__(self, xy: np.ndarray):
        self.x = xy[:, 0].tolist()
        self.y = xy[:, 1].tolist()
        self.tris: dict[int, tuple[int, int, int]] = {}
        self.edge: dict[tuple[int, int], int] = {}
        self._next = 0
        self._last = 0

    def _add(self, a, b, c) -> int:
        # keep the ghost vertex (if any) in the last slot
        if a == _GHOST:
            a, b, c = b, c, a
        elif b == _GHOST:
            a, b, c = c, a, b
        t = self._next
        self._next += 1
        self.tris[t] = (a, b, c)
        self.edge[(a, b)] = t
        self.edge[(b, c)] = t
        self.edge[(c, a)] = t
        if c != _GHOST:
            self._last = t
        return t

    def _remove(self, t):
        a, b, c = self.tris.pop(t)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge.get(e) == t:
                del self.edge[e]

    def _orient(self, i, j, k) -> int:
        x, y = self.x, self.y
        return orient2d(x[i], y[i], x[j], y[j], x[k], y[k])

    def start(self, i, j, k):
        if self._orient(i, j, k) < 0:
            j, k = k, j
        self._add(i, j, k)
        self._add(j, i, _GHOST)
        self._add(k, j, _GHOST)
        self._add(i, k, _GHOST)

    def _in_conflict(self, t, p) -> bool:
        a, b, c = self.tris[t]
        x, y = self.x, self.y
        if c != _GHOST:
            return incircle(x[a], y[a], x[b], y[b], x[c], y[c], x[p], y[p]) > 0
        o = self._orient(a, b, p)
        if o != 0:
            return o > 0
        # collinear with the hull edge: conflict only strictly inside the segment
        dot = (x[p] - x[a]) * (x[b] - x[a]) + (y[p] - y[a]) * (y[b] - y[a])
        length2 = (x[b] - x[a]) ** 2 + (y[b] - y[a]) ** 2
        return 0 < dot < length2

    def _locate(self, p) -> int:
        """Visibility walk to a triangle whose circumdisk contains p."""
        t = self._last
        if t not in self.tris:
            t = next(s for s, v in self.tris.items() if v[2] != _GHOST)
        k = 0
        while True:
            a, b, c = self.tris[t]
            if c == _GHOST:
                return t
            moved = False
            edges = ((a, b), (b, c), (c, a))
            for n in range(3):
                u, v = edges[(n + k) % 3]
                if self._orient(u, v, p) < 0:
                    t = self.edge[(v, u)]
                    moved = True
                    break
            if not moved:
                return t
            k += 1

    def insert(self, p):
        seed = self._locate(p)
        cavity = {seed}
        stack = [seed]
        boundary = []
        while stack:
            t = stack.pop()
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self.edge[(v, u)]
                if nb in cavity:
                    continue
                if self._in_conflict(nb, p):
                    cavity.add(nb)
                    stack.append(nb)
                else:
                    boundary.append((u, v))
        for t in cavity:
            self._remove(t)
        for u, v in boundary:
            self._add(u, v, p)

    def finite_triangles(self) -> np.ndarray:
        out = []
        for a, b, c in self.tris.values():
            if c == _GHOST:
                continue
            # rotate so the smallest index leads; orientation is preserved
            m = min(a, b, c)
            while a != m:
                a, b, c = b, c, a
            out.append((a, b, c))
        out.sort()
        return np.array(out, dtype=np.int64).reshape(-1, 3)


def fuse_duplicate_sites(sites) -> np.ndarray:
    """Merge sites with identical (x, y) by averaging z in linear mW."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 3)
    keys, first, inverse = np.unique(sites[:, :2], axis=0, return_index=True,
                                     return_inverse=True)
    inverse = inverse.reshape(-1)
    if len(keys) == len(sites):
        return sites
    order = np.argsort(first, kind="stable")
    out = np.empty((len(keys), 3))
    for row, g in enumerate(order):
        z = sites[inverse == g, 2]
        out[row, :2] = keys[g]
        out[row, 2] = 10.0 * np.log10(np.mean(np.power(10.0, z / 10.0)))
    logger.info("fused %d duplicate sites", len(sites) - len(keys))
    return out


def plane_coefficients(sites: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """(a, b, c) per triangle with a*x + b*y + c through its three vertices."""
    p0, p1, p2 = (sites[triangles[:, i]] for i in range(3))
    d1 = p1 - p0
    d2 = p2 - p0
    den = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    a = (d1[:, 2] * d2[:, 1] - d2[:, 2] * d1[:, 1]) / den
    b = (d1[:, 0] * d2[:, 2] - d2[:, 0] * d1[:, 2]) / den
    c = p0[:, 2] - a * p0[:, 0] - b * p0[:, 1]
    return np.column_stack([a, b, c])


@dataclass(frozen=True)
class Triangulation:
    """Delaunay triangles over ``sites`` (x, y, z_dbm) with per-triangle planes.

    ``triangles`` holds counter-clockwise vertex-index triples.
    """

    sites: np.ndarray
    triangles: np.ndarray
    planes: np.ndarray

    def __len__(self):
        return len(self.triangles)

    def edges(self) -> dict[tuple[int, int], list[int]]:
        """Undirected edge (i < j) -> indices of the triangles sharing it."""
        out: dict[tuple[int, int], list[int]] = {}
        for t, (a, b, c) in enumerate(self.triangles.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                out.setdefault((min(u, v), max(u, v)), []).append(t)
        return out

    def to_json(self) -> str:
        return json.dumps({
            "sites": self.sites.tolist(),
            "triangles": self.triangles.tolist(),
            "planes": self.planes.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Triangulation":
        d = json.loads(text)
        return cls(np.asarray(d["sites"], dtype=float).reshape(-1, 3),
                   np.asarray(d["triangles"], dtype=np.int64).reshape(-1, 3),
                   np.asarray(d["planes"], dtype=float).reshape(-1, 3))


def triangulate(sites) -> Triangulation:
    """Delaunay-triangulate (x, y, z) sites and fit a plane to each triangle.

    Raises
    ------
    DegenerateInputError
        Fewer than three distinct sites, or all of them collinear.
    """
    sites = np.asarray(sites, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(sites)):
        raise ContractError("sites must be finite")
    sites = fuse_duplicate_sites(sites)
    n = len(sites)
    if n < 3:
        raise DegenerateInputError(f"need at least 3 distinct sites, got {n}", n)
    b = _Builder(sites[:, :2])
    third = next((k for k in range(2, n) if b._orient(0, 1, k) != 0), None)
    if third is None:
        raise DegenerateInputError(f"all {n} sites are collinear", n)
    b.start(0, 1, third)
    for p in range(2, n):
        if p != third:
            b.insert(p)
    tris = b.finite_triangles()
    return Triangulation(sites, tris, plane_coefficients(sites, tris))


_FEW_POINTS = 8


def _locate_one(tri: Triangulation, p) -> int:
    # same closed-triangle test as the batch path, vectorized over triangles
    v = tri.sites[tri.triangles]
    vx, vy = v[:, :, 0], v[:, :, 1]
    px, py = float(p[0]), float(p[1])
    box = ((vx.min(axis=1) <= px) & (px <= vx.max(axis=1))
           & (vy.min(axis=1) <= py) & (py <= vy.max(axis=1)))
    cand = np.flatnonzero(box)
    if not len(cand):
        return -1
    inside = np.ones(len(cand), dtype=bool)
    for e0, e1 in ((0, 1), (1, 2), (2, 0)):
        inside &= orient2d_many(vx[cand, e0], vy[cand, e0], vx[cand, e1], vy[cand, e1], px, py) >= 0
    hits = cand[inside]
    return int(hits[0]) if len(hits) else -1


def locate(tri: Triangulation, xy) -> np.ndarray:
    """Index of the lowest-numbered triangle containing each point, else -1.

    Triangles are closed, so points on a shared edge go to the lower index
    and points on the hull boundary count as inside.
    """
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    if len(xy) <= _FEW_POINTS:
        return np.array([_locate_one(tri, p) for p in xy], dtype=np.int64)
    owner = np.full(len(xy), -1, dtype=np.int64)
    order = np.argsort(xy[:, 0], kind="stable")
    xs = xy[order, 0]
    sx, sy = tri.sites[:, 0], tri.sites[:, 1]
    for t, (i, j, k) in enumerate(tri.triangles):
        vx = (sx[i], sx[j], sx[k])
        vy = (sy[i], sy[j], sy[k])
        lo = np.searchsorted(xs, min(vx), side="left")
        hi = np.searchsorted(xs, max(vx), side="right")
        if lo == hi:
            continue
        cand = order[lo:hi]
        cand = cand[owner[cand] < 0]
        py = xy[cand, 1]
        cand = cand[(py >= min(vy)) & (py <= max(vy))]
        if not len(cand):
            continue
        px, py = xy[cand, 0], xy[cand, 1]
        inside = np.ones(len(cand), dtype=bool)
        for (ax, ay), (bx, by) in (((vx[0], vy[0]), (vx[1], vy[1])),
                                   ((vx[1], vy[1]), (vx[2], vy[2])),
                                   ((vx[2], vy[2]), (vx[0], vy[0]))):
            inside &= orient2d_many(ax, ay, bx, by, px, py) >= 0
        owner[cand[inside]] = t
    return owner


def interpolate_many(tri: Triangulation, xy) -> np.ndarray:
    """Planar interpolant at each point; NaN outside the convex hull."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    owner = locate(tri, xy)
    out = np.full(len(xy), np.nan)
    hit = owner >= 0
    t = owner[hit]
    a, b, c = tri.planes[t, 0], tri.planes[t, 1], tri.planes[t, 2]
    val = a * xy[hit, 0] + b * xy[hit, 1] + c
    # rounding guard: a convex combination never leaves the vertex range
    zt = tri.sites[tri.triangles[t], 2]
    out[hit] = np.clip(val, zt.min(axis=1), zt.max(axis=1))
    return out


def interpolate(tri: Triangulation, at) -> float:
    """Interpolated dBm at one point (x, y); NaN marks a point outside the hull."""
    return float(interpolate_many(tri, [at])[0])


@dataclass(frozen=True)
class MeshGrid:
    """``nx`` by ``ny`` nodes spanning ``region`` inclusive of its edges."""

    region: Region
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ContractError(f"grid must have at least one node, got {self.nx}x{self.ny}")

    @property
    def xs(self) -> np.ndarray:
        r = self.region
        return np.linspace(r.x_min, r.x_max, self.nx) if self.nx > 1 else np.array([r.x_min])

    @property
    def ys(self) -> np.ndarray:
        r = self.region
        return np.linspace(r.y_min, r.y_max, self.ny) if self.ny > 1 else np.array([r.y_min])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def nodes(self) -> np.ndarray:
        """(ny*nx, 2) node coordinates in row-major (y-major) order."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def interpolate_grid(tri: Triangulation, grid: MeshGrid,
                     fill: str = "mask") -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the interpolant on every mesh node.

    Returns ``(values, inside)`` with shape ``grid.shape``. Nodes outside the
    hull are NaN under ``fill="mask"``; ``fill="nearest"`` copies the
    nearest site's value there instead (display only, ``inside`` still False).
    """
    if fill not in ("mask", "nearest"):
        raise ContractError(f"unknown fill policy {fill!r}")
    nodes = grid.nodes()
    vals = interpolate_many(tri, nodes)
    inside = ~np.isnan(vals)
    if fill == "nearest" and not inside.all():
        _, idx = cKDTree(tri.sites[:, :2]).query(nodes[~inside])
        vals[~inside] = tri.sites[idx, 2]
    return vals.reshape(grid.shape), inside.reshape(grid.shape)

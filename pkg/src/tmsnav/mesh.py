"""Indexed triangle surfaces and their spatial queries.

Meshes are consumed in millimeters with outward-winding triangles:
normal = normalize((v1 - v0) x (v2 - v0)) points away from the enclosed
volume. Queries (closest point, ray intersection) are exact and
deterministic; ties are broken by lowest triangle id. Meshes at or above
``accel_threshold`` triangles are served by an axis-aligned BVH, smaller
ones by the vectorized brute-force path (which doubles as the test
oracle).
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMeshError, MeshValidationError

DEGENERATE_AREA_MM2 = 1e-9
RAY_MIN_PARAMETER = 1e-9
_RAY_PARALLEL_EPS = 1e-12

# Direction used for point-containment parity casts; chosen with no axis
# alignment so rays do not graze mesh edges of axis-aligned fixtures.
_PARITY_DIRECTION = np.array([0.578167235, 0.577090427, 0.576790941])
_PARITY_DIRECTION = _PARITY_DIRECTION / np.linalg.norm(_PARITY_DIRECTION)


@dataclass(frozen=True)
class SurfaceHit:
    point: np.ndarray  # (3,), mm
    triangle_id: int
    ray_parameter: float = 0.0  # mm along the ray for ray queries

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).reshape(3).copy()
        p.setflags(write=False)
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "triangle_id", int(self.triangle_id))
        object.__setattr__(self, "ray_parameter", float(self.ray_parameter))


class TriangleMesh:
    """Read-only indexed triangle surface with lazy BVH acceleration."""

    def __init__(self, vertices, triangles, accel_threshold: int = 10_000):
        v = np.asarray(vertices, dtype=float).reshape(-1, 3).copy()
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3).copy()
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshValidationError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        self.vertices = v
        self.triangles = t
        self.accel_threshold = int(accel_threshold)
        self._corners = None
        self._bvh = None
        if len(t):
            areas = 0.5 * np.linalg.norm(
                np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]), axis=1
            )
            bad = np.flatnonzero(areas <= DEGENERATE_AREA_MM2)
            if bad.size:
                raise MeshValidationError(
                    f"{bad.size} degenerate triangle(s), first at id {int(bad[0])}"
                )

    def __len__(self) -> int:
        return len(self.triangles)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-triangle vertex arrays (a, b, c), each (M, 3)."""
        if self._corners is None:
            t = self.triangles
            self._corners = (
                self.vertices[t[:, 0]],
                self.vertices[t[:, 1]],
                self.vertices[t[:, 2]],
            )
        return self._corners

    def bvh(self) -> "_Bvh":
        if self._bvh is None:
            self._bvh = _Bvh(self)
        return self._bvh

    def _accelerated(self) -> bool:
        return self._bvh is not None or len(self) >= self.accel_threshold


def triangle_normal(mesh: TriangleMesh, triangle_id: int) -> np.ndarray:
    """Unit outward normal of one triangle from its stored winding."""
    i0, i1, i2 = mesh.triangles[triangle_id]
    v = mesh.vertices
    n = np.cross(v[i1] - v[i0], v[i2] - v[i0])
    norm = np.linalg.norm(n)
    if norm <= 2.0 * DEGENERATE_AREA_MM2:
        raise MeshValidationError(f"degenerate triangle {triangle_id}")
    return n / norm


def triangle_normals(mesh: TriangleMesh) -> np.ndarray:
    a, b, c = mesh.corners()
    n = np.cross(b - a, c - a)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _closest_on_triangles(a, b, c, q):
    """Closest point on each triangle (a, b, c): returns (points, d2).

    Vectorized Voronoi-region walk (Ericson-style region classification,
    exact comparisons). Broadcasts one query (3,) over T triangles, or a
    batch (Q, 3) over the same T triangles with (Q, T, ...) outputs.
    """
    qv = q[..., None, :]  # (..., 1, 3) against (T, 3)
    ab = b - a
    ac = c - a
    ap = qv - a
    d1 = (ab * ap).sum(-1)
    d2_ = (ac * ap).sum(-1)
    bp = qv - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = qv - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)

    shape = d1.shape
    a_, b_, c_ = np.broadcast_to(a, shape + (3,)), np.broadcast_to(b, shape + (3,)), \
        np.broadcast_to(c, shape + (3,))
    ab_, ac_ = np.broadcast_to(ab, shape + (3,)), np.broadcast_to(ac, shape + (3,))
    result = np.empty(shape + (3,))
    remain = np.ones(shape, dtype=bool)

    is_a = (d1 <= 0.0) & (d2_ <= 0.0)
    result[is_a] = a_[is_a]
    remain &= ~is_a

    is_b = (d3 >= 0.0) & (d4 <= d3) & remain
    result[is_b] = b_[is_b]
    remain &= ~is_b

    vc = d1 * d4 - d3 * d2_
    is_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0) & remain
    if is_ab.any():
        t = (d1[is_ab] / (d1[is_ab] - d3[is_ab]))[:, None]
        result[is_ab] = a_[is_ab] + t * ab_[is_ab]
    remain &= ~is_ab

    is_c = (d6 >= 0.0) & (d5 <= d6) & remain
    result[is_c] = c_[is_c]
    remain &= ~is_c

    vb = d5 * d2_ - d1 * d6
    is_ac = (vb <= 0.0) & (d2_ >= 0.0) & (d6 <= 0.0) & remain
    if is_ac.any():
        w = (d2_[is_ac] / (d2_[is_ac] - d6[is_ac]))[:, None]
        result[is_ac] = a_[is_ac] + w * ac_[is_ac]
    remain &= ~is_ac

    va = d3 * d6 - d5 * d4
    is_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0) & remain
    if is_bc.any():
        d43 = d4[is_bc] - d3[is_bc]
        w = (d43 / (d43 + d5[is_bc] - d6[is_bc]))[:, None]
        result[is_bc] = b_[is_bc] + w * (c_[is_bc] - b_[is_bc])
    remain &= ~is_bc

    if remain.any():
        denom = va[remain] + vb[remain] + vc[remain]
        v = (vb[remain] / denom)[:, None]
        w = (vc[remain] / denom)[:, None]
        result[remain] = a_[remain] + v * ab_[remain] + w * ac_[remain]

    diff = result - qv
    return result, (diff * diff).sum(-1)


def closest_point_brute(mesh: TriangleMesh, query) -> SurfaceHit:
    """Exhaustive per-triangle closest point; the reference query path."""
    if len(mesh) == 0:
        raise EmptyMeshError("closest_point on empty mesh")
    q = np.asarray(query, dtype=float).reshape(3)
    a, b, c = mesh.corners()
    pts, d2 = _closest_on_triangles(a, b, c, q)
    best = int(np.argmin(d2))  # argmin keeps the lowest id on exact ties
    return SurfaceHit(pts[best], best)


def closest_point(mesh: TriangleMesh, query) -> SurfaceHit:
    """Globally nearest surface point; exact ties go to the lowest id."""
    if len(mesh) == 0:
        raise EmptyMeshError("closest_point on empty mesh")
    if not mesh._accelerated():
        return closest_point_brute(mesh, query)
    return mesh.bvh().closest_point(np.asarray(query, dtype=float).reshape(3))


def closest_point_batch(mesh: TriangleMesh, queries) -> np.ndarray:
    """Nearest surface point for each query row; returns (Q, 3).

    Small meshes run one chunked query-x-triangle pass; accelerated
    meshes fall back to per-query BVH traversal.
    """
    if len(mesh) == 0:
        raise EmptyMeshError("closest_point on empty mesh")
    q = np.asarray(queries, dtype=float).reshape(-1, 3)
    if mesh._accelerated():
        bvh = mesh.bvh()
        return np.array([bvh.closest_point(p).point for p in q])
    a, b, c = mesh.corners()
    out = np.empty_like(q)
    chunk = max(1, 2_000_000 // max(len(mesh), 1))
    for start in range(0, len(q), chunk):
        pts, d2 = _closest_on_triangles(a, b, c, q[start:start + chunk])
        best = np.argmin(d2, axis=1)
        out[start:start + chunk] = pts[np.arange(len(best)), best]
    return out


def _ray_hits_triangles(a, b, c, origin, direction):
    """Moller-Trumbore over a triangle batch: (t, valid) arrays."""
    e1 = b - a
    e2 = c - a
    h = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    valid = np.abs(det) > _RAY_PARALLEL_EPS
    inv = np.where(valid, det, 1.0)
    s = origin - a
    u = np.einsum("ij,ij->i", s, h) / inv
    qv = np.cross(s, e1)
    v = np.dot(qv, direction) / inv
    t = np.einsum("ij,ij->i", e2, qv) / inv
    valid &= (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > RAY_MIN_PARAMETER)
    return t, valid


def ray_intersect_brute(mesh: TriangleMesh, origin, direction) -> SurfaceHit | None:
    """Exhaustive nearest ray hit; the reference query path."""
    o = np.asarray(origin, dtype=float).reshape(3)
    d = np.asarray(direction, dtype=float).reshape(3)
    a, b, c = mesh.corners()
    t, valid = _ray_hits_triangles(a, b, c, o, d)
    if not valid.any():
        return None
    t = np.where(valid, t, np.inf)
    best = int(np.argmin(t))
    return SurfaceHit(o + t[best] * d, best, t[best])


def ray_intersect(mesh: TriangleMesh, origin, direction) -> SurfaceHit | None:
    """Nearest intersection with ray_parameter > 1e-9 mm, or None."""
    if len(mesh) == 0:
        return None
    if not mesh._accelerated():
        return ray_intersect_brute(mesh, origin, direction)
    o = np.asarray(origin, dtype=float).reshape(3)
    d = np.asarray(direction, dtype=float).reshape(3)
    return mesh.bvh().ray_intersect(o, d)


def ray_crossing_count(mesh: TriangleMesh, origin, direction) -> int:
    a, b, c = mesh.corners()
    _, valid = _ray_hits_triangles(
        a, b, c, np.asarray(origin, float).reshape(3), np.asarray(direction, float).reshape(3)
    )
    return int(valid.sum())


def contains_point(mesh: TriangleMesh, point) -> bool:
    """Parity containment test for closed meshes."""
    return ray_crossing_count(mesh, point, _PARITY_DIRECTION) % 2 == 1


class _Bvh:
    """Median-split AABB tree over triangle ids (leaf size 8).

    Nodes are stored flat; leaves keep their triangle ids ascending so the
    lowest-id tie rule matches the brute-force oracle exactly.
    """

    LEAF_SIZE = 8

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        a, b, c = mesh.corners()
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        centroids = (a + b + c) / 3.0
        self.node_lo: list[np.ndarray] = []
        self.node_hi: list[np.ndarray] = []
        self.node_left: list[int] = []  # -1 marks a leaf
        self.node_right: list[int] = []
        self.node_tris: list[np.ndarray | None] = []
        self._build(np.arange(len(mesh), dtype=np.int64), lo, hi, centroids)

    def _build(self, ids, lo, hi, centroids) -> int:
        node = len(self.node_lo)
        self.node_lo.append(lo[ids].min(axis=0))
        self.node_hi.append(hi[ids].max(axis=0))
        self.node_left.append(-1)
        self.node_right.append(-1)
        self.node_tris.append(None)
        if len(ids) <= self.LEAF_SIZE:
            self.node_tris[node] = np.sort(ids)
            return node
        cen = centroids[ids]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        order = np.argsort(cen[:, axis], kind="stable")
        half = len(ids) // 2
        left_ids, right_ids = ids[order[:half]], ids[order[half:]]
        self.node_left[node] = self._build(left_ids, lo, hi, centroids)
        self.node_right[node] = self._build(right_ids, lo, hi, centroids)
        return node

    def _box_dist2(self, node: int, q: np.ndarray) -> float:
        d = np.maximum(self.node_lo[node] - q, 0.0) + np.maximum(q - self.node_hi[node], 0.0)
        return float(d @ d)

    def closest_point(self, q: np.ndarray) -> SurfaceHit:
        a, b, c = self.mesh.corners()
        best_d2 = np.inf
        best_id = -1
        best_pt = None
        heap = [(self._box_dist2(0, q), 0)]
        # <= keeps equally-distant boxes in play so the lowest-id tie wins
        while heap and heap[0][0] <= best_d2:
            _, node = heapq.heappop(heap)
            tris = self.node_tris[node]
            if tris is None:
                for child in (self.node_left[node], self.node_right[node]):
                    d2 = self._box_dist2(child, q)
                    if d2 <= best_d2:
                        heapq.heappush(heap, (d2, child))
                continue
            pts, d2 = _closest_on_triangles(a[tris], b[tris], c[tris], q)
            k = int(np.argmin(d2))
            cand_d2, cand_id = d2[k], int(tris[k])
            if cand_d2 < best_d2 or (cand_d2 == best_d2 and cand_id < best_id):
                best_d2, best_id, best_pt = cand_d2, cand_id, pts[k]
        return SurfaceHit(best_pt, best_id)

    def _slab_entry(self, node: int, o: np.ndarray, d: np.ndarray,
                    inv_d: np.ndarray) -> float | None:
        lo, hi = self.node_lo[node], self.node_hi[node]
        axis_parallel = d == 0.0
        if axis_parallel.any() and (
            (o[axis_parallel] < lo[axis_parallel]) | (o[axis_parallel] > hi[axis_parallel])
        ).any():
            return None
        with np.errstate(invalid="ignore"):
            t0 = (lo - o) * inv_d
            t1 = (hi - o) * inv_d
        # parallel axes contribute no constraint (0 * inf above gives nan)
        tmin = np.nanmax(np.minimum(t0, t1), initial=-np.inf)
        tmax = np.nanmin(np.maximum(t0, t1), initial=np.inf)
        if tmax < max(tmin, RAY_MIN_PARAMETER):
            return None
        return float(max(tmin, 0.0))

    def ray_intersect(self, o: np.ndarray, d: np.ndarray) -> SurfaceHit | None:
        a, b, c = self.mesh.corners()
        with np.errstate(divide="ignore"):
            inv_d = 1.0 / d
        best_t = np.inf
        best_id = -1
        stack = [0]
        while stack:
            node = stack.pop()
            entry = self._slab_entry(node, o, d, inv_d)
            if entry is None or entry > best_t:
                continue
            tris = self.node_tris[node]
            if tris is None:
                stack.append(self.node_right[node])
                stack.append(self.node_left[node])
                continue
            t, valid = _ray_hits_triangles(a[tris], b[tris], c[tris], o, d)
            for k in np.flatnonzero(valid):
                tk, idk = t[k], int(tris[k])
                if tk < best_t or (tk == best_t and idk < best_id):
                    best_t, best_id = tk, idk
        if best_id < 0:
            return None
        return SurfaceHit(o + best_t * d, best_id, best_t)


_STL_VERTEX_RE = re.compile(3 * r"vertex\s+(\S+)\s+(\S+)\s+(\S+)\s+")


def load_stl(path, accel_threshold: int = 10_000, drop_degenerate: bool = False) -> TriangleMesh:
    """Read an ASCII STL file (facet normals are ignored and recomputed).

    Vertices are deduplicated by exact coordinate so the result is an
    indexed mesh. Degenerate facets raise unless drop_degenerate is set.
    """
    with open(path, "r") as fh:
        text = fh.read()
    if not text.lstrip().startswith("solid"):
        raise MeshValidationError(f"{path}: not an ASCII STL file")
    vertex_index: dict[tuple, int] = {}
    vertices: list[tuple] = []
    triangles = []
    for m in _STL_VERTEX_RE.finditer(text):
        g = tuple(map(float, m.groups()))
        tri = []
        for corner in (g[0:3], g[3:6], g[6:9]):
            idx = vertex_index.get(corner)
            if idx is None:
                idx = len(vertices)
                vertex_index[corner] = idx
                vertices.append(corner)
            tri.append(idx)
        triangles.append(tri)
    if not triangles:
        raise MeshValidationError(f"{path}: no facets found")
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    if drop_degenerate:
        areas = 0.5 * np.linalg.norm(
            np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]), axis=1
        )
        t = t[areas > DEGENERATE_AREA_MM2]
    return TriangleMesh(v, t, accel_threshold=accel_threshold)


def save_stl(mesh: TriangleMesh, path, name: str = "surface") -> None:
    """Write an ASCII STL with normals recomputed from winding."""
    normals = triangle_normals(mesh)
    a, b, c = mesh.corners()
    lines = [f"solid {name}"]
    for i in range(len(mesh)):
        nx, ny, nz = (float(x) for x in normals[i])
        lines.append(f"  facet normal {nx!r} {ny!r} {nz!r}")
        lines.append("    outer loop")
        for p in (a[i], b[i], c[i]):
            px, py, pz = (float(x) for x in p)
            lines.append(f"      vertex {px!r} {py!r} {pz!r}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def sample_surface(mesh: TriangleMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """Area-weighted random points on the surface, shape (n, 3)."""
    a, b, c = mesh.corners()
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    ids = rng.choice(len(mesh), size=n, p=areas / areas.sum())
    r1 = np.sqrt(rng.uniform(size=n))[:, None]
    r2 = rng.uniform(size=n)[:, None]
    return (1.0 - r1) * a[ids] + r1 * (1.0 - r2) * b[ids] + r1 * r2 * c[ids]

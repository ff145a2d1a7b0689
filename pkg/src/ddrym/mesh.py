"""Polyhedral meshes: incidence, orientation, geometry and simple generators.

A :class:`PolyMesh` stores vertices, planar polygonal faces given by vertex
loops, and cells given by lists of faces.  Edges are derived from the face
loops.  All geometric quantities needed by the discrete complex (normals,
tangents, diameters, star points, relative orientations) are computed once at
construction and the object is treated as immutable afterwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class MeshError(ValueError):
    """Raised when a mesh violates one of the structural invariants."""


def _newell_normal(pts: np.ndarray) -> np.ndarray:
    nxt = np.roll(pts, -1, axis=0)
    n = np.array(
        [
            np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
            np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
            np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
        ]
    )
    return n


def _diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def _segments_intersect(p1, p2, q1, q2, tol) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 < -tol) and (d3 * d4 < -tol)


@dataclass(frozen=True)
class OrientationTables:
    """Relative orientations.

    ``cell_face[T][i]`` is omega_TF for the i-th face of cell ``T``;
    ``face_edge[F][i]`` is omega_FE for the i-th edge of face ``F``;
    ``edge_vertex[E]`` holds omega_EV for the two endpoints (lower index first).
    """

    cell_face: list
    face_edge: list
    edge_vertex: np.ndarray


@dataclass(frozen=True)
class SimplexCover:
    """Triangle fans of faces and tetrahedral decompositions of cells."""

    face_triangles: list  # per face: (m, 3, 3) vertex coordinates
    cell_tetrahedra: list  # per cell: (m, 4, 3) vertex coordinates, positive volume


@dataclass(frozen=True, eq=False)
class PolyMesh:
    vertices: np.ndarray
    face_loops: list
    cell_faces: list
    edges: np.ndarray
    face_edges: list
    face_normals: np.ndarray
    face_areas: np.ndarray
    face_centroids: np.ndarray
    face_points: np.ndarray
    face_diameters: np.ndarray
    face_frames: np.ndarray  # (nF, 2, 3): in-plane orthonormal tau1, tau2 with tau1 x tau2 = n_F
    edge_tangents: np.ndarray
    edge_lengths: np.ndarray
    edge_midpoints: np.ndarray
    cell_volumes: np.ndarray
    cell_centroids: np.ndarray
    cell_points: np.ndarray
    cell_diameters: np.ndarray
    face_cells: list
    cell_edges: list
    cell_vertices: list
    orientations: OrientationTables
    cover: SimplexCover
    face_point_override: bool = False
    cell_point_override: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    # ------------------------------------------------------------------ sizes
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.face_loops)

    @property
    def n_cells(self) -> int:
        return len(self.cell_faces)

    @property
    def h(self) -> float:
        return float(np.max(self.cell_diameters))

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.array([f for f, c in enumerate(self.face_cells) if len(c) == 1], dtype=int)

    # ----------------------------------------------------------- construction
    @classmethod
    def from_arrays(cls, vertices, faces, cells, face_points=None, cell_points=None) -> "PolyMesh":
        """Build and validate a mesh from vertex coordinates, face loops and cell face lists."""
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        nv = len(vertices)
        face_loops = [np.asarray(f, dtype=int) for f in faces]
        cell_faces = [np.sort(np.asarray(c, dtype=int)) for c in cells]
        nf = len(face_loops)

        for i, loop in enumerate(face_loops):
            if len(loop) < 3:
                raise MeshError(f"face {i}: loop has fewer than 3 vertices")
            if len(set(loop.tolist())) != len(loop):
                raise MeshError(f"face {i}: repeated vertex in loop")
            if loop.min() < 0 or loop.max() >= nv:
                raise MeshError(f"face {i}: vertex index out of range")
        for t, cf in enumerate(cell_faces):
            if len(cf) < 4:
                raise MeshError(f"cell {t}: fewer than 4 faces")
            if len(set(cf.tolist())) != len(cf):
                raise MeshError(f"cell {t}: repeated face")
            if cf.min() < 0 or cf.max() >= nf:
                raise MeshError(f"cell {t}: face index out of range")

        # edges derived from loops, canonical order (lower vertex first, lexicographic)
        pairs = set()
        for loop in face_loops:
            for a, b in zip(loop, np.roll(loop, -1)):
                pairs.add((min(a, b), max(a, b)))
        edges = np.array(sorted(pairs), dtype=int).reshape(-1, 2)
        edge_id = {tuple(e): i for i, e in enumerate(edges.tolist())}
        face_edges = []
        for loop in face_loops:
            face_edges.append(
                np.array(
                    [edge_id[(min(a, b), max(a, b))] for a, b in zip(loop, np.roll(loop, -1))],
                    dtype=int,
                )
            )

        used = np.zeros(nv, dtype=bool)
        for loop in face_loops:
            used[loop] = True
        if not used.all():
            raise MeshError(f"dangling vertex {int(np.flatnonzero(~used)[0])}")

        face_cells = [[] for _ in range(nf)]
        for t, cf in enumerate(cell_faces):
            for f in cf:
                face_cells[f].append(t)
        for f, fc in enumerate(face_cells):
            if len(fc) == 0:
                raise MeshError(f"dangling face {f}: not used by any cell")
            if len(fc) > 2:
                raise MeshError(f"non-manifold face {f}: shared by {len(fc)} cells")

        # edge geometry
        ev = vertices[edges]
        evec = ev[:, 1] - ev[:, 0]
        edge_lengths = np.linalg.norm(evec, axis=1)
        if np.any(edge_lengths <= 0):
            raise MeshError("degenerate edge of zero length")
        edge_tangents = evec / edge_lengths[:, None]
        edge_midpoints = 0.5 * (ev[:, 0] + ev[:, 1])

        # face geometry
        normals = np.zeros((nf, 3))
        areas = np.zeros(nf)
        centroids = np.zeros((nf, 3))
        diameters = np.zeros(nf)
        frames = np.zeros((nf, 2, 3))
        for i, loop in enumerate(face_loops):
            pts = vertices[loop]
            nn = _newell_normal(pts)
            a2 = np.linalg.norm(nn)
            hF = _diameter(pts)
            if a2 <= 1e-14 * hF * hF:
                raise MeshError(f"face {i}: degenerate normal")
            n = nn / a2
            normals[i] = n
            areas[i] = 0.5 * a2
            diameters[i] = hF
            dev = np.abs((pts - pts.mean(axis=0)) @ n)
            if dev.max() > max(1e-12 * hF, 1e-14):
                raise MeshError(f"non-planar face {i} (deviation {dev.max():.3e})")
            # area-weighted centroid from a fan around the vertex average
            c0 = pts.mean(axis=0)
            nxt = np.roll(pts, -1, axis=0)
            tri_a = 0.5 * np.cross(pts - c0, nxt - c0) @ n
            centroids[i] = np.sum(tri_a[:, None] * (c0 + pts + nxt) / 3.0, axis=0) / tri_a.sum()
            t1 = pts[1] - pts[0]
            t1 = t1 - (t1 @ n) * n
            t1 /= np.linalg.norm(t1)
            frames[i, 0] = t1
            frames[i, 1] = np.cross(n, t1)
            # simplicity check in the face plane
            p2 = (pts - c0) @ frames[i].T
            m = len(p2)
            if m > 3:
                tol = 1e-14 * hF * hF
                for a in range(m):
                    for b in range(a + 2, m):
                        if a == 0 and b == m - 1:
                            continue
                        if _segments_intersect(p2[a], p2[(a + 1) % m], p2[b], p2[(b + 1) % m], tol):
                            raise MeshError(f"face {i}: self-intersecting loop")

        face_override = face_points is not None
        fpts = np.asarray(face_points, dtype=float) if face_override else centroids.copy()
        if fpts.shape != (nf, 3):
            raise MeshError("face_points must have one point per face")

        # orientation omega_FE: +1 iff n_FE = n_F x t_E points out of F
        face_edge_or = []
        for i, fe in enumerate(face_edges):
            nfe = np.cross(normals[i][None, :], edge_tangents[fe])
            s = np.sign(np.einsum("ij,ij->i", nfe, edge_midpoints[fe] - fpts[i]))
            if np.any(s == 0):
                raise MeshError(f"face {i}: star point on an edge line")
            face_edge_or.append(s.astype(int))

        # per-face triangle fans from x_F; orientation consistent with n_F
        face_tris = []
        for i, loop in enumerate(face_loops):
            pts = vertices[loop]
            nxt = np.roll(pts, -1, axis=0)
            tri = np.stack([np.broadcast_to(fpts[i], pts.shape), pts, nxt], axis=1)
            sa = 0.5 * np.cross(pts - fpts[i], nxt - fpts[i]) @ normals[i]
            if np.any(sa <= 0):
                raise MeshError(f"face {i}: star point not interior (non-positive sub-triangle)")
            face_tris.append(tri)

        # cell geometry
        nc = len(cell_faces)
        volumes = np.zeros(nc)
        cell_centroids = np.zeros((nc, 3))
        cell_diam = np.zeros(nc)
        cell_edges = []
        cell_vertices = []
        for t, cf in enumerate(cell_faces):
            verts = np.unique(np.concatenate([face_loops[f] for f in cf]))
            cedges = np.concatenate([face_edges[f] for f in cf])
            ue, cnt = np.unique(cedges, return_counts=True)
            if np.any(cnt != 2):
                raise MeshError(f"cell {t}: boundary is not closed")
            if len(verts) - len(ue) + len(cf) != 2:
                raise MeshError(f"cell {t}: Euler characteristic differs from 2")
            cell_vertices.append(verts)
            cell_edges.append(ue)
            cell_diam[t] = _diameter(vertices[verts])

        # outward orientation of each face loop, propagated through shared edges
        # (adjacent faces of a closed surface traverse their common edge in
        # opposite directions), then fixed globally by requiring positive volume
        cell_signs = []
        for t, cf in enumerate(cell_faces):
            directed = {}
            for f in cf:
                loop = face_loops[f]
                for a, b in zip(loop, np.roll(loop, -1)):
                    directed.setdefault((min(a, b), max(a, b)), []).append((f, 1 if a < b else -1))
            sign = {int(cf[0]): 1}
            stack = [int(cf[0])]
            while stack:
                f = stack.pop()
                for e in face_edges[f]:
                    key = tuple(edges[e])
                    (f1, d1), (f2, d2) = directed[key]
                    g, dg, df = (f2, d2, d1) if f1 == f else (f1, d1, d2)
                    want = -sign[f] * df * dg
                    if g in sign:
                        if sign[g] != want:
                            raise MeshError(f"cell {t}: boundary surface is not orientable")
                    else:
                        sign[g] = want
                        stack.append(g)
            if len(sign) != len(cf):
                raise MeshError(f"cell {t}: boundary surface is not connected")
            ref = vertices[cell_vertices[t]].mean(axis=0)
            vol = 0.0
            cen = np.zeros(3)
            for f in cf:
                tri = face_tris[f]
                v6 = sign[int(f)] * np.einsum(
                    "ij,ij->i", tri[:, 0] - ref, np.cross(tri[:, 1] - ref, tri[:, 2] - ref)
                )
                vol += v6.sum() / 6.0
                cen += np.sum(v6[:, None] / 6.0 * (ref + tri.sum(axis=1)) / 4.0, axis=0)
            flip = 1 if vol > 0 else -1
            vol *= flip
            if vol <= 0:
                raise MeshError(f"cell {t}: degenerate volume")
            volumes[t] = vol
            cell_centroids[t] = flip * cen / vol
            cell_signs.append(np.array([flip * sign[int(f)] for f in cf], dtype=int))

        cell_override = cell_points is not None
        cpts = np.asarray(cell_points, dtype=float) if cell_override else cell_centroids.copy()
        if cpts.shape != (nc, 3):
            raise MeshError("cell_points must have one point per cell")

        # tetrahedra from the cell star point over the face fans
        cell_tets = []
        cell_face_or = []
        for t, cf in enumerate(cell_faces):
            signs = cell_signs[t]
            tets = []
            for f, s in zip(cf, signs):
                tri = face_tris[f]
                if s > 0:
                    tets.append(np.stack([np.broadcast_to(cpts[t], (len(tri), 3)), tri[:, 0], tri[:, 1], tri[:, 2]], axis=1))
                else:
                    tets.append(np.stack([np.broadcast_to(cpts[t], (len(tri), 3)), tri[:, 0], tri[:, 2], tri[:, 1]], axis=1))
            tets = np.concatenate(tets, axis=0)
            v6 = np.einsum(
                "ij,ij->i",
                tets[:, 1] - tets[:, 0],
                np.cross(tets[:, 2] - tets[:, 0], tets[:, 3] - tets[:, 0]),
            )
            if np.any(v6 <= 0):
                raise MeshError(f"cell {t}: star point not interior (non-positive sub-tetrahedron)")
            if abs(v6.sum() / 6.0 - volumes[t]) > 1e-12 * volumes[t]:
                raise MeshError(f"cell {t}: sub-tetrahedra do not tile the cell")
            cell_tets.append(tets)
            cell_face_or.append(signs)

        edge_vertex = np.tile(np.array([-1, 1], dtype=int), (len(edges), 1))
        orient = OrientationTables(cell_face_or, face_edge_or, edge_vertex)
        cover = SimplexCover(face_tris, cell_tets)
        return cls(
            vertices=vertices,
            face_loops=face_loops,
            cell_faces=cell_faces,
            edges=edges,
            face_edges=face_edges,
            face_normals=normals,
            face_areas=areas,
            face_centroids=centroids,
            face_points=fpts,
            face_diameters=diameters,
            face_frames=frames,
            edge_tangents=edge_tangents,
            edge_lengths=edge_lengths,
            edge_midpoints=edge_midpoints,
            cell_volumes=volumes,
            cell_centroids=cell_centroids,
            cell_points=cpts,
            cell_diameters=cell_diam,
            face_cells=[tuple(fc) for fc in face_cells],
            cell_edges=cell_edges,
            cell_vertices=cell_vertices,
            orientations=orient,
            cover=cover,
            face_point_override=face_override,
            cell_point_override=cell_override,
        )

    # ------------------------------------------------------------ queries
    def regularity(self) -> float:
        """Smallest ratio (distance from star point to boundary) / diameter over faces and cells."""
        ratios = []
        for f, loop in enumerate(self.face_loops):
            x = self.face_points[f]
            for e in self.face_edges[f]:
                a, b = self.vertices[self.edges[e]]
                t = (b - a) / np.linalg.norm(b - a)
                d = (x - a) - ((x - a) @ t) * t
                ratios.append(np.linalg.norm(d) / self.face_diameters[f])
        for t, cf in enumerate(self.cell_faces):
            x = self.cell_points[t]
            for f in cf:
                d = abs((x - self.face_points[f]) @ self.face_normals[f])
                ratios.append(d / self.cell_diameters[t])
        return float(min(ratios))

    def connected_components(self) -> np.ndarray:
        """Component label of every cell (cells connected through shared faces)."""
        rows, cols = [], []
        for fc in self.face_cells:
            if len(fc) == 2:
                rows += [fc[0], fc[1]]
                cols += [fc[1], fc[0]]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n_cells, self.n_cells))
        _, labels = connected_components(adj, directed=False)
        return labels

    def vertex_components(self) -> np.ndarray:
        labels = self.connected_components()
        out = np.empty(self.n_vertices, dtype=int)
        for t, verts in enumerate(self.cell_vertices):
            out[verts] = labels[t]
        return out

    def to_json_dict(self) -> dict:
        d = {
            "vertices": self.vertices.tolist(),
            "faces": [{"loop": loop.tolist()} for loop in self.face_loops],
            "cells": [{"faces": cf.tolist()} for cf in self.cell_faces],
        }
        if self.face_point_override:
            d["face_points"] = self.face_points.tolist()
        if self.cell_point_override:
            d["cell_points"] = self.cell_points.tolist()
        return d


# ---------------------------------------------------------------------- I/O
def load_polymesh(path) -> PolyMesh:
    """Read a PolyMesh-JSON file and validate it."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise MeshError(f"parse error in {path}: {exc}") from exc
    try:
        verts = data["vertices"]
        faces = [f["loop"] for f in data["faces"]]
        cells = [c["faces"] for c in data["cells"]]
    except (KeyError, TypeError) as exc:
        raise MeshError(f"parse error in {path}: missing or malformed key {exc}") from exc
    return PolyMesh.from_arrays(
        verts, faces, cells, face_points=data.get("face_points"), cell_points=data.get("cell_points")
    )


def save_polymesh(mesh: PolyMesh, path) -> None:
    Path(path).write_text(json.dumps(mesh.to_json_dict()))


# --------------------------------------------------------------- generators
def _grid_vertices(n: int) -> tuple[np.ndarray, callable]:
    r = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(r, r, r, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    return verts, vid


def generate_cubic_mesh(n: int) -> PolyMesh:
    """Uniform mesh of (0,1)^3 by n^3 cubes. Face normals point along +x, +y or +z."""
    if n < 1:
        raise ValueError("n must be >= 1")
    verts, vid = _grid_vertices(n)
    faces = []
    fid = {}
    # loops ordered counter-clockwise around the positive axis direction
    for i in range(n + 1):
        for j in range(n):
            for k in range(n):
                fid[("x", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)])
    for i in range(n):
        for j in range(n + 1):
            for k in range(n):
                fid[("y", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)])
    for i in range(n):
        for j in range(n):
            for k in range(n + 1):
                fid[("z", i, j, k)] = len(faces)
                faces.append([vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)])
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                cells.append(
                    [
                        fid[("x", i, j, k)],
                        fid[("x", i + 1, j, k)],
                        fid[("y", i, j, k)],
                        fid[("y", i, j + 1, k)],
                        fid[("z", i, j, k)],
                        fid[("z", i, j, k + 1)],
                    ]
                )
    return PolyMesh.from_arrays(verts, faces, cells)


# Kuhn decomposition of the unit cube: one tetrahedron per permutation of the axes
_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def generate_tet_mesh(n: int) -> PolyMesh:
    """Conforming tetrahedral mesh of (0,1)^3: each of the n^3 cubes split into 6 Kuhn tetrahedra."""
    if n < 1:
        raise ValueError("n must be >= 1")
    verts, vid = _grid_vertices(n)
    faces = []
    face_id = {}
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    path = [base.copy()]
                    cur = base.copy()
                    for ax in perm:
                        cur = cur.copy()
                        cur[ax] += 1
                        path.append(cur)
                    tv = [vid(*p) for p in path]
                    cf = []
                    for drop in range(4):
                        tri = tuple(sorted(v for m, v in enumerate(tv) if m != drop))
                        if tri not in face_id:
                            face_id[tri] = len(faces)
                            faces.append(list(tri))
                        cf.append(face_id[tri])
                    cells.append(cf)
    return PolyMesh.from_arrays(verts, faces, cells)


def orientations(mesh: PolyMesh) -> OrientationTables:
    """Relative orientation tables omega_TF, omega_FE and omega_EV of ``mesh``."""
    return mesh.orientations


def mesh_from_spec(spec: str) -> PolyMesh:
    """Resolve ``cubic:N``, ``tet:N`` or a path to a PolyMesh-JSON file."""
    if spec.startswith("cubic:"):
        return generate_cubic_mesh(int(spec.split(":", 1)[1]))
    if spec.startswith("tet:"):
        return generate_tet_mesh(int(spec.split(":", 1)[1]))
    return load_polymesh(spec)

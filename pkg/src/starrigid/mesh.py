"""Triangulated surfaces: loading, validation and star decompositions."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .hull import bbox_diagonal, outside_margin
from .tolerances import DEFAULT, Tolerances

logger = logging.getLogger(__name__)


class MeshError(ValueError):
    """Base class for invalid input surfaces.

    ``index`` names the offending element (face or vertex) when known.
    """

    kind = "mesh"

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ParseError(MeshError):
    kind = "parse"


class TopologyError(MeshError):
    kind = "topology"


class DegeneracyError(MeshError):
    kind = "degeneracy"


class NotStarShaped(MeshError):
    kind = "not_star_shaped"


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """An oriented triangulated closed surface or disk.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    triangles : sequence of index triples
    polygons : optional sequence of the original (possibly non-triangular)
        faces; kept so that faces around a chosen apex can be re-fanned.
    """

    vertices: np.ndarray
    triangles: tuple
    polygons: tuple | None = None
    tol: Tolerances = field(default=DEFAULT, repr=False)
    closed: bool = field(init=False)
    boundary_loop: tuple = field(init=False)

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", tuple(tuple(int(i) for i in t) for t in self.triangles))
        if self.polygons is not None:
            object.__setattr__(self, "polygons", tuple(tuple(int(i) for i in p) for p in self.polygons))
        closed, loop = _validate(V, self.triangles, self.tol)
        object.__setattr__(self, "closed", closed)
        object.__setattr__(self, "boundary_loop", loop)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def edges(self) -> list[tuple[int, int]]:
        return sorted({_edge(t[k], t[(k + 1) % 3]) for t in self.triangles for k in range(3)})

    def edge_faces(self) -> dict:
        """Map each undirected edge to the indices of its adjacent triangles."""
        out: dict = {}
        for fi, t in enumerate(self.triangles):
            for k in range(3):
                out.setdefault(_edge(t[k], t[(k + 1) % 3]), []).append(fi)
        return out

    def neighbors(self, v: int) -> set:
        return {w for t in self.triangles if v in t for w in t if w != v}

    def volume(self) -> float:
        V = self.vertices
        T = np.array(self.triangles)
        return float(np.einsum("ij,ij->i", V[T[:, 0]], np.cross(V[T[:, 1]], V[T[:, 2]])).sum() / 6.0)

    def with_vertices(self, vertices) -> "TriMesh":
        return TriMesh(vertices, self.triangles, self.polygons, self.tol)

    def reversed(self) -> "TriMesh":
        polys = None if self.polygons is None else tuple(p[::-1] for p in self.polygons)
        return TriMesh(self.vertices, tuple((a, c, b) for a, b, c in self.triangles), polys, self.tol)

    def oriented_outward(self) -> "TriMesh":
        if self.closed and self.volume() < 0:
            return self.reversed()
        return self

    def refan(self, apex: int) -> "TriMesh":
        """Re-triangulate the original polygons containing ``apex`` as fans from it."""
        if self.polygons is None or all(len(p) == 3 for p in self.polygons):
            return self
        tris = []
        for p in self.polygons:
            if apex in p:
                k = p.index(apex)
                p = p[k:] + p[:k]
            tris.extend(_fan(p))
        return TriMesh(self.vertices, tris, self.polygons, self.tol)


def _fan(poly):
    return [(poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)]


def _validate(V, T, tol: Tolerances):
    n = len(V)
    if V.ndim != 2 or V.shape[1] != 3:
        raise ParseError("vertex array must have shape (n, 3)")
    if not np.all(np.isfinite(V)):
        raise ParseError("non-finite vertex coordinate")
    used = set()
    for fi, t in enumerate(T):
        if len(t) != 3:
            raise ParseError(f"face {fi} is not a triangle", fi)
        for i in t:
            if not 0 <= i < n:
                raise ParseError(f"face {fi} references vertex {i} out of range", fi)
        if len(set(t)) < 3:
            raise DegeneracyError(f"face {fi} repeats a vertex", fi)
        a, b, c = V[list(t)]
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        longest = max(np.linalg.norm(b - a), np.linalg.norm(c - b), np.linalg.norm(a - c))
        if area <= tol.area * longest**2:
            raise DegeneracyError(f"face {fi} is degenerate (area {area:.3g})", fi)
        used.update(t)
    missing = set(range(n)) - used
    if missing:
        raise TopologyError(f"vertex {min(missing)} is not used by any face", min(missing))
    directed: dict = {}
    for fi, t in enumerate(T):
        for k in range(3):
            e = (t[k], t[(k + 1) % 3])
            if e in directed:
                raise TopologyError(
                    f"edge {e} appears twice with the same direction "
                    f"(faces {directed[e]} and {fi}): inconsistent orientation or non-manifold edge", fi)
            directed[e] = fi
    boundary = [e for e in directed if (e[1], e[0]) not in directed]
    loop: tuple = ()
    if boundary:
        nxt = {}
        for a, b in boundary:
            if a in nxt:
                raise TopologyError(f"boundary pinches at vertex {a}", a)
            nxt[a] = b
        start = min(nxt)
        ring = [start]
        while True:
            w = nxt[ring[-1]]
            if w == start:
                break
            ring.append(w)
            if len(ring) > len(nxt):
                raise TopologyError("boundary is not a simple cycle")
        if len(ring) != len(boundary):
            raise TopologyError("boundary edges form more than one cycle")
        loop = tuple(ring)
    # every vertex link must be a single cycle (closed) or a single path
    for v in range(n):
        succ = {}
        for t in T:
            if v in t:
                k = t.index(v)
                succ[t[(k + 1) % 3]] = t[(k + 2) % 3]
        starts = set(succ) - set(succ.values())
        if len(starts) > 1:
            raise TopologyError(f"vertex {v} is non-manifold", v)
        s = next(iter(starts)) if starts else next(iter(succ))
        seen, w = 0, s
        while w in succ and seen <= len(succ):
            w = succ[w]
            seen += 1
            if w == s:
                break
        if seen != len(succ):
            raise TopologyError(f"vertex {v} is non-manifold", v)
    return not boundary, loop


# --------------------------------------------------------------------- I/O


def _tokens(stream):
    text = stream.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return text


def load_mesh(source, fmt: str = "OFF", tol: Tolerances = DEFAULT) -> TriMesh:
    """Read an ASCII OFF or OBJ surface.

    Polygonal faces are fan-triangulated from their first vertex.  Closed
    surfaces are oriented with outward normals.
    """
    if isinstance(source, (str, bytes)):
        source = io.StringIO(source.decode() if isinstance(source, bytes) else source)
    text = _tokens(source)
    fmt = fmt.upper()
    if fmt == "OFF":
        V, F = _parse_off(text)
    elif fmt == "OBJ":
        V, F = _parse_obj(text)
    else:
        raise ParseError(f"unknown format {fmt!r}")
    for fi, f in enumerate(F):
        if len(f) < 3:
            raise ParseError(f"face {fi} has fewer than 3 vertices", fi)
        if len(set(f)) < len(f):
            raise DegeneracyError(f"face {fi} repeats a vertex", fi)
    tris = [t for f in F for t in _fan(f)]
    polys = F if any(len(f) > 3 for f in F) else None
    return TriMesh(V, tris, polys, tol).oriented_outward()


def _parse_off(text):
    lines = []
    for raw in text.splitlines():
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append(s)
    if not lines or not lines[0].startswith("OFF"):
        raise ParseError("missing OFF header")
    head = lines[0][3:].split()
    body = lines[1:]
    if not head:
        if not body:
            raise ParseError("missing OFF counts line")
        head, body = body[0].split(), body[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError) as exc:
        raise ParseError("malformed OFF counts line") from exc
    if len(body) < nv + nf:
        raise ParseError(f"expected {nv} vertex and {nf} face lines, found {len(body)} lines")
    try:
        V = [[float(x) for x in body[i].split()[:3]] for i in range(nv)]
    except ValueError as exc:
        raise ParseError(f"malformed vertex line: {exc}") from exc
    for i, v in enumerate(V):
        if len(v) != 3:
            raise ParseError(f"vertex {i} needs 3 coordinates", i)
    F = []
    for fi in range(nf):
        parts = body[nv + fi].split()
        try:
            k = int(parts[0])
            idx = [int(x) for x in parts[1:1 + k]]
        except (ValueError, IndexError) as exc:
            raise ParseError(f"malformed face line {fi}", fi) from exc
        if len(idx) != k:
            raise ParseError(f"face {fi} lists fewer than {k} vertices", fi)
        F.append(tuple(idx))
    return np.array(V, dtype=float).reshape(-1, 3), F


def _parse_obj(text):
    V, F = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            try:
                V.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: malformed vertex") from exc
            if len(V[-1]) != 3:
                raise ParseError(f"line {lineno}: vertex needs 3 coordinates", len(V) - 1)
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                try:
                    i = int(tok.split("/")[0])
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: malformed face", len(F)) from exc
                idx.append(i - 1 if i > 0 else len(V) + i)
            F.append(tuple(idx))
    return np.array(V, dtype=float).reshape(-1, 3), F


def write_off(mesh: TriMesh, stream=None) -> str:
    """Serialize ``mesh`` as OFF with 17 significant digits."""
    out = [f"OFF\n{mesh.n_vertices} {len(mesh.triangles)} 0"]
    out += [" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices]
    out += ["3 " + " ".join(str(i) for i in t) for t in mesh.triangles]
    text = "\n".join(out) + "\n"
    if stream is not None:
        stream.write(text)
    return text


# ------------------------------------------------------------ convexity


@dataclass(frozen=True)
class ConvexityVerdict:
    weakly_convex: bool
    witness: int | None = None
    margins: tuple = ()

    def __bool__(self) -> bool:
        return self.weakly_convex


def weak_convexity_check(mesh: TriMesh) -> ConvexityVerdict:
    """Is every vertex an extreme point of the hull of the vertex set?

    The witness is the least extreme vertex when the answer is no.
    """
    if not mesh.closed:
        raise TopologyError("weak convexity is defined for closed surfaces")
    V = mesh.vertices
    eps = mesh.tol.hull * bbox_diagonal(V)
    margins = []
    for i in range(len(V)):
        others = np.delete(V, i, axis=0)
        margins.append(outside_margin(V[i], others, eps))
    bad = [i for i, m in enumerate(margins) if m <= eps]
    if bad:
        return ConvexityVerdict(False, min(bad, key=lambda i: (margins[i], i)), tuple(margins))
    return ConvexityVerdict(True, None, tuple(margins))


# --------------------------------------------------------- star complex


@dataclass(frozen=True, eq=False)
class StarComplex:
    """Cones from ``apex`` over the faces of ``mesh`` not containing it.

    ``simplices[k]`` lists the vertices ``(apex, a, b, c)`` of the cone over
    base face ``k``; ``lengths[k]`` holds its six edge lengths in
    :data:`geometry.PAIRS` order.  ``slots[k, j]`` is the interior-edge index
    of the edge ``(apex, simplices[k][j+1])`` or -1 for a surface edge.
    """

    mesh: TriMesh
    apex: int
    base_faces: tuple
    interior_edges: tuple
    interior_lengths: np.ndarray
    lengths: np.ndarray
    slots: np.ndarray
    cone_volumes: np.ndarray

    @property
    def simplices(self) -> tuple:
        return tuple((self.apex,) + f for f in self.base_faces)

    @property
    def m(self) -> int:
        return len(self.interior_edges)

    def simplex_lengths(self, interior=None) -> np.ndarray:
        """Edge lengths of every simplex with the given interior lengths."""
        L = self.lengths.copy()
        if interior is not None and self.m:
            interior = np.asarray(interior, dtype=float)
            for j in range(3):
                sel = self.slots[:, j] >= 0
                L[sel, j] = interior[self.slots[sel, j]]
        return L


def build_star_complex(mesh: TriMesh, apex: int) -> StarComplex:
    """Decompose the solid bounded by ``mesh`` into cones from ``apex``.

    Raises :class:`NotStarShaped` if some cone has non-positive volume or the
    cone volumes do not add up to the enclosed volume.
    """
    if not mesh.closed:
        raise TopologyError("star complexes need a closed surface")
    if not 0 <= apex < mesh.n_vertices:
        raise ParseError(f"apex {apex} out of range", apex)
    mesh = mesh.refan(apex)
    tol = mesh.tol
    V = mesh.vertices
    base = tuple(t for t in mesh.triangles if apex not in t)
    adjacent = mesh.neighbors(apex)
    inner = sorted(w for w in range(mesh.n_vertices) if w != apex and w not in adjacent)
    index = {w: k for k, w in enumerate(inner)}
    vols = []
    for fi, (a, b, c) in enumerate(base):
        vol = float(np.linalg.det(np.array([V[a] - V[apex], V[b] - V[apex], V[c] - V[apex]])) / 6.0)
        if vol <= tol.vol:
            raise NotStarShaped(f"cone over base face {fi} {base[fi]} has volume {vol:.3g}", fi)
        vols.append(vol)
    total = mesh.volume()
    if abs(sum(vols) - total) > tol.rel * abs(total):
        raise NotStarShaped(f"cone volumes sum to {sum(vols)!r}, enclosed volume is {total!r}")
    L = np.empty((len(base), 6))
    slots = np.full((len(base), 3), -1, dtype=int)
    for k, f in enumerate(base):
        pts = V[[apex, *f]]
        for q, (i, j) in enumerate(geometry.PAIRS):
            L[k, q] = np.linalg.norm(pts[i] - pts[j])
        for j, w in enumerate(f):
            slots[k, j] = index.get(w, -1)
    ref = np.array([np.linalg.norm(V[w] - V[apex]) for w in inner])
    sc = StarComplex(mesh, apex, base, tuple((apex, w) for w in inner), ref, L, slots, np.array(vols))
    if sc.m:
        from .star import cone_angles

        theta = cone_angles(sc, ref)
        worst = int(np.argmax(np.abs(theta - 2 * math.pi)))
        if abs(theta[worst] - 2 * math.pi) > tol.angle:
            raise NotStarShaped(
                f"cone angle around interior edge {sc.interior_edges[worst]} is {theta[worst]!r}, not 2*pi")
    return sc


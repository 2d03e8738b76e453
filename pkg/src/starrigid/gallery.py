"""Shape generators for tests and the command line.

Every generator checks the classes it advertises (convex, weakly convex,
star-shaped from the designated apex, negative control) before returning;
a shape that fails its own class check is a bug, so it raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import quad_projection_check
from .hats import FlipError, Hat, HatError, excavate, upper_hull_hat
from .hull import convex_hull_3d
from .mesh import MeshError, TriMesh, build_star_complex, weak_convexity_check
from .projective import pullback_polyhedron


class GalleryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GalleryShape:
    name: str
    params: dict
    seed: int | None
    mesh: TriMesh | None
    apex: int | None = None
    classes: tuple = ()
    hat: Hat | None = None
    history: tuple = ()  # excavated edges (upper diagonals), in order
    convex_hat: Hat | None = None

    def summary(self) -> dict:
        return {"generator": self.name, "params": dict(sorted(self.params.items())), "seed": self.seed,
                "apex": self.apex, "classes": list(self.classes),
                "excavations": [list(e) for e in self.history]}


def concave_edges(mesh: TriMesh, tol: float = 1e-9) -> list:
    """Surface edges where the solid is reflex (outward-oriented mesh)."""
    V = mesh.vertices
    out = []
    for e, (f1, f2) in sorted(mesh.edge_faces().items()):
        t = mesh.triangles[f1]
        a, b, c = V[list(t)]
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n)
        d = next(w for w in mesh.triangles[f2] if w not in e)
        if n @ (V[d] - a) > tol * np.linalg.norm(V[d] - a):
            out.append(e)
    return out


def _check(shape: GalleryShape) -> GalleryShape:
    m = shape.mesh
    cls = set(shape.classes)
    if m is not None:
        wc = weak_convexity_check(m)
        if ("weakly_convex" in cls or "convex" in cls) and not wc:
            raise GalleryError(f"{shape.name}: vertex {wc.witness} is not extreme")
        if "negative_control" in cls and wc:
            raise GalleryError(f"{shape.name}: negative control turned out weakly convex")
        if "convex" in cls and concave_edges(m):
            raise GalleryError(f"{shape.name}: surface has concave edges")
        if "not_convex" in cls and not concave_edges(m):
            raise GalleryError(f"{shape.name}: expected a concave edge")
        if "star_shaped" in cls:
            build_star_complex(m, shape.apex)
    if shape.hat is not None:
        shape.hat.validate(convex="convex_hat" in cls)
    return shape


# ------------------------------------------------------------ polyhedra


def _from_hull(points) -> TriMesh:
    h = convex_hull_3d(points)
    return TriMesh(points, h.facets).oriented_outward()


def tetra() -> TriMesh:
    V = np.array([(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)], dtype=float)
    return TriMesh(V, [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)]).oriented_outward()


def octa() -> TriMesh:
    return suspension(4, 1.0, 1.0)


def icosa() -> TriMesh:
    g = (1 + math.sqrt(5)) / 2
    V = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            V += [(0, s1, s2 * g), (s1, s2 * g, 0), (s2 * g, 0, s1)]
    return _from_hull(np.array(V, dtype=float))


def cube() -> TriMesh:
    """Unit cube with quad faces (fan-split on load, re-fanned around an apex)."""
    V = np.array([(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = [t for q in quads for t in ((q[0], q[1], q[2]), (q[0], q[2], q[3]))]
    return TriMesh(V, tris, quads).oriented_outward()


def suspension(n: int = 4, radius: float = 1.0, pole: float = 1.0) -> TriMesh:
    """Regular n-gon at z = 0 joined to poles (0, 0, +-pole); vertex 0 is the north pole."""
    if n < 3:
        raise GalleryError("suspension needs n >= 3")
    ring = [(radius * math.cos(2 * math.pi * k / n), radius * math.sin(2 * math.pi * k / n), 0.0)
            for k in range(n)]
    V = np.array([(0, 0, pole), (0, 0, -pole)] + ring)
    tris = []
    for k in range(n):
        a, b = 2 + k, 2 + (k + 1) % n
        tris += [(0, a, b), (1, b, a)]
    return TriMesh(V, tris).oriented_outward()


def random_convex(n: int, seed: int) -> TriMesh:
    if n < 4:
        raise GalleryError("need at least 4 points")
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(n, 3))
    P /= np.linalg.norm(P, axis=1)[:, None]
    return _from_hull(P)


def flat_vertex_tetra() -> TriMesh:
    """Tetrahedron with an extra vertex at the centroid of one face (vertex 4)."""
    V = np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1 / 3, 1 / 3, 0)], dtype=float)
    tris = [(0, 4, 1), (1, 4, 2), (2, 4, 0), (0, 1, 3), (1, 2, 3), (2, 0, 3)]
    return TriMesh(V, tris).oriented_outward()


# ----------------------------------------------------------------- hats


def random_convex_hat(n_boundary: int, n_interior: int, seed: int, slope: float = 1.5,
                      min_angle: float = 0.05) -> Hat:
    """Convex hat over a convex polygon: points lifted onto a concave
    paraboloid, faces from the upper hull of the shadow.

    Samples whose shadow has a triangle angle below ``min_angle`` are
    redrawn; sliver shadows leave no room for the height stencil.
    """
    if n_boundary < 3 or n_interior < 0:
        raise GalleryError("need n_boundary >= 3 and n_interior >= 0")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        base = 2 * math.pi * np.arange(n_boundary) / n_boundary
        ang = base + rng.uniform(-0.3, 0.3, n_boundary) * (2 * math.pi / n_boundary)
        B = np.c_[np.cos(ang), np.sin(ang)]
        inner = []
        tries = 0
        while len(inner) < n_interior and tries < 10000:
            tries += 1
            p = rng.uniform(-0.75, 0.75, 2)
            if np.linalg.norm(p) < 0.75 and all(np.linalg.norm(p - q) > 0.8 / math.sqrt(n_interior + 1)
                                                for q in inner):
                inner.append(p)
        if len(inner) < n_interior:
            continue
        XY = np.vstack([B, np.array(inner).reshape(-1, 2)])
        z = 1.0 + slope * (1.0 - np.sum(XY**2, axis=1)) + rng.uniform(0, 1e-3, len(XY))
        try:
            hat = upper_hull_hat(np.c_[XY, z])
        except (HatError, MeshError):
            continue
        if _min_angle(XY, hat.faces) >= min_angle:
            return hat
    raise GalleryError("could not sample a convex hat")


def excavation_sampler(hat: Hat, k: int, rng, disjoint: bool = True) -> tuple[Hat, tuple]:
    """Apply up to ``k`` random excavations; returns the hat and the edges used.

    With ``disjoint`` each excavation only touches faces no earlier one touched.
    """
    history = []
    touched: set = set()
    for _ in range(k):
        options = []
        for e, (f1, f2) in hat.interior_edges():
            faces = {frozenset(hat.faces[f1]), frozenset(hat.faces[f2])}
            if disjoint and faces & touched:
                continue
            options.append(e)
        rng.shuffle(options)
        for e in options:
            try:
                new, _ = excavate(hat, e)
            except (FlipError, HatError):
                continue
            lower = hat.opposite(e)
            touched |= {frozenset((e[0], e[1], lower[0])), frozenset((e[0], e[1], lower[1])),
                        frozenset((lower[0], lower[1], e[0])), frozenset((lower[0], lower[1], e[1]))}
            hat = new
            history.append(tuple(e))
            break
        else:
            break
    return hat, tuple(history)


def _min_angle(XY, triangles) -> float:
    """Smallest corner angle of the planar triangles."""
    out = math.pi
    for tri in triangles:
        Q = XY[list(tri), :2]
        for k in range(3):
            u, v = Q[(k + 1) % 3] - Q[k], Q[(k + 2) % 3] - Q[k]
            out = min(out, math.atan2(abs(u[0] * v[1] - u[1] * v[0]), u @ v))
    return out


def _min_shadow_angle(P) -> float:
    return _min_angle(P, ((0, 1, 2), (0, 1, 3), (2, 3, 0), (2, 3, 1)))


def random_simplex(rng, min_gap: float = 0.05, min_angle: float = 0.15) -> np.ndarray:
    """Tetrahedron whose shadow is a convex quadrilateral.

    Rows 0, 1 form the upper diagonal and rows 2, 3 the lower one; the
    upper diagonal passes at least ``min_gap`` above the lower one, and no
    angle of the four shadow triangles is below ``min_angle``.
    """
    while True:
        ang = np.sort(rng.uniform(0, 2 * math.pi, 4))
        if np.min(np.diff(np.r_[ang, ang[0] + 2 * math.pi])) < 0.3:
            continue
        r = rng.uniform(0.4, 1.2, 4)
        xy = np.c_[r * np.cos(ang), r * np.sin(ang)] + rng.uniform(-1, 1, 2)
        P = np.c_[xy[[0, 2, 1, 3]], rng.uniform(0.5, 2.5, 4)]
        q = quad_projection_check(P, (0, 1), (2, 3))
        if not q or _min_shadow_angle(P) < min_angle:
            continue
        x = np.array(q.crossing)

        def z_at(a, b):
            s = np.linalg.norm(x - P[a, :2]) / np.linalg.norm(P[b, :2] - P[a, :2])
            return P[a, 2] + s * (P[b, 2] - P[a, 2])

        gap = z_at(0, 1) - z_at(2, 3)
        if abs(gap) < min_gap:
            continue
        return P if gap > 0 else P[[2, 3, 0, 1]]


def excavated_hat(n_boundary: int = 6, n_interior: int = 5, k: int = 2, seed: int = 0,
                  disjoint: bool = True) -> GalleryShape:
    base = random_convex_hat(n_boundary, n_interior, seed)
    rng = np.random.default_rng([seed, 1])
    hat, hist = excavation_sampler(base, k, rng, disjoint)
    params = {"n_boundary": n_boundary, "n_interior": n_interior, "k": k, "achieved": len(hist),
              "disjoint": disjoint}
    return _check(GalleryShape("excavated_hat", params, seed, None, None, ("weakly_convex_hat",), hat, hist, base))


def star_pullback(n_boundary: int = 6, n_interior: int = 5, k: int = 2, seed: int = 0) -> GalleryShape:
    """Weakly convex polyhedron, star-shaped from its last vertex, whose hat
    is an excavated convex hat."""
    eh = excavated_hat(n_boundary, n_interior, k, seed)
    mesh, apex = pullback_polyhedron(eh.hat)
    classes = ("weakly_convex", "star_shaped") + (("not_convex",) if eh.history else ())
    params = dict(eh.params)
    return _check(GalleryShape("star_pullback", params, seed, mesh, apex, classes, eh.hat, eh.history,
                               eh.convex_hat))


# ------------------------------------------------------------- dispatch


def _platonic(name):
    def make(seed=None):
        m = {"tetra": tetra, "octa": octa, "icosa": icosa, "cube": cube}[name]()
        return _check(GalleryShape(name, {}, None, m, 0, ("convex", "weakly_convex", "star_shaped")))

    return make


def _suspension(n=4, radius=1.0, pole=1.0, seed=None):
    m = suspension(int(n), float(radius), float(pole))
    return _check(GalleryShape("suspension", {"n": int(n), "radius": float(radius), "pole": float(pole)},
                               None, m, 0, ("convex", "weakly_convex", "star_shaped")))


def _random_convex(n=12, seed=0):
    m = random_convex(int(n), int(seed))
    return _check(GalleryShape("random_convex", {"n": int(n)}, int(seed), m, 0,
                               ("convex", "weakly_convex", "star_shaped")))


def _flat(seed=None):
    # apex 3 is the vertex off the flattened face
    return _check(GalleryShape("flat_vertex_tetra", {}, None, flat_vertex_tetra(), 3,
                               ("negative_control", "star_shaped")))


def _convex_hat(n_boundary=6, n_interior=5, seed=0):
    hat = random_convex_hat(int(n_boundary), int(n_interior), int(seed))
    return _check(GalleryShape("convex_hat", {"n_boundary": int(n_boundary), "n_interior": int(n_interior)},
                               int(seed), None, None, ("convex_hat",), hat, (), hat))


GENERATORS = {
    "tetra": _platonic("tetra"),
    "octa": _platonic("octa"),
    "icosa": _platonic("icosa"),
    "cube": _platonic("cube"),
    "suspension": _suspension,
    "random_convex": _random_convex,
    "flat_vertex_tetra": _flat,
    "convex_hat": _convex_hat,
    "excavated_hat": lambda n_boundary=6, n_interior=5, k=2, seed=0: excavated_hat(
        int(n_boundary), int(n_interior), int(k), int(seed)),
    "star_pullback": lambda n_boundary=6, n_interior=5, k=2, seed=0: star_pullback(
        int(n_boundary), int(n_interior), int(k), int(seed)),
}


def parse_spec(spec: str) -> tuple[str, dict]:
    """``"name"`` or ``"name:key=value,key=value"``."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise GalleryError(f"bad generator parameter {item!r}")
        params[key.strip()] = value.strip()
    return name.strip(), params


def generate(spec: str, seed: int | None = None) -> GalleryShape:
    name, params = parse_spec(spec)
    if name not in GENERATORS:
        raise GalleryError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    if seed is not None:
        params.setdefault("seed", seed)
    try:
        return GENERATORS[name](**params)
    except TypeError as exc:
        raise GalleryError(f"bad parameters for {name}: {exc}") from exc


def corpus(seed: int = 0) -> list:
    """The weakly convex star-shaped test corpus."""
    shapes = [GENERATORS[n]() for n in ("tetra", "octa", "icosa", "cube")]
    shapes.append(_suspension(5, 1.0, 1.3))
    shapes.append(_suspension(6, 1.2, 0.8))
    shapes += [_random_convex(n, seed + s) for s, n in enumerate((8, 12, 16))]
    shapes += [star_pullback(6, 4, 1, seed + 7), star_pullback(6, 5, 2, seed + 7),
               star_pullback(7, 6, 3, seed + 11)]
    return shapes


__all__ = ["GalleryError", "GalleryShape", "corpus", "generate", "concave_edges", "excavated_hat",
           "random_convex_hat", "random_simplex", "star_pullback"]

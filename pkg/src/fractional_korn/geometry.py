"""Domains, Lipschitz graphs, rigid motions and chart atlases.

All point-wise queries accept either a single point of shape ``(d,)`` or a
batch of shape ``(n, d)`` and answer in kind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma


class GeometryError(ValueError):
    """Invalid geometric input (dimension mismatch, point outside a set, ...)."""


class AtlasError(GeometryError):
    """An atlas failed one of its sampled cover/consistency checks."""


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / gamma(d / 2)


def ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** (d / 2) / gamma(d / 2 + 1) * radius ** d


def sample_sphere(d, n, rng):
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_ball(center, radius, n, rng):
    center = np.asarray(center, dtype=float)
    d = center.shape[0]
    dirs = sample_sphere(d, n, rng)
    rad = radius * rng.random(n) ** (1.0 / d)
    return center + dirs * rad[:, None]


def _points(x, dim):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr)
    if arr2.shape[1] != dim:
        raise GeometryError(f"point dimension {arr2.shape[1]} does not match domain dimension {dim}")
    return arr2, single


def _answer(values, single):
    return values[0] if single else values


# --------------------------------------------------------------------------
# graphs and rigid motions


@dataclass(frozen=True, eq=False)
class LipschitzGraph:
    """A function f: R^{d-1} -> R with a certified Lipschitz constant.

    ``dim`` is the ambient dimension d; ``func`` maps ``(n, d-1)`` arrays
    to ``(n,)`` arrays.
    """

    func: Callable[[np.ndarray], np.ndarray]
    lipschitz_constant: float
    dim: int
    family_tag: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lipschitz_constant < 0:
            raise GeometryError("Lipschitz constant must be nonnegative")
        if self.dim < 2:
            raise GeometryError("ambient dimension must be at least 2")

    def __call__(self, xp):
        arr = np.asarray(xp, dtype=float)
        single = arr.ndim == 1
        arr2 = arr.reshape(-1, self.dim - 1)
        out = np.asarray(self.func(arr2), dtype=float)
        return out[0] if single else out


def zero_graph(dim: int) -> LipschitzGraph:
    return LipschitzGraph(lambda xp: np.zeros(xp.shape[0]), 0.0, dim, {"family": "zero"})


def linear_graph(slope) -> LipschitzGraph:
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    return LipschitzGraph(lambda xp: xp @ slope, float(np.linalg.norm(slope)),
                          slope.shape[0] + 1, {"family": "linear", "slope": slope.tolist()})


def cone_graph(L: float, dim: int = 2) -> LipschitzGraph:
    """f(x') = L |x'|; for dim = 2 this is L |x'_1|."""
    return LipschitzGraph(lambda xp: L * np.linalg.norm(xp, axis=1), float(L), dim,
                          {"family": "cone", "L": float(L)})


def cap_graph(half_width: float) -> LipschitzGraph:
    """Lower arc of the unit circle centred at (0, 1), cut at |x'| = half_width.

    Beyond the cut the graph continues along the tangent lines, so the
    Lipschitz constant is the arc slope at the cut and the epigraph contains
    the whole disc.
    """
    a = float(half_width)
    if not 0 < a < 1:
        raise GeometryError("cap half-width must lie in (0, 1)")
    h = math.sqrt(1 - a * a)
    L = a / h
    fa = 1 - h

    def f(xp):
        t = np.abs(xp[:, 0])
        inner = 1 - np.sqrt(1 - np.minimum(t, a) ** 2)
        return np.where(t <= a, inner, fa + L * (t - a))

    return LipschitzGraph(f, L, 2, {"family": "cap", "half_width": a})


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """x -> rotation @ x + translation with an orthogonal rotation matrix."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or t.shape != (Q.shape[0],):
            raise GeometryError("rotation must be d x d and translation of length d")
        if np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) > 1e-10:
            raise GeometryError("rotation matrix is not orthogonal")
        object.__setattr__(self, "rotation", Q)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self):
        return self.rotation.shape[0]

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def planar(cls, angle, translation=(0.0, 0.0)):
        c, s = math.cos(angle), math.sin(angle)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=float))

    def __call__(self, x):
        return apply_rigid_motion(self, x)

    def inverse(self) -> RigidMotion:
        return invert_rigid_motion(self)

    def tag(self):
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


def apply_rigid_motion(motion: RigidMotion, point):
    pts, single = _points(point, motion.dim)
    return _answer(pts @ motion.rotation.T + motion.translation, single)


def invert_rigid_motion(motion: RigidMotion) -> RigidMotion:
    Qt = motion.rotation.T
    return RigidMotion(Qt, -Qt @ motion.translation)


# --------------------------------------------------------------------------
# domains


class Domain:
    """Open subset of R^d.  Subclasses implement the vectorised queries."""

    dim: int
    kind = "domain"

    @property
    def bounded(self) -> bool:
        return self.bounding_ball() is not None

    def bounding_ball(self) -> Ball | None:
        return None

    def _contains(self, pts):
        raise NotImplementedError

    def _dist(self, pts):
        raise NotImplementedError

    def contains(self, point):
        pts, single = _points(point, self.dim)
        return _answer(self._contains(pts), single)

    def dist_to_complement(self, point):
        """Distance to the complement (a certified lower bound for epigraphs)."""
        pts, single = _points(point, self.dim)
        if not np.all(self._contains(pts)):
            raise GeometryError("dist_to_complement requires points inside the domain")
        return _answer(self._dist(pts), single)

    def tag(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise GeometryError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def volume(self):
        return ball_volume(self.dim, self.radius)

    def bounding_ball(self):
        return self

    def _contains(self, pts):
        return np.sum((pts - self.center) ** 2, axis=1) < self.radius ** 2

    def _dist(self, pts):
        return self.radius - np.linalg.norm(pts - self.center, axis=1)

    def tag(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class HalfSpace(Domain):
    """{x : x_d > 0}."""

    dim: int = 2
    kind = "halfspace"

    def _contains(self, pts):
        return pts[:, -1] > 0

    def _dist(self, pts):
        return pts[:, -1].copy()

    def tag(self):
        return {"kind": "halfspace", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class WholeSpace(Domain):
    dim: int = 2
    kind = "wholespace"

    def _contains(self, pts):
        return np.ones(pts.shape[0], dtype=bool)

    def _dist(self, pts):
        return np.full(pts.shape[0], np.inf)

    def tag(self):
        return {"kind": "wholespace", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class Epigraph(Domain):
    graph: LipschitzGraph
    kind = "epigraph"

    @property
    def dim(self):
        return self.graph.dim

    def _contains(self, pts):
        return pts[:, -1] > self.graph(pts[:, :-1])

    def _dist(self, pts):
        L = self.graph.lipschitz_constant
        return (pts[:, -1] - self.graph(pts[:, :-1])) / math.sqrt(1 + L * L)

    def tag(self):
        return {"kind": "epigraph", "graph": self.graph.family_tag}


@dataclass(frozen=True, eq=False)
class Box(Domain):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise GeometryError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    def bounding_ball(self):
        c = 0.5 * (self.lower + self.upper)
        return Ball(c, 0.5 * float(np.linalg.norm(self.upper - self.lower)))

    def _contains(self, pts):
        return np.all((pts > self.lower) & (pts < self.upper), axis=1)

    def _dist(self, pts):
        return np.minimum((pts - self.lower).min(axis=1), (self.upper - pts).min(axis=1))

    def tag(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Intersection(Domain):
    parts: tuple
    kind = "intersection"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts or len({p.dim for p in parts}) != 1:
            raise GeometryError("intersection needs parts of one common dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def bounding_ball(self):
        balls = [b for b in (p.bounding_ball() for p in self.parts) if b is not None]
        return min(balls, key=lambda b: b.radius) if balls else None

    def _contains(self, pts):
        inside = np.ones(pts.shape[0], dtype=bool)
        for part in self.parts:
            inside &= part._contains(pts)
        return inside

    def _dist(self, pts):
        # complement of an intersection is the union of complements
        return np.min([part._dist(pts) for part in self.parts], axis=0)

    def tag(self):
        return {"kind": "intersection", "parts": [p.tag() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Transformed(Domain):
    """Image of ``base`` under a rigid motion."""

    base: Domain
    motion: RigidMotion
    kind = "transformed"

    @property
    def dim(self):
        return self.base.dim

    def bounding_ball(self):
        b = self.base.bounding_ball()
        return None if b is None else Ball(self.motion(b.center), b.radius)

    def _pre(self, pts):
        inv = self.motion.inverse()
        return pts @ inv.rotation.T + inv.translation

    def _contains(self, pts):
        return self.base._contains(self._pre(pts))

    def _dist(self, pts):
        return self.base._dist(self._pre(pts))

    def tag(self):
        return {"kind": "transformed", "base": self.base.tag(), "motion": self.motion.tag()}


# --------------------------------------------------------------------------
# flattening map


def flatten(graph: LipschitzGraph, point):
    """(x', x_d) -> (x', x_d - f(x')); the point must lie in the epigraph."""
    pts, single = _points(point, graph.dim)
    h = pts[:, -1] - graph(pts[:, :-1])
    if np.any(h <= 0):
        raise GeometryError("point is not in the epigraph")
    out = pts.copy()
    out[:, -1] = h
    return _answer(out, single)


def unflatten(graph: LipschitzGraph, point):
    """(x', x_d) -> (x', x_d + f(x')); the point must lie in the open half-space."""
    pts, single = _points(point, graph.dim)
    if np.any(pts[:, -1] <= 0):
        raise GeometryError("point is not in the open half-space")
    out = pts.copy()
    out[:, -1] = pts[:, -1] + graph(pts[:, :-1])
    return _answer(out, single)


def distortion_ratio(graph: LipschitzGraph, x, y):
    """|Tx - Ty| / |x - y| for the flattening map T."""
    xs, single = _points(x, graph.dim)
    ys, _ = _points(y, graph.dim)
    den = np.linalg.norm(xs - ys, axis=1)
    if np.any(den == 0):
        raise GeometryError("distortion ratio needs x != y")
    num = np.linalg.norm(flatten(graph, xs) - flatten(graph, ys), axis=1)
    return _answer(num / den, single)


def planar_ratio(a, b, dd):
    """Worst-sign planar distortion sqrt(1 + (2 b dd + dd^2) / (a^2 + b^2))."""
    a, b, dd = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, dd)))
    den = a * a + b * b
    if np.any(den == 0):
        raise GeometryError("planar ratio needs (a, b) != (0, 0)")
    out = np.sqrt(1 + (2 * b * dd + dd * dd) / den)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# atlases


@dataclass(frozen=True, eq=False)
class Chart:
    ball: Ball
    motion: RigidMotion
    graph: LipschitzGraph

    @property
    def epigraph(self):
        return Epigraph(self.graph)


@dataclass(frozen=True, eq=False)
class DomainAtlas:
    charts: tuple
    interior_set: Domain
    max_chart_lipschitz: float
    base: Domain | None = None

    @property
    def dim(self):
        return self.interior_set.dim

    @property
    def balls(self):
        return [c.ball for c in self.charts] + [self.interior_set]


@dataclass(frozen=True, eq=False)
class ChartedSet(Domain):
    """The open set described by an atlas: interior set plus chart pieces."""

    atlas: DomainAtlas
    kind = "charted"

    @property
    def dim(self):
        return self.atlas.dim

    def bounding_ball(self):
        balls = [c.ball for c in self.atlas.charts]
        inner = self.atlas.interior_set.bounding_ball()
        if inner is not None:
            balls.append(inner)
        lo = np.min([b.center - b.radius for b in balls], axis=0)
        hi = np.max([b.center + b.radius for b in balls], axis=0)
        return Box(lo, hi).bounding_ball()

    def _contains(self, pts):
        inside = self.atlas.interior_set._contains(pts)
        for chart in self.atlas.charts:
            in_ball = chart.ball._contains(pts)
            if np.any(in_ball):
                local = pts[in_ball] @ chart.motion.rotation.T + chart.motion.translation
                hit = np.zeros_like(in_ball)
                hit[in_ball] = chart.epigraph._contains(local)
                inside |= hit
        return inside

    def _dist(self, pts):
        best = np.zeros(pts.shape[0])
        inner = self.atlas.interior_set
        m = inner._contains(pts)
        best[m] = inner._dist(pts[m])
        for chart in self.atlas.charts:
            in_ball = chart.ball._contains(pts)
            if not np.any(in_ball):
                continue
            sub = pts[in_ball]
            local = sub @ chart.motion.rotation.T + chart.motion.translation
            epi = chart.epigraph
            ok = epi._contains(local)
            cand = np.zeros(sub.shape[0])
            cand[ok] = np.minimum(epi._dist(local[ok]), chart.ball._dist(sub[ok]))
            best[in_ball] = np.maximum(best[in_ball], cand)
        return best

    def tag(self):
        return {"kind": "charted", "charts": len(self.atlas.charts)}


def chart_lipschitz(n_charts: int, overlap: float = 0.2) -> float:
    """Lipschitz constant of a disc chart whose arc spans (1 + overlap) 2 pi / n."""
    return math.tan((1 + overlap) * math.pi / n_charts)


def make_ball_atlas(d: int, n_charts: int, overlap: float = 0.2,
                    n_check: int = 10_000, seed: int = 0) -> DomainAtlas:
    """Chart atlas of the unit disc with ``n_charts`` boundary balls.

    Chart i is centred at the boundary point at angle 2 pi i / n; its ball
    meets the circle in an arc of half-angle (1 + overlap) pi / n, so
    neighbouring charts overlap.  The rigid motion sends the centre to the
    origin and the outward normal to -e_2; the local graph is the circle's
    lower arc (tangent-extended), with Lipschitz constant
    ``chart_lipschitz(n_charts, overlap)``.
    """
    if d != 2:
        raise GeometryError("concrete atlas construction is only available for the unit disc (d = 2)")
    if n_charts < 4:
        raise GeometryError("need at least 4 charts")
    if overlap <= 0:
        raise AtlasError("charts must overlap for the open balls to cover the boundary")
    phi = (1 + overlap) * math.pi / n_charts
    if phi >= math.pi / 2:
        raise AtlasError("overlap too large for this number of charts")
    radius = 2 * math.sin(phi / 2)
    graph = cap_graph(math.sin(phi))
    charts = []
    for i in range(n_charts):
        theta = 2 * math.pi * i / n_charts
        c = np.array([math.cos(theta), math.sin(theta)])
        rot = RigidMotion.planar(-math.pi / 2 - theta)
        motion = RigidMotion(rot.rotation, -rot.rotation @ c)
        charts.append(Chart(Ball(c, radius), motion, graph))
    # the union of chart balls covers the annulus |x| > t_low
    s = math.sin(math.pi / n_charts)
    t_low = math.cos(math.pi / n_charts) - math.sqrt(radius ** 2 - s ** 2)
    interior = Ball(np.zeros(2), t_low + 0.5 * (1 - t_low))
    atlas = DomainAtlas(tuple(charts), interior, graph.lipschitz_constant, Ball(np.zeros(2), 1.0))
    report = check_atlas(atlas, n_check, seed)
    if not report["boundary_cover"]:
        raise AtlasError("sampled boundary point lies in no chart ball")
    if not (report["chart_consistency"] and report["domain_cover"]):
        raise AtlasError(f"atlas invariant failed: {report}")
    return atlas


def check_atlas(atlas: DomainAtlas, n_samples: int = 10_000, seed: int = 0) -> dict:
    """Sampled checks of the chart-atlas conditions on a disc-like base set."""
    base = atlas.base
    if base is None or not isinstance(base, Ball):
        raise GeometryError("sampled atlas checks need a ball as base set")
    rng = np.random.default_rng(seed)
    d = base.dim
    bdry = base.center + base.radius * sample_sphere(d, n_samples, rng)
    inner = sample_ball(base.center, base.radius, n_samples, rng)
    balls = atlas.balls
    covered = np.zeros(n_samples, dtype=bool)
    for b in balls[:-1]:
        covered |= b._contains(bdry)
    consistent = True
    boundary_match = True
    for chart in atlas.charts:
        m = chart.ball._contains(inner)
        local = chart.motion(inner[m])
        consistent &= bool(np.all(chart.epigraph._contains(local)))
        mb = chart.ball._contains(bdry)
        lb = chart.motion(bdry[mb])
        boundary_match &= bool(np.allclose(lb[:, -1], chart.graph(lb[:, :-1]), atol=1e-9))
    in_any = np.zeros(n_samples, dtype=bool)
    for b in balls:
        in_any |= b._contains(inner)
    interior = atlas.interior_set
    ib = interior.bounding_ball()
    relatively_compact = ib is not None and bool(
        np.linalg.norm(ib.center - base.center) + ib.radius < base.radius)
    return {
        "boundary_cover": bool(np.all(covered)),
        "chart_consistency": consistent,
        "boundary_match": boundary_match,
        "domain_cover": bool(np.all(in_any)),
        "interior_relatively_compact": relatively_compact,
        "n_samples": n_samples,
    }

"""Vector fields, cutoffs, partitions of unity and the field transformations
used when localising a field to boundary charts.

Fields are vectorised: ``u(x)`` takes ``(n, d)`` (or ``(d,)``) points and
returns values of the same shape.  Every field carries the metadata the
estimators need for their certified tail bounds: a support ball, a
Lipschitz bound and a sup bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .constants import bilip_constant
from .geometry import (Ball, Domain, DomainAtlas, GeometryError, LipschitzGraph,
                       RigidMotion, sample_ball)


class FieldError(ValueError):
    pass


class SupportError(FieldError):
    """The support of a field is not certified to sit inside a domain."""


def _as_points(x, dim):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr)
    if arr2.shape[1] != dim:
        raise FieldError(f"expected points of dimension {dim}, got {arr2.shape[1]}")
    return arr2, single


@dataclass(frozen=True, eq=False)
class VectorField:
    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    support: Ball | None = None
    lipschitz_bound: float | None = None
    sup_bound: float | None = None
    margin: float | None = None
    tag: dict = field(default_factory=dict)

    def __call__(self, x):
        pts, single = _as_points(x, self.dim)
        out = np.asarray(self.func(pts), dtype=float).reshape(pts.shape[0], self.dim)
        return out[0] if single else out

    @property
    def compact(self):
        return self.support is not None


@dataclass(frozen=True, eq=False)
class CutoffFunction:
    """Scalar function with values in [0, 1] and a Lipschitz bound."""

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    lipschitz_bound: float
    support_ball: Ball | None = None
    sup_bound: float = 1.0
    tag: dict = field(default_factory=dict)

    def __call__(self, x):
        pts, single = _as_points(x, self.dim)
        out = np.asarray(self.func(pts), dtype=float).reshape(pts.shape[0])
        return out[0] if single else out


# --------------------------------------------------------------------------
# field families


def zero_field(dim: int) -> VectorField:
    return VectorField(lambda x: np.zeros_like(x), dim, None, 0.0, 0.0, tag={"kind": "zero"})


def constant_field(v) -> VectorField:
    v = np.asarray(v, dtype=float)
    return VectorField(lambda x: np.broadcast_to(v, x.shape).copy(), v.shape[0], None, 0.0,
                       float(np.linalg.norm(v)), tag={"kind": "constant", "value": v.tolist()})


def affine_field(A, b=None) -> VectorField:
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
    return VectorField(lambda x: x @ A.T + b, A.shape[0], None, float(np.linalg.norm(A, 2)),
                       None, tag={"kind": "affine", "A": A.tolist(), "b": b.tolist()})


def skew_field(A) -> VectorField:
    """u(x) = A x for a skew-symmetric A (an infinitesimal rotation)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.max(np.abs(A + A.T), initial=0.0) > 1e-12:
        raise FieldError("skew_field needs a square matrix with A + A^T = 0")
    u = affine_field(A)
    return replace(u, tag={"kind": "skew", "A": A.tolist()})


def _bump_profile_lipschitz(power: float) -> float:
    # max over t in [0, 1] of |d/dt (1 - t^2)^power|
    if power == 1:
        return 2.0
    t = 1 / math.sqrt(2 * power - 1)
    return 2 * power * t * (1 - t * t) ** (power - 1)


def bump_field(center, radius: float, direction, power: float = 2) -> VectorField:
    """u(x) = (1 - |x - c|^2 / r^2)_+^power * direction.

    With the default ``power = 2`` the field is C^1 and compactly supported
    in the closed ball B(c, r).
    """
    c = np.asarray(center, dtype=float)
    e = np.asarray(direction, dtype=float)
    if radius <= 0:
        raise FieldError("bump radius must be positive")
    if power < 1:
        raise FieldError("bump power must be >= 1 to keep the field Lipschitz")

    def f(x):
        t2 = np.sum((x - c) ** 2, axis=1) / radius ** 2
        prof = np.clip(1 - t2, 0.0, None) ** power
        return prof[:, None] * e

    mag = float(np.linalg.norm(e))
    return VectorField(f, c.shape[0], Ball(c, radius), mag * _bump_profile_lipschitz(power) / radius,
                       mag, tag={"kind": "bump", "center": c.tolist(), "radius": float(radius),
                                 "direction": e.tolist(), "power": power})


def sum_fields(*fields: VectorField) -> VectorField:
    if not fields:
        raise FieldError("sum_fields needs at least one field")
    dim = fields[0].dim
    supports = [u.support for u in fields]
    if any(s is None for s in supports):
        support = None
    else:
        lo = np.min([s.center - s.radius for s in supports], axis=0)
        hi = np.max([s.center + s.radius for s in supports], axis=0)
        support = Ball(0.5 * (lo + hi), 0.5 * float(np.linalg.norm(hi - lo)))
    lips = [u.lipschitz_bound for u in fields]
    sups = [u.sup_bound for u in fields]
    return VectorField(lambda x: sum(u.func(x) for u in fields), dim, support,
                       None if None in lips else float(sum(lips)),
                       None if None in sups else float(sum(sups)),
                       tag={"kind": "sum", "terms": [u.tag for u in fields]})


# --------------------------------------------------------------------------
# cutoffs


def constant_cutoff(dim: int, value: float = 1.0) -> CutoffFunction:
    if not 0 <= value <= 1:
        raise FieldError("cutoff values must lie in [0, 1]")
    return CutoffFunction(lambda x: np.full(x.shape[0], float(value)), dim, 0.0, None, float(value),
                          tag={"kind": "constant", "value": float(value)})


def cosine_cutoff(center, radius: float) -> CutoffFunction:
    """cos^2(pi |x - c| / (2 r)) inside B(c, r), zero outside."""
    c = np.asarray(center, dtype=float)

    def f(x):
        t = np.linalg.norm(x - c, axis=1) / radius
        return np.where(t < 1, np.cos(0.5 * np.pi * np.minimum(t, 1.0)) ** 2, 0.0)

    return CutoffFunction(f, c.shape[0], math.pi / (2 * radius), Ball(c, radius), 1.0,
                          tag={"kind": "cosine", "center": c.tolist(), "radius": float(radius)})


def bump_cutoff(center, radius: float, power: float = 2) -> CutoffFunction:
    c = np.asarray(center, dtype=float)

    def f(x):
        t2 = np.sum((x - c) ** 2, axis=1) / radius ** 2
        return np.clip(1 - t2, 0.0, None) ** power

    return CutoffFunction(f, c.shape[0], _bump_profile_lipschitz(power) / radius, Ball(c, radius), 1.0,
                          tag={"kind": "bump", "center": c.tolist(), "radius": float(radius),
                               "power": power})


def multiply_cutoff(u: VectorField, psi: CutoffFunction) -> VectorField:
    """Pointwise product u * psi."""
    if u.dim != psi.dim:
        raise FieldError("dimension mismatch between field and cutoff")
    supports = [s for s in (u.support, psi.support_ball) if s is not None]
    support = min(supports, key=lambda b: b.radius) if supports else None
    sups = [] if u.sup_bound is None else [u.sup_bound]
    if psi.support_ball is not None and u.lipschitz_bound is not None:
        sups.append(_local_sup(u, psi.support_ball))
    sup_u = min(sups) if sups else None
    lip = None
    if u.lipschitz_bound is not None and (psi.lipschitz_bound == 0 or sup_u is not None):
        lip = u.lipschitz_bound * psi.sup_bound
        if psi.lipschitz_bound:
            lip += sup_u * psi.lipschitz_bound
    sup = None if sup_u is None else sup_u * psi.sup_bound
    return VectorField(lambda x: u.func(x) * psi.func(x)[:, None], u.dim, support, lip, sup,
                       u.margin, tag={"kind": "product", "field": u.tag, "cutoff": psi.tag})


def _local_sup(u: VectorField, ball: Ball) -> float:
    # |u| <= |u(c)| + Lip * r on the ball
    return float(np.linalg.norm(u(ball.center))) + u.lipschitz_bound * ball.radius


def bump_skew_field(center, radius: float, A, power: float = 2) -> VectorField:
    """Bump-modulated infinitesimal rotation about ``center``."""
    c = np.asarray(center, dtype=float)
    A = np.asarray(A, dtype=float)
    rot = skew_field(A)
    centred = VectorField(lambda x: (x - c) @ A.T, c.shape[0], None, rot.lipschitz_bound, None,
                          tag={"kind": "skew", "A": A.tolist(), "center": c.tolist()})
    out = multiply_cutoff(centred, bump_cutoff(c, radius, power))
    return replace(out, tag={"kind": "bump_skew", "center": c.tolist(), "radius": float(radius),
                             "A": A.tolist(), "power": power})


# --------------------------------------------------------------------------
# support certification, extension and transformations


def support_margin(u: VectorField, domain: Domain) -> float:
    """Lower bound on dist(supp u, complement of domain); negative if not certified."""
    if u.sup_bound == 0:
        return math.inf  # u == 0 has empty support
    if u.support is None:
        return -math.inf
    b = u.support
    if not domain.contains(b.center):
        return -math.inf
    return float(domain.dist_to_complement(b.center)) - b.radius


def with_margin(u: VectorField, domain: Domain) -> VectorField:
    return replace(u, margin=support_margin(u, domain))


def zero_extend(u: VectorField, inner: Domain, outer: Domain, delta: float | None = None) -> VectorField:
    """Extend u by zero from ``inner`` to ``outer``.

    The support of u must sit inside ``inner`` with a certified margin
    ``delta > 0`` (computed from the support ball when not given).
    """
    margin = support_margin(u, inner)
    if delta is None:
        delta = margin
    if not delta > 0 or margin < delta * (1 - 1e-12):
        raise SupportError(f"support margin {margin:.4g} does not certify delta = {delta}")
    if inner.dim != outer.dim:
        raise GeometryError("inner and outer domains differ in dimension")

    def f(x):
        vals = u.func(x)
        return np.where(inner._contains(x)[:, None], vals, 0.0)

    return VectorField(f, u.dim, u.support, u.lipschitz_bound, u.sup_bound, delta,
                       tag={"kind": "zero_extension", "field": u.tag, "inner": inner.tag(),
                            "outer": outer.tag()})


def rotate_field(u: VectorField, motion: RigidMotion) -> VectorField:
    """x -> Q u(R^{-1} x): argument and value are both rotated."""
    inv = motion.inverse()
    Q = motion.rotation

    def f(x):
        return u.func(x @ inv.rotation.T + inv.translation) @ Q.T

    support = None if u.support is None else Ball(motion(u.support.center), u.support.radius)
    return VectorField(f, u.dim, support, u.lipschitz_bound, u.sup_bound, u.margin,
                       tag={"kind": "rotated", "field": u.tag, "motion": motion.tag()})


def pull_back(u: VectorField, graph: LipschitzGraph) -> VectorField:
    """v(w) = u(w', w_d + f(w')), a field on the half-space."""
    if u.dim != graph.dim:
        raise FieldError("field and graph dimensions differ")
    K = bilip_constant(graph.lipschitz_constant)

    def f(w):
        x = w.copy()
        x[:, -1] = w[:, -1] + graph(w[:, :-1])
        return u.func(x)

    support = None
    if u.support is not None:
        c = u.support.center.copy()
        c[-1] -= graph(c[:-1])
        support = Ball(c, u.support.radius * K)
    lip = None if u.lipschitz_bound is None else u.lipschitz_bound * K
    return VectorField(f, u.dim, support, lip, u.sup_bound, None,
                       tag={"kind": "pull_back", "field": u.tag, "graph": graph.family_tag})


# --------------------------------------------------------------------------
# partition of unity


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    members: tuple
    domain: Domain | None = None
    min_overlap_sum: float = 1.0

    def __len__(self):
        return len(self.members)

    def total(self, x):
        return sum(m(x) for m in self.members)


def partition_of_unity(atlas: DomainAtlas, n_check: int = 10_000, seed: int = 0) -> PartitionOfUnity:
    """Normalised squared-cosine bumps on the chart balls and the interior set.

    psi_i = eta_i / sum_j eta_j.  The Lipschitz bound of each psi_i uses the
    smallest value of sum_j eta_j found on a dense sample of the base set
    (grid plus random points), so it is a numerical, not symbolic, bound.
    """
    balls = atlas.balls
    etas = []
    for b in balls:
        bb = b.bounding_ball() if not isinstance(b, Ball) else b
        if bb is None:
            raise FieldError("partition members need bounded cover sets")
        etas.append(cosine_cutoff(bb.center, bb.radius))
    base = atlas.base
    dim = atlas.dim
    if base is None:
        raise FieldError("partition_of_unity needs an atlas with a base set")
    bb = base.bounding_ball()
    rng = np.random.default_rng(seed)
    pts = sample_ball(bb.center, bb.radius, n_check, rng)
    if dim == 2:
        g = np.linspace(-1, 1, 201)
        grid = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2) * bb.radius + bb.center
        pts = np.vstack([pts, grid, bb.center + bb.radius * (1 - 1e-9) * _circle(2000)])
    pts = pts[np.linalg.norm(pts - bb.center, axis=1) <= bb.radius]
    total = sum(e(pts) for e in etas)
    s_min = float(total.min())
    if s_min <= 0:
        raise FieldError("partition has a cover gap: sum of bumps vanishes at a sampled point")
    lip_sum = sum(e.lipschitz_bound for e in etas)

    def member(i):
        eta = etas[i]

        def f(x):
            vals = np.array([e.func(x) for e in etas])
            tot = vals.sum(axis=0)
            out = np.zeros(x.shape[0])
            nz = tot > 0
            out[nz] = vals[i, nz] / tot[nz]
            return out

        return CutoffFunction(f, dim, (eta.lipschitz_bound + lip_sum) / s_min, eta.support_ball, 1.0,
                              tag={"kind": "pou_member", "index": i})

    return PartitionOfUnity(tuple(member(i) for i in range(len(etas))), base, s_min)


def _circle(n):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.stack([np.cos(t), np.sin(t)], -1)


def localize(u: VectorField, pou: PartitionOfUnity) -> list:
    """(u psi_1, ..., u psi_{n+1}); the pieces sum back to u on the domain."""
    return [multiply_cutoff(u, psi) for psi in pou.members]

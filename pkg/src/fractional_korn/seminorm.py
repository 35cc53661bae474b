"""Monte Carlo estimators for the singular double integrals.

Conventions: every functional is returned as its p-th power (e.g. the
Gagliardo estimate is of |u|_W^p, not |u|_W).

The workhorse is a stratified estimator over dyadic shells around the first
point of the pair: with y = x + r theta and r in [2^{-j-1} R, 2^{-j} R],
the kernel |x - y|^{-d-sp} varies by a bounded factor inside each shell, so
each stratum has bounded variance even though the integrand is singular on
the diagonal.  The part below the innermost shell is not sampled; it is
bounded via the field's Lipschitz constant and reported as ``tail_bound``.

For a field supported in a ball S, only pairs with at least one point in S
contribute, and by symmetry

    int_D int_D F = int_{x in S} int_{y in D} F(x, y) (2 - 1_S(y)) dy dx,

so x is always drawn from S (or from a ball around a bounded D).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels
from .constants import check_sp
from .fields import VectorField
from .geometry import Ball, Domain, WholeSpace, ball_volume, sample_ball, sample_sphere, sphere_area


class EstimatorError(ValueError):
    pass


class KernelKind(str, Enum):
    FULL = "full"
    PROJECTED = "projected"


METHODS = ("stratified-shell", "uniform-pair", "oracle-grid")

# stream namespaces, part of the RNG key
_FID = {"lp": 1, "pair": 2, "hardy": 4, "tail": 5, "cross": 6, "custom": 7, "uniform": 8}
_LEVEL_OFFSET = 1000
_CHUNK = 1 << 18


@dataclass(frozen=True)
class EstimatorConfig:
    sample_count: int = 200_000
    shell_count: int | None = None
    min_shell_radius: float = 1e-4
    rng_seed: int = 0
    method: str = "stratified-shell"
    target_rel_error: float | None = 0.01
    max_samples: int = 100_000_000
    abs_tol: float = 1e-12
    far_tail_fraction: float = 1e-3
    pilot_fraction: float = 0.05
    oracle_resolution: float = 1 / 128

    def __post_init__(self):
        if self.sample_count <= 0:
            raise EstimatorError("sample_count must be positive")
        if self.method not in METHODS:
            raise EstimatorError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.shell_count is not None and self.shell_count < 1:
            raise EstimatorError("shell_count must be positive")
        if self.min_shell_radius <= 0:
            raise EstimatorError("min_shell_radius must be positive")

    def shell_radii(self, r_top: float) -> np.ndarray:
        """Dyadically nested shell radii r_top, r_top/2, ..., r_min."""
        if self.shell_count is not None:
            k = self.shell_count
        else:
            k = max(1, math.ceil(math.log2(r_top / self.min_shell_radius)))
        return r_top * 2.0 ** -np.arange(k + 1)


@dataclass(frozen=True)
class SeminormEstimate:
    value: float
    std_error: float
    method: str
    seed: int
    tail_bound: float = 0.0
    samples: int = 0
    functional: str = ""
    extras: dict = field(default_factory=dict)

    def to_record(self, **context) -> dict:
        rec = dict(context)
        rec.update(asdict(self))
        return rec

    @property
    def rel_error(self):
        return self.std_error / self.value if self.value > 0 else math.inf


@dataclass(frozen=True)
class TailIntegral:
    estimate: float
    std_error: float
    analytic_bound: float


def _stream(seed, fid, rnd, level):
    ss = np.random.SeedSequence(seed, spawn_key=(fid, rnd, level + _LEVEL_OFFSET))
    return np.random.Generator(np.random.Philox(ss))


class _Acc:
    """Running mean / M2 for a batch of output columns (Chan's merge)."""

    def __init__(self, m):
        self.n = 0
        self.mean = np.zeros(m)
        self.m2 = np.zeros(m)

    def add(self, vals):
        nb = vals.shape[0]
        if nb == 0:
            return
        mb = vals.mean(axis=0)
        m2b = ((vals - mb) ** 2).sum(axis=0)
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * nb / n
        self.m2 = self.m2 + m2b + delta ** 2 * self.n * nb / n
        self.n = n

    @property
    def var_of_mean(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self.m2 / (self.n - 1) / self.n

    @property
    def std(self):
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.n - 1))


def _validate(u: VectorField, D: Domain, s, p):
    check_sp(s, p)
    if u.dim != D.dim:
        raise EstimatorError("field and domain dimensions differ")


def sampling_ball(u: VectorField, D: Domain) -> Ball:
    """Smallest available ball containing supp(u) intersected with D."""
    cands = [b for b in (u.support, D.bounding_ball()) if b is not None]
    if not cands:
        raise EstimatorError("unbounded domain with a field that is not compactly supported")
    return min(cands, key=lambda b: b.radius)


def _rel_ok(acc_value, acc_std, cfg, cols):
    for c in cols:
        v, e = acc_value[c], acc_std[c]
        if e <= cfg.abs_tol:
            continue
        if cfg.target_rel_error is None:
            continue
        if v <= 0 or e / v > cfg.target_rel_error:
            return False
    return True


# --------------------------------------------------------------------------
# stratified shell estimator


def _shell_level(integrand, D, region, n_out, a, b, n, rng):
    d = D.dim
    acc = _Acc(n_out)
    shell_vol = ball_volume(d, b) - ball_volume(d, a)
    scale = region.volume * shell_vol
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        x = sample_ball(region.center, region.radius, m, rng)
        theta = sample_sphere(d, m, rng)
        r = (a ** d + rng.random(m) * (b ** d - a ** d)) ** (1.0 / d)
        y = x + r[:, None] * theta
        w = D._contains(x) & D._contains(y)
        weight = np.where(w, scale * (2.0 - region._contains(y)), 0.0)
        vals = np.zeros((m, n_out))
        idx = np.flatnonzero(weight)
        if idx.size:
            vals[idx] = integrand(x[idx], y[idx], r[idx], theta[idx]) * weight[idx, None]
        acc.add(vals)
        done += m
    return acc


def shell_integral(integrand, D: Domain, region: Ball, *, s, p, cfg: EstimatorConfig,
                   lipschitz: float | None, sup: float | None, n_out: int = 1,
                   stop_cols=(0,), name: str = "pair", fid: int | None = None) -> list:
    """Stratified-shell estimate of int_D int_D F(x, y) for F vanishing off supp x supp.

    ``integrand(x, y, r, theta)`` returns an ``(n, n_out)`` array of kernel
    values (column 0 drives the sample allocation).  ``lipschitz`` bounds
    each column by lipschitz^p r^{p - d - sp} near the diagonal; ``sup``
    bounds it by sup^p r^{-d-sp} once y has left the support (only needed
    for unbounded D).
    """
    d = D.dim
    sp = s * p
    fid = _FID["pair"] if fid is None else fid
    if lipschitz is None:
        raise EstimatorError("the shell estimator needs a Lipschitz bound for its near-diagonal certificate")
    bounded = D.bounded
    if bounded:
        r_top = 2 * D.bounding_ball().radius
    else:
        r_top = 2 * region.radius
    radii = cfg.shell_radii(r_top)
    r_min = radii[-1]
    levels = list(range(len(radii) - 1))
    seed = cfg.rng_seed

    def bounds(j):
        return r_top * 2.0 ** (-j - 1), r_top * 2.0 ** (-j)

    n_pilot = max(64, int(cfg.pilot_fraction * cfg.sample_count / max(len(levels), 1)))
    pilot = {j: _shell_level(integrand, D, region, n_out, *bounds(j), n_pilot, _stream(seed, fid, 0, j))
             for j in levels}

    far_tail = 0.0
    if not bounded:
        if sup is None:
            raise EstimatorError("unbounded domain needs a sup bound for the far-field certificate")
        far_coef = 2 * sup ** p * region.volume * sphere_area(d) / sp
        running = sum(pilot[j].mean[0] for j in levels)
        far_levels = 0
        if running > 0 and far_coef > 0:
            while (far_coef * (r_top * 2.0 ** far_levels) ** -sp > cfg.far_tail_fraction * running
                   and far_levels < 60):
                far_levels += 1
                j = -far_levels
                pilot[j] = _shell_level(integrand, D, region, n_out, *bounds(j), n_pilot,
                                        _stream(seed, fid, 0, j))
                running += pilot[j].mean[0]
        levels = list(range(-far_levels, 0)) + levels
        far_tail = far_coef * (r_top * 2.0 ** far_levels) ** -sp

    near_tail = 0.0
    if lipschitz > 0:
        near_tail = (lipschitz ** p * sphere_area(d) * ball_volume(d, region.radius + r_min)
                     * r_min ** (p - sp) / (p - sp))

    # Neyman allocation from the pilot spread of column 0
    spread = np.array([pilot[j].std[0] for j in levels])
    if spread.sum() > 0:
        frac = spread / spread.sum()
    else:
        frac = np.full(len(levels), 1.0 / len(levels))
    min_per = 32

    accs = {j: _Acc(n_out) for j in levels}
    total = 0
    budget = cfg.sample_count
    rnd = 1
    while True:
        for j, f in zip(levels, frac):
            n = max(min_per, int(round(f * budget)))
            accs[j] = _merge(accs[j], _shell_level(integrand, D, region, n_out, *bounds(j), n,
                                                   _stream(seed, fid, rnd, j)))
            total += n
        value = sum(accs[j].mean for j in levels)
        std = np.sqrt(sum(accs[j].var_of_mean for j in levels))
        if _rel_ok(value, std, cfg, stop_cols) or 2 * total > cfg.max_samples:
            break
        budget = total
        rnd += 1

    method = "stratified-shell"
    out = []
    for c in range(n_out):
        out.append(SeminormEstimate(
            value=float(max(value[c], 0.0)), std_error=float(std[c]), method=method, seed=seed,
            tail_bound=float(near_tail + far_tail), samples=int(total), functional=name,
            extras={"shells": len(levels), "r_min": float(r_min), "near_tail": float(near_tail),
                    "far_tail": float(far_tail), "rounds": rnd}))
    return out


def _merge(a: _Acc, b: _Acc) -> _Acc:
    if a.n == 0:
        return b
    out = _Acc(a.mean.shape[0])
    n = a.n + b.n
    delta = b.mean - a.mean
    out.n = n
    out.mean = a.mean + delta * b.n / n
    out.m2 = a.m2 + b.m2 + delta ** 2 * a.n * b.n / n
    return out


# --------------------------------------------------------------------------
# difference-quotient functionals


def _pair_integrand(u: VectorField, d, s, p):
    exponent = d + s * p

    def integrand(x, y, r, theta):
        du = np.ascontiguousarray(u.func(x) - u.func(y))
        th = np.ascontiguousarray(theta)
        rr = np.ascontiguousarray(r)
        return kernels.pair_columns(du, th, rr, float(p), float(exponent))

    return integrand


def _uniform_pair(integrand, D, region, n_out, cfg, stop_cols, name):
    if not D.bounded:
        raise EstimatorError("uniform-pair sampling needs a bounded domain")
    dball = D.bounding_ball()
    scale = region.volume * dball.volume
    acc = _Acc(n_out)
    budget = cfg.sample_count
    rnd = 0
    total = 0
    while True:
        rng = _stream(cfg.rng_seed, _FID["uniform"], rnd, 0)
        done = 0
        while done < budget:
            m = min(_CHUNK, budget - done)
            x = sample_ball(region.center, region.radius, m, rng)
            y = sample_ball(dball.center, dball.radius, m, rng)
            diff = y - x
            r = np.linalg.norm(diff, axis=1)
            weight = np.where(D._contains(x) & D._contains(y) & (r > 0),
                              scale * (2.0 - region._contains(y)), 0.0)
            vals = np.zeros((m, n_out))
            idx = np.flatnonzero(weight)
            if idx.size:
                vals[idx] = integrand(x[idx], y[idx], r[idx], diff[idx] / r[idx, None]) * weight[idx, None]
            acc.add(vals)
            done += m
        total += budget
        if _rel_ok(acc.mean, np.sqrt(acc.var_of_mean), cfg, stop_cols) or 2 * total > cfg.max_samples:
            break
        budget = total
        rnd += 1
    std = np.sqrt(acc.var_of_mean)
    return [SeminormEstimate(float(max(acc.mean[c], 0.0)), float(std[c]), "uniform-pair", cfg.rng_seed,
                             0.0, int(total), name) for c in range(n_out)]


def seminorm_pair(u: VectorField, D: Domain, s: float, p: float, cfg: EstimatorConfig = EstimatorConfig(),
                  stop_cols=(0, 1)) -> tuple:
    """Gagliardo and projected functionals from one shared sample set."""
    _validate(u, D, s, p)
    if cfg.method == "oracle-grid":
        from .oracle import oracle_seminorm
        h = cfg.oracle_resolution
        return tuple(SeminormEstimate(oracle_seminorm(u, D, s, p, k, h), 0.0, "oracle-grid", cfg.rng_seed,
                                      0.0, 0, f"{k.value}") for k in (KernelKind.FULL, KernelKind.PROJECTED))
    region = sampling_ball(u, D)
    integrand = _pair_integrand(u, D.dim, s, p)
    if cfg.method == "uniform-pair":
        full, proj = _uniform_pair(integrand, D, region, 2, cfg, stop_cols, "pair")
    else:
        full, proj = shell_integral(integrand, D, region, s=s, p=p, cfg=cfg, lipschitz=u.lipschitz_bound,
                                    sup=u.sup_bound, n_out=2, stop_cols=stop_cols)
    return replace(full, functional="gagliardo"), replace(proj, functional="projected")


def gagliardo_seminorm(u: VectorField, D: Domain, s: float, p: float,
                       cfg: EstimatorConfig = EstimatorConfig()) -> SeminormEstimate:
    """Estimate of int_D int_D |u(x) - u(y)|^p / |x - y|^{d+sp} dx dy."""
    return seminorm_pair(u, D, s, p, cfg, stop_cols=(0,))[0]


def projected_seminorm(u: VectorField, D: Domain, s: float, p: float,
                       cfg: EstimatorConfig = EstimatorConfig()) -> SeminormEstimate:
    """Same as the Gagliardo functional with the increment projected on (x - y)/|x - y|."""
    return seminorm_pair(u, D, s, p, cfg, stop_cols=(1,))[1]


# --------------------------------------------------------------------------
# single integrals


def _plain_mc(sample_fn, n_out, cfg, fid, name, stop_cols=(0,)):
    acc = _Acc(n_out)
    budget = cfg.sample_count
    rnd = 0
    total = 0
    while True:
        rng = _stream(cfg.rng_seed, fid, rnd, 0)
        done = 0
        while done < budget:
            m = min(_CHUNK, budget - done)
            acc.add(sample_fn(m, rng))
            done += m
        total += budget
        std = np.sqrt(acc.var_of_mean)
        if _rel_ok(acc.mean, std, cfg, stop_cols) or 2 * total > cfg.max_samples:
            break
        budget = total
        rnd += 1
    std = np.sqrt(acc.var_of_mean)
    return [SeminormEstimate(float(acc.mean[c]), float(std[c]), "uniform-mc", cfg.rng_seed, 0.0,
                             int(total), name) for c in range(n_out)]


def lp_norm(u: VectorField, D: Domain, p: float, cfg: EstimatorConfig = EstimatorConfig()) -> SeminormEstimate:
    """Estimate of int_D |u|^p dx."""
    if not p > 1:
        raise EstimatorError("p must exceed 1")
    if u.dim != D.dim:
        raise EstimatorError("field and domain dimensions differ")
    region = sampling_ball(u, D)
    vol = region.volume

    def sample(m, rng):
        x = sample_ball(region.center, region.radius, m, rng)
        inside = D._contains(x)
        vals = np.zeros(m)
        if inside.any():
            vals[inside] = vol * np.linalg.norm(u.func(x[inside]), axis=1) ** p
        return vals[:, None]

    return _plain_mc(sample, 1, cfg, _FID["lp"], "lp")[0]


def _support_in_closure(u: VectorField, D: Domain) -> bool:
    if u.support is None:
        return False
    c = u.support.center
    if not D.contains(c):
        return False
    return float(D.dist_to_complement(c)) >= u.support.radius * (1 - 1e-12)


def hardy_functional(u: VectorField, D: Domain, s: float, p: float,
                     cfg: EstimatorConfig = EstimatorConfig()) -> SeminormEstimate:
    """Estimate of int_D |u(x)|^p / d(x, D^c)^{sp} dx.

    The support ball of u must lie in the closure of D; otherwise the
    weight blows up where u does not vanish.
    """
    _validate(u, D, s, p)
    if not _support_in_closure(u, D):
        raise EstimatorError("field support touches or crosses the boundary of the domain")
    region = u.support
    vol = region.volume
    sp = s * p

    def sample(m, rng):
        x = sample_ball(region.center, region.radius, m, rng)
        inside = D._contains(x)
        vals = np.zeros(m)
        if inside.any():
            xi = x[inside]
            dist = D._dist(xi)
            mag = np.linalg.norm(u.func(xi), axis=1) ** p
            vals[inside] = vol * np.where(mag > 0, mag / np.maximum(dist, 1e-300) ** sp, 0.0)
        return vals[:, None]

    return _plain_mc(sample, 1, cfg, _FID["hardy"], "hardy")[0]


def tail_integral(x, D: Domain, s: float, p: float, cfg: EstimatorConfig = EstimatorConfig()) -> TailIntegral:
    """int_{D^c} |x - y|^{-d-sp} dy, with the polar bound sigma d(x, D^c)^{-sp} / (sp).

    y is drawn with radial density proportional to r^{-sp-1} beyond the
    distance to the complement, so the estimator is bound * P(y not in D).
    """
    sp = s * p
    if sp <= 0:
        raise EstimatorError("s * p must be positive")
    check_sp(s, p)
    if isinstance(D, WholeSpace):
        raise EstimatorError("the complement of the whole space is empty")
    x = np.asarray(x, dtype=float)
    rho = float(D.dist_to_complement(x))
    d = D.dim
    bound = sphere_area(d) * rho ** -sp / sp

    def sample(m, rng):
        theta = sample_sphere(d, m, rng)
        r = rho * (1.0 - rng.random(m)) ** (-1.0 / sp)
        y = x + r[:, None] * theta
        return (bound * (~D._contains(y)))[:, None]

    est = _plain_mc(sample, 1, replace(cfg, target_rel_error=None), _FID["tail"], "tail")[0]
    return TailIntegral(est.value, est.std_error, bound)


def cross_term(u: VectorField, D: Domain, ambient: Domain, s: float, p: float,
               cfg: EstimatorConfig = EstimatorConfig(), kernel: KernelKind = KernelKind.PROJECTED) -> SeminormEstimate:
    """2 int_D int_{ambient minus D} |u(x) . e|^p / |x - y|^{d+sp} dy dx, e = (x - y)/|x - y|.

    Only valid for u supported in D.  ``extras['majorant']`` carries the
    same-sample estimate of 2 sigma/(sp) int_D |u|^p d(x, D^c)^{-sp} dx,
    which dominates the cross term sample by sample.
    """
    _validate(u, D, s, p)
    if u.dim != ambient.dim:
        raise EstimatorError("ambient dimension differs")
    region = sampling_ball(u, D)
    vol = region.volume
    sp = s * p
    d = D.dim
    c = 2 * sphere_area(d) / sp
    projected = KernelKind(kernel) is KernelKind.PROJECTED

    def sample(m, rng):
        x = sample_ball(region.center, region.radius, m, rng)
        theta = sample_sphere(d, m, rng)
        q = 1.0 - rng.random(m)
        inside = D._contains(x)
        out = np.zeros((m, 2))
        if not inside.any():
            return out
        xi, th = x[inside], theta[inside]
        rho = D._dist(xi)
        r = rho * q[inside] ** (-1.0 / sp)
        y = xi + r[:, None] * th
        hit = ambient._contains(y) & ~D._contains(y)
        ux = u.func(xi)
        mag = np.linalg.norm(ux, axis=1)
        a = np.abs(np.einsum("ij,ij->i", ux, th)) if projected else mag
        w = vol * c * np.where(mag > 0, np.maximum(rho, 1e-300) ** -sp, 0.0)
        out[inside, 0] = w * a ** p * hit
        out[inside, 1] = w * mag ** p
        return out

    est, maj = _plain_mc(sample, 2, cfg, _FID["cross"], "cross")
    return replace(est, method="pareto-mc", extras={"majorant": maj.value, "majorant_std": maj.std_error})

"""Verification suites: each one measures both sides of an inequality from the
Korn argument and records a statistical verdict.

Assertion policy: a one-sided inequality lhs <= rhs passes iff
lhs - rhs <= 3 sqrt(err_lhs^2 + err_rhs^2); an identity passes iff
|lhs - rhs| is within the same band.  Diagnostic checks (hard=False) are
reported but never fail a suite.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .constants import (ConstantLedger, SpOneError, bilip_constant, chain_constants, check_sp,
                        lemma0ext_constant, polar_tail_constant)
from .fields import (CutoffFunction, PartitionOfUnity, VectorField, localize, multiply_cutoff,
                     partition_of_unity, pull_back, rotate_field, zero_extend)
from .geometry import (Ball, ChartedSet, Domain, DomainAtlas, Epigraph, HalfSpace, Intersection,
                       LipschitzGraph, Transformed, WholeSpace, ball_volume, distortion_ratio,
                       planar_ratio, sample_ball, sample_sphere, sphere_area)
from .seminorm import (EstimatorConfig, EstimatorError, SeminormEstimate, cross_term, hardy_functional,
                       lp_norm, sampling_ball, seminorm_pair, shell_integral)

SIGMAS = 3.0


@dataclass
class Check:
    name: str
    relation: str
    lhs: float
    lhs_err: float
    rhs: float
    rhs_err: float
    passed: bool
    hard: bool = True
    note: str = ""


def check_le(name, lhs, lhs_err, rhs, rhs_err, hard=True, note=""):
    band = SIGMAS * math.hypot(lhs_err, rhs_err)
    return Check(name, "<=", float(lhs), float(lhs_err), float(rhs), float(rhs_err),
                 bool(lhs - rhs <= band), hard, note)


def check_eq(name, lhs, lhs_err, rhs, rhs_err, hard=True, note=""):
    band = SIGMAS * math.hypot(lhs_err, rhs_err)
    return Check(name, "==", float(lhs), float(lhs_err), float(rhs), float(rhs_err),
                 bool(abs(lhs - rhs) <= band), hard, note)


@dataclass
class SuiteReport:
    suite: str
    parameters: dict
    measurements: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    seed: int = 0

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.hard)

    def measure(self, name, value, std_error=0.0):
        self.measurements[name] = {"value": float(value), "std_error": float(std_error)}

    def measure_estimate(self, name, est: SeminormEstimate):
        self.measurements[name] = {"value": est.value, "std_error": est.std_error,
                                   "tail_bound": est.tail_bound, "samples": est.samples}

    def value(self, name):
        return self.measurements[name]["value"]

    def to_dict(self):
        return {"suite": self.suite, "parameters": self.parameters, "seed": self.seed,
                "passed": self.passed, "measurements": self.measurements,
                "checks": [asdict(c) for c in self.checks]}

    @classmethod
    def from_dict(cls, data):
        rep = cls(data["suite"], data["parameters"], data["measurements"], seed=data["seed"])
        rep.checks = [Check(**c) for c in data["checks"]]
        return rep


def _ratio(num, num_err, den, den_err):
    if den <= 0:
        return math.nan, math.nan
    r = num / den
    rel = math.hypot(num_err / num if num else 0.0, den_err / den)
    return r, abs(r) * rel


def _root(est_value, est_err, p):
    """Delta-method value and error of V^{1/p}."""
    if est_value <= 0:
        return 0.0, est_err ** (1 / p)
    v = est_value ** (1 / p)
    return v, v * est_err / (p * est_value)


# --------------------------------------------------------------------------
# suites


def verify_monotone_embedding(u: VectorField, D: Domain, s, p, cfg=EstimatorConfig()) -> SuiteReport:
    rep = SuiteReport("monotone_embedding", {"s": s, "p": p, "field": u.tag, "domain": D.tag()},
                      seed=cfg.rng_seed)
    full, proj = seminorm_pair(u, D, s, p, cfg)
    rep.measure_estimate("gagliardo", full)
    rep.measure_estimate("projected", proj)
    rep.checks.append(check_le("projected <= gagliardo", proj.value, proj.std_error, full.value, full.std_error))
    if proj.value > SIGMAS * proj.std_error and proj.value > cfg.abs_tol:
        rep.measure("full_over_projected", *_ratio(full.value, full.std_error, proj.value, proj.std_error))
    return rep


def _epigraph_pairs(graph: LipschitzGraph, n, rng, span=2.0):
    d = graph.dim
    half = n // 2
    xp = rng.uniform(-span, span, (n, d - 1))
    x = np.column_stack([xp, graph(xp) + rng.uniform(1e-3, span, n)])
    yp = rng.uniform(-span, span, (half, d - 1))
    y_far = np.column_stack([yp, graph(yp) + rng.uniform(1e-3, span, half)])
    # close pairs probe the infinitesimal distortion
    step = 10.0 ** rng.uniform(-4, 0, n - half)
    y_near = x[half:] + step[:, None] * sample_sphere(d, n - half, rng)
    y = np.vstack([y_far, y_near])
    ok = (y[:, -1] > graph(y[:, :-1])) & (np.linalg.norm(x - y, axis=1) > 0)
    return x[ok], y[ok]


def verify_bilip(graph: LipschitzGraph, n_pairs: int = 100_000, seed: int = 0) -> SuiteReport:
    """Distortion of the flattening map on sampled epigraph pairs."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    L = graph.lipschitz_constant
    C = bilip_constant(L)
    rep = SuiteReport("bilip", {"graph": graph.family_tag, "L": L, "n_pairs": n_pairs}, seed=seed)
    rng = np.random.default_rng(seed)
    x, y = _epigraph_pairs(graph, n_pairs, rng)
    ratio = distortion_ratio(graph, x, y)
    lo, hi = float(ratio.min()), float(ratio.max())
    tol = 1e-12
    violations = int(np.sum((ratio > C * (1 + tol)) | (ratio < (1 - tol) / C)))
    rep.measure("C_L", C)
    rep.measure("min_ratio", lo)
    rep.measure("max_ratio", hi)
    rep.measure("pairs", ratio.size)
    rep.measure("violations", violations)
    rep.checks.append(Check("all ratios in [1/C(L), C(L)]", "==", violations, 0.0, 0.0, 0.0, violations == 0))
    a = np.linalg.norm(x[:, :-1] - y[:, :-1], axis=1)
    b = np.abs(x[:, -1] - y[:, -1])
    dd = np.abs(graph(x[:, :-1]) - graph(y[:, :-1]))
    planar = planar_ratio(a, b, dd)
    sup_planar = float(planar.max())
    rep.measure("max_planar_ratio", sup_planar)
    rep.checks.append(Check("planar ratio <= C(L)", "<=", sup_planar, 0.0, C, 0.0, sup_planar <= C * (1 + tol)))
    if graph.family_tag.get("family") == "cone" and L > 0:
        target = 1 + (C - 1) / 2
        rep.checks.append(Check("planar ratio bound is not vacuous", ">=", sup_planar, 0.0, target, 0.0,
                                sup_planar > target))
    return rep


def verify_change_of_variables(graph: LipschitzGraph, g: CutoffFunction, cfg=EstimatorConfig()) -> SuiteReport:
    """Both sides of the volume comparison for g >= 0 supported in the half-space."""
    d = graph.dim
    K = bilip_constant(graph.lipschitz_constant)
    ball = g.support_ball
    if ball is None or ball.center[-1] - ball.radius < 0:
        raise ValueError("g must be supported in a ball inside the half-space")
    rep = SuiteReport("change_of_variables", {"graph": graph.family_tag, "L": graph.lipschitz_constant,
                                              "function": g.tag}, seed=cfg.rng_seed)
    rng_v = np.random.default_rng([cfg.rng_seed, 11])
    rng_u = np.random.default_rng([cfg.rng_seed, 12])
    n = cfg.sample_count
    xv = sample_ball(ball.center, ball.radius, n, rng_v)
    vals_v = ball.volume * g(xv) * (xv[:, -1] > 0)
    iv, ev = vals_v.mean(), vals_v.std(ddof=1) / math.sqrt(n)
    # T^{-1}(supp g) lies in the ball around T^{-1}(centre) of radius K r
    c = ball.center.copy()
    c[-1] += graph(c[:-1])
    pre = Ball(c, K * ball.radius)
    xu = sample_ball(pre.center, pre.radius, n, rng_u)
    inside = xu[:, -1] > graph(xu[:, :-1])
    tx = xu.copy()
    tx[:, -1] -= graph(xu[:, :-1])
    vals_u = pre.volume * g(tx) * inside
    iu, eu = vals_u.mean(), vals_u.std(ddof=1) / math.sqrt(n)
    rep.measure("integral_V", iv, ev)
    rep.measure("integral_U_of_g_T", iu, eu)
    rep.measure("ratio", *_ratio(iu, eu, iv, ev))
    rep.measure("K", K)
    rep.checks.append(check_le("K^-d int_V g <= int_U g(T)", K ** -d * iv, K ** -d * ev, iu, eu))
    rep.checks.append(check_le("int_U g(T) <= K^d int_V g", iu, eu, K ** d * iv, K ** d * ev))
    return rep


def geometric_tail_bound(D: Domain, s, p) -> float:
    """Upper bound on sup_x int_D |x - y|^{p - sp - d} dy for bounded D."""
    d = D.dim
    alpha = p - s * p - d
    ball = D.bounding_ball()
    if ball is None:
        raise ValueError("geometric tail bound needs a bounded domain")
    if alpha < 0:
        # rearrangement: the integral is largest for a centred ball of equal volume
        return sphere_area(d) * ball.radius ** (alpha + d) / (alpha + d)
    return sphere_area(d) * (2 * ball.radius) ** (alpha + d) / (alpha + d)


def verify_cutoff_bound(u: VectorField, psi: CutoffFunction, D: Domain, s, p, cfg=EstimatorConfig()) -> SuiteReport:
    """|u psi|_X^p against its two-term majorant."""
    rep = SuiteReport("cutoff_bound", {"s": s, "p": p, "field": u.tag, "cutoff": psi.tag, "domain": D.tag()},
                      seed=cfg.rng_seed)
    up = multiply_cutoff(u, psi)
    _, x_up = seminorm_pair(up, D, s, p, cfg)
    _, x_u = seminorm_pair(u, D, s, p, cfg)
    lp = lp_norm(u, D, p, cfg)
    t_geom = geometric_tail_bound(D, s, p)
    c = 2 ** (p - 1)
    a = psi.lipschitz_bound ** p * t_geom
    b = psi.sup_bound ** p
    maj = c * (a * lp.value + b * x_u.value)
    maj_err = c * math.hypot(a * lp.std_error, b * x_u.std_error)
    rep.measure_estimate("projected_u_psi", x_up)
    rep.measure_estimate("projected_u", x_u)
    rep.measure_estimate("lp_u", lp)
    rep.measure("T_geom_bound", t_geom)
    rep.measure("majorant", maj, maj_err)
    norm = lp.value + x_u.value
    rep.measure("empirical_constant", *_ratio(x_up.value, x_up.std_error, norm, math.hypot(lp.std_error, x_u.std_error)))
    rep.checks.append(check_le("|u psi|_X^p <= majorant", x_up.value, x_up.std_error, maj, maj_err))
    return rep


def verify_zero_extension(u: VectorField, B: Domain, U: Domain, delta: float, s, p,
                          cfg=EstimatorConfig()) -> SuiteReport:
    """Zero extension from U n B to U: the c(delta) bound and the exact split."""
    d = U.dim
    inner = Intersection((U, B))
    ut = zero_extend(u, inner, U, delta)
    rep = SuiteReport("zero_extension", {"s": s, "p": p, "delta": delta, "field": u.tag,
                                         "B": B.tag(), "U": U.tag()}, seed=cfg.rng_seed)
    _, x_ext = seminorm_pair(ut, U, s, p, cfg)
    _, x_in = seminorm_pair(u, inner, s, p, cfg)
    lp = lp_norm(u, inner, p, cfg)
    cross = cross_term(u, inner, U, s, p, cfg)
    c_delta = lemma0ext_constant(d, s, p, delta)
    rep.measure_estimate("projected_extended", x_ext)
    rep.measure_estimate("projected_inner", x_in)
    rep.measure_estimate("lp_inner", lp)
    rep.measure_estimate("cross_term", cross)
    rep.measure("c_delta", c_delta)
    rhs = x_in.value + c_delta * lp.value
    rhs_err = math.hypot(x_in.std_error, c_delta * lp.std_error)
    rep.checks.append(check_le("|u~|_X(U)^p <= |u|_X(U n B)^p + c(delta) ||u||_p^p",
                               x_ext.value, x_ext.std_error, rhs, rhs_err))
    rep.checks.append(check_eq("|u~|_X(U)^p == |u|_X(U n B)^p + cross term",
                               x_ext.value, x_ext.std_error, x_in.value + cross.value,
                               math.hypot(x_in.std_error, cross.std_error)))
    return rep


def korn_ratio(u: VectorField, D: Domain, s, p, cfg=EstimatorConfig(),
               ledger: ConstantLedger | None = None) -> SuiteReport:
    rep = SuiteReport("korn_ratio", {"s": s, "p": p, "field": u.tag, "domain": D.tag()}, seed=cfg.rng_seed)
    full, proj = seminorm_pair(u, D, s, p, cfg)
    lp = lp_norm(u, D, p, cfg)
    rep.measure_estimate("gagliardo", full)
    rep.measure_estimate("projected", proj)
    rep.measure_estimate("lp", lp)
    num, num_err = lp.value + full.value, math.hypot(lp.std_error, full.std_error)
    den, den_err = lp.value + proj.value, math.hypot(lp.std_error, proj.std_error)
    rho, rho_err = _ratio(num, num_err, den, den_err)
    rep.measure("norm_ratio", rho, rho_err)
    rep.checks.append(check_le("norm ratio >= 1", 1.0, 0.0, rho, rho_err))
    if proj.value <= SIGMAS * proj.std_error or proj.value <= cfg.abs_tol:
        rep.parameters["note"] = "projected seminorm consistent with 0; seminorm ratio undefined"
        return rep
    ratio, ratio_err = _ratio(full.value, full.std_error, proj.value, proj.std_error)
    rep.measure("seminorm_ratio", ratio, ratio_err)
    if ledger is not None:
        chain = chain_constants(ledger)
        rep.measure("c1", chain.c1)
        rep.measure("c2", chain.c2)
        if chain.korn_bound is not None:
            rep.measure("korn_bound", chain.korn_bound)
            rep.checks.append(check_le("seminorm ratio <= chain bound", ratio, ratio_err, chain.korn_bound, 0.0,
                                       hard=False, note="C_K is an input; diagnostic only"))
    return rep


def estimate_CK_empirical(family, s, p, d, cfg=EstimatorConfig(), details: list | None = None) -> float:
    """Largest |v|_W^p / |v|_X^p over a family of half-space fields.

    This is only a lower bound on the half-space Korn constant.
    """
    family = list(family)
    if not family:
        raise ValueError("empty field family")
    H = HalfSpace(d)
    best = -math.inf
    for v in family:
        full, proj = seminorm_pair(v, H, s, p, cfg)
        r = full.value / proj.value if proj.value > 0 else math.inf
        if details is not None:
            details.append({"field": v.tag, "gagliardo": full.value, "projected": proj.value, "ratio": r})
        best = max(best, r)
    return best


def hardy_route_check(u: VectorField, D: Domain, s, p, cfg=EstimatorConfig()) -> SuiteReport:
    """Numerical walk through the Hardy-route argument for u compactly supported in D."""
    if not isinstance(D, (HalfSpace, Ball)):
        raise ValueError("the Hardy route check is set up for the half-space and balls")
    if u.support is None:
        raise EstimatorError("non-compact support")
    d = D.dim
    R = WholeSpace(d)
    ut = zero_extend(u, D, R)
    rep = SuiteReport("hardy_route", {"s": s, "p": p, "field": u.tag, "domain": D.tag()}, seed=cfg.rng_seed)
    w_amb, x_amb = seminorm_pair(ut, R, s, p, cfg)
    w_d, x_d = seminorm_pair(u, D, s, p, cfg)
    cross = cross_term(u, D, R, s, p, cfg)
    hardy = hardy_functional(u, D, s, p, cfg)
    cpol = polar_tail_constant(d, s, p)
    for name, est in (("gagliardo_whole", w_amb), ("projected_whole", x_amb), ("gagliardo_domain", w_d),
                      ("projected_domain", x_d), ("cross_term", cross), ("hardy", hardy)):
        rep.measure_estimate(name, est)
    rep.measure("polar_tail_constant", cpol)
    rep.checks.append(check_eq("(i) |u~|_X(R^d)^p == |u|_X(D)^p + cross",
                               x_amb.value, x_amb.std_error, x_d.value + cross.value,
                               math.hypot(x_d.std_error, cross.std_error)))
    rep.checks.append(check_le("(ii) cross <= 2 C_polar hardy", cross.value, cross.std_error,
                               2 * cpol * hardy.value, 2 * cpol * hardy.std_error))
    rep.measure("hardy_ratio", *_ratio(hardy.value, hardy.std_error, x_d.value, x_d.std_error))
    rep.checks.append(check_le("|u|_W(D)^p <= |u~|_W(R^d)^p", w_d.value, w_d.std_error,
                               w_amb.value, w_amb.std_error))
    # whole-space Korn ratio of this field stands in for the cited constant
    kappa, kappa_err = _ratio(w_amb.value, w_amb.std_error, x_amb.value, x_amb.std_error)
    rep.measure("whole_space_ratio", kappa, kappa_err)
    rhs = x_d.value + 2 * cpol * hardy.value
    rhs_err = math.hypot(x_d.std_error, 2 * cpol * hardy.std_error)
    rep.checks.append(check_le("|u~|_X(R^d)^p <= |u|_X(D)^p + 2 C_polar hardy", x_amb.value, x_amb.std_error,
                               rhs, rhs_err))
    rep.checks.append(check_le("|u|_W(D)^p <= kappa (|u|_X(D)^p + 2 C_polar hardy)", w_d.value, w_d.std_error,
                               kappa * rhs, math.hypot(kappa * rhs_err, kappa_err * rhs)))
    if x_d.value > 0:
        rep.measure("assembled_constant", kappa * rhs / x_d.value)
    return rep


def _split_integrand(v: VectorField, graph: LipschitzGraph, s, p):
    d = graph.dim
    e = d + s * p

    def integrand(w, z, r, theta):
        dv = v.func(w) - v.func(z)
        X = w.copy()
        X[:, -1] += graph(w[:, :-1])
        Y = z.copy()
        Y[:, -1] += graph(z[:, :-1])
        full = np.linalg.norm(dv, axis=1) ** p / r ** e
        proj = np.abs(np.einsum("ij,ij->i", dv, theta)) ** p / r ** e
        term_proj = np.abs(np.einsum("ij,ij->i", dv, X - Y)) ** p / r ** (e + p)
        df = graph(z[:, :-1]) - graph(w[:, :-1])
        term_sob = np.abs(dv[:, -1] * df) ** p / r ** (e + p)
        return np.stack([full, proj, term_proj, term_sob], axis=1)

    return integrand


def epigraph_pipeline_check(u: VectorField, graph: LipschitzGraph, s, p, cfg=EstimatorConfig()) -> SuiteReport:
    """Substitution comparisons between the epigraph and the half-space."""
    d = graph.dim
    L = graph.lipschitz_constant
    K = bilip_constant(L)
    D = Epigraph(graph)
    H = HalfSpace(d)
    v = pull_back(u, graph)
    rep = SuiteReport("epigraph_pipeline", {"s": s, "p": p, "field": u.tag, "graph": graph.family_tag, "L": L},
                      seed=cfg.rng_seed)
    w_d, x_d = seminorm_pair(u, D, s, p, cfg)
    region = sampling_ball(v, H)
    full_h, proj_h, term_proj, term_sob = shell_integral(
        _split_integrand(v, graph, s, p), H, region, s=s, p=p, cfg=cfg,
        lipschitz=v.lipschitz_bound * K, sup=v.sup_bound * K, n_out=4, stop_cols=(0, 1, 2), name="split")
    for name, est in (("gagliardo_epigraph", w_d), ("projected_epigraph", x_d), ("gagliardo_halfspace", full_h),
                      ("projected_halfspace", proj_h), ("proj_term", term_proj), ("sob_term", term_sob)):
        rep.measure_estimate(name, est)
    k_sub = K ** (3 * d + s * p)
    k_proj = K ** (3 * d + s * p + p)
    rep.measure("C_L", K)
    rep.checks.append(check_le("|u|_W(epi)^p <= C^{3d+sp} |v|_W(H)^p", w_d.value, w_d.std_error,
                               k_sub * full_h.value, k_sub * full_h.std_error))
    rep.checks.append(check_le("|v|_W(H)^p <= C^{3d+sp} |u|_W(epi)^p", full_h.value, full_h.std_error,
                               k_sub * w_d.value, k_sub * w_d.std_error))
    c = 2 ** (p - 1)
    rep.checks.append(check_le("|v|_X(H)^p <= 2^{p-1} (proj term + sob term)", proj_h.value, proj_h.std_error,
                               c * (term_proj.value + term_sob.value),
                               c * math.hypot(term_proj.std_error, term_sob.std_error)))
    rep.checks.append(check_le("proj term <= C^{3d+sp+p} |u|_X(epi)^p", term_proj.value, term_proj.std_error,
                               k_proj * x_d.value, k_proj * x_d.std_error))
    rep.checks.append(check_le("sob term <= C^{3d+sp+p} L^p |u|_W(epi)^p", term_sob.value, term_sob.std_error,
                               k_proj * L ** p * w_d.value, k_proj * L ** p * w_d.std_error))
    if L == 0:
        rep.checks.append(check_eq("flat graph: |u|_W(epi)^p == |v|_W(H)^p", w_d.value, w_d.std_error,
                                   full_h.value, full_h.std_error))
    return rep


def partition_assembly_check(u: VectorField, atlas: DomainAtlas, s, p, cfg=EstimatorConfig(),
                             pou: PartitionOfUnity | None = None) -> SuiteReport:
    """Localisation by a partition of unity, cutoff bounds per chart and rotation invariance."""
    D = ChartedSet(atlas)
    pou = partition_of_unity(atlas) if pou is None else pou
    pieces = localize(u, pou)
    rep = SuiteReport("partition_assembly", {"s": s, "p": p, "field": u.tag, "charts": len(atlas.charts)},
                      seed=cfg.rng_seed)
    w_u, x_u = seminorm_pair(u, D, s, p, cfg)
    lp = lp_norm(u, D, p, cfg)
    rep.measure_estimate("gagliardo", w_u)
    rep.measure_estimate("projected", x_u)
    rep.measure_estimate("lp", lp)
    t_geom = geometric_tail_bound(D, s, p)
    x_norm = lp.value + x_u.value
    root_sum, root_var = 0.0, 0.0
    balls = [c.ball for c in atlas.charts] + [atlas.interior_set]
    motions = [c.motion for c in atlas.charts] + [None]
    for i, (ui, psi) in enumerate(zip(pieces, pou.members)):
        w_i, _ = seminorm_pair(ui, D, s, p, cfg, stop_cols=(0,))
        rv, re = _root(w_i.value, w_i.std_error, p)
        root_sum += rv
        root_var += re ** 2
        rep.measure_estimate(f"gagliardo_piece_{i}", w_i)
        local = Intersection((balls[i], D))
        wl, xl = seminorm_pair(ui, local, s, p, cfg)
        rep.measure_estimate(f"projected_local_{i}", xl)
        maj = 2 ** (p - 1) * (psi.lipschitz_bound ** p * t_geom * lp.value + psi.sup_bound ** p * x_u.value)
        maj_err = 2 ** (p - 1) * math.hypot(psi.lipschitz_bound ** p * t_geom * lp.std_error,
                                            psi.sup_bound ** p * x_u.std_error)
        rep.checks.append(check_le(f"piece {i}: |u_i|_X(B_i n D)^p <= cutoff majorant", xl.value, xl.std_error,
                                   maj, maj_err))
        if x_norm > 0:
            rep.measure(f"local_constant_{i}", (xl.value + lp_norm(ui, local, p, cfg).value) / x_norm)
        if motions[i] is not None:
            rot = rotate_field(ui, motions[i])
            wr, _ = seminorm_pair(rot, Transformed(local, motions[i]), s, p, cfg, stop_cols=(0,))
            rep.measure_estimate(f"gagliardo_rotated_{i}", wr)
            rep.checks.append(check_eq(f"piece {i}: rotation preserves |.|_W", wr.value, wr.std_error,
                                       wl.value, wl.std_error))
    w_root, w_root_err = _root(w_u.value, w_u.std_error, p)
    rep.measure("sum_of_piece_seminorms", root_sum, math.sqrt(root_var))
    rep.checks.append(check_le("|u|_W <= sum_i |u_i|_W", w_root, w_root_err, root_sum, math.sqrt(root_var)))
    return rep


def constants_report(d, s, p, L, C_K=1.0) -> SuiteReport:
    ledger = ConstantLedger(d, s, p, L, C_K)
    rec = ledger.as_record()
    rep = SuiteReport("constants", {"d": d, "s": s, "p": p, "L": L, "C_K": C_K})
    for key in ("C_L", "c1", "c2", "L_star", "polar_tail_constant"):
        rep.measure(key, rec[key])
    if rec["korn_bound"] is not None:
        rep.measure("korn_bound", rec["korn_bound"])
    rep.checks.append(Check("c2 < 1 (smallness)", "<", rec["c2"], 0.0, 1.0, 0.0, rec["c2"] < 1, hard=False))
    return rep


# --------------------------------------------------------------------------
# scans


GRID_KEYS = ("s", "p", "L", "field", "domain")


def expand_grid(parameter_grid: dict) -> list:
    unknown = set(parameter_grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    keys = [k for k in GRID_KEYS if k in parameter_grid]
    if not keys:
        raise ValueError("parameter grid is empty")
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(parameter_grid[k] for k in keys))]
    if not points:
        raise ValueError("parameter grid is empty")
    for pt in points:
        if "s" in pt and "p" in pt and abs(pt["s"] * pt["p"] - 1) < 1e-12:
            raise SpOneError(f"grid point {pt} has s * p = 1")
    return points


def scan(parameter_grid: dict, suites, cfg=EstimatorConfig(), base: dict | None = None,
         catalogue: dict | None = None) -> list:
    """Run each named suite on every grid point; returns one report per (suite, point)."""
    from .registry import run_suite

    points = expand_grid(parameter_grid)
    reports = []
    for name in suites:
        for pt in points:
            params = dict(base or {})
            params.update(pt)
            rep = run_suite(name, params, cfg, catalogue)
            rep.parameters["grid_point"] = pt
            reports.append(rep)
    return reports


def scan_rows(reports) -> list:
    """Flat rows (one per report) with a fixed column order."""
    meas_keys = sorted({k for r in reports for k in r.measurements})
    grid_keys = [k for k in GRID_KEYS if any(k in r.parameters.get("grid_point", {}) for r in reports)]
    header = ["suite"] + grid_keys + ["passed"] + meas_keys
    rows = [header]
    for r in reports:
        gp = r.parameters.get("grid_point", {})
        row = [r.suite] + [_cell(gp.get(k, "")) for k in grid_keys] + [r.passed]
        row += [r.measurements[k]["value"] if k in r.measurements else "" for k in meas_keys]
        rows.append(row)
    return rows


def _cell(v):
    if isinstance(v, dict):
        return v.get("kind", v.get("family", str(v)))
    return v

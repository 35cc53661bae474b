"""Resolution of config tags into fields, domains and graphs, and the suite table.

Specs are small mappings with a ``kind`` key, e.g.
``{kind: bump, center: [0, 0], radius: 0.75, direction: [1, 0]}``.
A string is looked up in the catalogue passed alongside (the ``fields`` and
``domains`` sections of a run config).
"""
from __future__ import annotations

import math
import time

import numpy as np

from . import experiments as ex
from .constants import ConstantLedger, check_sp
from .fields import (affine_field, bump_cutoff, bump_field, bump_skew_field, constant_cutoff, constant_field,
                     cosine_cutoff, skew_field, zero_field)
from .geometry import (Ball, Box, Epigraph, HalfSpace, WholeSpace, cap_graph, cone_graph, linear_graph,
                       make_ball_atlas, zero_graph)
from .oracle import oracle_seminorm
from .seminorm import EstimatorConfig, hardy_functional, seminorm_pair


class RegistryError(ValueError):
    pass


def _build(table, spec, what, catalogue=None):
    if isinstance(spec, str):
        if catalogue and spec in catalogue:
            return _build(table, catalogue[spec], what, None)
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise RegistryError(f"{what} spec must be a name or a mapping with 'kind': {spec!r}")
    args = {k: v for k, v in spec.items() if k != "kind"}
    kind = spec["kind"]
    if kind not in table:
        raise RegistryError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    try:
        return table[kind](**args)
    except TypeError as exc:
        raise RegistryError(f"bad arguments for {what} {kind!r}: {exc}") from None


_ROT = [[0.0, -1.0], [1.0, 0.0]]

FIELDS = {
    "zero": lambda dim=2: zero_field(dim),
    "constant": lambda value=(1.0, 0.0): constant_field(value),
    "affine": lambda A, b=None: affine_field(A, b),
    "skew": lambda A=_ROT: skew_field(A),
    "bump": lambda center=(0.0, 0.0), radius=0.75, direction=(1.0, 0.0), power=2: bump_field(
        center, radius, direction, power),
    "bump_skew": lambda center=(0.0, 0.0), radius=0.75, A=_ROT, power=2: bump_skew_field(center, radius, A, power),
}

DOMAINS = {
    "ball": lambda center=(0.0, 0.0), radius=1.0: Ball(center, radius),
    "disc": lambda: Ball((0.0, 0.0), 1.0),
    "halfspace": lambda dim=2: HalfSpace(dim),
    "whole": lambda dim=2: WholeSpace(dim),
    "box": lambda lower, upper: Box(lower, upper),
    "epigraph": lambda graph: Epigraph(build_graph(graph)),
}

GRAPHS = {
    "zero": lambda dim=2: zero_graph(dim),
    "linear": lambda slope: linear_graph(slope),
    "cone": lambda L, dim=2: cone_graph(L, dim),
    "cap": lambda half_width: cap_graph(half_width),
}

CUTOFFS = {
    "constant": lambda value=1.0, dim=2: constant_cutoff(dim, value),
    "cosine": lambda center=(0.0, 0.0), radius=1.0: cosine_cutoff(center, radius),
    "bump": lambda center=(0.0, 0.0), radius=1.0, power=2: bump_cutoff(center, radius, power),
}


def build_field(spec, catalogue=None):
    return _build(FIELDS, spec, "field", catalogue)


def build_domain(spec, catalogue=None):
    return _build(DOMAINS, spec, "domain", catalogue)


def build_graph(spec):
    return _build(GRAPHS, spec, "graph")


def build_cutoff(spec):
    return _build(CUTOFFS, spec, "cutoff")


# --------------------------------------------------------------------------
# suite runners: params -> SuiteReport


def _graph_from(params, default_kind):
    if "graph" in params:
        return build_graph(params["graph"])
    L = float(params.get("L", 0.0))
    if default_kind == "cone":
        return cone_graph(L)
    return linear_graph([L])


def _skew_annihilation(P, cfg, cat):
    u, D = build_field(P["field"], cat["fields"]), build_domain(P["domain"], cat["domains"])
    s, p = P["s"], P["p"]
    full, proj = seminorm_pair(u, D, s, p, cfg, stop_cols=(0,))
    rep = ex.SuiteReport("skew_annihilation", {"s": s, "p": p, "field": u.tag, "domain": D.tag()},
                         seed=cfg.rng_seed)
    rep.measure_estimate("gagliardo", full)
    rep.measure_estimate("projected", proj)
    tol = P.get("tolerance", 1e-10)
    rep.checks.append(ex.Check("projected < tolerance", "<", proj.value, proj.std_error, tol, 0.0, proj.value < tol))
    rep.checks.append(ex.Check("gagliardo > 5 sigma", ">", full.value, full.std_error, 5 * full.std_error, 0.0,
                               full.value > 5 * full.std_error))
    return rep


def _mc_oracle(P, cfg, cat):
    u, D = build_field(P["field"], cat["fields"]), build_domain(P["domain"], cat["domains"])
    s, p = P["s"], P["p"]
    h = float(P.get("resolution", 1 / 256))
    tol = float(P.get("rel_tolerance", 0.05))
    full, _ = seminorm_pair(u, D, s, p, cfg, stop_cols=(0,))
    ref = oracle_seminorm(u, D, s, p, "full", resolution=h)
    rep = ex.SuiteReport("mc_oracle", {"s": s, "p": p, "field": u.tag, "domain": D.tag(), "resolution": h},
                         seed=cfg.rng_seed)
    rep.measure_estimate("gagliardo_mc", full)
    rep.measure("gagliardo_oracle", ref)
    rel = abs(full.value - ref) / ref
    rep.measure("relative_difference", rel)
    rep.checks.append(ex.Check("|mc - oracle| / oracle <= tolerance", "<=", rel, 0.0, tol, 0.0, rel <= tol))
    return rep


def _hardy_value(P, cfg, cat):
    u, D = build_field(P["field"], cat["fields"]), build_domain(P["domain"], cat["domains"])
    s, p = P["s"], P["p"]
    est = hardy_functional(u, D, s, p, cfg)
    rep = ex.SuiteReport("hardy_value", {"s": s, "p": p, "field": u.tag, "domain": D.tag()}, seed=cfg.rng_seed)
    rep.measure_estimate("hardy", est)
    ref, tol = float(P["expected"]), float(P.get("tolerance", 0.02))
    rep.measure("reference", ref)
    rep.checks.append(ex.Check("|hardy - reference| <= tolerance", "==", est.value, est.std_error, ref, tol,
                               abs(est.value - ref) <= tol))
    return rep


def _ck_empirical(P, cfg, cat):
    family = [build_field(f, cat["fields"]) for f in P["fields"]]
    s, p, d = P["s"], P["p"], P.get("d", 2)
    details = []
    best = ex.estimate_CK_empirical(family, s, p, d, cfg, details)
    rep = ex.SuiteReport("ck_empirical", {"s": s, "p": p, "d": d, "fields": [u.tag for u in family]},
                         seed=cfg.rng_seed)
    for i, row in enumerate(details):
        rep.measure(f"ratio_{i}", row["ratio"])
    rep.measure("C_K_lower_bound", best)
    rep.checks.append(ex.Check("empirical C_K >= 1", ">=", best, 0.0, 1.0, 0.0, best >= 1, hard=False,
                               note="lower bound on C_K; diagnostic"))
    return rep


def _korn_ratio(P, cfg, cat):
    ledger = None
    if "L" in P:
        ledger = ConstantLedger(P.get("d", 2), P["s"], P["p"], float(P["L"]), float(P.get("C_K", 1.0)))
    return ex.korn_ratio(build_field(P["field"], cat["fields"]), build_domain(P["domain"], cat["domains"]),
                         P["s"], P["p"], cfg, ledger)


def _partition(P, cfg, cat):
    atlas = make_ball_atlas(2, int(P.get("n_charts", 8)), float(P.get("overlap", 0.2)))
    return ex.partition_assembly_check(build_field(P["field"], cat["fields"]), atlas, P["s"], P["p"], cfg)


SUITES = {
    # name: (runner, required params, optional params)
    "monotone_embedding": (lambda P, cfg, cat: ex.verify_monotone_embedding(
        build_field(P["field"], cat["fields"]), build_domain(P["domain"], cat["domains"]), P["s"], P["p"], cfg),
        {"field", "domain", "s", "p"}, set()),
    "skew_annihilation": (_skew_annihilation, {"field", "domain", "s", "p"}, {"tolerance"}),
    "mc_oracle": (_mc_oracle, {"field", "domain", "s", "p"}, {"resolution", "rel_tolerance"}),
    "bilip": (lambda P, cfg, cat: ex.verify_bilip(_graph_from(P, "cone"), int(P.get("n_pairs", 100_000)),
                                                  cfg.rng_seed), set(), {"graph", "L", "n_pairs"}),
    "change_of_variables": (lambda P, cfg, cat: ex.verify_change_of_variables(
        _graph_from(P, "linear"), build_cutoff(P.get("function", {"kind": "bump", "center": [0.0, 1.0],
                                                                    "radius": 0.5})), cfg),
        set(), {"graph", "L", "function"}),
    "cutoff_bound": (lambda P, cfg, cat: ex.verify_cutoff_bound(
        build_field(P["field"], cat["fields"]), build_cutoff(P["cutoff"]), build_domain(P["domain"], cat["domains"]),
        P["s"], P["p"], cfg), {"field", "cutoff", "domain", "s", "p"}, set()),
    "zero_extension": (lambda P, cfg, cat: ex.verify_zero_extension(
        build_field(P["field"], cat["fields"]), build_domain(P["B"], cat["domains"]),
        build_domain(P["U"], cat["domains"]), float(P["delta"]), P["s"], P["p"], cfg),
        {"field", "B", "U", "delta", "s", "p"}, set()),
    "korn_ratio": (_korn_ratio, {"field", "domain", "s", "p"}, {"L", "C_K", "d"}),
    "ck_empirical": (_ck_empirical, {"fields", "s", "p"}, {"d"}),
    "hardy_route": (lambda P, cfg, cat: ex.hardy_route_check(
        build_field(P["field"], cat["fields"]), build_domain(P["domain"], cat["domains"]), P["s"], P["p"], cfg),
        {"field", "domain", "s", "p"}, set()),
    "hardy_value": (_hardy_value, {"field", "domain", "s", "p", "expected"}, {"tolerance"}),
    "epigraph_pipeline": (lambda P, cfg, cat: ex.epigraph_pipeline_check(
        build_field(P["field"], cat["fields"]), _graph_from(P, "linear"), P["s"], P["p"], cfg),
        {"field", "s", "p"}, {"graph", "L"}),
    "partition_assembly": (_partition, {"field", "s", "p"}, {"n_charts", "overlap"}),
    "constants": (lambda P, cfg, cat: ex.constants_report(P.get("d", 2), P["s"], P["p"], float(P["L"]),
                                                          float(P.get("C_K", 1.0))),
                  {"s", "p", "L"}, {"d", "C_K"}),
}


def validate_params(name, params):
    """Raise RegistryError on unknown suites, unknown or missing keys, or s * p = 1."""
    if name not in SUITES:
        raise RegistryError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    _, required, optional = SUITES[name]
    keys = set(params)
    missing = required - keys
    if missing:
        raise RegistryError(f"suite {name!r} is missing parameters {sorted(missing)}")
    extra = keys - required - optional
    if extra:
        raise RegistryError(f"suite {name!r} does not accept parameters {sorted(extra)}")
    if "s" in params and "p" in params:
        check_sp(float(params["s"]), float(params["p"]))


def run_suite(name, params, cfg=EstimatorConfig(), catalogue=None):
    cat = {"fields": {}, "domains": {}}
    if catalogue:
        cat.update(catalogue)
    validate_params(name, params)
    return SUITES[name][0](params, cfg, cat)

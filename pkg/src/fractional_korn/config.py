"""Run configuration: YAML files with strict key checking.

Schema (all top-level keys optional except ``experiments``)::

    estimator:        # EstimatorConfig fields
      sample_count: 200000
      rng_seed: 0
    output_dir: results
    cache: recompute  # or reuse
    fields:  {name: field spec}
    domains: {name: domain spec}
    experiments:
      - suite: monotone_embedding
        name: embedding-disc        # optional, unique
        seed: 3                     # optional, overrides estimator.rng_seed
        estimator: {sample_count: 400000}   # optional overrides
        params: {field: bump, domain: disc, s: 0.4, p: 2}
      - suite: scan
        grid: {s: [0.25, 0.4], p: [2, 3]}
        suites: [constants]
        params: {L: 0.1}            # shared by every grid point
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .constants import SpOneError
from .experiments import expand_grid
from .registry import (RegistryError, SUITES, build_cutoff, build_domain, build_field, build_graph,
                       validate_params)
from .seminorm import EstimatorConfig, EstimatorError

TOP_KEYS = {"estimator", "output_dir", "cache", "fields", "domains", "experiments"}
EXPERIMENT_KEYS = {"suite", "name", "params", "seed", "estimator", "grid", "suites"}
ESTIMATOR_KEYS = {f.name for f in dataclasses.fields(EstimatorConfig)}
CACHE_POLICIES = ("reuse", "recompute")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Experiment:
    name: str
    suite: str
    params: dict
    estimator: EstimatorConfig
    grid: dict | None = None
    suites: tuple = ()

    @property
    def seed(self):
        return self.estimator.rng_seed


@dataclass(frozen=True)
class RunConfig:
    experiments: tuple
    estimator: EstimatorConfig = EstimatorConfig()
    output_dir: str = "results"
    cache: str = "recompute"
    fields: dict = field(default_factory=dict)
    domains: dict = field(default_factory=dict)

    @property
    def catalogue(self):
        return {"fields": self.fields, "domains": self.domains}

    def with_seed(self, seed: int) -> RunConfig:
        exps = tuple(replace(e, estimator=replace(e.estimator, rng_seed=seed)) for e in self.experiments)
        return replace(self, experiments=exps, estimator=replace(self.estimator, rng_seed=seed))


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in {where}")


def _estimator(base: EstimatorConfig, overrides, where) -> EstimatorConfig:
    if overrides is None:
        return base
    _check_keys(overrides, ESTIMATOR_KEYS, where)
    try:
        return replace(base, **overrides)
    except (EstimatorError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


_SPEC_KEYS = {"field": build_field, "domain": build_domain, "B": build_domain, "U": build_domain}


def _resolve_specs(params, cat, where):
    for key, builder in _SPEC_KEYS.items():
        if key in params:
            kind = "fields" if builder is build_field else "domains"
            builder(params[key], cat[kind])
    for f in params.get("fields", []):
        build_field(f, cat["fields"])
    if "graph" in params:
        build_graph(params["graph"])
    if "cutoff" in params:
        build_cutoff(params["cutoff"])
    if "function" in params:
        build_cutoff(params["function"])


def parse_config(data: dict) -> RunConfig:
    if data is None:
        data = {}
    _check_keys(data, TOP_KEYS, "config")
    est = _estimator(EstimatorConfig(), data.get("estimator"), "estimator")
    cache = data.get("cache", "recompute")
    if cache not in CACHE_POLICIES:
        raise ConfigError(f"cache must be one of {CACHE_POLICIES}, got {cache!r}")
    fields_ = data.get("fields") or {}
    domains = data.get("domains") or {}
    for name, spec in (("fields", fields_), ("domains", domains)):
        if not isinstance(spec, dict):
            raise ConfigError(f"{name} must be a mapping of named specs")
    cat = {"fields": fields_, "domains": domains}
    raw = data.get("experiments") or []
    if not isinstance(raw, list):
        raise ConfigError("experiments must be a list")
    exps, names = [], set()
    for i, e in enumerate(raw):
        _check_keys(e, EXPERIMENT_KEYS, f"experiment #{i}")
        suite = e.get("suite")
        name = str(e.get("name", f"{i:02d}-{suite}"))
        where = f"experiment {name!r}"
        if name in names:
            raise ConfigError(f"duplicate experiment name {name!r}")
        names.add(name)
        params = e.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError(f"{where}: params must be a mapping")
        est_e = _estimator(est, e.get("estimator"), f"{where} estimator")
        if "seed" in e:
            est_e = replace(est_e, rng_seed=int(e["seed"]))
        try:
            if suite == "scan":
                grid = e.get("grid")
                suites = tuple(e.get("suites") or ())
                if not isinstance(grid, dict):
                    raise ConfigError(f"{where}: a scan needs a grid mapping")
                points = expand_grid(grid) if suites else []
                for sname in suites:
                    for pt in points:
                        merged = {**params, **pt}
                        validate_params(sname, merged)
                        _resolve_specs(merged, cat, where)
                exps.append(Experiment(name, suite, params, est_e, grid, suites))
            else:
                if "grid" in e or "suites" in e:
                    raise ConfigError(f"{where}: grid/suites only apply to scans")
                validate_params(suite, params)
                _resolve_specs(params, cat, where)
                exps.append(Experiment(name, suite, params, est_e))
        except SpOneError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        except (RegistryError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: {exc}") from None
    return RunConfig(tuple(exps), est, str(data.get("output_dir", "results")), cache, fields_, domains)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from None
    return parse_config(data)


def default_config_path() -> Path:
    return Path(__file__).with_name("configs") / "default.yaml"

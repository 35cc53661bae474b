"""Explicit constants of the epigraph Korn argument.

The chain for an epigraph with Lipschitz constant L reads

    |u|_W^p <= c1 |u|_X^p + c2 |u|_W^p,
    c1 = 2^{p-1} C_K C(L)^{6d + 2sp + p},   c2 = c1 L^p,

with C(L) = sqrt(1 + L (L + 1)) the bi-Lipschitz constant of the
flattening map.  When c2 < 1 subtracting gives |u|_W^p <= c1/(1 - c2) |u|_X^p.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .geometry import sphere_area


class SpOneError(ValueError):
    """The excluded case s * p = 1."""


class SmallnessError(ValueError):
    """c2 >= 1: the subtraction argument gives no certificate."""


def check_sp(s: float, p: float):
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if abs(s * p - 1) < 1e-12:
        raise SpOneError(f"s * p = 1 is excluded (s={s}, p={p})")


def bilip_constant(L: float) -> float:
    if L < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    return math.sqrt(1 + L * (L + 1))


@dataclass(frozen=True)
class ConstantLedger:
    d: int
    s: float
    p: float
    L: float
    C_K: float = 1.0

    def __post_init__(self):
        check_sp(self.s, self.p)
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if self.L < 0 or self.C_K < 1:
            raise ValueError("need L >= 0 and C_K >= 1")
        if not all(math.isfinite(v) for v in (self.s, self.p, self.L, self.C_K)):
            raise ValueError("ledger entries must be finite")

    # exponents of C(L) at each step of the substitution argument
    @property
    def volume_exponent(self):
        return 2 * self.d

    @property
    def substitution_exponent(self):
        return 3 * self.d + self.s * self.p

    @property
    def projection_exponent(self):
        return 3 * self.d + self.s * self.p + self.p

    @property
    def chain_exponent(self):
        return 6 * self.d + 2 * self.s * self.p + self.p

    def as_record(self) -> dict:
        chain = chain_constants(self)
        rec = asdict(self)
        rec.update(
            C_L=bilip_constant(self.L),
            c1=chain.c1,
            c2=chain.c2,
            korn_bound=chain.korn_bound,
            L_star=chain.L_star,
            polar_tail_constant=polar_tail_constant(self.d, self.s, self.p),
            exponents={
                "volume": self.volume_exponent,
                "substitution": self.substitution_exponent,
                "projection": self.projection_exponent,
                "chain": self.chain_exponent,
            },
        )
        return rec


@dataclass(frozen=True)
class KornChain:
    c1: float
    c2: float
    korn_bound: float | None
    L_star: float


def _c1(d, s, p, C_K, L):
    return 2 ** (p - 1) * C_K * bilip_constant(L) ** (6 * d + 2 * s * p + p)


def _c2(d, s, p, C_K, L):
    return _c1(d, s, p, C_K, L) * L ** p


def chain_constants(ledger: ConstantLedger) -> KornChain:
    d, s, p, C_K, L = ledger.d, ledger.s, ledger.p, ledger.C_K, ledger.L
    c1 = _c1(d, s, p, C_K, L)
    c2 = c1 * L ** p
    bound = c1 / (1 - c2) if c2 < 1 else None
    return KornChain(c1, c2, bound, smallness_threshold(d, s, p, C_K))


def korn_constant_from_chain(chain: KornChain) -> float:
    if chain.c2 >= 1:
        raise SmallnessError(f"c2 = {chain.c2:.6g} >= 1, no Korn certificate")
    return chain.c1 / (1 - chain.c2)


def smallness_threshold(d: int, s: float, p: float, C_K: float = 1.0, tol: float = 1e-9,
                        max_iter: int = 200) -> float:
    """The L* with c2(L*) = 1, by bisection on the increasing map L -> c2(L)."""
    check_sp(s, p)
    lo, hi = 0.0, 1.0
    while _c2(d, s, p, C_K, hi) < 1:
        lo, hi = hi, 2 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = _c2(d, s, p, C_K, mid)
        if abs(val - 1) < tol:
            return mid
        if val < 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def polar_tail_constant(d: int, s: float, p: float) -> float:
    """sigma_{d-1} / (s p): the integral of |y|^{-d-sp} over |y| >= r is this times r^{-sp}."""
    sp = s * p
    if sp <= 0:
        raise ValueError("s * p must be positive")
    return sphere_area(d) / sp


def lemma0ext_constant(d: int, s: float, p: float, delta: float) -> float:
    """Zero-extension cost 2 sigma_{d-1} delta^{-sp} / (sp) for support margin delta."""
    if delta <= 0:
        raise ValueError("support margin delta must be positive")
    return 2 * polar_tail_constant(d, s, p) * delta ** (-s * p)

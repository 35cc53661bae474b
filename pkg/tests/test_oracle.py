import math

import numpy as np
import pytest

from fractional_korn.fields import affine_field, bump_field, constant_field, skew_field
from fractional_korn.geometry import Ball, Box, HalfSpace
from fractional_korn.oracle import OracleError, cell_angular_moment, oracle_seminorm, unit_cell_self_integral

DISC = Ball([0.0, 0.0], 1.0)
BUMP = bump_field([0, 0], 1.0, [1, 0])


def test_cell_self_integral_against_angular_moment():
    # int m(theta) dtheta over the circle reproduces the unit-cell self-integral
    theta = (np.arange(20_000) + 0.5) * 2 * np.pi / 20_000
    for alpha in (-1.5, -0.8, 0.5):
        ang = np.sum(cell_angular_moment(alpha, theta)) * 2 * np.pi / 20_000
        assert unit_cell_self_integral(alpha) == pytest.approx(ang, rel=1e-6)


def test_cell_self_integral_smooth_case():
    # alpha = 2: E|x - y|^2 = 2 * 2 * Var(U) = 1/3
    assert unit_cell_self_integral(2.0) == pytest.approx(1 / 3, rel=1e-9)
    with pytest.raises(OracleError):
        unit_cell_self_integral(-2.0)


def test_cell_angular_moment_direct():
    alpha, th = -0.8, 0.3
    c, s = math.cos(th), math.sin(th)
    R = 1 / max(c, s)
    from scipy.integrate import quad
    ref, _ = quad(lambda r: (1 - r * c) * (1 - r * s) * r ** (alpha + 1), 0, R)
    assert cell_angular_moment(alpha, th) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("h", [1 / 16, 1 / 32])
def test_constant_and_skew_vanish(h):
    assert oracle_seminorm(constant_field([1.0, 1.0]), DISC, 0.4, 2, "full", h) == 0
    skew = skew_field([[0.0, -1.0], [1.0, 0.0]])
    assert abs(oracle_seminorm(skew, DISC, 0.4, 2, "projected", h)) < 1e-10
    assert abs(oracle_seminorm(skew, DISC, 0.4, 2, "projected", h, evaluation="direct")) < 1e-10
    assert oracle_seminorm(skew, DISC, 0.4, 2, "full", h) > 1


@pytest.mark.parametrize("kernel", ["full", "projected"])
def test_fft_matches_direct(kernel):
    a = oracle_seminorm(BUMP, DISC, 0.4, 2, kernel, 1 / 32, evaluation="fft")
    b = oracle_seminorm(BUMP, DISC, 0.4, 2, kernel, 1 / 32, evaluation="direct")
    assert a == pytest.approx(b, rel=1e-10)


def test_frozen_values():
    # regression values of the default (linearised-diagonal) oracle
    assert oracle_seminorm(BUMP, DISC, 0.4, 2, "full", 1 / 64) == pytest.approx(6.96119, rel=2e-6)
    assert oracle_seminorm(BUMP, DISC, 0.4, 2, "projected", 1 / 64) == pytest.approx(3.48059, rel=2e-6)


def test_grid_convergence():
    vals = [oracle_seminorm(BUMP, DISC, 0.4, 2, "full", h) for h in (1 / 32, 1 / 64, 1 / 128)]
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < d1
    assert d2 / vals[2] < 0.02


def test_certified_diagonal_is_larger():
    lin = oracle_seminorm(BUMP, DISC, 0.4, 2, "full", 1 / 64)
    cert = oracle_seminorm(BUMP, DISC, 0.4, 2, "full", 1 / 64, diagonal="certified")
    assert cert > lin


def test_identity_field_on_square():
    # on [0,1]^2 both kernels give int int |x - y|^{-0.8}, which is the cell self-integral
    u = affine_field(np.eye(2))
    box = Box([0.0, 0.0], [1.0, 1.0])
    ref = unit_cell_self_integral(-0.8)
    errs = [abs(oracle_seminorm(u, box, 0.4, 2, "full", h) / ref - 1) for h in (1 / 16, 1 / 32, 1 / 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 3e-3
    proj = oracle_seminorm(u, box, 0.4, 2, "projected", 1 / 32)
    assert proj == pytest.approx(oracle_seminorm(u, box, 0.4, 2, "full", 1 / 32), rel=1e-12)


def test_p_other_than_two_uses_direct():
    val = oracle_seminorm(BUMP, DISC, 0.3, 3, "full", 1 / 16)
    assert val > 0
    with pytest.raises(OracleError):
        oracle_seminorm(BUMP, DISC, 0.3, 3, "full", 1 / 16, evaluation="fft")


def test_scope_errors():
    with pytest.raises(OracleError):
        oracle_seminorm(BUMP, HalfSpace(2), 0.4, 2, "full", 1 / 16)
    u3 = bump_field([0, 0, 0], 1.0, [1, 0, 0])
    with pytest.raises(OracleError):
        oracle_seminorm(u3, Ball([0, 0, 0], 1.0), 0.4, 2, "full", 1 / 16)

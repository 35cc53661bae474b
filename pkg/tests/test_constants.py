import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractional_korn.constants import (ConstantLedger, KornChain, SmallnessError, SpOneError, bilip_constant,
                                       chain_constants, check_sp, korn_constant_from_chain, lemma0ext_constant,
                                       polar_tail_constant, smallness_threshold)

sp_pairs = st.tuples(st.floats(0.05, 0.95), st.floats(1.1, 4.0)).filter(lambda t: abs(t[0] * t[1] - 1) > 1e-6)


def test_bilip_values():
    assert bilip_constant(0) == 1
    assert bilip_constant(1) == pytest.approx(math.sqrt(3))
    assert bilip_constant(0.5) == pytest.approx(1.3228756555)
    with pytest.raises(ValueError):
        bilip_constant(-0.1)


def test_check_sp():
    with pytest.raises(SpOneError):
        check_sp(0.5, 2)
    with pytest.raises(ValueError):
        check_sp(1.2, 2)
    with pytest.raises(ValueError):
        check_sp(0.4, 1.0)
    check_sp(0.4, 2)


class TestChain:
    def test_flat(self):
        chain = chain_constants(ConstantLedger(2, 0.4, 2, 0.0, C_K=1.7))
        assert chain.c1 == pytest.approx(2 * 1.7)
        assert chain.c2 == 0
        assert korn_constant_from_chain(chain) == pytest.approx(chain.c1)

    def test_reference_point(self):
        # 2^(p-1) C(0.1)^15.6 with C(0.1)^2 = 1.11
        c1 = 2 * 1.11 ** 7.8
        chain = chain_constants(ConstantLedger(2, 0.4, 2, 0.1))
        assert chain.c1 == pytest.approx(c1, rel=1e-12)
        assert chain.c1 == pytest.approx(4.5138, rel=1e-3)
        assert chain.c2 == pytest.approx(0.045138, rel=1e-3)
        assert korn_constant_from_chain(chain) == pytest.approx(4.7272, rel=1e-4)

    def test_exponents(self):
        led = ConstantLedger(2, 0.4, 2, 0.1)
        assert led.chain_exponent == pytest.approx(15.6)
        assert led.substitution_exponent == pytest.approx(6.8)
        assert led.projection_exponent == pytest.approx(8.8)
        rec = led.as_record()
        assert rec["c2"] == pytest.approx(0.045138, rel=1e-3)

    def test_smallness_boundary(self):
        assert korn_constant_from_chain(KornChain(1.0, 0.999, None, 0.0)) == pytest.approx(1000)
        with pytest.raises(SmallnessError):
            korn_constant_from_chain(KornChain(1.0, 1.0, None, 0.0))
        assert chain_constants(ConstantLedger(2, 0.4, 2, 0.5)).korn_bound is None

    def test_ledger_validation(self):
        with pytest.raises(SpOneError):
            ConstantLedger(2, 0.5, 2, 0.1)
        with pytest.raises(ValueError):
            ConstantLedger(2, 0.4, 2, -1.0)

    @settings(max_examples=50, deadline=None)
    @given(sp_pairs, st.integers(2, 4))
    def test_c2_increasing_in_L(self, sp, d):
        s, p = sp
        grid = np.linspace(0.01, 0.5, 25)
        c2 = [chain_constants(ConstantLedger(d, s, p, L)).c2 for L in grid]
        assert np.all(np.diff(c2) > 0)


class TestThreshold:
    def test_bracket(self):
        assert chain_constants(ConstantLedger(2, 0.4, 2, 0.2)).c2 == pytest.approx(0.428, abs=1e-3)
        assert chain_constants(ConstantLedger(2, 0.4, 2, 0.3)).c2 == pytest.approx(2.349, abs=2e-3)
        L = smallness_threshold(2, 0.4, 2)
        assert 0.2 < L < 0.3
        assert abs(chain_constants(ConstantLedger(2, 0.4, 2, L)).c2 - 1) < 1e-9

    def test_monotone_in_CK(self):
        assert smallness_threshold(2, 0.4, 2, C_K=2.0) < smallness_threshold(2, 0.4, 2, C_K=1.0)

    def test_monotone_in_d(self):
        Ls = [smallness_threshold(d, 0.4, 2) for d in (2, 3, 4)]
        assert Ls[0] > Ls[1] > Ls[2]

    @settings(max_examples=30, deadline=None)
    @given(sp_pairs, st.floats(1.0, 10.0))
    def test_residual(self, sp, C_K):
        s, p = sp
        L = smallness_threshold(2, s, p, C_K)
        assert abs(chain_constants(ConstantLedger(2, s, p, L, C_K)).c2 - 1) < 1e-9


class TestTailConstants:
    def test_polar(self):
        assert polar_tail_constant(2, 0.4, 2) == pytest.approx(7.853981634)
        assert polar_tail_constant(3, 0.5, 3) == pytest.approx(8.37758041)

    def test_polar_against_quadrature(self):
        from scipy.integrate import quad
        val, _ = quad(lambda r: 2 * math.pi * r * r ** (-2.8), 1, np.inf)
        assert polar_tail_constant(2, 0.4, 2) == pytest.approx(val, rel=1e-8)

    def test_zero_extension_constant(self):
        # 2 (2 pi / 0.8) 4^0.8
        assert lemma0ext_constant(2, 0.4, 2, 0.25) == pytest.approx(47.6176, rel=1e-5)
        assert lemma0ext_constant(2, 0.4, 2, 1e12) < 1e-8
        with pytest.raises(ValueError):
            lemma0ext_constant(2, 0.4, 2, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(sp_pairs, st.floats(0.01, 10))
    def test_halving_delta(self, sp, delta):
        s, p = sp
        ratio = lemma0ext_constant(2, s, p, delta / 2) / lemma0ext_constant(2, s, p, delta)
        assert ratio == pytest.approx(2 ** (s * p), rel=1e-12)

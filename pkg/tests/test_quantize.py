from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fractalsec.quantize import dequantize_alpha, dequantize_dg, quantize_alpha, quantize_dg, round_half_away


def test_round_half_away():
    assert [round_half_away(x) for x in (0.5, 1.5, 2.5, -0.5, -1.5, 0.49, -0.49)] == [1, 2, 3, -1, -2, 0, 0]


@pytest.mark.parametrize("alpha, bits, index, value", [(0, 6, 0, 0.0), (1, 6, 63, 0.984375), (0.5, 6, 32, 0.5)])
def test_alpha_examples(alpha, bits, index, value):
    assert quantize_alpha(alpha, bits) == index
    assert dequantize_alpha(index, bits) == value


def test_alpha_out_of_range():
    with pytest.raises(ValueError):
        quantize_alpha(-0.01, 6)
    with pytest.raises(ValueError):
        quantize_alpha(1.01, 6)


@pytest.mark.parametrize("dg, bits, expected", [(0, 8, (0, 0)), (-255, 8, (1, 255)), (300, 8, (0, 255)), (-0.4, 8, (1, 0))])
def test_dg_examples(dg, bits, expected):
    assert quantize_dg(dg, bits) == expected


@given(st.fractions(0, 1), st.integers(1, 12))
def test_alpha_error_bound(alpha, bits):
    q = quantize_alpha(float(alpha), bits)
    err = abs(alpha - Fraction(q, 2**bits))
    if q < 2**bits - 1:
        assert err <= Fraction(1, 2 ** (bits + 1))
    assert Fraction(q, 2**bits) < 1


@given(st.floats(-255, 255), st.integers(8, 12))
def test_dg_error_bound(dg, bits):
    s, m = quantize_dg(dg, bits)
    assert abs(dg - dequantize_dg(s, m)) <= 0.5

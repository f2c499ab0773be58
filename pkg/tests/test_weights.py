import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partlab.errors import DomainError
from partlab.weights import (
    Family,
    Preset,
    RegularlyVarying,
    Table,
    WeightSpec,
    mean_z,
    r_d,
    rational_presets,
    scaled_weight,
    unscaled_weight,
)

HALF = Fraction(1, 2)


def asm(name, *args):
    return WeightSpec(Family.ASSEMBLY, Preset(name, args))


def ms_ones(p=HALF):
    return WeightSpec(Family.MULTISET, Preset("integer_partitions"), p)


def test_scaled_weight_examples():
    assert scaled_weight(asm("permutations"), 1, 2) == HALF
    assert scaled_weight(ms_ones(), 2, 1) == Fraction(1, 4)
    sel = WeightSpec(Family.SELECTION, Table((3, 3, 3)), HALF)
    # Bi(3, q) with q = (1/2)/(3/2): a_2/a_0 = C(3,2) q^2 / (1-q)^2 = 3/4
    q = HALF / (1 + HALF)
    assert scaled_weight(sel, 1, 2) == Fraction(3) * q**2 * (1 - q) / (1 - q) ** 3
    assert scaled_weight(sel, 1, 2) == Fraction(3, 4)


def test_unscaled_weight_examples():
    assert unscaled_weight(asm("permutations"), 1, 0) == pytest.approx(math.exp(-1))
    assert unscaled_weight(ms_ones(), 1, 0) == pytest.approx(0.5)
    sel = WeightSpec(Family.SELECTION, Preset("distinct_parts"), 1)
    assert unscaled_weight(sel, 1, 1) == pytest.approx(0.5)


def test_mean_z_examples():
    assert mean_z(asm("ewens", 2), 4) == HALF
    assert mean_z(ms_ones(), 1) == 1
    sel = WeightSpec(Family.SELECTION, Table((2,)), 1)
    assert mean_z(sel, 1) == 1


def test_r_d_examples():
    assert r_d(4, 1) == 2
    assert r_d(3, 1) == 0
    assert r_d(1, 2) == 4


def test_r_1_matches_square_rule():
    for j in range(1, 101):
        assert r_d(j, 1) == (2 if math.isqrt(j) ** 2 == j else 0)


def test_oscillating_weights():
    spec = asm("oscillating_demo")
    for j in range(1, 30):
        want = Fraction(1, j) if j % 2 else Fraction(1, j) + Fraction(2 ** (j + 1), j)
        assert spec.param(j) == want


@pytest.mark.parametrize("name", sorted(rational_presets()))
def test_scaled_weight_at_zero_is_one(name):
    spec = rational_presets()[name]
    for j in range(1, 8):
        assert scaled_weight(spec, j, 0) == 1
        assert isinstance(scaled_weight(spec, j, 3), (int, Fraction))


@pytest.mark.parametrize("name", sorted(rational_presets()))
def test_unscaled_weights_sum_to_one(name):
    spec = rational_presets()[name]
    for j in (1, 2, 3):
        total, k = 0.0, 0
        while True:
            w = unscaled_weight(spec, j, k)
            total += w
            k += 1
            if (w < 1e-18 and k > 5) or k > 2000:
                break
        assert total == pytest.approx(1.0, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError, match="0<p<1"):
        WeightSpec(Family.MULTISET, Preset("integer_partitions"), Fraction(3, 2))
    with pytest.raises(DomainError):
        WeightSpec(Family.ASSEMBLY, Preset("integer_partitions"))
    with pytest.raises(DomainError):
        WeightSpec(Family.ASSEMBLY, Preset("ewens", (-1,)))
    with pytest.raises(DomainError):
        WeightSpec(Family.ASSEMBLY, Preset("no_such_preset"))


def test_regularly_varying_log_class():
    spec = WeightSpec(Family.ASSEMBLY, RegularlyVarying(1, -1, 1))
    assert [spec.param(j) for j in (1, 2, 3)] == [1, HALF, Fraction(1, 3)]


@settings(max_examples=40, deadline=None)
@given(
    st.fractions(min_value=Fraction(1, 10), max_value=Fraction(9, 10), max_denominator=20),
    st.integers(1, 6),
    st.integers(0, 6),
)
def test_multiset_scaled_weight_is_negative_binomial(p, j, k):
    spec = WeightSpec(Family.MULTISET, Preset("plane_partitions"), p)
    m = j
    assert scaled_weight(spec, j, k) == math.comb(m + k - 1, k) * p ** (j * k)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=Fraction(1, 5), max_value=5, max_denominator=10), st.integers(1, 6), st.integers(0, 6))
def test_assembly_scaled_weight_is_poisson_ratio(theta, j, k):
    spec = asm("ewens", theta)
    assert scaled_weight(spec, j, k) == (theta / j) ** k / math.factorial(k)

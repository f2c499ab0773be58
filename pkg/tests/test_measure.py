import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partlab.errors import DomainError
from partlab.measure import (
    CountLawTable,
    LawKind,
    PartitionState,
    count_covariance,
    fdd,
    fdd_table,
    limit_law,
    mu_point,
    tilt,
    tilted_component_law,
    tv_distance,
)
from partlab.oracle import brute_marginal, brute_mu, enumerate_partitions
from partlab.weights import Family, Preset, WeightSpec, rational_presets

HALF = Fraction(1, 2)
PRESETS = rational_presets()
PERM = PRESETS["permutations"]
IP = WeightSpec(Family.MULTISET, Preset("integer_partitions"), HALF)


def test_mu_point_examples():
    assert mu_point(IP, (1, 1, 0)) == Fraction(1, 3)
    assert mu_point(PERM, (3, 0, 0)) == Fraction(1, 6)
    for spec in PRESETS.values():
        assert mu_point(spec, (1,)) == 1


def test_fdd_examples():
    assert fdd(IP, 3, 1, (1,)) == Fraction(1, 3)
    assert fdd(PERM, 4, 2, (0, 2)) == Fraction(1, 8)
    assert fdd(PERM, 4, 2, (3, 1)) == 0
    assert fdd(IP, 5, 3, (0, 0, 2)) == 0


def test_fdd_rejects_l_beyond_n():
    with pytest.raises(DomainError):
        fdd_table(PERM, 3, 4)


def test_partition_state():
    eta = PartitionState((1, 1, 0))
    assert eta.n == 3
    assert eta[1] == 1 and eta[3] == 0
    assert eta.parts == 2


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_normalization(name):
    spec = PRESETS[name]
    for n in (1, 5, 12, 20):
        assert sum((mu_point(spec, eta) for eta in enumerate_partitions(n)), Fraction(0)) == 1


@pytest.mark.parametrize("name", ["permutations", "set_partitions", "plane_partitions", "fermi(1)"])
def test_fdd_marginal_consistency(name):
    spec = PRESETS[name]
    for n in (6, 11):
        for l in (2, 3, 4):
            assert fdd_table(spec, n, l).marginal(l - 1).entries == fdd_table(spec, n, l - 1).entries


@pytest.mark.parametrize("name", ["ewens(1/2)", "graphs", "mapping_patterns(1/2)", "ideal_gas(2) selection"])
def test_fdd_matches_oracle(name):
    spec = PRESETS[name]
    for n in (4, 9, 14):
        for l in (1, 2, 4):
            assert fdd_table(spec, n, l).entries == brute_marginal(spec, n, l).entries


def test_full_joint_recovers_mu():
    spec = PRESETS["ewens(2)"]
    n = 7
    table = fdd_table(spec, n, n)
    for eta, v in brute_mu(spec, n).items():
        assert table.prob(eta.k) == v == mu_point(spec, eta)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(PRESETS)), st.sampled_from([HALF, Fraction(1), Fraction(2)]), st.integers(1, 12))
def test_tilting_leaves_mu_unchanged(name, theta, n):
    spec = PRESETS[name]
    if spec.family is Family.MULTISET:
        spec = WeightSpec(spec.family, spec.params, Fraction(1, 3))
    for eta in enumerate_partitions(n):
        assert mu_point(tilt(spec, theta), eta) == mu_point(spec, eta)


def test_component_law_examples():
    law = tilted_component_law(IP, 1, 1)
    for k in range(10):
        assert law.prob(k) == HALF**k * HALF
    for spec in PRESETS.values():
        zero = tilted_component_law(spec, 0, 2)
        assert zero.pmf == (1,) and zero.tail == 0
    ew = tilted_component_law(PRESETS["ewens(2)"], 1, 1)
    for k in range(8):
        assert ew.prob(k) == pytest.approx(math.exp(-2) * 2**k / math.factorial(k), rel=1e-12)


def test_limit_law_examples():
    law = limit_law(PRESETS["ewens(2)"], 1, 1)
    for k in range(10):
        assert law.prob((k,)) == pytest.approx(math.exp(-2) * 2**k / math.factorial(k), rel=1e-12)
    point = limit_law(PRESETS["graphs"], 0, 3)
    assert point.entries == {(0, 0, 0): 1.0}
    rho = 2 * (1 - Fraction(1, 100))
    geo = limit_law(IP, rho, 2)
    for k1 in range(4):
        for k2 in range(4):
            want = 1.0
            for j, k in ((1, k1), (2, k2)):
                x = float((HALF * rho) ** j)
                want *= x**k * (1 - x)
            assert geo.prob((k1, k2)) == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("name", ["ewens(2)", "bose(2)", "distinct_parts"])
def test_limit_law_factorizes(name):
    spec = PRESETS[name]
    rho = HALF
    law = limit_law(spec, rho, 3)
    for key, v in law.entries.items():
        prod = 1.0
        for j, k in enumerate(key, start=1):
            prod *= float(law.marginal(1).prob((k,))) if j == 1 else float(law.factors[j - 1].prob(k))
        assert v == pytest.approx(prod, rel=1e-12)


def test_tv_distance_examples():
    a = CountLawTable(3, 1, {(0,): Fraction(1)}, LawKind.EXACT)
    b = CountLawTable(3, 1, {(1,): Fraction(1)}, LawKind.EXACT)
    assert tv_distance(a, a) == 0
    assert tv_distance(a, b) == 1
    spec = PRESETS["ewens(2)"]
    law = limit_law(spec, 1, 1)
    assert tv_distance(fdd_table(spec, 60, 1), law) < tv_distance(fdd_table(spec, 20, 1), law)


def test_tv_distance_rejects_mismatched_l():
    with pytest.raises(DomainError):
        tv_distance(fdd_table(PERM, 4, 1), fdd_table(PERM, 4, 2))


@pytest.mark.parametrize("name", ["permutations", "ewens(1/2)", "forests_labelled"])
def test_tv_nonincreasing_on_grid(name):
    spec = PRESETS[name]
    rho = 1 if name != "forests_labelled" else Fraction(1) / Fraction(math.e).limit_denominator(10**12)
    law = limit_law(spec, rho, 2)
    tvs = [float(tv_distance(fdd_table(spec, n, 2), law)) for n in (20, 40, 80)]
    assert all(b <= a + 1e-12 for a, b in zip(tvs, tvs[1:]))


def test_covariance_uniform_permutations_is_zero():
    for n in (3, 5, 9):
        assert count_covariance(PERM, n, 1, 2) == 0
    # n = 2: (2,0) and (0,1) each have mass 1/2, so cov = 0 - 1 * 1/2
    assert count_covariance(PERM, 2, 1, 2) == Fraction(-1, 2)

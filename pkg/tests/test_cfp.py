from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partlab.cfp import (
    CfpModel,
    Kind,
    RateMode,
    build_rates,
    check_detailed_balance,
    coagulate,
    fragment,
    meanfield_witness,
    q_ratio,
    simulate,
    stationary_exact,
    support,
)
from partlab.errors import DomainError
from partlab.measure import PartitionState
from partlab.oracle import brute_mu, enumerate_partitions
from partlab.weights import Family, Preset, WeightSpec, rational_presets

HALF = Fraction(1, 2)
PRESETS = rational_presets()
PERM = PRESETS["permutations"]
UNIFORM = WeightSpec(Family.MULTISET, Preset("integer_partitions"), HALF)


def _pairs(eta):
    n = eta.n
    for s in range(2, n + 1):
        for i in range(1, s // 2 + 1):
            j = s - i
            if (i != j and eta[i] and eta[j]) or (i == j and eta[i] >= 2):
                yield i, j


def test_q_ratio_uniform_multiset_is_one():
    for n in range(2, 10):
        for eta in enumerate_partitions(n):
            for i, j in _pairs(eta):
                assert q_ratio(UNIFORM, eta, i, j) == 1


def test_q_ratio_permutations():
    for eta in [(2, 0), (2, 1, 0, 0), (2, 2, 0, 0, 0, 0)]:
        eta = PartitionState(eta)
        assert q_ratio(PERM, eta, 1, 1) == Fraction(2, eta[2] + 1) * HALF
        mu = brute_mu(PERM, eta.n)
        assert q_ratio(PERM, eta, 1, 1) == mu[coagulate(eta, 1, 1)] / mu[eta]


def test_q_ratio_rejects_impossible_pair():
    with pytest.raises(DomainError):
        q_ratio(PERM, (1, 1, 0), 1, 1)


def test_build_rates_examples():
    mf = CfpModel(2, PERM, RateMode.MEANFIELD)
    (t,) = build_rates(mf, (2, 0))
    assert t.kind is Kind.COAG and (t.i, t.j) == (1, 1) and t.rate == 1
    (t,) = build_rates(mf, (0, 1))
    assert t.kind is Kind.FRAG and t.rate == 1
    for n in range(2, 7):
        top = PartitionState((0,) * (n - 1) + (1,))
        assert all(t.kind is Kind.FRAG for t in build_rates(CfpModel(n, PERM), top))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_transitions_conserve_mass(name):
    model = CfpModel(7, PRESETS[name])
    for eta in support(model):
        for t in build_rates(model, eta):
            assert t.target.n == eta.n == 7
            assert t.rate > 0


@pytest.mark.parametrize("name", ["permutations", "ewens(2)", "set_partitions"])
def test_meanfield_balance(name):
    for n in range(1, 9):
        assert check_detailed_balance(CfpModel(n, PRESETS[name], RateMode.MEANFIELD)) == []


@pytest.mark.parametrize("name", ["integer_partitions", "distinct_parts", "graphs", "bose(2)"])
def test_ratio_gauge_balance(name):
    for n in range(1, 9):
        assert check_detailed_balance(CfpModel(n, PRESETS[name])) == []


def test_meanfield_needs_assembly():
    with pytest.raises(DomainError):
        CfpModel(4, UNIFORM, RateMode.MEANFIELD)


def test_perturbed_rate_gives_one_violation():
    eta = PartitionState((2, 1, 0, 0))
    model = CfpModel(4, PERM, perturb={(eta.k, Kind.COAG, 1, 2): 2})
    bad = check_detailed_balance(model)
    assert len(bad) == 1
    v = bad[0]
    assert v.lower == eta and (v.i, v.j) == (1, 2)
    assert v.lhs == 2 * v.rhs


def test_uniform_multiset_is_not_meanfield():
    witness = meanfield_witness(CfpModel(6, UNIFORM))
    assert witness is not None
    i, j, eta1, v1, eta2, v2 = witness
    assert v1 != v2
    assert meanfield_witness(CfpModel(6, PERM, RateMode.MEANFIELD)) is None


def test_stationary_examples():
    res = stationary_exact(CfpModel(3, PERM))
    assert res.pi == (Fraction(1, 6), HALF, Fraction(1, 3))
    assert stationary_exact(CfpModel(1, PERM)).pi == (1,)
    uni = stationary_exact(CfpModel(4, UNIFORM))
    assert uni.pi == (Fraction(1, 5),) * 5


@pytest.mark.parametrize("name", ["ewens(1/2)", "forests_labelled", "plane_partitions", "fermi(1)"])
def test_stationary_matches_mu(name):
    spec = PRESETS[name]
    for n in (5, 10):
        res = stationary_exact(CfpModel(n, spec))
        mu = brute_mu(spec, n)
        assert res.pi == tuple(mu[s] for s in res.states)
        assert res.residual_zero


def test_simulation_trivial_and_deterministic():
    model = CfpModel(5, PERM)
    rep = simulate(model, 0.0, seed=1)
    occ = dict(zip(rep.states, rep.occupation))
    assert occ[rep.initial] == 1.0
    a = simulate(model, 500.0, seed=7)
    b = simulate(model, 500.0, seed=7)
    assert a == b
    c = simulate(model, 500.0, seed=8)
    assert c.occupation != a.occupation


def test_simulation_histograms_for_large_n():
    model = CfpModel(30, PERM)
    rep = simulate(model, 200.0, seed=3, l=2)
    assert set(rep.histograms) == {1, 2}
    for hist in rep.histograms.values():
        assert sum(f for f, _ in hist.values()) == pytest.approx(1.0)


def test_simulation_tv_shrinks_with_time():
    spec = PRESETS["ewens(2)"]
    model = CfpModel(5, spec)
    mu = brute_mu(spec, 5)
    tvs = []
    for t_max in (50.0, 500.0, 5000.0, 50000.0):
        rep = simulate(model, t_max, seed=11)
        tvs.append(0.5 * sum(abs(o - float(mu[s])) for s, o in zip(rep.states, rep.occupation)))
    assert tvs[-1] < tvs[0]
    assert tvs[-1] < 0.02


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.data())
def test_coagulate_fragment_inverse(n, data):
    states = list(enumerate_partitions(n))
    eta = data.draw(st.sampled_from(states))
    pairs = list(_pairs(eta))
    if not pairs:
        return
    i, j = data.draw(st.sampled_from(pairs))
    up = coagulate(eta, i, j)
    assert up.n == n
    assert fragment(up, i, j) == eta

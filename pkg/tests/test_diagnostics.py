import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partlab.diagnostics import (
    Classification,
    Verdict,
    classify,
    euler_product,
    q_l_closed,
    q_l_empirical,
    ratio_report,
    richardson,
    schur_check,
    star_transform,
)
from partlab.errors import DomainError
from partlab.measure import fdd, tilt
from partlab.series import as_series, g_tilde, series_exp, tail_series
from partlab.weights import Family, Preset, WeightSpec, rational_presets, scaled_weight

HALF = Fraction(1, 2)
PRESETS = rational_presets()


def test_ratio_report_examples():
    osc = ratio_report(g_tilde(PRESETS["oscillating_demo"], 60))
    assert osc.verdict is Verdict.OSCILLATING
    even, odd = osc.subseq_limits
    assert even == pytest.approx(0.25, abs=1e-9)
    assert odd == pytest.approx(1.0, abs=1e-9)

    perm = ratio_report(g_tilde(PRESETS["permutations"], 60))
    assert perm.verdict is Verdict.RT and perm.estimate == 1.0
    assert set(perm.ratios) == {1.0}

    graphs = ratio_report(g_tilde(PRESETS["graphs"], 60))
    assert graphs.verdict is Verdict.RT
    assert graphs.estimate == pytest.approx(0.0, abs=1e-3)


def test_ratio_report_domain():
    with pytest.raises(DomainError):
        ratio_report([1] * 30, window=25)
    with pytest.raises(DomainError):
        ratio_report([1, -1] + [1] * 60)
    sparse = ratio_report([1 if n % 3 == 0 else 0 for n in range(80)], window=10)
    assert sparse.verdict is Verdict.INCONCLUSIVE


def test_ratio_report_on_float_and_log_input():
    vals = [2.0**-n for n in range(100)]
    assert ratio_report(vals).estimate == pytest.approx(2.0)


def test_richardson_removes_polynomial_corrections():
    r = [Fraction(3) + Fraction(1, n) - Fraction(2, n * n) for n in range(1, 60)]
    assert richardson(r, 59, 3) == 3


def test_q_l_examples():
    perm = PRESETS["permutations"]
    assert q_l_closed(perm, 1, 1) == pytest.approx(math.exp(-1))
    emp = q_l_empirical(perm, 1, 30)
    # T~_n / c~_n for permutations is the derangement probability D_n / n!
    d = [1, 0]
    for n in range(2, 31):
        d.append((n - 1) * (d[-1] + d[-2]))
    assert emp.values[-1] == float(Fraction(d[30], math.factorial(30)))
    assert emp.values[-1] == pytest.approx(math.exp(-1), abs=1e-12)

    for l in (1, 3):
        assert q_l_closed(PRESETS["graphs"], l, 0) == 1

    ip = WeightSpec(Family.MULTISET, Preset("integer_partitions"), HALF)
    vals = [float(v) for v in q_l_empirical(ip, 1, 200).values]
    assert all(b < a for a, b in zip(vals[-50:], vals[-49:]))
    assert vals[-1] < 0.1


@pytest.mark.parametrize("name", ["ewens(2)", "ewens(1/2)", "permutations", "forests_labelled"])
def test_q_l_cross_check_for_convergent_assemblies(name):
    res = classify(PRESETS[name])
    assert res.verdict is Classification.CONVERGENT
    for l, (emp, closed) in res.q_l_table.items():
        assert emp == pytest.approx(closed, rel=1e-3, abs=1e-3 * 1e-3), l


def test_fdd_limit_matches_product_formula():
    spec = PRESETS["ewens(2)"]
    rho = 1
    q2 = q_l_closed(spec, 2, rho)
    for prefix in ((0, 0), (1, 0), (0, 1), (2, 1)):
        limit = q2
        for j, k in enumerate(prefix, start=1):
            limit *= float(scaled_weight(spec, j, k)) * rho ** (j * k)
        assert float(fdd(spec, 400, 2, prefix)) == pytest.approx(limit, abs=1e-3)


@pytest.mark.parametrize("name", ["ewens(2)", "forests_labelled", "bose(2)"])
def test_tail_series_shares_radius(name):
    spec = PRESETS[name]
    c = ratio_report(g_tilde(spec, 400))
    t = ratio_report(tail_series(spec, 2, 400))
    assert c.verdict is Verdict.RT and t.verdict is Verdict.RT
    assert t.estimate == pytest.approx(c.estimate, rel=1e-3)


@pytest.mark.parametrize("theta", [HALF, Fraction(2)])
def test_tilting_rescales_radius(theta):
    spec = PRESETS["forests_labelled"]
    base = ratio_report(g_tilde(spec, 400)).estimate
    tilted = ratio_report(g_tilde(tilt(spec, theta), 400)).estimate
    assert tilted == pytest.approx(base / float(theta), rel=1e-3)


def test_schur_examples():
    f1 = as_series([1] * 101)
    rep = schur_check(f1, as_series([1, HALF] + [0] * 99), 1)
    assert set(rep.ratios) == {Fraction(3, 2)}
    assert rep.f2_at_rho == Fraction(3, 2)
    assert not rep.non_settling

    flat = schur_check(f1, as_series([1] + [0] * 100), 1)
    assert set(flat.ratios) == {1}
    assert flat.gap == 0

    wild = schur_check(f1, as_series([4 ** (n // 2) if n % 2 == 0 else 0 for n in range(101)]), 1)
    assert wild.non_settling


def test_star_examples():
    res = star_transform([1] * 8, 1, 8)
    assert res.mstar[4] == Fraction(7, 4)
    for j in range(1, 9):
        sigma = sum(d for d in range(1, j + 1) if j % d == 0)
        assert res.mstar[j] == Fraction(sigma, j)
    single = star_transform([1], HALF, 6)
    # exp(sum m*_j x^j) must equal 1/(1 - x/2): m*_j = (1/2)^j / j, so m*_2 = 1/8
    assert single.mstar[2] == Fraction(1, 8)
    assert single.verified
    zero = star_transform([0] * 5, HALF, 5)
    assert all(v == 0 for v in zero.mstar)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=12),
       st.fractions(min_value=Fraction(1, 10), max_value=1, max_denominator=10))
def test_star_transform_identity(m, p):
    N = 12
    res = star_transform(m, p, N, verify=False)
    assert series_exp(as_series(res.mstar), N).coeffs == euler_product(m, p, N).coeffs


def test_classify_examples():
    ip = WeightSpec(Family.MULTISET, Preset("integer_partitions"), HALF)
    assert classify(ip).verdict is Classification.DIVERGENT
    for theta in (HALF, 1, 2):
        res = classify(WeightSpec(Family.ASSEMBLY, Preset("ewens", (theta,))))
        assert res.verdict is Classification.CONVERGENT
        assert res.rho_hat == pytest.approx(1.0, rel=1e-3)
        assert res.exit_code == 0
    osc = classify(PRESETS["oscillating_demo"])
    assert osc.verdict is Classification.DIVERGENT
    assert osc.exit_code == 3


def test_classify_more_families():
    assert classify(PRESETS["plane_partitions"]).verdict is Classification.DIVERGENT
    assert classify(PRESETS["set_partitions"]).verdict is Classification.DIVERGENT
    graphs = classify(PRESETS["graphs"], N=150)
    assert graphs.verdict is Classification.CONVERGENT
    assert graphs.rho_hat == pytest.approx(0.0, abs=1e-3)


def test_classify_selection_in_float_mode():
    res = classify(PRESETS["distinct_parts"], mode="float")
    assert res.verdict is Classification.CONVERGENT
    # ratios approach 1/p only like n^(-1/2) for distinct parts
    assert res.rho_hat == pytest.approx(2.0, rel=1e-2)


def test_classify_record_fields():
    rec = classify(PRESETS["permutations"], N=100).record()
    assert rec["verdict"] == "Convergent"
    assert rec["threshold"] == "inf"
    assert rec["ratio_verdict"].startswith("RT(")

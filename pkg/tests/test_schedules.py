import math
import warnings

import numpy as np
import pytest
from conftest import declared_problem
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import regime1_exact, regime2_exact, regime2_root_exact

from ttsa.exceptions import AdmissibilityError, SideConditionWarning, StructuralError
from ttsa.schedules import (Regime, Schedule, alpha_at, beta_at, bound_curve, build_schedule,
                            compute_constants_regime1, compute_constants_regime2, relaxed_floor)

# Worked instance: lam = mu = 0.5, L = 1, c1 = 1, S0 = 1, x* = y* = 0, beta = 4.
# Values frozen from the exact rational evaluation in tests/oracles.py.
GOLDEN_R1 = dict(C1=1 / 1160, alpha=4640.0, C2=6200552576.0, Gamma2=74.0, C3=25146634272.0, C4=251466342720.0)
GOLDEN_R2_ROOT = 94604.0
GOLDEN_R2 = dict(D1=80101011013319577856.0, Gamma3=218.0, D2=320404044053278811112.0,
                 D3=3204040440532788111120.0)


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture
def worked():
    return declared_problem(0.5, 0.5, 1.0, c1=1.0)


def test_frozen_values_match_exact_oracle():
    r1 = regime1_exact(0.5, 0.5, 1, 1, 1, 4)
    for k, v in GOLDEN_R1.items():
        assert float(r1[k]) == v
    root = regime2_root_exact(0.5, 0.5, 1, 1, 4, 1)
    assert root == GOLDEN_R2_ROOT
    r2 = regime2_exact(0.5, 0.5, 1, 1, 1, 4, 1, root ** 4)
    assert float(root ** 4) == GOLDEN_R2["D1"]
    for k in ("Gamma3", "D2", "D3"):
        assert float(r2[k]) == GOLDEN_R2[k]


def test_regime1_golden(worked):
    c = compute_constants_regime1(worked, 4640.0, 4.0, 1.0)
    assert rel(c.C1, GOLDEN_R1["C1"]) <= 1e-12
    assert rel(c.C2, GOLDEN_R1["C2"]) <= 1e-12
    assert rel(c.Gamma2, GOLDEN_R1["Gamma2"]) <= 1e-12
    assert rel(c.C3, GOLDEN_R1["C3"]) <= 1e-12
    assert rel(c.C4, GOLDEN_R1["C4"]) <= 1e-12
    assert c.offset == c.C2


def test_regime2_golden(worked):
    c = compute_constants_regime2(worked, 1.0, 4.0, 0.75, 1.0)
    for k, v in GOLDEN_R2.items():
        assert rel(getattr(c, k), v) <= 1e-12


def test_unit_constants_give_one_ninetieth():
    p = declared_problem(0.0, 0.0, 1.0)
    c = compute_constants_regime1(p, 200.0, 2.0, 0.0)
    assert c.C1 == 1 / 90


def test_noiseless_zero_start_degenerate():
    p = declared_problem(0.0, 0.0, 1.0)
    c = compute_constants_regime1(p, 200.0, 2.0, 0.0)
    assert c.Gamma2 == 2.0
    assert c.C3 == 0.0
    assert c.C4 == 0.0


def test_single_term_d1_degenerate():
    # with L -> 0 and c1 = 0 only 4 alpha/lam', 5 beta/(lam' mu' alpha) and beta/alpha^2 remain
    p = declared_problem(0.0, 0.0, 1e-12)
    a = 0.5 + 1e-3
    c = compute_constants_regime2(p, 1.0, 2.0, a, 0.0)
    root = 4.0 + 5 * 2.0 + 2.0
    assert rel(c.D1, root ** (1 / (1 - a))) < 1e-6


def test_d3_over_d2(worked):
    c = compute_constants_regime2(worked, 2.0, 5.0, 0.6, 3.0, offset=1e5)
    L0 = worked.derived.L0
    assert rel(c.D3 / c.D2, 2 * (L0 ** 2 + 1)) < 1e-14


def test_beta_too_small_rejected(worked):
    with pytest.raises(AdmissibilityError, match=r"beta >= 2/\(1-mu\)"):
        compute_constants_regime1(worked, 1000.0, 3.9, 1.0)
    with pytest.raises(AdmissibilityError, match=r"beta >= 2/\(1-mu\)"):
        compute_constants_regime2(worked, 1.0, 3.9, 0.75, 1.0)


@pytest.mark.parametrize("a", [0.5, 1.0, 0.2, 1.3])
def test_exponent_outside_range_rejected(worked, a):
    with pytest.raises(AdmissibilityError):
        compute_constants_regime2(worked, 1.0, 4.0, a, 1.0)


def test_step_size_examples():
    s1 = Schedule(Regime.BOTH_ONE_OVER_K, 2.0, 4.0, 8.0)
    assert alpha_at(s1, 0) == 0.25
    assert beta_at(s1, 0) == 0.5
    assert beta_at(s1, 8) == 0.25
    s2 = Schedule(Regime.FAST_ONE_OVER_K_A, 1.0, 4.0, 16.0, exponent_a=0.75)
    assert alpha_at(s2, 0) == 0.125


@given(k=st.integers(0, 10 ** 7), alpha=st.floats(0.1, 1e4), beta=st.floats(0.1, 1e3), off=st.floats(1, 1e6))
def test_ratio_constant_in_regime1(k, alpha, beta, off):
    s = Schedule(Regime.BOTH_ONE_OVER_K, alpha, beta, off)
    assert math.isclose(s.alpha_at(k) / s.beta_at(k), alpha / beta, rel_tol=1e-13)


@given(alpha=st.floats(0.1, 10), beta=st.floats(0.1, 10), off=st.floats(1, 1e4), a=st.floats(0.51, 0.99))
def test_steps_positive_nonincreasing(alpha, beta, off, a):
    for s in (Schedule(Regime.BOTH_ONE_OVER_K, alpha, beta, off),
              Schedule(Regime.FAST_ONE_OVER_K_A, alpha, beta, off, exponent_a=a)):
        al, be = s.alphas(0, 2000), s.betas(0, 2000)
        assert np.all(al > 0) and np.all(be > 0)
        assert np.all(np.diff(al) <= 0) and np.all(np.diff(be) <= 0)


def test_regime2_ratio_vanishes():
    s = Schedule(Regime.FAST_ONE_OVER_K_A, 1.0, 4.0, 100.0, exponent_a=0.75)
    r = [s.beta_at(k) / s.alpha_at(k) for k in (0, 10 ** 3, 10 ** 6)]
    assert r[0] > r[1] > r[2]
    assert r[2] < 1e-1 * r[0]


def test_beta_below_alpha_from_strict_offset(polyak, strict_problem):
    """With K2 >= D1, beta_k <= alpha_k over k in [0, 1e6] for the acceptance parameterisations."""
    for p in (polyak, strict_problem):
        s = build_schedule(p, "fast_one_over_k_a", beta=4, a=0.75, strict=True)
        ks = np.concatenate((np.arange(0, 1000), np.geomspace(1000, 1e6, 500)))
        assert np.all(s.beta_at(ks) <= s.alpha_at(ks))


def test_bound_curve_examples():
    p = declared_problem(0.0, 0.0, 1.0)
    s = Schedule(Regime.BOTH_ONE_OVER_K, 200.0, 2.0, 10.0)
    c = compute_constants_regime1(p, 200.0, 2.0, 0.0, offset=10.0)
    c = type(c)(**{**c.__dict__, "C3": 90.0})
    assert bound_curve(c, s, 0) == 9.0
    ks = np.arange(0, 100)
    assert np.all(np.diff(bound_curve(c, s, ks)) <= 0)
    s2 = Schedule(Regime.FAST_ONE_OVER_K_A, 1.0, 2.0, 50.0, exponent_a=0.75)
    c2 = compute_constants_regime2(p, 1.0, 2.0, 0.75, 1.0, offset=50.0)
    assert math.isclose(bound_curve(c2, s2, 50), c2.D2 / 100 ** 0.75, rel_tol=1e-15)
    assert math.isclose(bound_curve(c2, s2, 50, which="x"), c2.D3 / 100 ** 0.75, rel_tol=1e-15)


def test_bound_curve_regime_mismatch():
    p = declared_problem(0.0, 0.0, 1.0)
    c = compute_constants_regime1(p, 200.0, 2.0, 0.0)
    s = Schedule(Regime.FAST_ONE_OVER_K_A, 1.0, 2.0, 50.0, exponent_a=0.75)
    with pytest.raises(StructuralError):
        bound_curve(c, s, 0)


def test_build_schedule_defaults(polyak):
    s = build_schedule(polyak, "both_one_over_k", beta=4, min_offset=100)
    c = s.constants
    assert s.alpha == 4 / c.C1
    assert s.offset == max(100.0, relaxed_floor(Regime.BOTH_ONE_OVER_K, s.alpha, 4.0))
    assert s.alpha_at(0) <= 1 and s.beta_at(0) <= 1
    assert s.valid_from == math.ceil(c.C2 - s.offset)


def test_build_schedule_rejects_large_ratio(polyak):
    with pytest.raises(AdmissibilityError, match="beta/alpha <= C1"):
        build_schedule(polyak, "both_one_over_k", beta=4, alpha=10.0)


def test_strict_offset_enforced(strict_problem):
    with pytest.raises(AdmissibilityError, match="offset >= C2"):
        build_schedule(strict_problem, "both_one_over_k", beta=4, offset=100.0, strict=True)
    with pytest.raises(AdmissibilityError, match="offset >= D1"):
        build_schedule(strict_problem, "fast_one_over_k_a", beta=4, a=0.75, offset=100.0, strict=True)


def test_strict_schedule_satisfies_its_inequalities(strict_problem):
    for kw in ({"regime": "both_one_over_k"}, {"regime": "fast_one_over_k_a", "a": 0.75}):
        s = build_schedule(strict_problem, beta=4, strict=True, **kw)
        c = s.constants
        assert s.beta >= 2 / (1 - strict_problem.mu)
        assert s.offset >= c.offset_floor
        if s.regime is Regime.BOTH_ONE_OVER_K:
            assert s.beta / s.alpha <= c.C1 * (1 + 1e-12)
        assert s.valid_from == 0


def test_side_condition_warning_only_in_strict(polyak):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = build_schedule(polyak, "both_one_over_k", beta=4, min_offset=100)
    assert s.side_violations
    # weak coupling makes C1 large enough that 9 beta_0/mu' <= alpha_0/lam' fails even at the strict offset
    weak = declared_problem(0.0, 0.0, 0.1)
    with pytest.warns(SideConditionWarning, match="9 beta_0/mu'"):
        build_schedule(weak, "both_one_over_k", beta=2, strict=True)


def test_regime_mismatch_arguments(polyak):
    with pytest.raises(StructuralError):
        build_schedule(polyak, "both_one_over_k", beta=4, a=0.75)
    with pytest.raises(StructuralError):
        build_schedule(polyak, "fast_one_over_k_a", beta=4)


def test_constants_text_is_flat_and_round_trips(worked):
    c = compute_constants_regime1(worked, 4640.0, 4.0, 1.0)
    parsed = dict(line.split(" = ", 1) for line in c.to_text().strip().splitlines())
    assert parsed["regime"] == "both_one_over_k"
    assert float(parsed["C3"]) == c.C3
    assert float(parsed["C1"]) == c.C1


@settings(max_examples=60)
@given(lam=st.floats(0, 0.95), mu=st.floats(0, 0.95), L=st.floats(0.05, 5), c1=st.floats(0, 3),
       S0=st.floats(0, 10), extra=st.floats(0, 5))
def test_constants_pure_and_consistent(lam, mu, L, c1, S0, extra):
    p = declared_problem(lam, mu, L, c1=c1)
    beta = 2 / (1 - mu) + extra
    c1_ = compute_constants_regime1(p, 1.0, beta, S0, offset=1.0).C1
    alpha = beta / c1_
    a = compute_constants_regime1(p, alpha, beta, S0)
    b = compute_constants_regime1(p, alpha, beta, S0)
    assert a == b
    assert a.C4 == 2 * (a.L0 ** 2 + 1) * a.C3
    assert p.derived.L0 == L / (1 - lam)
    r2 = compute_constants_regime2(p, 1.0, beta, 0.75, S0, offset=10.0)
    assert r2.D3 == 2 * (r2.L0 ** 2 + 1) * r2.D2
    assert r2.Gamma3 >= a.Gamma2

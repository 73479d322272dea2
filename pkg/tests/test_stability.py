import logging
import math

import numpy as np
import pytest

from core_types import (
    ZERO_EIGENVALUE,
    DimensionMismatchError,
    Equilibrium,
    NoConvergenceError,
    NonFiniteStateError,
    OrderOutOfRangeError,
    ParamSet,
    RuleFamilyMismatchError,
    StabilityVerdict,
    VerdictKind,
)
from stability import (
    RuleId,
    applicable_rule,
    characteristic_polynomial,
    claim_matches,
    classify_closed_form,
    critical_order,
    cross_check,
    eigvals_equilibrium,
    eigvals_general,
    make_eigen_set,
    matignon,
    order_sweep,
    stable_interval,
    verdicts_agree,
)

P_311 = ParamSet(a=-0.8, b=-0.2, c1=-0.03, c2=-0.02, c3=-0.001, q=0.8)
P_321 = ParamSet(a=-0.45, b=1.0, c1=-0.2, c2=-0.15, c3=1.01, q=0.8)


def test_origin_eigenvalues_and_verdict():
    eig = eigvals_equilibrium(Equilibrium(), P_311)
    assert eig.lambdas == (-0.8, -0.03, -0.02, -0.001, -0.2)
    assert eig.q_tilde == pytest.approx(2.0)
    assert matignon(eig, 0.8).kind is VerdictKind.ASYMPTOTICALLY_STABLE


def test_k_one_family_has_positive_fourth_eigenvalue():
    eig = eigvals_equilibrium(Equilibrium(1.0, 0.6), P_321)
    assert eig.lambdas[3] == pytest.approx(2.01)
    assert eig.q_tilde == 0.0
    verdict = matignon(eig, 0.8)
    assert verdict.kind is VerdictKind.UNSTABLE
    assert verdict.witness == pytest.approx(2.01)


def test_uncontrolled_has_double_zero():
    eig = eigvals_equilibrium(Equilibrium(1.0, 0.6), P_311, controlled=False)
    assert eig.q_tilde is ZERO_EIGENVALUE
    assert matignon(eig, 0.5).kind is VerdictKind.UNSTABLE_ZERO_EIGENVALUE


def test_characteristic_polynomial_roots():
    coeffs = characteristic_polynomial(Equilibrium(0.5, 0.0), ParamSet(-1, 0.32, -0.25, -0.12, -1.05, 0.8))
    assert coeffs[0] == 1.0
    roots = np.sort(np.roots(coeffs).real)
    assert np.allclose(roots, np.sort([-1.0, -0.25, -0.12, -0.55, -0.18]))


@pytest.mark.parametrize(
    "lambdas, q, expected",
    [
        ([1j, -1, -1, -1, -1], 0.5, VerdictKind.ASYMPTOTICALLY_STABLE),
        ([1j, -1, -1, -1, -1], 0.999, VerdictKind.ASYMPTOTICALLY_STABLE),
        ([1j, -1, -1, -1, -1], 1.0, VerdictKind.CRITICALLY_STABLE),
        ([1j, 1j, -1, -1, -1], 1.0, VerdictKind.UNSTABLE),
        ([1 + 1j, 1 - 1j, -1, -1, -1], 0.5, VerdictKind.CRITICALLY_STABLE),
        ([1 + 1j, 1 - 1j, -1, -1, -1], 0.6, VerdictKind.UNSTABLE),
        ([0.0, -1, -1, -1, -1], 0.5, VerdictKind.UNSTABLE_ZERO_EIGENVALUE),
    ],
)
def test_matignon_cases(lambdas, q, expected):
    assert matignon(make_eigen_set(lambdas), q).kind is expected


def test_matignon_boundary_order_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="stability"):
        matignon(make_eigen_set([-1] * 5), 1.0)
    assert "q=1" in caplog.text


@pytest.mark.parametrize("q", [0.0, 1.5, -0.1, math.nan])
def test_matignon_rejects_order(q):
    with pytest.raises(OrderOutOfRangeError, match=r"outside \(0, 1\]"):
        matignon(make_eigen_set([-1] * 5), q)


def test_critical_order_values():
    assert critical_order([1 + 1j, 1 - 1j, -1, -1, -1]) == pytest.approx(0.5)
    assert critical_order([-1] * 5) == pytest.approx(2.0)
    assert critical_order([0, -1, -1, -1, -1]) is ZERO_EIGENVALUE


def test_verdict_flips_at_critical_order():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        lambdas = rng.normal(size=5) + 1j * rng.normal(size=5)
        eig = make_eigen_set(lambdas)
        if eig.q_tilde is ZERO_EIGENVALUE or not 0.01 < eig.q_tilde < 0.99:
            continue
        below, above = order_sweep(eig, [eig.q_tilde - 1e-6, eig.q_tilde + 1e-6])
        assert below.kind is VerdictKind.ASYMPTOTICALLY_STABLE
        assert above.kind is VerdictKind.UNSTABLE
        checked += 1


def test_eigvals_general_triangular_fast_path(mocker):
    spy = mocker.patch("stability.np.linalg.eigvals")
    eig = eigvals_general(np.diag([-1.0, -2.0, 3.0, 0.5, -0.5]))
    spy.assert_not_called()
    assert eig.lambdas == (-1, -2, 3, 0.5, -0.5)


def test_eigvals_general_dense_matrix():
    # companion matrix of lambda^5 - 1
    companion = np.zeros((5, 5))
    companion[1:, :4] = np.eye(4)
    companion[0, 4] = 1.0
    lams = np.array(eigvals_general(companion).lambdas)
    assert np.allclose(np.abs(lams), 1.0, rtol=0, atol=1e-9)
    assert np.allclose(lams ** 5, 1.0, rtol=0, atol=1e-9)
    assert len({round(float(np.angle(z)), 6) for z in lams}) == 5
    rotation = np.zeros((5, 5))
    rotation[0, 1], rotation[1, 0] = -1.0, 1.0
    rotation[2:, 2:] = -np.eye(3)
    rotation[2, 3] = 0.5
    lams = eigvals_general(rotation).lambdas
    assert any(abs(z - 1j) < 1e-12 for z in lams)


def test_eigvals_general_errors(mocker):
    with pytest.raises(DimensionMismatchError):
        eigvals_general(np.eye(4))
    bad = np.eye(5)
    bad[2, 3] = math.nan
    with pytest.raises(NonFiniteStateError):
        eigvals_general(bad)
    mocker.patch("stability.np.linalg.eigvals", side_effect=np.linalg.LinAlgError("no convergence"))
    dense = np.ones((5, 5))
    with pytest.raises(NoConvergenceError) as info:
        eigvals_general(dense)
    assert info.value.partial == ()


@pytest.mark.parametrize(
    "k, m, rule",
    [(0, 0, RuleId.P31), (0.5, 0, RuleId.C31), (0, -1, RuleId.C32), (-1, -1, RuleId.C33), (1, 0.6, RuleId.P32)],
)
def test_applicable_rule(k, m, rule):
    assert applicable_rule(Equilibrium(k, m)) is rule


def test_rule_family_mismatch():
    with pytest.raises(RuleFamilyMismatchError):
        classify_closed_form(RuleId.C31, Equilibrium(0.0, 1.0), P_311)
    with pytest.raises(RuleFamilyMismatchError):
        classify_closed_form("P31", Equilibrium(1.0, 0.0), P_311)


@pytest.mark.parametrize(
    "rule, p, k, m, expected",
    [
        ("P31", P_311, 0, 0, VerdictKind.ASYMPTOTICALLY_STABLE),
        ("P31", P_311.replace(b=0.2), 0, 0, VerdictKind.UNSTABLE),
        ("P31", P_311.replace(a=0.3), 0, 0, VerdictKind.UNSTABLE),
        ("P32", P_321, 1, 0.6, VerdictKind.UNSTABLE),
        ("P32", P_321, -1, 0.6, VerdictKind.UNSTABLE),
        ("P32", P_321, -2, -4, VerdictKind.ASYMPTOTICALLY_STABLE),
        ("C31", ParamSet(-1, 0.32, -0.25, -0.12, -1.05, 0.8), 0.5, 0, VerdictKind.ASYMPTOTICALLY_STABLE),
        ("C31", ParamSet(-1, 1.2, -0.25, -0.12, -1.05, 0.8), 0.5, 0, VerdictKind.UNSTABLE),
        ("C32", ParamSet(-0.9, 0.08, -0.4, -0.22, -0.06, 0.8), 0, -1, VerdictKind.ASYMPTOTICALLY_STABLE),
        ("C32", ParamSet(-0.9, 1.0, -0.4, -0.22, -0.06, 0.8), 0, 0.5, VerdictKind.UNSTABLE),
        ("C33", ParamSet(-0.75, -0.81, -0.36, -0.01, 0.48, 0.8), -1, -1, VerdictKind.ASYMPTOTICALLY_STABLE),
        ("C33", ParamSet(-0.75, -0.81, -0.36, -0.01, 0.48, 0.8), 0.5, 0.5, VerdictKind.UNSTABLE),
    ],
)
def test_closed_form_examples(rule, p, k, m, expected):
    assert classify_closed_form(rule, Equilibrium(k, m), p).kind is expected


def test_closed_form_boundary_is_undetermined():
    verdict = classify_closed_form("P32", Equilibrium(-1.01, -5.0), P_321)
    assert verdict.kind is VerdictKind.UNDETERMINED


def test_k_one_family_note_names_clause():
    verdict = classify_closed_form("P32", Equilibrium(1.0, 0.6), P_321)
    assert verdict.note == "P32 1(ii): k > -c3"
    assert verdict.witness == pytest.approx(2.01)


def random_nonzero(rng, size, low=0.05, high=2.0):
    return rng.uniform(low, high, size=size) * rng.choice([-1.0, 1.0], size=size)


def equilibrium_for(rule, rng):
    k, m = random_nonzero(rng, 2, high=3.0)
    return {
        RuleId.P31: Equilibrium(0.0, 0.0),
        RuleId.C31: Equilibrium(k, 0.0),
        RuleId.C32: Equilibrium(0.0, m),
        RuleId.C33: Equilibrium(m, m),
        RuleId.P32: Equilibrium(k, m),
    }[rule]


@pytest.mark.slow
@pytest.mark.parametrize("rule", list(RuleId))
def test_closed_form_agrees_with_eigenvalues(rule):
    rng = np.random.default_rng(list(RuleId).index(rule))
    for _ in range(10_000):
        p = ParamSet(*random_nonzero(rng, 5), q=float(rng.uniform(0.05, 0.95)))
        xe = equilibrium_for(rule, rng)
        closed = classify_closed_form(rule, xe, p)
        eigen = matignon(eigvals_equilibrium(xe, p), p.q)
        agree = verdicts_agree(closed, eigen)
        assert agree is not False, f"{rule.value} at {xe}, {p}: {closed} vs {eigen}"


def test_p32_stable_region_agrees():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        a, c1, c2 = -rng.uniform(0.05, 2.0, size=3)
        b, c3 = random_nonzero(rng, 2)
        k = -c3 - rng.uniform(0.01, 3.0)
        m = k - b - rng.uniform(0.01, 3.0)
        p = ParamSet(a, b, c1, c2, c3, q=float(rng.uniform(0.05, 0.95)))
        xe = Equilibrium(k, m)
        assert classify_closed_form(RuleId.P32, xe, p).kind is VerdictKind.ASYMPTOTICALLY_STABLE
        assert matignon(eigvals_equilibrium(xe, p), p.q).kind is VerdictKind.ASYMPTOTICALLY_STABLE


def test_stable_interval():
    assert stable_interval("C31", ParamSet(-1, 0.32, -0.25, -0.12, -1.05, 0.8)) == (0.32, 1.05)
    assert stable_interval("C32", ParamSet(-0.9, 0.08, -0.4, -0.22, -0.06, 0.8)) == (-math.inf, -0.08)
    assert stable_interval("C33", ParamSet(-0.75, -0.81, -0.36, -0.01, 0.48, 0.8)) == (-math.inf, -0.48)
    assert stable_interval("P32", P_321, k=1.0) is None
    assert stable_interval("C31", ParamSet(-1, 1.2, -0.25, -0.12, -1.05, 0.8)) is None
    with pytest.raises(ValueError):
        stable_interval("P32", P_321)


def test_verdicts_agree_rules():
    undetermined = StabilityVerdict(VerdictKind.UNDETERMINED)
    unstable = StabilityVerdict(VerdictKind.UNSTABLE, 1.0)
    zero = StabilityVerdict(VerdictKind.UNSTABLE_ZERO_EIGENVALUE, 0.0)
    stable = StabilityVerdict(VerdictKind.ASYMPTOTICALLY_STABLE, -1.0)
    assert verdicts_agree(undetermined, stable) is None
    assert verdicts_agree(unstable, zero) is True
    assert verdicts_agree(stable, unstable) is False


def test_claim_matches():
    assert claim_matches("unstable", StabilityVerdict(VerdictKind.UNSTABLE_ZERO_EIGENVALUE))
    assert not claim_matches("stable", StabilityVerdict(VerdictKind.CRITICALLY_STABLE))
    with pytest.raises(ValueError):
        claim_matches("maybe", StabilityVerdict(VerdictKind.UNSTABLE))


def test_cross_check_flags_stated_claim():
    report = cross_check(Equilibrium(1.0, 0.6), P_321, 0.8, claim="stable")
    assert report.rule is RuleId.P32
    assert report.agree is True
    assert report.claim_agrees is False
    assert report.flagged


def test_cross_check_logs_disagreement(caplog, mocker):
    mocker.patch(
        "stability.classify_closed_form",
        return_value=StabilityVerdict(VerdictKind.UNSTABLE, 1.0, "forced"),
    )
    with caplog.at_level(logging.ERROR, logger="stability"):
        report = cross_check(Equilibrium(), P_311, 0.8)
    assert report.agree is False
    assert "disagree" in caplog.text


def test_order_grid_flips_once():
    eig = make_eigen_set([1 + 1j, 1 - 1j, -2.0, -0.5 + 3j, -0.5 - 3j])
    qs = np.linspace(0.005, 0.995, 100)
    kinds = [v.kind for v in order_sweep(eig, qs)]
    flips = [i for i in range(1, len(kinds)) if kinds[i] is not kinds[i - 1]]
    assert len(flips) == 1
    assert qs[flips[0] - 1] < 0.5 < qs[flips[0]]
    assert kinds[0] is VerdictKind.ASYMPTOTICALLY_STABLE and kinds[-1] is VerdictKind.UNSTABLE


def test_characteristic_polynomial_matches_jacobian():
    from systems import jacobian_controlled, jacobian_uncontrolled

    xe = Equilibrium(1.0, 0.6)
    state = np.array([0.0, 1.0, 0.6, 0.0, 0.0])
    assert np.allclose(characteristic_polynomial(xe, P_321), np.poly(jacobian_controlled(state, P_321, xe)))
    assert np.allclose(
        characteristic_polynomial(xe, P_321, controlled=False), np.poly(jacobian_uncontrolled(state, P_321))
    )

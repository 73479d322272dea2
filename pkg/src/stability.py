"""
Eigenvalues, the fractional (Matignon) stability test and the closed-form
stability regions of the controlled lattice.

Two routes classify an equilibrium:

* eigenvalue route: eigvals_equilibrium (or eigvals_general on a Jacobian)
  followed by matignon;
* closed-form route: classify_closed_form, which evaluates the sign/interval
  conditions of the region rules literally.

cross_check runs both and reports whether they agree.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from core_types import (
    ZERO_EIGENVALUE,
    DimensionMismatchError,
    EigenSet,
    Equilibrium,
    EquilibriumFamily,
    NoConvergenceError,
    NonFiniteStateError,
    OrderOutOfRangeError,
    ParamSet,
    RuleFamilyMismatchError,
    StabilityVerdict,
    VerdictKind,
    equilibrium_family,
)

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-12
ARG_TOL = 1e-9
TRIANGULAR_TOL = 1e-14


def _critical_order_of(lambdas):
    lams = np.asarray(lambdas, dtype=complex)
    if np.any(np.abs(lams) <= ZERO_TOL):
        return ZERO_EIGENVALUE
    q_tilde = (2.0 / math.pi) * float(np.min(np.abs(np.angle(lams))))
    return min(max(q_tilde, 0.0), 2.0)


def make_eigen_set(lambdas) -> EigenSet:
    lams = tuple(complex(v) for v in lambdas)
    return EigenSet(lams, _critical_order_of(lams))


def eigvals_equilibrium(xe: Equilibrium, p: ParamSet, controlled: bool = True) -> EigenSet:
    """
    Closed-form eigenvalues of the Jacobian at e23^{k,m}.

    The Jacobian at any equilibrium of the family is diagonal, so the
    eigenvalues are its diagonal: (a, c1, c2, c3 + k, b - k + m) for the
    controlled system, (a, 0, 0, k, m - k + b) for the uncontrolled one.
    """
    k, m = xe.k, xe.m
    if controlled:
        lambdas = (p.a, p.c1, p.c2, p.c3 + k, p.b - k + m)
    else:
        lambdas = (p.a, 0.0, 0.0, k, m - k + p.b)
    return make_eigen_set(lambdas)


def characteristic_polynomial(xe: Equilibrium, p: ParamSet, controlled: bool = True) -> np.ndarray:
    """Monic coefficients of det(lambda*I - J) at the equilibrium, highest power first."""
    roots = [v.real for v in eigvals_equilibrium(xe, p, controlled).lambdas]
    return np.real(np.poly(roots))


def _is_triangular(m: np.ndarray) -> bool:
    return bool(
        np.all(np.abs(np.tril(m, -1)) <= TRIANGULAR_TOL)
        or np.all(np.abs(np.triu(m, 1)) <= TRIANGULAR_TOL)
    )


def eigvals_general(M) -> EigenSet:
    """
    All eigenvalues of a 5x5 real matrix.

    Triangular matrices return their diagonal directly; everything else goes
    through LAPACK's Hessenberg reduction and shifted QR (numpy.linalg.eigvals).

    Raises:
        DimensionMismatchError: If M is not 5x5.
        NonFiniteStateError: If M has NaN/Inf entries.
        NoConvergenceError: If the QR iteration does not converge.
    """
    m = np.asarray(M, dtype=float)
    if m.shape != (5, 5):
        raise DimensionMismatchError(f"Expected a 5x5 matrix, got shape {m.shape}.")
    if not np.all(np.isfinite(m)):
        raise NonFiniteStateError("Matrix has non-finite entries.")
    if _is_triangular(m):
        return make_eigen_set(np.diag(m))
    try:
        lambdas = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(f"Eigenvalue iteration did not converge: {exc}") from exc
    return make_eigen_set(lambdas)


def _check_order(q):
    if not (math.isfinite(q) and 0 < q <= 1):
        raise OrderOutOfRangeError(q, "(0, 1]")
    if q == 1:
        logger.warning("Order q=1 is on the boundary of (0, 1); classifying anyway.")


def matignon(e: EigenSet, q: float) -> StabilityVerdict:
    """
    Classify an equilibrium from its Jacobian eigenvalues.

    Args:
        e (EigenSet): Eigenvalues of the Jacobian at the equilibrium.
        q (float): Fractional order in (0, 1).

    Returns:
        StabilityVerdict: UnstableZeroEigenvalue if some |lambda| <= ZERO_TOL;
        Unstable if some |arg lambda| < q*pi/2 (beyond ARG_TOL);
        CriticallyStable inside the ARG_TOL band when the critical eigenvalues
        are simple; AsymptoticallyStable otherwise.

    Raises:
        OrderOutOfRangeError: If q is not in (0, 1]. q = 1 only logs a warning.
    """
    _check_order(q)
    lams = np.asarray(e.lambdas, dtype=complex)
    zero = np.flatnonzero(np.abs(lams) <= ZERO_TOL)
    if zero.size:
        return StabilityVerdict(VerdictKind.UNSTABLE_ZERO_EIGENVALUE, complex(lams[zero[0]]))

    args = np.abs(np.angle(lams))
    threshold = q * math.pi / 2.0
    i = int(np.argmin(args))
    gap = args[i] - threshold
    witness = complex(lams[i])
    if gap < -ARG_TOL:
        return StabilityVerdict(VerdictKind.UNSTABLE, witness)
    if gap <= ARG_TOL:
        critical = lams[np.abs(args - threshold) <= ARG_TOL]
        for lam in critical:
            repeats = np.sum(np.abs(lams - lam) <= ARG_TOL * max(1.0, abs(lam)))
            if repeats > 1:
                return StabilityVerdict(
                    VerdictKind.UNSTABLE, complex(lam), "repeated critical eigenvalue"
                )
        return StabilityVerdict(VerdictKind.CRITICALLY_STABLE, witness)
    return StabilityVerdict(VerdictKind.ASYMPTOTICALLY_STABLE, witness)


def critical_order(e):
    """
    Largest order below which the Matignon test passes.

    q_tilde = (2/pi) * min |arg lambda|, clamped to [0, 2]; ZERO_EIGENVALUE when
    any eigenvalue vanishes. Accepts an EigenSet or a plain sequence.
    """
    lambdas = e.lambdas if isinstance(e, EigenSet) else e
    return _critical_order_of(lambdas)


def order_sweep(e: EigenSet, qs):
    return [matignon(e, q) for q in qs]


class RuleId(Enum):
    P31 = "P31"
    P32 = "P32"
    C31 = "C31"
    C32 = "C32"
    C33 = "C33"


@dataclass(frozen=True)
class RegionRule:
    rule_id: RuleId
    verdict: VerdictKind
    quantifier: str
    family: str


RULES = {
    RuleId.P31: RegionRule(
        RuleId.P31, VerdictKind.ASYMPTOTICALLY_STABLE,
        "e0 for all q in (0,1) when a, b, c1, c2, c3 < 0", "e0",
    ),
    RuleId.P32: RegionRule(
        RuleId.P32, VerdictKind.ASYMPTOTICALLY_STABLE,
        "e23^{k,m} for k in (-inf, -c3), m in (-inf, k-b) when a, c1, c2 < 0", "E1",
    ),
    RuleId.C31: RegionRule(
        RuleId.C31, VerdictKind.ASYMPTOTICALLY_STABLE,
        "e2^k for k in (b, -c3) when a, c1, c2 < 0 and b < -c3", "E1^1",
    ),
    RuleId.C32: RegionRule(
        RuleId.C32, VerdictKind.ASYMPTOTICALLY_STABLE,
        "e3^m for m in (-inf, -b) when a, c1, c2, c3 < 0", "E1^2",
    ),
    RuleId.C33: RegionRule(
        RuleId.C33, VerdictKind.ASYMPTOTICALLY_STABLE,
        "e23^{m,m} for m in (-inf, -c3) when a, c1, c2, b < 0", "E1^3",
    ),
}

_RULE_FOR_FAMILY = {
    EquilibriumFamily.ORIGIN: RuleId.P31,
    EquilibriumFamily.E1_1: RuleId.C31,
    EquilibriumFamily.E1_2: RuleId.C32,
    EquilibriumFamily.E1_3: RuleId.C33,
    EquilibriumFamily.E1: RuleId.P32,
}


def applicable_rule(xe: Equilibrium) -> RuleId:
    return _RULE_FOR_FAMILY[equilibrium_family(xe)]


def _check_family(rule: RuleId, xe: Equilibrium):
    k, m = xe.k, xe.m
    ok = {
        RuleId.P31: k == 0 and m == 0,
        RuleId.P32: not (k == 0 and m == 0),
        RuleId.C31: m == 0 and k != 0,
        RuleId.C32: k == 0 and m != 0,
        RuleId.C33: k == m and m != 0,
    }[rule]
    if not ok:
        raise RuleFamilyMismatchError(
            f"Rule {rule.value} applies to {RULES[rule].family}, not to e23^{{{k},{m}}}."
        )


def _stable(lambdas, note):
    return StabilityVerdict(VerdictKind.ASYMPTOTICALLY_STABLE, complex(max(lambdas)), note)


def _unstable(witness, note):
    return StabilityVerdict(VerdictKind.UNSTABLE, complex(witness), note)


def _undetermined(note):
    return StabilityVerdict(VerdictKind.UNDETERMINED, None, note)


def classify_closed_form(rule, xe: Equilibrium, p: ParamSet) -> StabilityVerdict:
    """
    Evaluate a region rule's sign and interval conditions as stated.

    Clause 2 (a > 0) and clauses 1(ii)/1(iii) give Unstable, clause 1(i) gives
    AsymptoticallyStable. Parameter corners no clause covers (for example
    k = -c3 exactly) give Undetermined rather than a guess.

    Args:
        rule (RuleId | str): One of P31, P32, C31, C32, C33.
        xe (Equilibrium): The equilibrium; must belong to the rule's family.
        p (ParamSet): System and control parameters.

    Raises:
        RuleFamilyMismatchError: If xe is not in the rule's family.
    """
    rule = RuleId(rule) if not isinstance(rule, RuleId) else rule
    _check_family(rule, xe)
    a, b, c1, c2, c3 = p.a, p.b, p.c1, p.c2, p.c3
    k, m = xe.k, xe.m
    # lam4 < 0 <=> k < -c3, lam5 < 0 <=> m < k - b
    lam4 = c3 + k
    lam5 = b - k + m

    if a > 0:
        return _unstable(a, f"{rule.value} 2: a > 0")
    if not a < 0:
        return _undetermined(f"{rule.value}: a = 0")

    if rule is RuleId.P31:
        gains = {"b": b, "c1": c1, "c2": c2, "c3": c3}
        if all(v < 0 for v in gains.values()):
            return _stable((a, b, c1, c2, c3), "P31 1(i)")
        for name, value in gains.items():
            if value > 0:
                return _unstable(value, f"P31 1(ii): {name} > 0")
        return _undetermined("P31: zero parameter")

    if c1 > 0:
        return _unstable(c1, f"{rule.value} 1(iii): c1 > 0")
    if c2 > 0:
        return _unstable(c2, f"{rule.value} 1(iii): c2 > 0")
    if not (c1 < 0 and c2 < 0):
        return _undetermined(f"{rule.value}: zero control gain")

    diag = (a, c1, c2, lam4, lam5)
    if rule is RuleId.P32:
        if lam4 < 0 and lam5 < 0:
            return _stable(diag, "P32 1(i)")
        if lam4 > 0:
            return _unstable(lam4, "P32 1(ii): k > -c3")
        if lam5 > 0:
            return _unstable(lam5, "P32 1(ii): m > k - b")
        return _undetermined("P32: k = -c3 or m = k - b")

    if rule is RuleId.C31:
        if b + c3 < 0:
            if lam4 < 0 and lam5 < 0:
                return _stable(diag, "C31 1(i): b < k < -c3")
            return _undetermined("C31: b < -c3 but k outside (b, -c3)")
        if b + c3 > 0:
            return _unstable(lam4 if lam4 > 0 else lam5, "C31 1(ii): b > -c3")
        return _undetermined("C31: b = -c3")

    if rule is RuleId.C32:
        if c3 < 0 and lam5 < 0:
            return _stable(diag, "C32 1(i): m < -b")
        if c3 > 0:
            return _unstable(c3, "C32 1(ii): c3 > 0")
        if lam5 > 0:
            return _unstable(lam5, "C32 1(ii): m > -b")
        return _undetermined("C32: m = -b")

    # C33
    if b < 0 and lam4 < 0:
        return _stable(diag, "C33 1(i): m < -c3")
    if b > 0:
        return _unstable(b, "C33 1(ii): b > 0")
    if lam4 > 0:
        return _unstable(lam4, "C33 1(ii): m > -c3")
    return _undetermined("C33: m = -c3")


def stable_interval(rule, p: ParamSet, k: Optional[float] = None):
    """
    Open interval of the free coordinate on which the rule's clause 1(i) holds.

    Returns a (lo, hi) tuple, or None when the sign conditions fail. P32 needs
    the fixed k and returns the interval for m; P31 has no free coordinate.
    """
    rule = RuleId(rule) if not isinstance(rule, RuleId) else rule
    if not (p.a < 0 and p.c1 < 0 and p.c2 < 0):
        return None
    if rule is RuleId.P32:
        if k is None:
            raise ValueError("P32 needs k to give an interval for m.")
        return (-math.inf, k - p.b) if k < -p.c3 else None
    if rule is RuleId.C31:
        return (p.b, -p.c3) if p.b < -p.c3 else None
    if rule is RuleId.C32:
        return (-math.inf, -p.b) if p.c3 < 0 else None
    if rule is RuleId.C33:
        return (-math.inf, -p.c3) if p.b < 0 else None
    return None


def verdicts_agree(closed_form: StabilityVerdict, eigen: StabilityVerdict) -> Optional[bool]:
    """
    Compare stability classes; None when the closed form is Undetermined.

    A closed-form Unstable matches both Unstable and UnstableZeroEigenvalue.
    """
    if closed_form.kind is VerdictKind.UNDETERMINED:
        return None
    if closed_form.kind.is_unstable:
        return eigen.kind.is_unstable
    return closed_form.kind is eigen.kind


def claim_matches(claim: str, verdict: StabilityVerdict) -> bool:
    """`claim` is "stable" or "unstable", as stated for a fixture."""
    if claim == "stable":
        return verdict.kind is VerdictKind.ASYMPTOTICALLY_STABLE
    if claim == "unstable":
        return verdict.kind.is_unstable
    raise ValueError(f"Unknown claim '{claim}', expected 'stable' or 'unstable'.")


@dataclass(frozen=True)
class CrossCheckReport:
    equilibrium: Equilibrium
    q: float
    rule: RuleId
    closed_form: StabilityVerdict
    eigenvalues: EigenSet
    eigen_verdict: StabilityVerdict
    agree: Optional[bool]
    claim: Optional[str] = None
    claim_agrees: Optional[bool] = None

    @property
    def flagged(self):
        return self.agree is False or self.claim_agrees is False


def cross_check(xe: Equilibrium, p: ParamSet, q: float, claim: Optional[str] = None,
                rule=None) -> CrossCheckReport:
    """
    Classify xe through both routes and report agreement.

    Disagreements are logged and returned, never resolved. When a stated
    claim is given its agreement with the eigenvalue verdict is reported too.
    """
    rule = applicable_rule(xe) if rule is None else RuleId(rule)
    closed = classify_closed_form(rule, xe, p)
    eig = eigvals_equilibrium(xe, p, controlled=True)
    verdict = matignon(eig, q)
    agree = verdicts_agree(closed, verdict)
    if agree is False:
        logger.error("Closed form (%s) and eigenvalue route (%s) disagree at %s", closed, verdict, xe)
    claim_agrees = None if claim is None else claim_matches(claim, verdict)
    return CrossCheckReport(xe, q, rule, closed, eig, verdict, agree, claim, claim_agrees)

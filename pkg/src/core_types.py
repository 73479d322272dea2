"""
Shared value types, validation and exceptions for the fractional Toda lattice.

All types are frozen dataclasses so they can be handed to worker threads
without copying.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

PARAMETER_FIELDS = ("a", "b", "c1", "c2", "c3")


class ParameterError(ValueError):
    """Base class for invalid system/control parameters."""


class ZeroParameterError(ParameterError):
    def __init__(self, field_name, value=0.0):
        self.field = field_name
        self.value = value
        super().__init__(f"Parameter '{field_name}' must be a nonzero finite number, got {value!r}.")


class OrderOutOfRangeError(ParameterError):
    def __init__(self, q, allowed="(0, 1]"):
        self.q = q
        super().__init__(f"Fractional order q={q!r} is outside {allowed}.")


class NonFiniteStateError(ValueError):
    """A state (or matrix) contains NaN/Inf. `step` is set when raised during integration."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class DimensionMismatchError(ValueError):
    pass


class RuleFamilyMismatchError(ValueError):
    pass


class DomainError(ValueError):
    pass


class NoConvergenceError(ArithmeticError):
    """
    The eigenvalue iteration failed.

    LAPACK returns no spectrum on failure, so `partial` stays empty unless a
    caller has eigenvalues to attach.
    """

    def __init__(self, message, partial=()):
        self.partial = tuple(partial)
        super().__init__(message)


class ConfigError(ValueError):
    pass


class UnknownExampleError(LookupError):
    def __init__(self, example_id, known=()):
        self.example_id = example_id
        super().__init__(f"Unknown example id '{example_id}'. Known ids: {', '.join(known)}")


@dataclass(frozen=True)
class State5:
    """Point (x1, ..., x5) of the 5-state lattice; y1 and y2 live in x4 and x5."""

    x1: float
    x2: float
    x3: float
    x4: float
    x5: float

    def __post_init__(self):
        values = (self.x1, self.x2, self.x3, self.x4, self.x5)
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteStateError(f"State contains non-finite components: {values}")

    @classmethod
    def from_array(cls, values):
        arr = np.asarray(values, dtype=float)
        if arr.shape != (5,):
            raise DimensionMismatchError(f"Expected 5 state components, got shape {arr.shape}.")
        return cls(*(float(v) for v in arr))

    def as_array(self):
        return np.array([self.x1, self.x2, self.x3, self.x4, self.x5], dtype=float)

    def __array__(self, dtype=None, copy=None):
        arr = self.as_array()
        return arr if dtype is None else arr.astype(dtype)


@dataclass(frozen=True)
class ParamSet:
    """System parameters a, b, control gains c1..c3 and the fractional order q."""

    a: float
    b: float
    c1: float
    c2: float
    c3: float
    q: float

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in (*PARAMETER_FIELDS, "q")}
        values.update(changes)
        return ParamSet(**values)


def validate_params(p: ParamSet) -> ParamSet:
    """
    Check the ParamSet invariants.

    Args:
        p (ParamSet): Parameters to check.

    Returns:
        ParamSet: The same object, so calls can be chained.

    Raises:
        ZeroParameterError: If a, b, c1, c2 or c3 is zero or not finite.
        OrderOutOfRangeError: If q is not in (0, 1].
    """
    for name in PARAMETER_FIELDS:
        value = getattr(p, name)
        # exact comparison: parameters are user-entered
        if not math.isfinite(value) or value == 0:
            raise ZeroParameterError(name, value)
    if not (math.isfinite(p.q) and 0 < p.q <= 1):
        raise OrderOutOfRangeError(p.q)
    return p


class EquilibriumFamily(Enum):
    ORIGIN = "e0"
    E1_1 = "E1^1"
    E1_2 = "E1^2"
    E1_3 = "E1^3"
    E1 = "E1"


@dataclass(frozen=True)
class Equilibrium:
    """The equilibrium e23^{k,m} = (0, k, m, 0, 0); k = m = 0 is the origin e0."""

    k: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.k) and math.isfinite(self.m)):
            raise NonFiniteStateError(f"Equilibrium coordinates must be finite, got k={self.k}, m={self.m}")


def to_state(e: Equilibrium) -> State5:
    return State5(0.0, float(e.k), float(e.m), 0.0, 0.0)


def e0() -> Equilibrium:
    return Equilibrium(0.0, 0.0)


def e2(k) -> Equilibrium:
    """Member e2^k = (0, k, 0, 0, 0) of E1^1."""
    if k == 0:
        raise ZeroParameterError("k", k)
    return Equilibrium(k, 0.0)


def e3(m) -> Equilibrium:
    """Member e3^m = (0, 0, m, 0, 0) of E1^2."""
    if m == 0:
        raise ZeroParameterError("m", m)
    return Equilibrium(0.0, m)


def e23_diag(m) -> Equilibrium:
    """Member e23^{m,m} = (0, m, m, 0, 0) of E1^3."""
    if m == 0:
        raise ZeroParameterError("m", m)
    return Equilibrium(m, m)


def equilibrium_family(e: Equilibrium) -> EquilibriumFamily:
    """
    Most specific family an equilibrium belongs to.

    The origin wins over everything, then the three remarkable subsets of E1.
    """
    if e.k == 0 and e.m == 0:
        return EquilibriumFamily.ORIGIN
    if e.m == 0:
        return EquilibriumFamily.E1_1
    if e.k == 0:
        return EquilibriumFamily.E1_2
    if e.k == e.m:
        return EquilibriumFamily.E1_3
    return EquilibriumFamily.E1


class CriticalOrderMarker(Enum):
    ZERO_EIGENVALUE = "ZeroEigenvalue"


ZERO_EIGENVALUE = CriticalOrderMarker.ZERO_EIGENVALUE


@dataclass(frozen=True)
class EigenSet:
    """Five eigenvalues of a Jacobian with their critical order q_tilde."""

    lambdas: tuple
    q_tilde: object  # float or ZERO_EIGENVALUE

    def __post_init__(self):
        if len(self.lambdas) != 5:
            raise DimensionMismatchError(f"EigenSet needs exactly 5 eigenvalues, got {len(self.lambdas)}.")

    @property
    def has_zero(self):
        return self.q_tilde is ZERO_EIGENVALUE


class VerdictKind(Enum):
    """Stability outcome; `code` is the integer written to sweep CSVs."""

    ASYMPTOTICALLY_STABLE = ("AsymptoticallyStable", 0)
    CRITICALLY_STABLE = ("CriticallyStable", 1)
    UNSTABLE = ("Unstable", 2)
    UNSTABLE_ZERO_EIGENVALUE = ("UnstableZeroEigenvalue", 3)
    UNDETERMINED = ("Undetermined", 4)
    SKIPPED = ("Skipped", 5)

    def __init__(self, label, code):
        self.label = label
        self.code = code

    @property
    def is_unstable(self):
        return self in (VerdictKind.UNSTABLE, VerdictKind.UNSTABLE_ZERO_EIGENVALUE)

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class StabilityVerdict:
    kind: VerdictKind
    witness: Optional[complex] = None
    note: str = ""

    def __str__(self):
        if self.witness is None:
            return str(self.kind)
        return f"{self.kind} (witness {format_complex(self.witness)})"


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Step size h, step count N and initial perturbation epsilon.

    `perturbation`, when given, replaces epsilon*(1, 1, 1, 1, 1).
    """

    h: float = 0.01
    N: int = 100
    epsilon: float = 0.01
    perturbation: Optional[tuple] = field(default=None)

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ConfigError(f"Step size h must be positive and finite, got {self.h!r}.")
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ConfigError(f"Step count N must be a positive integer, got {self.N!r}.")
        if not math.isfinite(self.epsilon):
            raise ConfigError(f"epsilon must be finite, got {self.epsilon!r}.")
        if self.perturbation is not None:
            if len(self.perturbation) != 5 or not all(math.isfinite(v) for v in self.perturbation):
                raise ConfigError(f"perturbation must be 5 finite numbers, got {self.perturbation!r}.")

    @property
    def T(self):
        return self.N * self.h

    def initial_offset(self) -> np.ndarray:
        if self.perturbation is not None:
            return np.asarray(self.perturbation, dtype=float)
        return np.full(5, self.epsilon, dtype=float)


def format_complex(z) -> str:
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.12g}"
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real:.12g}{sign}{abs(z.imag):.12g}i"


def as_state_array(s: Sequence[float]) -> np.ndarray:
    """Coerce a State5 or any 5-sequence to a float array, rejecting NaN/Inf."""
    arr = np.asarray(s, dtype=float)
    if arr.shape != (5,):
        raise DimensionMismatchError(f"Expected a 5-component state, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStateError(f"State contains non-finite components: {arr.tolist()}")
    return arr

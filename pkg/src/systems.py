"""
Vector fields, Jacobians and equilibrium checks of the fractional Toda lattice.

State vectors are numpy arrays of length 5 (a State5 is accepted anywhere an
array is). The uncontrolled field is

    D^q x1 = 2 x4^2 + a x1
    D^q x2 = 2 (x5^2 - x4^2)
    D^q x3 = -2 x5^2
    D^q x4 = x4 (x2 - x1)
    D^q x5 = x5 (x3 - x2) + b x5

and the controlled field adds c1 (x2 - k), c2 (x3 - m), c3 x4 to rows 2-4.
"""
import math
from dataclasses import dataclass

import numpy as np

from core_types import (
    DimensionMismatchError,
    Equilibrium,
    ParamSet,
    as_state_array,
)

A1 = np.array([
    [0, 0, 0, 2, 0],
    [0, 0, 0, -2, 0],
    [0, 0, 0, 0, 0],
    [-1, 1, 0, 0, 0],
    [0, 0, 0, 0, 0],
], dtype=float)

A2 = np.array([
    [0, 0, 0, 0, 0],
    [0, 0, 0, 0, 2],
    [0, 0, 0, 0, -2],
    [0, 0, 0, 0, 0],
    [0, -1, 1, 0, 0],
], dtype=float)

A1.flags.writeable = False
A2.flags.writeable = False


def a3(p: ParamSet) -> np.ndarray:
    """Linear part of the field: a at (1,1), b at (5,5)."""
    m = np.zeros((5, 5))
    m[0, 0] = p.a
    m[4, 4] = p.b
    return m


@dataclass(frozen=True)
class GenericTodaState:
    """
    State (or derivative) of the n-dimensional lattice.

    The boundary values y^0 = y^n = 0 are implicit and not stored.
    """

    n: int
    x: tuple
    y: tuple

    def __post_init__(self):
        if self.n < 2:
            raise DimensionMismatchError(f"Toda lattice needs n >= 2, got n={self.n}.")
        if len(self.x) != self.n or len(self.y) != self.n - 1:
            raise DimensionMismatchError(
                f"n={self.n} needs {self.n} x and {self.n - 1} y values, "
                f"got {len(self.x)} and {len(self.y)}."
            )


def eval_toda_n(s: GenericTodaState) -> GenericTodaState:
    """
    Right-hand side of the n-dimensional (fractional) Toda lattice.

    D x^i = 2[(y^i)^2 - (y^{i-1})^2] and D y^j = y^j (x^{j+1} - x^j). The same
    expressions give the classical lattice at q = 1.
    """
    x = np.asarray(s.x, dtype=float)
    y_inner = np.asarray(s.y, dtype=float)
    y = np.concatenate(([0.0], y_inner, [0.0]))
    dx = 2.0 * (y[1:] ** 2 - y[:-1] ** 2)
    dy = y_inner * (x[1:] - x[:-1])
    return GenericTodaState(s.n, tuple(dx.tolist()), tuple(dy.tolist()))


def toda3_from_state(s) -> GenericTodaState:
    """n = 3 lattice state from a 5-state, using y1 = x4, y2 = x5."""
    v = as_state_array(s)
    return GenericTodaState(3, tuple(v[:3].tolist()), tuple(v[3:].tolist()))


def toda3_to_state(t: GenericTodaState) -> np.ndarray:
    if t.n != 3:
        raise DimensionMismatchError(f"Only the n=3 lattice maps onto the 5-state system, got n={t.n}.")
    return np.array([*t.x, *t.y], dtype=float)


def eval_uncontrolled(s, p: ParamSet) -> np.ndarray:
    """
    Evaluate the uncontrolled 5-state field.

    Args:
        s: State5 or length-5 array.
        p (ParamSet): Parameters; only a and b enter.

    Returns:
        np.ndarray: The five derivative components.

    Raises:
        NonFiniteStateError: If the state contains NaN/Inf.
    """
    x1, x2, x3, x4, x5 = as_state_array(s)
    return np.array([
        2.0 * x4 ** 2 + p.a * x1,
        2.0 * (x5 ** 2 - x4 ** 2),
        -2.0 * x5 ** 2,
        x4 * (x2 - x1),
        x5 * (x3 - x2) + p.b * x5,
    ])


def eval_matrix_form(s, p: ParamSet) -> np.ndarray:
    """Same field written as x4*A1*x + x5*A2*x + A3*x."""
    x = as_state_array(s)
    return x[3] * (A1 @ x) + x[4] * (A2 @ x) + a3(p) @ x


def control_terms(s, p: ParamSet, xe: Equilibrium) -> np.ndarray:
    """Feedback u = (0, c1 (x2 - k), c2 (x3 - m), c3 (x4 - 0), 0)."""
    x = as_state_array(s)
    return np.array([
        0.0,
        p.c1 * (x[1] - xe.k),
        p.c2 * (x[2] - xe.m),
        p.c3 * (x[3] - 0.0),
        0.0,
    ])


def eval_controlled(s, p: ParamSet, xe: Equilibrium) -> np.ndarray:
    return eval_uncontrolled(s, p) + control_terms(s, p, xe)


def jacobian_uncontrolled(s, p: ParamSet) -> np.ndarray:
    x1, x2, x3, x4, x5 = as_state_array(s)
    return np.array([
        [p.a, 0.0, 0.0, 4.0 * x4, 0.0],
        [0.0, 0.0, 0.0, -4.0 * x4, 4.0 * x5],
        [0.0, 0.0, 0.0, 0.0, -4.0 * x5],
        [-x4, x4, 0.0, x2 - x1, 0.0],
        [0.0, -x5, x5, 0.0, x3 - x2 + p.b],
    ])


def jacobian_controlled(s, p: ParamSet, xe: Equilibrium) -> np.ndarray:
    # xe only shifts the field, not its derivative
    jac = jacobian_uncontrolled(s, p)
    jac[1, 1] += p.c1
    jac[2, 2] += p.c2
    jac[3, 3] += p.c3
    return jac


def is_equilibrium(s, p: ParamSet, tol: float = 1e-12) -> bool:
    """True iff every component of the uncontrolled field is within tol of zero."""
    if tol < 0:
        raise ValueError(f"Tolerance must be nonnegative, got {tol}.")
    return bool(np.max(np.abs(eval_uncontrolled(s, p))) <= tol)


def lipschitz_bound(x0_norm, delta: float, p: ParamSet) -> float:
    """
    Lipschitz constant of the field on the box of radius delta around x0.

    L = 2*sqrt(10) + sqrt(a^2 + b^2) + 3(|x0| + delta). The first term is
    ||A1||_F + ||A2||_F; x0_norm may also be a state, whose Euclidean norm is
    used.

    Raises:
        ValueError: If delta is not positive or x0_norm is negative.
    """
    if not np.isscalar(x0_norm):
        x0_norm = float(np.linalg.norm(as_state_array(x0_norm)))
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"delta must be positive, got {delta}.")
    if not (x0_norm >= 0 and math.isfinite(x0_norm)):
        raise ValueError(f"x0_norm must be a nonnegative number, got {x0_norm}.")
    matrix_part = np.linalg.norm(A1, "fro") + np.linalg.norm(A2, "fro")
    return float(matrix_part + math.hypot(p.a, p.b) + 3.0 * (x0_norm + delta))


def field_for(p: ParamSet, xe: Equilibrium, controlled: bool = True):
    """Single-argument field closure used by the integrator."""
    if controlled:
        return lambda x: eval_controlled(x, p, xe)
    return lambda x: eval_uncontrolled(x, p)

"""
Fractional Euler method for the (controlled) lattice.

    x_{j+1} = x_j + h^q / Gamma(q + 1) * f(x_j)

The scheme is memoryless: no convolution over the history is added. At q = 1
it is the classical forward Euler method.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from core_types import (
    DomainError,
    Equilibrium,
    IntegratorConfig,
    NonFiniteStateError,
    OrderOutOfRangeError,
    ParamSet,
    to_state,
    validate_params,
)
from systems import field_for

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12


def gamma(x: float) -> float:
    """
    Euler Gamma function for positive arguments.

    Raises:
        DomainError: If x <= 0 or x is not finite.
    """
    if not (math.isfinite(x) and x > 0):
        raise DomainError(f"Gamma is only evaluated for finite x > 0, got {x!r}.")
    return float(special.gamma(x))


def fem_coefficient(h: float, q: float) -> float:
    if not (math.isfinite(h) and h > 0):
        raise ValueError(f"Step size must be positive, got {h!r}.")
    if not (math.isfinite(q) and 0 < q <= 1):
        raise OrderOutOfRangeError(q)
    return h ** q / gamma(q + 1.0)


def fem_step(x_j, field: Callable, h: float, q: float, coefficient: Optional[float] = None,
             step: Optional[int] = None) -> np.ndarray:
    """
    One fractional Euler step.

    Args:
        x_j: Current state.
        field (Callable): Right-hand side f(x).
        h (float): Step size.
        q (float): Fractional order in (0, 1].
        coefficient (float): Precomputed h^q / Gamma(q+1); computed here if omitted.
        step (int): Index of the state being produced, used in error messages.

    Returns:
        np.ndarray: x_j + coefficient * f(x_j).

    Raises:
        NonFiniteStateError: If the new state overflows to NaN/Inf.
    """
    if coefficient is None:
        coefficient = fem_coefficient(h, q)
    x = np.asarray(x_j, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = x + coefficient * np.asarray(field(x), dtype=float)
    if not np.all(np.isfinite(x_next)):
        raise NonFiniteStateError("Fractional Euler step overflowed", step=step)
    return x_next


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Times t_j = j*h and states x(j), plus the run's inputs.

    When the run stopped on divergence `diverged_at` holds the index of the
    last recorded state and the arrays are shorter than N + 1.
    """

    times: np.ndarray
    states: np.ndarray
    params: ParamSet
    config: IntegratorConfig
    equilibrium: Equilibrium
    coefficient: float
    controlled: bool = True
    diverged_at: Optional[int] = None

    @property
    def diverged(self):
        return self.diverged_at is not None

    def __len__(self):
        return len(self.times)


def integrate(p: ParamSet, xe: Equilibrium, cfg: IntegratorConfig, controlled: bool = True) -> Trajectory:
    """
    Integrate from x(0) = xe + epsilon*(1,1,1,1,1) (or cfg.perturbation) for N steps.

    Stops early, with `diverged_at` set, as soon as a coordinate exceeds
    DIVERGENCE_LIMIT in magnitude.

    Raises:
        ParameterError: If p is invalid.
        NonFiniteStateError: If a step overflows before the divergence check fires.
    """
    validate_params(p)
    rhs = field_for(p, xe, controlled)
    coefficient = fem_coefficient(cfg.h, p.q)
    states = np.empty((cfg.N + 1, 5))
    states[0] = to_state(xe).as_array() + cfg.initial_offset()
    last = cfg.N
    diverged_at = None
    for j in range(cfg.N):
        states[j + 1] = fem_step(states[j], rhs, cfg.h, p.q, coefficient, step=j + 1)
        peak = float(np.max(np.abs(states[j + 1])))
        if peak > DIVERGENCE_LIMIT:
            last = diverged_at = j + 1
            logger.warning("Trajectory diverged at step %d (max |x| = %.3g); stopping.", j + 1, peak)
            break
    times = np.arange(last + 1) * cfg.h
    return Trajectory(times, states[: last + 1], p, cfg, xe, coefficient, controlled, diverged_at)


def distances(tr: Trajectory, xe: Equilibrium) -> np.ndarray:
    return np.linalg.norm(tr.states - to_state(xe).as_array(), axis=1)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    distances: np.ndarray
    ratio: float
    monotone_tail: bool

    @property
    def initial_distance(self):
        return float(self.distances[0])

    @property
    def final_distance(self):
        return float(self.distances[-1])


def convergence_metrics(tr: Trajectory, xe: Equilibrium) -> ConvergenceReport:
    """
    Euclidean distances d_j to xe, the final/initial ratio and whether d_j is
    nonincreasing over the last half of the steps.
    """
    if len(tr) == 0:
        raise ValueError("Trajectory is empty.")
    d = distances(tr, xe)
    if d[0] > 0:
        ratio = float(d[-1] / d[0])
    else:
        ratio = 0.0 if d[-1] == 0 else math.inf
    tail = d[len(d) // 2:]
    monotone_tail = bool(np.all(np.diff(tail) <= 0))
    return ConvergenceReport(d, ratio, monotone_tail)

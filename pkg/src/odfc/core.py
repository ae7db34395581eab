"""Shared domain types: plants, gain schedules, trajectories and intervals.

Everything is stored in the *shifted* frame ``y = x - x_star`` internally so
that the equilibrium sits at the origin; user-facing accessors translate back.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "BUILTIN_PLANTS",
    "ControlParams",
    "DivergenceError",
    "MethodKind",
    "StabilityInterval",
    "SystemSpec",
    "Trajectory",
    "eval_f",
    "gain_at",
    "is_active_node",
    "make_system",
]

DIVERGENCE_BOUND = 1e6


class DivergenceError(RuntimeError):
    """The trajectory left the local basin (|x - x*| exceeded the cutoff)."""

    def __init__(self, t: float, x: float):
        super().__init__(f"trajectory diverged at t={t:.6g} (|x - x*| = {abs(x):.3g})")
        self.t = t
        self.x = x


class MethodKind(str, enum.Enum):
    """Oscillating feedback scheme.

    ``velocity`` feeds back the delayed velocity on a two-subinterval schedule,
    ``states`` feeds back ``x(t-2tau) - x(t-tau)`` on a three-subinterval one.
    The gain is only switched on during the last subinterval of each period.
    """

    VELOCITY = "velocity"
    STATES = "states"

    @property
    def period_multiplier(self) -> int:
        return 2 if self is MethodKind.VELOCITY else 3

    @property
    def active_subinterval(self) -> int:
        # zero-based index of the tau-subinterval where the gain is on
        return self.period_multiplier - 1


def _as_method(method) -> MethodKind:
    return method if isinstance(method, MethodKind) else MethodKind(method)


def is_active_node(period_multiplier: int, i, steps_per_tau: int):
    """True where grid node ``i`` lies in an active subinterval.

    Works elementwise on integer arrays. Boundary nodes belong to the
    subinterval that opens there (half-open ``[a, b)`` convention).
    """
    return (np.asarray(i) // steps_per_tau) % period_multiplier == period_multiplier - 1


def gain_at(method, eps: float, tau: float, t: float) -> float:
    """Value of the switched gain at time ``t``.

    The subinterval index is found by flooring ``t / tau`` and then corrected
    against the products ``k * tau`` so membership agrees with the boundaries
    as they are represented in floating point.
    """
    method = _as_method(method)
    if tau <= 0:
        raise ValueError("tau must be positive")
    if t < 0:
        raise ValueError(f"gain schedule is defined for t >= 0, got t={t}")
    k = math.floor(t / tau)
    if (k + 1) * tau <= t:
        k += 1
    elif k * tau > t:
        k -= 1
    m = method.period_multiplier
    return eps if k % m == m - 1 else 0.0


# --- plants ---------------------------------------------------------------

def _linear(y, lam):
    return lam * y


def _quad(y, lam):
    return lam * y + y * y


def _cubic_plus(y, lam):
    return lam * y + y ** 3


def _cubic_minus(y, lam):
    return lam * y - y ** 3


def _sinsq(y, lam):
    return lam * y + np.sin(y) ** 2


# shifted fields g(y) = f(x* + y); every one has g(0) = 0 and g'(0) = lam
BUILTIN_PLANTS: dict[str, Callable] = {
    "linear": _linear,
    "quad": _quad,
    "cubic_plus": _cubic_plus,
    "cubic_minus": _cubic_minus,
    "sinsq": _sinsq,
}

_PLANT_LABELS = {
    "linear": "{lam}x",
    "quad": "{lam}x+x^2",
    "cubic_plus": "{lam}x+x^3",
    "cubic_minus": "{lam}x-x^3",
    "sinsq": "{lam}x+sin^2(x)",
}


@dataclass(frozen=True)
class SystemSpec:
    """Scalar plant ``x' = f(x)`` around an unstable equilibrium ``x_star``.

    ``kind`` is a builtin name or ``"poly"``; for polynomials ``coeffs`` holds
    the shifted coefficients (ascending powers of ``x - x_star``, constant
    term forced to zero).
    """

    kind: str
    x_star: float
    lam: float
    coeffs: tuple[float, ...] | None = None

    def g(self, y):
        """Shifted field ``f(x_star + y)``; vectorized over numpy arrays."""
        if self.coeffs is not None:
            out = np.zeros_like(np.asarray(y, dtype=float))
            for c in reversed(self.coeffs):
                out = out * y + c
            return out
        return BUILTIN_PLANTS[self.kind](y, self.lam)

    def f(self, x):
        return self.g(np.asarray(x, dtype=float) - self.x_star)

    @property
    def label(self) -> str:
        if self.coeffs is not None:
            return "poly(" + ",".join(f"{c:g}" for c in self.coeffs) + ")"
        return _PLANT_LABELS[self.kind].format(lam=f"{self.lam:g}")


def make_system(kind: str | Sequence[float], x_star: float = 0.0, lam: float = 2.0) -> SystemSpec:
    """Build a plant.

    ``kind`` is one of the builtin names (``linear``, ``quad``, ``cubic_plus``,
    ``cubic_minus``, ``sinsq``), each with slope ``lam`` at the equilibrium, or
    a sequence of polynomial coefficients in ascending powers of ``x`` that
    vanishes at ``x_star`` (``lam`` is then derived and ignored as input).
    """
    x_star = float(x_star)
    if isinstance(kind, str):
        if kind not in BUILTIN_PLANTS:
            raise ValueError(f"unknown plant {kind!r}; choose from {sorted(BUILTIN_PLANTS)} or pass coefficients")
        lam = float(lam)
        if not lam > 0:
            raise ValueError(f"equilibrium must be unstable (lambda > 0), got {lam}")
        return SystemSpec(kind=kind, x_star=x_star, lam=lam)

    p = Polynomial(np.asarray(kind, dtype=float))
    residual = p(x_star)
    if abs(residual) > 1e-12:
        raise ValueError(f"x_star={x_star} is not a root of the polynomial (f(x_star)={residual:.3g})")
    shifted = p(Polynomial([x_star, 1.0])).coef.copy()
    shifted[0] = 0.0
    if len(shifted) < 2 or not shifted[1] > 0:
        slope = shifted[1] if len(shifted) > 1 else 0.0
        raise ValueError(f"equilibrium must be unstable (lambda > 0), got {slope}")
    return SystemSpec(kind="poly", x_star=x_star, lam=float(shifted[1]), coeffs=tuple(float(c) for c in shifted))


def eval_f(spec: SystemSpec, x: float) -> float:
    return float(spec.f(x))


# --- value types ------------------------------------------------------------

@dataclass(frozen=True)
class ControlParams:
    """Gain, delay and the period-map multiplier they induce."""

    method: MethodKind
    eps: float
    tau: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "method", _as_method(self.method))
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def period(self) -> float:
        return self.method.period_multiplier * self.tau

    @property
    def stabilizing(self) -> bool:
        return abs(self.alpha) < 1


@dataclass(frozen=True)
class StabilityInterval:
    method: MethodKind
    lam: float
    tau: float
    eps_lo: float
    eps_hi: float

    @property
    def lambda_tau(self) -> float:
        return self.lam * self.tau

    def __contains__(self, eps: float) -> bool:
        return self.eps_lo < eps < self.eps_hi


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform-grid solution record (user frame).

    Node ``i`` sits at ``t_i = i * dt`` with ``dt = tau / steps_per_tau``.
    ``rhs`` and ``control`` are the right-limit values at each node (a node on
    a schedule boundary belongs to the subinterval that opens there), while
    ``rhs_left`` holds the left-limit derivative used for dense output.
    """

    method: MethodKind
    tau: float
    eps: float
    alpha: float
    lam: float
    x_star: float
    x0: float
    steps_per_tau: int
    plant: str
    states: np.ndarray
    rhs: np.ndarray
    control: np.ndarray
    rhs_left: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return self.tau / self.steps_per_tau

    @property
    def n_nodes(self) -> int:
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dt

    @property
    def horizon(self) -> float:
        return (self.n_nodes - 1) * self.dt

    @property
    def period_nodes(self) -> int:
        return self.method.period_multiplier * self.steps_per_tau

    @property
    def segment_active(self) -> np.ndarray:
        return is_active_node(self.method.period_multiplier, np.arange(self.n_nodes), self.steps_per_tau)

    def period_samples(self) -> np.ndarray:
        """States at the period boundaries ``k * m * tau`` (user frame)."""
        return self.states[:: self.period_nodes]

    def period_times(self) -> np.ndarray:
        return self.times[:: self.period_nodes]

"""Numerical period maps and their multiplier at the equilibrium."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ControlParams, DivergenceError, MethodKind, SystemSpec
from .design import alpha_from_eps
from .integrator import DEFAULT_STEPS_PER_TAU, integrate_batch

__all__ = ["ContractionRun", "PeriodMapProbe", "contraction_run", "period_map", "period_map_derivative"]


@dataclass(frozen=True)
class PeriodMapProbe:
    method: MethodKind
    x_in: float
    x_out: float
    h: float
    numeric_dP: float
    analytic_alpha: float

    @property
    def discrepancy(self) -> float:
        return abs(self.numeric_dP - self.analytic_alpha)


def _period_images(spec: SystemSpec, params: ControlParams, x_in, N: int, periods: int = 1) -> np.ndarray:
    y = np.atleast_1d(np.asarray(x_in, dtype=float)) - spec.x_star
    out = integrate_batch(spec.g, params.method.value, params.eps, params.tau, y, N, periods)
    if out["diverged"].any():
        k = int(np.flatnonzero(out["diverged"])[0])
        raise DivergenceError(periods * params.period, float(y[k]))
    step = params.method.period_multiplier * N
    return out["Y"][::step] + spec.x_star


def period_map(spec: SystemSpec, params: ControlParams, x_in, N: int = DEFAULT_STEPS_PER_TAU):
    """State after exactly one schedule period, starting from ``x_in``.

    ``x_in`` may be an array; each entry is integrated independently.
    """
    images = _period_images(spec, params, x_in, N)[1]
    return float(images[0]) if np.ndim(x_in) == 0 else images


def period_map_derivative(spec: SystemSpec, params: ControlParams, h: float = 1e-5,
                          N: int = DEFAULT_STEPS_PER_TAU) -> PeriodMapProbe:
    """Central-difference ``P'(x*)`` compared with the closed-form multiplier."""
    if not h > 0:
        raise ValueError("probe step h must be positive")
    xs = spec.x_star + np.array([0.0, h, -h])
    p0, p_plus, p_minus = period_map(spec, params, xs, N)
    return PeriodMapProbe(
        method=params.method, x_in=spec.x_star, x_out=float(p0), h=h,
        numeric_dP=float((p_plus - p_minus) / (2 * h)),
        analytic_alpha=alpha_from_eps(params.method, spec.lam, params.eps, params.tau),
    )


@dataclass(frozen=True)
class ContractionRun:
    """Outcome of checking ``|x_{k+1}| < |x_k|`` on period samples (shifted frame).

    ``degenerate`` marks runs started exactly at the equilibrium: the samples
    are all zero, the comparisons are non-strict, and this is flagged rather
    than treated as a failure.
    """

    samples: np.ndarray
    steps: list[bool]
    degenerate: bool

    @property
    def contracting(self) -> bool:
        return self.degenerate or all(self.steps)


def contraction_run(spec: SystemSpec, params: ControlParams, x0: float, K: int,
                    N: int = DEFAULT_STEPS_PER_TAU) -> ContractionRun:
    samples = _period_images(spec, params, x0, N, periods=K)[:, 0] - spec.x_star
    a = np.abs(samples)
    steps = [bool(a[k + 1] < a[k]) for k in range(K)]
    return ContractionRun(samples=samples, steps=steps, degenerate=bool(np.all(a == 0)))

"""Closed-form controller design for both oscillating feedback schemes.

With ``u = lam * tau`` the period-map multiplier is

* velocity: ``alpha = e^u (e^u + eps u)``
* states:   ``alpha = e^{3u} (1 + eps tau (1 - e^u) e^{-2u})``

Both are affine in ``eps``, so every other quantity here (inverse gain,
stability interval, deadbeat gain) is a closed form too. The optimal delay
is the only thing that needs a root finder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .core import ControlParams, MethodKind, StabilityInterval, _as_method

__all__ = [
    "DesignReport",
    "RootBracketError",
    "alpha_from_eps",
    "convergence_rate",
    "design",
    "eps_from_alpha",
    "params_from_alpha",
    "params_from_eps",
    "stability_interval",
    "tau_star",
    "tau_star_objective",
    "tau_star_residual",
    "tau_star_roots",
]

# bracket for the optimal delay, in units of 1/lambda
_TAU_STAR_BRACKET = (1e-6, 10.0)
_TAU_STAR_SCAN = 4000


class RootBracketError(ValueError):
    """No (or more than one) sign change of the optimal-delay equation was found."""

    def __init__(self, message: str, roots: list[float] | None = None):
        super().__init__(message)
        self.roots = roots or []


def _check(lam, tau):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")


def alpha_from_eps(method, lam: float, eps: float, tau: float) -> float:
    method = _as_method(method)
    _check(lam, tau)
    u = lam * tau
    if method is MethodKind.VELOCITY:
        return math.exp(u) * (math.exp(u) + eps * u)
    # e^{3u} (1 + eps tau (1 - e^u) e^{-2u}), expanded so the only cancellation is the final one
    return math.exp(3 * u) - eps * tau * math.exp(u) * math.expm1(u)


def eps_from_alpha(method, lam: float, alpha: float, tau: float) -> float:
    method = _as_method(method)
    _check(lam, tau)
    u = lam * tau
    if method is MethodKind.VELOCITY:
        return math.exp(-u) * (alpha - math.exp(2 * u)) / u
    return math.exp(-u) * (math.exp(3 * u) - alpha) / (tau * math.expm1(u))


def stability_interval(method, lam: float, tau: float) -> StabilityInterval:
    """Open gain interval giving ``|alpha| < 1``, from the hyperbolic/exponential bounds."""
    method = _as_method(method)
    _check(lam, tau)
    u = lam * tau
    if method is MethodKind.VELOCITY:
        lo = -2.0 * math.cosh(u) / u
        hi = -2.0 * math.sinh(u) / u
    else:
        den = tau * math.exp(u) * math.expm1(u)
        lo = (math.exp(3 * u) - 1.0) / den
        hi = (math.exp(3 * u) + 1.0) / den
    return StabilityInterval(method=method, lam=lam, tau=tau, eps_lo=lo, eps_hi=hi)


def convergence_rate(method, alpha: float, tau: float) -> float:
    """Exponential decay rate ``ln|alpha| / (m tau)``; ``-inf`` for deadbeat."""
    method = _as_method(method)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not abs(alpha) < 1:
        raise ValueError(f"convergence rate needs |alpha| < 1, got {alpha}")
    if alpha == 0:
        return -math.inf
    return math.log(abs(alpha)) / (method.period_multiplier * tau)


def params_from_alpha(method, lam: float, alpha: float, tau: float) -> ControlParams:
    return ControlParams(method=_as_method(method), eps=eps_from_alpha(method, lam, alpha, tau), tau=tau, alpha=alpha)


def params_from_eps(method, lam: float, eps: float, tau: float) -> ControlParams:
    return ControlParams(method=_as_method(method), eps=eps, tau=tau, alpha=alpha_from_eps(method, lam, eps, tau))


# --- optimal delay -----------------------------------------------------------

def tau_star_objective(method, lam: float, alpha: float, tau):
    """Quantity minimized by the optimal delay.

    ``|eps|`` for the velocity scheme, ``eps / lam`` for the states scheme.
    Vectorized over ``tau``.
    """
    method = _as_method(method)
    u = lam * np.asarray(tau, dtype=float)
    if method is MethodKind.VELOCITY:
        return np.abs(np.exp(-u) * (alpha - np.exp(2 * u)) / u)
    return np.exp(-u) * (np.exp(3 * u) - alpha) / (u * np.expm1(u))


def tau_star_residual(method, lam: float, alpha: float, tau: float) -> float:
    """``tau - F(tau)`` for the implicit optimal-delay equation ``tau = F(tau)``."""
    method = _as_method(method)
    u = lam * tau
    if method is MethodKind.VELOCITY:
        rhs = 1.0 - 2.0 * alpha / (alpha + math.exp(2 * u))
    else:
        e1, e2, e3, em = math.exp(u), math.exp(2 * u), math.exp(3 * u), math.exp(-u)
        rhs = (e2 - alpha * em) * (e1 - 1.0) / (e3 - 2.0 * e2 - alpha * em + 2.0 * alpha)
    return tau - rhs / lam


def _stationarity(method: MethodKind, alpha: float, u: float) -> float:
    # implicit equation with its denominator cleared: same roots, no poles, and
    # the sign follows d(objective)/du
    if method is MethodKind.VELOCITY:
        e2 = math.exp(2 * u)
        return u * (e2 + alpha) - (e2 - alpha)
    e1, e2, e3, em = math.exp(u), math.exp(2 * u), math.exp(3 * u), math.exp(-u)
    return u * (e3 - 2.0 * e2 - alpha * em + 2.0 * alpha) - (e2 - alpha * em) * (e1 - 1.0)


def tau_star_roots(method, lam: float, alpha: float) -> list[float]:
    """Every optimal-delay root bracketed in ``(1e-6/lam, 10/lam)``."""
    method = _as_method(method)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not abs(alpha) < 1:
        raise ValueError(f"optimal delay needs |alpha| < 1, got {alpha}")
    grid = np.geomspace(*_TAU_STAR_BRACKET, _TAU_STAR_SCAN)
    vals = [_stationarity(method, alpha, u) for u in grid]
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(bisect(lambda u: _stationarity(method, alpha, u), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    return [u / lam for u in roots]


def tau_star(method, lam: float, alpha: float) -> float:
    """Delay minimizing the gain objective for a prescribed multiplier ``alpha``."""
    roots = tau_star_roots(method, lam, alpha)
    if not roots:
        raise RootBracketError(f"no sign change of the optimal-delay equation in ({_TAU_STAR_BRACKET[0]}/lambda, {_TAU_STAR_BRACKET[1]}/lambda)")
    if len(roots) > 1:
        raise RootBracketError(f"optimal-delay equation has {len(roots)} roots: {roots}", roots)
    return roots[0]


# --- report --------------------------------------------------------------------

@dataclass(frozen=True)
class DesignReport:
    method: MethodKind
    lam: float
    tau: float
    eps: float
    alpha: float
    beta: float | None
    interval: StabilityInterval
    tau_star: float | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "lambda": self.lam,
            "tau": self.tau,
            "alpha": self.alpha,
            "eps": self.eps,
            "beta": self.beta,
            "interval": {"lo": self.interval.eps_lo, "hi": self.interval.eps_hi},
        }
        if self.tau_star is not None:
            out["tau_star"] = self.tau_star
        return out


def design(method, lam: float, tau: float, *, alpha: float | None = None, eps: float | None = None,
           with_tau_star: bool = True) -> DesignReport:
    """Complete a design from exactly one of ``alpha`` / ``eps``.

    ``beta`` is ``None`` when the design does not stabilize (``|alpha| >= 1``).
    """
    method = _as_method(method)
    if (alpha is None) == (eps is None):
        raise ValueError("give exactly one of alpha or eps")
    params = params_from_alpha(method, lam, alpha, tau) if eps is None else params_from_eps(method, lam, eps, tau)
    beta = convergence_rate(method, params.alpha, tau) if abs(params.alpha) < 1 else None
    ts = None
    if with_tau_star and abs(params.alpha) < 1:
        try:
            ts = tau_star(method, lam, params.alpha)
        except RootBracketError:
            ts = None
    return DesignReport(method=method, lam=lam, tau=tau, eps=params.eps, alpha=params.alpha, beta=beta,
                        interval=stability_interval(method, lam, tau), tau_star=ts)

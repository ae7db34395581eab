"""Fixed-step integration of the switched delayed-feedback systems.

The step ``dt = tau / N`` divides every subinterval exactly, so the gain
never switches inside a step and each delay is a whole number of nodes.
Delayed quantities are always read from passive subintervals, where the
solution obeys ``x' = f(x)``; the delayed velocity is therefore ``f`` of the
delayed state, and midpoint stage values come from cubic Hermite
interpolation with node derivatives ``f(x_j)``.

The core works on a batch of independent cells (arrays over gain, delay and
initial state) so parameter sweeps run in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DIVERGENCE_BOUND,
    ControlParams,
    DivergenceError,
    MethodKind,
    SystemSpec,
    Trajectory,
    _as_method,
    is_active_node,
)

__all__ = ["SimConfig", "control_signal", "hermite", "simulate", "state_at"]

DEFAULT_STEPS_PER_TAU = 256

# control laws understood by the batch core; "single" is the one-delay
# scheme eps(t) (x(t - tau) - x(t)) on the velocity schedule
_LAW_PERIODS = {"velocity": 2, "states": 3, "single": 2}


@dataclass(frozen=True)
class SimConfig:
    x0: float
    periods: int = 10
    steps_per_tau: int = DEFAULT_STEPS_PER_TAU

    def __post_init__(self):
        if int(self.steps_per_tau) != self.steps_per_tau or self.steps_per_tau < 16:
            raise ValueError(f"steps_per_tau must be an integer >= 16, got {self.steps_per_tau}")
        if int(self.periods) != self.periods or self.periods < 1:
            raise ValueError(f"periods must be a positive integer, got {self.periods}")


def hermite(y0, y1, d0, d1, h, theta):
    """Cubic Hermite interpolant on ``[t0, t0 + h]`` at fraction ``theta``."""
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * d0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1)


def _fd_velocity(Y, j, N, dt):
    """Second-order finite-difference estimates of x' at delayed node ``j``,
    at ``j + 1/2`` and at ``j + 1``.

    ``[j, j + 1]`` lies in a passive subinterval; stencils never leave it.
    """
    start = (j // N) * N
    if j == start:
        d0 = (-3 * Y[j] + 4 * Y[j + 1] - Y[j + 2]) / (2 * dt)
    else:
        d0 = (Y[j + 1] - Y[j - 1]) / (2 * dt)
    if j + 1 == start + N:
        d1 = (3 * Y[j + 1] - 4 * Y[j] + Y[j - 1]) / (2 * dt)
    else:
        d1 = (Y[j + 2] - Y[j]) / (2 * dt)
    return d0, (Y[j + 1] - Y[j]) / dt, d1


def integrate_batch(g, law: str, eps, tau, y0, steps_per_tau: int, periods: int, *,
                    delayed_velocity: str = "field", raise_on_divergence: bool = False):
    """Integrate a batch of cells in the shifted frame.

    Parameters
    ----------
    g : callable
        Shifted plant field, vectorized.
    law : {"velocity", "states", "single"}
    eps, tau, y0 : array_like
        Broadcast to a common shape ``(C,)``.
    delayed_velocity : {"field", "finite_difference"}
        How the velocity law obtains ``x'(t - tau)``; the finite-difference
        path exists only to cross-check the field identity.

    Returns
    -------
    dict with arrays ``Y``, ``rhs``, ``rhs_left``, ``control`` of shape
    ``(n + 1, C)`` and ``diverged`` of shape ``(C,)``.
    """
    m = _LAW_PERIODS[law]
    N = int(steps_per_tau)
    eps, tau, y0 = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=float)) for a in (eps, tau, y0)))
    C = eps.shape[0]
    dt = tau / N
    n = periods * m * N
    use_fd = delayed_velocity == "finite_difference"
    if delayed_velocity not in ("field", "finite_difference"):
        raise ValueError(f"unknown delayed_velocity mode {delayed_velocity!r}")

    Y = np.empty((n + 1, C))
    G = np.empty((n + 1, C))
    U = np.zeros((n + 1, C))
    RL = np.empty((n + 1, C))
    diverged = np.zeros(C, dtype=bool)

    Y[0] = y0
    G[0] = g(Y[0])
    RL[0] = G[0]

    def delayed(j):
        """Delayed state at node j, at the Hermite midpoint, and at node j + 1."""
        a, b = Y[j], Y[j + 1]
        mid = 0.5 * (a + b) + dt * (G[j] - G[j + 1]) / 8.0
        return a, mid, b

    def delayed_vel(j):
        if not use_fd:
            a, mid, b = delayed(j)
            return G[j], g(mid), G[j + 1]
        return _fd_velocity(Y, j, N, dt)

    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            y = Y[i]
            active = (i // N) % m == m - 1
            if not active:
                k1 = G[i]
                k2 = g(y + half * k1)
                k3 = g(y + half * k2)
                k4 = g(y + dt * k3)
                y_next = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                Y[i + 1] = y_next
                G[i + 1] = g(y_next)
                RL[i + 1] = G[i + 1]
            else:
                j1 = i - N
                if law == "velocity":
                    c0, cm, c1 = (eps * v for v in delayed_vel(j1))
                    ctrl = lambda c, s: c
                elif law == "states":
                    a1, m1, b1 = delayed(j1)
                    a2, m2, b2 = delayed(i - 2 * N)
                    c0, cm, c1 = eps * (a2 - a1), eps * (m2 - m1), eps * (b2 - b1)
                    ctrl = lambda c, s: c
                else:
                    c0, cm, c1 = (eps * v for v in delayed(j1))
                    ctrl = lambda c, s: c - eps * s
                u0 = ctrl(c0, y)
                U[i] = u0
                k1 = G[i] + u0
                s = y + half * k1
                k2 = g(s) + ctrl(cm, s)
                s = y + half * k2
                k3 = g(s) + ctrl(cm, s)
                s = y + dt * k3
                k4 = g(s) + ctrl(c1, s)
                y_next = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                Y[i + 1] = y_next
                G[i + 1] = g(y_next)
                RL[i + 1] = G[i + 1] + ctrl(c1, y_next)

            bad = ~(np.abs(Y[i + 1]) <= DIVERGENCE_BOUND)
            if bad.any():
                new = bad & ~diverged
                if new.any() and raise_on_divergence:
                    k = int(np.flatnonzero(new)[0])
                    raise DivergenceError(float((i + 1) * dt[k]), float(Y[i + 1, k]))
                diverged |= bad
                Y[i + 1, bad] = np.nan
                G[i + 1, bad] = np.nan

    rhs = G + U
    return {"Y": Y, "rhs": rhs, "rhs_left": RL, "control": U, "diverged": diverged}


def simulate(spec: SystemSpec, params: ControlParams, cfg: SimConfig, *,
             delayed_velocity: str = "field") -> Trajectory:
    """Integrate the controlled plant from ``cfg.x0`` over ``cfg.periods`` full periods.

    Raises
    ------
    DivergenceError
        If ``|x - x_star|`` exceeds 1e6 at any node.
    """
    method = _as_method(params.method)
    out = integrate_batch(spec.g, method.value, params.eps, params.tau, cfg.x0 - spec.x_star,
                          cfg.steps_per_tau, cfg.periods, delayed_velocity=delayed_velocity,
                          raise_on_divergence=True)
    return Trajectory(
        method=method, tau=params.tau, eps=params.eps, alpha=params.alpha, lam=spec.lam,
        x_star=spec.x_star, x0=cfg.x0, steps_per_tau=int(cfg.steps_per_tau), plant=spec.label,
        states=out["Y"][:, 0] + spec.x_star, rhs=out["rhs"][:, 0], control=out["control"][:, 0],
        rhs_left=out["rhs_left"][:, 0],
    )


def control_signal(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """``(t, u)`` samples of the additive control term."""
    return traj.times, traj.control


def state_at(traj: Trajectory, t: float) -> float:
    """State at an arbitrary time: stored node or Hermite dense output."""
    if not 0 <= t <= traj.horizon:
        raise ValueError(f"t={t} outside [0, {traj.horizon}]")
    dt = traj.dt
    i = int(round(t / dt))
    if abs(t - i * dt) <= 1e-12 * max(1.0, abs(t)):
        return float(traj.states[i])
    i = min(int(t // dt), traj.n_nodes - 2)
    theta = (t - i * dt) / dt
    return float(hermite(traj.states[i], traj.states[i + 1], traj.rhs[i], traj.rhs_left[i + 1], dt, theta))


def active_mask(traj: Trajectory) -> np.ndarray:
    return is_active_node(traj.method.period_multiplier, np.arange(traj.n_nodes), traj.steps_per_tau)

"""Post-processing and parameter-plane studies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MethodKind, Trajectory, _as_method, make_system
from .design import alpha_from_eps, convergence_rate, stability_interval
from .integrator import integrate_batch

__all__ = [
    "EnvelopeFit",
    "InsufficientSamplesError",
    "RateFit",
    "Raster",
    "boundary_curves",
    "check_envelope",
    "empirical_stable",
    "estimate_rate",
    "single_delay_counterexample",
    "stability_raster",
]

SAMPLE_FLOOR = 1e-12

# empirical stability criterion shared by both raster kinds
RASTER_STEPS_PER_TAU = 64
RASTER_X0 = 0.01
RASTER_PERIODS = 8
BOUNDARY_BAND = (0.9, 1.1)
_CHUNK = 1024


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    beta_hat: float
    beta_analytic: float
    samples_used: int
    residual: float
    deadbeat: bool = False

    @property
    def relative_error(self) -> float:
        if self.deadbeat:
            return 0.0 if self.beta_analytic == -math.inf else math.inf
        return abs(self.beta_hat - self.beta_analytic) / abs(self.beta_analytic)


def estimate_rate(traj: Trajectory, floor: float = SAMPLE_FLOOR) -> RateFit:
    """Least-squares slope of ``ln|x(k m tau) - x*|`` against time.

    Samples at or below ``floor`` are dropped. A run that reaches the floor
    before four samples are available is reported as deadbeat.
    """
    y = np.abs(traj.period_samples() - traj.x_star)
    t = traj.period_times()
    keep = y > floor
    analytic = convergence_rate(traj.method, traj.alpha, traj.tau) if abs(traj.alpha) < 1 else math.nan
    n_used = int(keep.sum())
    if n_used < 4:
        if (~keep).any() and keep[0]:
            return RateFit(beta_hat=-math.inf, beta_analytic=analytic, samples_used=n_used,
                           residual=0.0, deadbeat=True)
        raise InsufficientSamplesError(f"need at least 4 period samples above {floor:g}, have {n_used}")
    logs = np.log(y[keep])
    slope, intercept = np.polyfit(t[keep], logs, 1)
    residual = float(np.max(np.abs(logs - (slope * t[keep] + intercept))))
    return RateFit(beta_hat=float(slope), beta_analytic=analytic, samples_used=n_used, residual=residual)


@dataclass(frozen=True)
class EnvelopeFit:
    """Tightest constants for the exponential envelope over a trajectory.

    Upper bound ``c_M exp(rate_upper t) |x0|``; lower bound
    ``c_m exp(rate_lower t) |x0|`` (``c_m`` is ``None`` when the lower bound
    is not applicable, i.e. ``alpha == 0`` or ``|alpha| <= mu``).
    """

    mu: float
    c_m: float | None
    c_M: float
    holds: bool
    rate_upper: float
    rate_lower: float | None


def _log_or_neginf(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


def check_envelope(traj: Trajectory, alpha: float, mu: float) -> EnvelopeFit:
    if not 0 <= mu < 1:
        raise ValueError(f"mu must lie in [0, 1), got {mu}")
    if not abs(alpha) < 1:
        raise ValueError(f"envelope needs |alpha| < 1, got {alpha}")
    mtau = traj.method.period_multiplier * traj.tau
    rate_up = _log_or_neginf(abs(alpha) + mu if alpha != 0 else mu) / mtau
    lower = alpha != 0 and abs(alpha) > mu
    rate_lo = math.log(abs(alpha) - mu) / mtau if lower else None

    y = np.abs(traj.states - traj.x_star)
    y0 = y[0]
    if y0 == 0:
        return EnvelopeFit(mu=mu, c_m=1.0 if lower else None, c_M=1.0, holds=True,
                           rate_upper=rate_up, rate_lower=rate_lo)
    t = traj.times
    with np.errstate(divide="ignore", invalid="ignore"):
        log_y = np.log(y / y0)
        if rate_up == -math.inf:
            # bound is zero for t > 0: only exact zeros satisfy it
            c_M = 1.0 if np.all(y[1:] == 0) else math.inf
        else:
            c_M = float(np.exp(np.max(log_y - rate_up * t)))
        c_m = float(np.exp(np.min(log_y - rate_lo * t))) if lower else None
    holds = math.isfinite(c_M) and c_M > 0 and (c_m is None or (math.isfinite(c_m) and c_m > 0))
    return EnvelopeFit(mu=mu, c_m=c_m, c_M=c_M, holds=holds, rate_upper=rate_up, rate_lower=rate_lo)


# --- rasters ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Raster:
    """Stable/unstable classification over a ``(lambda*tau, gain)`` grid.

    Arrays are indexed ``[iy, ix]``. ``y_axis`` is ``eps`` for the velocity
    scheme and ``eps / lambda`` for the states scheme. ``scheme`` is a
    method name or ``"single_delay"``.
    """

    scheme: str
    lam: float
    x_axis: np.ndarray
    y_axis: np.ndarray
    mode: str
    analytic_alpha: np.ndarray
    analytic_stable: np.ndarray | None
    empirical_stable: np.ndarray | None

    @property
    def boundary_band(self) -> np.ndarray:
        a = np.abs(self.analytic_alpha)
        return (a > BOUNDARY_BAND[0]) & (a < BOUNDARY_BAND[1])

    @property
    def cells(self) -> np.ndarray:
        """0 unstable, 1 stable, 2 boundary-adjacent (analytic when available)."""
        base = self.analytic_stable if self.analytic_stable is not None else self.empirical_stable
        out = base.astype(int)
        out[self.boundary_band] = 2
        return out

    def agreement(self) -> float:
        """Fraction of cells outside the boundary band where both modes agree."""
        if self.analytic_stable is None or self.empirical_stable is None:
            raise ValueError("agreement needs both analytic and empirical classifications")
        outside = ~self.boundary_band
        return float(np.mean(self.analytic_stable[outside] == self.empirical_stable[outside]))

    @property
    def n_empirical_stable(self) -> int:
        return int(np.count_nonzero(self.empirical_stable))

    def rows(self):
        """Flat records ``(lambda_tau, eps_norm, analytic, empirical, alpha)``."""
        ny, nx = len(self.y_axis), len(self.x_axis)
        for iy in range(ny):
            for ix in range(nx):
                a = None if self.analytic_stable is None else bool(self.analytic_stable[iy, ix])
                e = None if self.empirical_stable is None else bool(self.empirical_stable[iy, ix])
                yield self.x_axis[ix], self.y_axis[iy], a, e, self.analytic_alpha[iy, ix]


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _grid(grid) -> tuple[int, int]:
    nx, ny = (grid, grid) if isinstance(grid, int) else grid
    if nx < 16 or ny < 16:
        raise ValueError(f"raster grid must be at least 16x16, got {nx}x{ny}")
    return int(nx), int(ny)


def empirical_stable(law: str, lam: float, eps, tau, *, steps_per_tau: int = RASTER_STEPS_PER_TAU,
                     x0: float = RASTER_X0, periods: int = RASTER_PERIODS) -> np.ndarray:
    """Strict contraction of consecutive period samples for the linear plant.

    Cells that diverge count as unstable. A sample that lands exactly on the
    equilibrium after a contraction is accepted.
    """
    spec = make_system("linear", 0.0, lam)
    eps = np.ravel(np.asarray(eps, dtype=float))
    tau = np.ravel(np.asarray(tau, dtype=float))
    eps, tau = np.broadcast_arrays(eps, tau)
    m = 3 if law == "states" else 2
    result = np.empty(eps.shape, dtype=bool)
    for s in range(0, eps.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        out = integrate_batch(spec.g, law, eps[sl], tau[sl], x0, steps_per_tau, periods)
        a = np.abs(out["Y"][:: m * steps_per_tau])
        with np.errstate(invalid="ignore"):
            ok = np.all((a[1:] < a[:-1]) | ((a[1:] == 0) & (a[:-1] == 0)), axis=0)
        result[sl] = ok & ~out["diverged"]
    return result


def stability_raster(method, lam: float, eps_range: tuple[float, float] | None = None,
                     lt_range: tuple[float, float] | None = None, grid=64, mode: str = "both") -> Raster:
    """Classify a grid of ``(lambda*tau, gain)`` cells.

    ``eps_range`` is in the normalized gain of the y axis (``eps`` for the
    velocity scheme, ``eps / lambda`` for states). ``lt_range`` bounds
    ``lambda*tau``. ``mode`` is ``analytic``, ``empirical`` or ``both``.
    """
    method = _as_method(method)
    if mode not in ("analytic", "empirical", "both"):
        raise ValueError(f"mode must be analytic, empirical or both, got {mode!r}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    nx, ny = _grid(grid)
    if eps_range is None:
        eps_range = (-25.0, 0.0) if method is MethodKind.VELOCITY else (0.0, 25.0)
    lt_lo, lt_hi = lt_range if lt_range is not None else (2.0 / nx, 2.0)
    if not 0 < lt_lo < lt_hi:
        raise ValueError("lambda*tau range must be positive and increasing")
    x_axis = _axis(lt_lo, lt_hi, nx)
    y_axis = _axis(*eps_range, ny)
    LT, EN = np.meshgrid(x_axis, y_axis)
    tau = LT / lam
    eps = EN if method is MethodKind.VELOCITY else EN * lam
    alpha = np.vectorize(lambda e, t: alpha_from_eps(method, lam, e, t))(eps, tau)
    analytic = np.abs(alpha) < 1 if mode in ("analytic", "both") else None
    empirical = None
    if mode in ("empirical", "both"):
        empirical = empirical_stable(method.value, lam, eps, tau).reshape(LT.shape)
    return Raster(scheme=method.value, lam=lam, x_axis=x_axis, y_axis=y_axis, mode=mode,
                  analytic_alpha=alpha, analytic_stable=analytic, empirical_stable=empirical)


def boundary_curves(method, lam: float, x_axis) -> np.ndarray:
    """Rows ``(lambda*tau, lo, hi)`` of the stability interval, in raster y units."""
    method = _as_method(method)
    scale = 1.0 if method is MethodKind.VELOCITY else 1.0 / lam
    rows = []
    for lt in x_axis:
        iv = stability_interval(method, lam, lt / lam)
        rows.append((lt, iv.eps_lo * scale, iv.eps_hi * scale))
    return np.array(rows)


def single_delay_counterexample(lam: float, eps_range: tuple[float, float] = (-50.0, 50.0),
                                lt_range: tuple[float, float] | None = None, grid=64) -> Raster:
    """Empirical sweep of ``x' = f(x) + eps(t) (x(t - tau) - x(t))`` on the two-subinterval schedule."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    nx, ny = _grid(grid)
    lt_lo, lt_hi = lt_range if lt_range is not None else (2.0 / nx, 2.0)
    if not 0 < lt_lo < lt_hi:
        raise ValueError("lambda*tau range must be positive and increasing")
    x_axis = _axis(lt_lo, lt_hi, nx)
    y_axis = _axis(*eps_range, ny)
    LT, EN = np.meshgrid(x_axis, y_axis)
    empirical = empirical_stable("single", lam, EN, LT / lam).reshape(LT.shape)
    return Raster(scheme="single_delay", lam=lam, x_axis=x_axis, y_axis=y_axis, mode="empirical",
                  analytic_alpha=np.full(LT.shape, np.nan), analytic_stable=None, empirical_stable=empirical)

"""Oscillating delayed feedback control of unstable scalar equilibria."""
from .core import (
    ControlParams,
    DivergenceError,
    MethodKind,
    StabilityInterval,
    SystemSpec,
    Trajectory,
    eval_f,
    gain_at,
    make_system,
)
from .design import (
    alpha_from_eps,
    convergence_rate,
    design,
    eps_from_alpha,
    params_from_alpha,
    params_from_eps,
    stability_interval,
    tau_star,
)
from .integrator import SimConfig, control_signal, simulate, state_at
from .poincare import contraction_run, period_map, period_map_derivative
from .analysis import check_envelope, estimate_rate, single_delay_counterexample, stability_raster

__version__ = "0.1.0"

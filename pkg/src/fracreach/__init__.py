"""Desk-scale numerics for approximate controllability of fractional
nonlocal delay control systems in the Dirichlet sine basis."""

__version__ = "0.1.0"

from .errors import DelayViolation, DomainError, NonConvergenceError, PoleError
from .special_fn import (
    FractionalOrder, MLParams, density_laplace, density_moment, gamma_fn, mittag_leffler, ml_evaluate,
    wright_density,
)
from .spectral import SobolevIndex, SpectralOperator, unit_mode
from .quadrature import ConvolutionWeights, TimeGrid, build_weights, convolve
from .fracops import (
    a_t_alpha_apply, bound_check_lemma25, caputo_derivative, frac_integral, s_alpha_apply, t_alpha_apply,
)
from .grammian import (
    ControlOperator, ControlPair, ControlSystem, Gramian, build_gamma1, build_gamma2, lemma26_decay,
    control_law, resolvent_apply, synthesize_controls,
)
from .dynamics import (
    FixedPointDiagnostics, Scenario, Trajectory, contraction_estimate, delayed_sample, eval_forcing_selection,
    eval_g, eval_h, fixed_point_solve, free_evolution, load_scenario, mild_solution, residual_check,
    save_scenario, terminal_error,
)
from .experiments import run_lambda_sweep, run_linear_check

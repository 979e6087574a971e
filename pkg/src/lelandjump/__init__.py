"""Option replication under proportional transaction costs in jump models.

Monte Carlo simulation of jump-diffusion stochastic-volatility markets,
Leland / Lepinette discrete hedging with enlarged volatility, and the
closed-form limit functionals of the replication error.
"""

from .asymptotics import (
    GridDiagnostics,
    LimitContext,
    corrector,
    eta,
    g_fn,
    gamma_limit,
    gamma_table,
    grid_diagnostics,
    lambda_fn,
    p_fn,
    q_fn,
    quantile_price,
    superhedge_rho,
)
from .hedging import (
    HedgeConfig,
    HedgeOutcome,
    RevisionGrid,
    corrected_error,
    error_decomposition,
    jump_term,
    leland_position,
    lepinette_position,
    make_revision_grid,
    run_hedge,
)
from .models import (
    CirSde,
    ConstantVol,
    ExponentialVol,
    JumpChannel,
    LogNormalFactor,
    ModelSpec,
    Normal,
    OuSde,
    PointMass,
    SimConfig,
    SimulatedPath,
    SqrtVol,
    Uniform,
    check_c1,
    drift_compensator,
    path_rng,
    sample_jump_times,
    simulate_ensemble,
    simulate_path,
)
from .pricing import (
    SQRT_8_OVER_PI,
    VolSchedule,
    call_delta,
    call_gamma,
    call_price,
    call_speed,
    classical_rho0,
    lambda_at,
    leland_rho,
    sigma_hat_sq,
    theta_cross,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    config_from_dict,
    convergence_slope,
    default_config_dict,
    emit_results,
    fit_power_law,
    load_config,
    run_experiment,
    selftest,
)

__version__ = "0.1.0"

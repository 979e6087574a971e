#!/usr/bin/env python3
"""Produce the golden CSV fixtures consumed by the report tests.

Calls the primary package only; run from the repository root:

    python report/golden/make_goldens.py
"""

from pathlib import Path

import numpy as np

from lelandjump.asymptotics import LimitContext, gamma_table
from lelandjump.harness import (
    ExperimentConfig,
    emit_gamma_table_csv,
    emit_lambda_schedule_csv,
    emit_paths_csv,
    emit_results,
    emit_revision_times_csv,
    run_experiment,
)
from lelandjump.hedging import make_revision_grid
from lelandjump.models import (
    ConstantVol,
    ExponentialVol,
    JumpChannel,
    ModelSpec,
    Normal,
    OuSde,
    SimConfig,
    simulate_ensemble,
)
from lelandjump.pricing import SQRT_8_OVER_PI

HERE = Path(__file__).parent


def main():
    # corrector_vs_strike: corrector and trading-volume limit, K=5
    ctx = LimitContext(5.0, 0.001, SQRT_8_OVER_PI, ConstantVol(1.0))
    rows = gamma_table(np.linspace(0.1, 15.0, 60), 0.0, ctx)
    emit_gamma_table_csv(HERE / "gamma_table.csv", rows[:, 0], rows[:, 1], rows[:, 2])

    # sample_paths: a few trajectories of the default model
    model = ModelSpec(1.0, ExponentialVol(2.0, 1.0), OuSde(-1.0, 0.2),
                      (JumpChannel(3.0, Normal(0.0, 0.2), "price"),))
    grid = make_revision_grid(100, 1.0)
    paths = simulate_ensemble(model, grid.dates,
                              SimConfig(n_paths=3, master_seed=607,
                                        substeps_per_interval=2))
    emit_paths_csv(HERE / "paths_dump.csv", paths)

    # revision_times: rebalancing dates for several mu
    emit_revision_times_csv(HERE / "revision_times.csv", (1.0, 1.5, 1.9), 30)

    # error_vs_n: corrected-error sweep for three cost rates
    for kappa in (0.0005, 0.001, 0.002):
        cfg = ExperimentConfig(
            model=model, kappa=kappa, n_values=(50, 100, 200, 400, 800),
            n_paths=200, master_seed=607, substeps_per_interval=1,
        )
        result = run_experiment(cfg)
        emit_results(result, HERE, ("csv",), stem=f"errors_kappa{kappa}")

    # lambda_vs_t: the remaining-variance sequence along the grid
    emit_lambda_schedule_csv(HERE / "lambda_schedule.csv", 50, 1.5, SQRT_8_OVER_PI)
    print("golden CSVs written to", HERE)


if __name__ == "__main__":
    main()

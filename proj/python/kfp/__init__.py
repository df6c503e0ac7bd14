"""Kinetic Fokker-Planck finite-volume solver, Lyapunov certifier and diagnostics."""

from ._core import (
    CertificateReport,
    EnergyScatter,
    Field,
    KineticSolver,
    LstarTarget,
    LyapunovSpec,
    ModelParams,
    PhaseGrid,
    RateFit,
    RateMode,
    ScanConfig,
    TailFit,
    apply_lstar_exact,
    asymptotic_density,
    build_grid,
    default_initial_condition,
    density,
    energy_scatter,
    l1_distance,
    log_tail_regression,
    mass,
    rate_fit,
    reference_profile,
    run,
    scan_drift_inequality,
    steady_state_reference,
)

__all__ = [name for name in dir() if not name.startswith("_")]

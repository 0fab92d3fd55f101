"""Non-Markovian quantum jump simulation for time-local master equations."""
from .ensemble import (
    BreakdownEvent,
    JumpEvent,
    Trajectory,
    TrajectoryTable,
    density_estimate,
    detect_breakdown,
    expected_step_discrepancy,
    init_ensemble,
    simulate,
    step,
)
from .model import (
    Channel,
    ConstantRate,
    JCLorentzianRate,
    MasterEquationModel,
    TableRate,
    generator_apply,
    rate_split,
)
from .oracle import integrate_master, positivity_monitor

__version__ = "0.1.0"

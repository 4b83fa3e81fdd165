"""Leading cruise control (LCC) analysis for mixed traffic strings."""
from .car_following import (
    DriverParams,
    Equilibrium,
    LinearGains,
    desired_velocity,
    equilibrium_from_spacing,
    linearize,
    ovm_acceleration,
    solve_equilibrium,
)
from .controllability import fd_condition, kalman_rank, pbh_test, uncontrollable_rows
from .region_scanner import GainAxis, ScanSpec, StabilityChart, region_delta, scan
from .simulator import Perturbation, SimulationResult, simulate_linear, simulate_nonlinear
from .string_stability import (
    OmegaGrid,
    StabilityVerdict,
    gamma_head_to_tail,
    phi_gamma,
    string_stability_verdict,
)
from .system_builder import (
    FeedbackGains,
    LccTopology,
    StateSpace,
    Variant,
    build,
    build_cf_lcc,
    build_fd_lcc,
    build_general,
    closed_loop,
)

__version__ = "0.1.0"

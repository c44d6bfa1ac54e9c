"""Traffic-signal mode selection as a QUBO, with solvers and a closed-loop simulator."""
from .network import (
    CoefficientTables,
    Intersection,
    Mode,
    Movement,
    NetworkError,
    RoadNetwork,
    Segment,
    compute_B,
    compute_R,
    compute_tables,
    load_network,
    validate,
)
from .qubo import (
    DwellState,
    Hyperparameters,
    ModeAssignment,
    Qubo,
    TrafficCounts,
    VariableIndex,
    add_dwell_penalty,
    build_qubo,
    decode,
    evaluate,
)
from .solvers import SaConfig, SolveResult, solve_exact, solve_local, solve_sa

__version__ = "0.1.0"

"""Mean-field LQ stochastic control and two-player differential games.

Solves the coupled algebraic Riccati systems of infinite-horizon
mean-field LQ problems (control, non-zero-sum Nash, zero-sum saddle
point), certifies mean-field L2 stabilizability, synthesizes feedback
strategies and value functions, and validates equilibria by Monte-Carlo
simulation of the closed-loop mean-field SDE.
"""

from .errors import (
    AsymmetryExceedsTolerance,
    DimensionMismatch,
    MFLQError,
    NonFinite,
    NonFiniteState,
    NotSolved,
    NotZeroSum,
    RangeConditionFailed,
    ResolventSingular,
    SingularLyapunov,
    SingularOperator,
    UnstableHomogeneousSystem,
    UnstableOperator,
)
from .model import (
    ControlSpec,
    FeedbackStrategy,
    Forcing,
    ForcingTerm,
    GameSpec,
    HatCoefficients,
    OffsetTerm,
    PlayerCost,
    ZeroSumSpec,
    closed_loop_transform,
    control_as_game,
    hat,
    intrinsically_same,
    validate,
    validate_control,
    zero_sum_reduce,
)
from .riccati import (
    ClosedLoopNashSolution,
    ControlAreSolution,
    OpenLoopNashSolution,
    SolveOptions,
    ZeroSumSolution,
    are_residuals,
    solve_closedloop_nash_are,
    solve_control_are,
    solve_openloop_nash_are,
    solve_zerosum_are,
    solve_zerosum_openrep_are,
)
from .equilibrium import (
    ConvexityReport,
    NashCertificate,
    OffsetSolution,
    ValueReport,
    convexity_check,
    nash_certificate,
    solve_offsets,
    synthesize_strategy,
    value_function,
)
from .simulate import (
    CostEstimate,
    DeviationReport,
    PathEnsemble,
    SimOptions,
    deviation_test,
    estimate_cost,
    simulate_closed_loop,
)
from .stabilizability import (
    StabilizerCertificate,
    check_stabilizer,
    check_uncontrolled_stability,
)

__version__ = "0.1.0"

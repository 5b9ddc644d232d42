"""Deterministic simulation and verification of repeated first-price auctions
with partial monitoring, the MaxBid learning rule, and (robust) learning
equilibrium checks over finite deviation families."""

from .core import (
    Absorbed,
    AuctionGame,
    AuctionMonitor,
    AuctionSignal,
    LongRun,
    MatrixGame,
    Opaque,
    Periodic,
    PayoffMonitor,
    PayoffSignal,
    PlayTrace,
    Strategy,
    StrategyError,
    TrivialMonitor,
    UNDETERMINED,
    auction_monitor,
    average_payoff,
    default_monitor,
    evaluate,
    longrun_payoff,
    prefix_compose,
    run,
    summarize,
)
from .failures import (
    IDENTITY,
    FailureSchedule,
    FixedSignal,
    InvalidSchedule,
    LiftedState,
    Override,
    SignalMap,
    apply_failures,
    enumerate_lifted,
    validate_recovery,
)
from .stage import (
    EX21_GAMES,
    InvalidInput,
    MatrixGameSpec,
    ValuationState,
    matrix_stage_payoffs,
    one_stage_equilibrium,
    stage_payoffs,
    verify_one_stage_nash,
    winning_bid,
)
from .strategies import (
    ComposeSpec,
    ConstantSpec,
    Ex21Spec,
    MaxBidConfig,
    MaxBidSpec,
    PeriodicSpec,
    Window,
    constant_strategy,
    ex21_strategy,
    maxbid_next,
    maxbid_strategy,
    observed_max,
    periodic_strategy,
)
from .verify import (
    STANDARD_FAMILY,
    ConstantPrefixes,
    ConvergedAt,
    DensityReport,
    DeviationFamily,
    FamilyTooLarge,
    NotConverged,
    Scenario,
    Verdict,
    best_deviation,
    convergence_round,
    deviation_gain,
    f_robust_test,
    le_test,
    robust_le_test,
)

__version__ = "0.1.0"

"""Lattice Monte Carlo and mean-field toolkit for three-brand market dynamics."""

__version__ = "0.1.0"

from .types import (  # noqa: F401
    AdvertisingField,
    ConfigError,
    DimensionError,
    DomainError,
    ModelKind,
    ParseError,
    ScanAmbiguityError,
    Shares,
)
from .lattice import (  # noqa: F401
    Lattice,
    PanelGeometry,
    apply_update,
    concentrations,
    init_lattice,
    panel_geometry,
    sample_operator,
)
from .engine import (  # noqa: F401
    CriticalField,
    EnsembleResult,
    PhaseDiagram,
    PhasePoint,
    SimConfig,
    SteadyStateResult,
    Trajectory,
    derive_rng,
    ensemble_steady,
    find_hc,
    incumbent_share,
    run_to_steady,
    run_trajectory,
    sweep,
)
from .mfa import (  # noqa: F401
    FixedPointResult,
    fixed_point_scan,
    mfa_fixed_point,
    mfa_step,
    raw_increments,
)
from .calibration import (  # noqa: F401
    Adjustment,
    AdvertisingSchedule,
    FitResult,
    MarketSeries,
    QuantileBands,
    build_schedule,
    fit_conformity,
    load_series,
    run_schedule_trajectory,
    simulate_bands,
)

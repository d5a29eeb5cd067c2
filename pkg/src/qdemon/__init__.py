"""Maxwell-demon feedback on a single-electron transistor: DCG dynamics, counting statistics
and thermodynamics, with Zeno-limit, Born-Markov and exact reference solvers."""
from .errors import (
    ConfigError,
    ConservationViolation,
    CutoffRequired,
    DegenerateBranch,
    DegenerateFixedPoint,
    DemonError,
    HorizonExceeded,
    MomentToleranceFailure,
    QuadratureFailure,
    SecondLawViolation,
)
from .exact import (
    DiscretizedBath,
    ExactModel,
    discretize_bath,
    exact_evolve,
    exact_feedback,
    exact_measure_feedback,
    occupation_trace,
)
from .feedback import (
    FCSMoments,
    FeedbackPropagator,
    StationaryState,
    bms_pipeline,
    feedback_cycle,
    feedback_propagator,
    fcs_first_moments,
    find_zero_current,
    measurement_projectors,
    mgf,
    stationary_state,
    time_averaged_current,
)
from .kernel import (
    CGLiouvillian,
    CountingFields,
    bms_liouvillian,
    build_cg_liouvillian,
    cg_rate_energy_weighted,
    cg_rates,
    propagator,
)
from .model import (
    E,
    F,
    DotSpec,
    FeedbackProtocol,
    OccupationVector,
    Outcome,
    ReservoirSpec,
    SETConfig,
    config_from_mapping,
    fermi_occupation,
    band_config,
    feedback_config,
    spectral_density,
)
from .thermo import (
    NotDefined,
    ThermoReport,
    electric_power,
    entropy_balance,
    feedback_energy,
    gain,
    heat_flows,
    thermo_report,
)
from .zeno import (
    ZenoCoefficients,
    delta_tilde,
    zeno_coefficients,
    zeno_feedback_energy,
    zeno_mgf,
    zeno_moments,
    zeno_occupation,
)

__version__ = "0.1.0"

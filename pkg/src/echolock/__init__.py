"""Photon-echo simulator for a three-level lambda system.

Integrates the density matrix of each detuning group in an
inhomogeneously broadened ensemble under a configurable pulse sequence
(data, rephasing, and optical-locking pulses), reduces the ensemble
coherence into a macroscopic emission proxy, detects and classifies
echoes, and cross-checks the dynamics against analytic phase and timing
predictors.
"""

from .analysis import (
    EchoEvent,
    EchoPrediction,
    Eq1Params,
    LedgerReport,
    OrderReport,
    UvPoint,
    check_order,
    coherence_map,
    detect_echoes,
    eq1_intensities,
    fit_intensity_decay,
    inversion_profile,
    ledger_vs_simulation,
    phase_ledger,
    predict_echo_times,
    predict_echo_times_at,
    uv_trajectory,
)
from .config import RunConfig, parse_config, serialize_config
from .dynamics import (
    RunParams,
    Trajectory,
    hamiltonian_at,
    integrate_group,
    lindblad_rhs,
    simulate_ensemble,
)
from .ensemble import (
    AtomGroup,
    EnsembleSignal,
    EnsembleSpec,
    build_ensemble,
    reduce_signal,
)
from .errors import (
    ConfigError,
    DetectionError,
    EchoLockError,
    NumericalStabilityError,
    ShapeError,
)
from .scenarios import SCENARIO_IDS, scenario_config, scenario_text
from .sequence import (
    DecayRates,
    LockingShift,
    Pulse,
    PulseSequence,
    area_to_rabi,
    locking_phase_shift,
    make_sequence,
    validate,
)

__version__ = "0.1.0"

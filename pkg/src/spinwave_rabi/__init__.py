"""Simulator and analysis toolkit for spin-wave-assisted photonic Rabi
oscillation: write-phase spin-wave creation, probe/Stokes conversion
dynamics, and the scaling analyses of the resulting traces."""

__version__ = "0.1.0"

from .core_model import (  # noqa: F401
    PhysicalParams,
    RateSet,
    ResonanceSpec,
    SinglePhotonState,
    SpinWaveAmplitude,
    conversion_closed_form,
    coupling_eta,
    mixing_angle_with_decay,
    rabi_frequency,
    single_photon_output,
    spin_wave_from_write,
    validate_resonance,
    write_gain_kappa,
)
from .meanfield import (  # noqa: F401
    DampingParams,
    FieldState,
    IntegratorConfig,
    IntegrationDivergedError,
    Trace,
    check_manley_rowe,
    derivatives,
    integrate,
    run_conversion_phase,
    run_write_phase,
)
from .gaussian import (  # noqa: F401
    GaussianState,
    SymplecticMatrix,
    apply_beam_splitter,
    apply_loss,
    apply_two_mode_squeezer,
    displace,
    mean_photon_number,
    simulate_full_sequence,
    vacuum_state,
)
from .analysis import (  # noqa: F401
    DampedRabiModel,
    DegenerateFitError,
    FitResult,
    RegressionResult,
    fit_damped_rabi,
    initial_guess,
    loglog_slope,
    peak_value,
    phase_difference,
    pulse_area_efficiency,
    scaling_regression,
)
from .config import (  # noqa: F401
    ConfigError,
    PulseSegment,
    ScenarioConfig,
    load_config,
    parse_config,
)
from .scenario import (  # noqa: F401
    OutputRecord,
    power_to_amplitude,
    run_scenario,
    sweep_probe_power,
    sweep_write_power,
)
from .output import emit_csv, emit_report, read_trace_csv  # noqa: F401

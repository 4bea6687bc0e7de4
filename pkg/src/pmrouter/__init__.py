"""Virtual lab for a polarization-maintaining electro-optic Mach-Zehnder router."""

from .analysis import (
    SinusoidFit,
    SwitchingMetrics,
    acceptance_bandwidth,
    compute_switching_metrics,
    extract_transition_times,
    fit_sinusoid,
    fringe_extinction_db,
    gvd_visibility,
    pulse_edge_times,
    sweep_switching_metrics,
)
from .config import validate_config
from .datasets import SweepDataset, TomographyDataset, WaveformDataset, load_dataset, save_dataset
from .errors import (
    AnalysisError,
    ConfigError,
    ConvergenceError,
    DegenerateStateError,
    FitError,
    FormatError,
    NoSwitchingError,
    ParameterError,
    PhysicalityError,
    RankDeficientError,
    RouterError,
)
from .experiment import (
    DriverWaveformConfig,
    NoiseModel,
    SweepConfig,
    calibrate_driver,
    run_sweep,
    run_tomography_experiment,
    run_waveform,
)
from .optics import (
    BeamSplitterModel,
    CrystalParams,
    EomModel,
    RouterModel,
    build_router,
    eom_jones,
    half_wave_voltage,
    port_powers,
    router_transfer,
    rtp_eom,
)
from .polarization import jones_to_density, jones_vector, state_fidelity, trace_distance
from .tomography import (
    bootstrap_uncertainty,
    ideal_chi,
    linear_process_reconstruction,
    linear_state_reconstruction,
    mle_process,
    mle_state,
    port2_frame_correction,
    process_fidelity,
)

__version__ = "0.1.0"

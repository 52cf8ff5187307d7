"""uwbsim: TDOA-based UWB indoor positioning simulation toolkit.

Implements both acquisition paths (equivalent-time sequential sampling and
compressed sensing), four sparse-recovery algorithms (OMP, BP-denoise, fast
BCS, and a multi-station prior-exploiting variant), an iterative TDOA
solver, and the experiment harness that maps positioning error over 1D/2D/3D
geometries.
"""

from .acquisition import (
    MeasurementVector,
    ProjectionMatrix,
    load_projection,
    make_projection,
    measure,
    reduction_ratio,
    save_projection,
)
from .arrival import ArrivalEstimate, detect_arrival, time_difference
from .errors import ConfigError, NoPulseError, NotConvergedError, UwbSimError
from .pipeline import (
    LocateOutcome,
    PipelineConfig,
    PositioningContext,
    locate_once,
    locate_track,
)
from .recovery import (
    BcsState,
    CsUwbSolver,
    ReconResult,
    TemplateDictionary,
    bcs,
    bp_denoise,
    cs_uwb,
    kernel_name,
    omp,
    recon_percentage,
)
from .sequential import (
    SequentialConfig,
    acquire_sequential,
    drift_for_scale,
    equivalent_rate,
    estimate_arrival_sequential,
    extension_scale,
)
from .signal_model import (
    ChannelProfile,
    ChannelRealization,
    PulseSpec,
    SignalFrame,
    add_noise,
    gaussian_pulse,
    generate_channel,
    load_channel_file,
    preset_profile,
    save_channel_file,
    synthesize_frame,
)
from .tdoa import (
    AnchorSet,
    C_MM_PER_S,
    PositionEstimate,
    TdoaProblem,
    range_diff_to_tau,
    range_difference,
    solve_tdoa,
    tau_to_range_diff,
    tdoa_jacobian,
)

__version__ = "0.1.0"

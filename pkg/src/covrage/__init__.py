"""Receive-side sub-array beamforming for head-mounted displays.

The package synthesizes oblong multi-sub-beam coverage of a predicted
angle-of-arrival trajectory on a virtual-sub-array phased antenna and
evaluates the resulting gain with seeded Monte-Carlo simulation.
"""

from .arrays import (
    ArrayGeometry,
    ArrayPartition,
    WeightVector,
    build_grid,
    build_ura,
    make_transitional,
    partition_multiblock,
    quantize_phases,
)
from .channel import (
    ChannelInstance,
    MultipathComponent,
    SteeringVector,
    channel_matrix,
    gain_full,
    gain_simplified,
    predicted_beamwidth,
    predicted_beamwidth_uv,
    received_signal,
    sample_channel,
    steering_vector,
    uv_gain,
    uv_response,
)
from .core import (
    DIAGONAL,
    HORIZONTAL,
    LOOSE,
    NON_DIAGONAL,
    SEMI_DIAGONAL,
    TIGHT,
    VERTICAL,
    BeamSpec,
    CoverageWarning,
    TrajectoryPlan,
    assign_loose,
    assign_single_block,
    assign_tight,
    beam_to_json,
    classify_trajectory,
    covrage_beam,
    place_subbeams,
    sample_trajectory,
    sync_subbeams,
    synthesize,
)
from .metrics import (
    GainMap,
    MetricSeries,
    MotionWindowStats,
    bin_series,
    gain_concentration,
    gain_map,
    gain_variation,
    isotropic_concentration,
    savgol_smooth,
    shift_trajectory,
    sliding_motion_stats,
    trajectory_gain_profile,
)
from .rotations import (
    DegenerateRotationError,
    SphericalDirection,
    UnitQuaternion,
    UVPoint,
    active_rotation,
    apply_rotation,
    compose,
    direction_to_uv,
    slerp,
    uv_to_direction,
)
from .sampling import random_rotation, sample_endpoints
from .traces import MotionTrace, TraceFormatError, read_trace

__version__ = "0.1.0"

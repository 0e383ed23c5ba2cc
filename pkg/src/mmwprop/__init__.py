"""Outdoor 73 GHz foliage and ground-reflection propagation toolkit."""

from .errors import (
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    IntegrityError,
    InvalidDataError,
    InvalidGeometryError,
    InvalidSceneError,
    MmwError,
    NoSignalError,
    NotFoundError,
)
from .geometry import (
    ElevationSweepPlan,
    GroundBounce,
    LinkGeometry,
    canopy_path_length,
    downtilt_schedule,
    elevation_sweep_plan,
    ground_bounce,
)
from .propagation import (
    FoliageFit,
    FoliageObservation,
    LinkBudgetParams,
    fit_foliage_attenuation,
    foliage_path_loss,
    free_space_path_loss_db,
    friis_received_power,
    ground_reflected_power,
    xpd,
)
from .reflection import (
    GroundMaterial,
    ReflectionEstimate,
    fresnel_curve,
    fresnel_parallel,
    recover_reflection_coefficient,
    reflection_loss_db,
)
from .pdp import (
    PowerDelayProfile,
    SweepRecord,
    SweepSet,
    omni_path_loss,
    omni_received_power,
    parse_sweep,
    pdp_total_power,
    write_sweep,
)
from .sounder import (
    ChannelTap,
    PnSequence,
    SounderConfig,
    apply_channel,
    generate_pn,
    slide_factor,
    sliding_correlate,
    synthesize_sweep,
)
from .dataset import load_reference, read_observations, validate_sweep_file

__version__ = "0.1.0"

"""
Flat-earth link geometry for a TX/RX pair above a planar ground.

Angles are in degrees. Elevations are measured from the horizontal with
downward negative; incident angles are measured from the surface normal.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

from .errors import InvalidGeometryError, InvalidSceneError, NotFoundError

# Successive RX elevations in a ground-reflection sweep step by one HPBW.
ELEVATION_STEP_DEG = 7


@dataclass(frozen=True)
class LinkGeometry:
    """Antenna heights above ground and horizontal T-R separation, in meters."""

    tx_height_m: float
    rx_height_m: float
    separation_m: float

    def __post_init__(self):
        for name in ("tx_height_m", "rx_height_m", "separation_m"):
            value = getattr(self, name)
            try:
                ok = math.isfinite(value) and value > 0
            except TypeError:
                ok = False
            if not ok:
                raise InvalidGeometryError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def direct_length_m(self) -> float:
        """Length of the line-of-sight ray between the two antennas."""
        return math.hypot(self.separation_m, self.tx_height_m - self.rx_height_m)

    @property
    def direct_elevation_deg(self) -> float:
        """Elevation of the RX as seen from the TX (negative when the RX is lower)."""
        return math.degrees(math.atan2(self.rx_height_m - self.tx_height_m, self.separation_m))


@dataclass(frozen=True)
class GroundBounce:
    d_tot_m: float
    grazing_deg: float
    incident_deg: float
    tx_downtilt_deg: float
    rx_downtilt_deg: float
    specular_x_m: float


class Downtilt(NamedTuple):
    tx_deg: float
    rx_deg: float


@dataclass(frozen=True)
class ElevationSweepPlan:
    """TX/RX elevation combinations used at one RX location.

    ``rows`` holds ``(measurement_number, tx_elevation_deg, rx_elevations_deg)``.
    """

    rx_id: int
    rows: Tuple[Tuple[int, float, Tuple[float, ...]], ...]

    def __post_init__(self):
        for number, _tx, rx_list in self.rows:
            steps = [b - a for a, b in zip(rx_list, rx_list[1:])]
            if any(step != ELEVATION_STEP_DEG for step in steps):
                raise ValueError(
                    f"RX{self.rx_id} M{number}: RX elevations must step by "
                    f"+{ELEVATION_STEP_DEG} deg, got {list(rx_list)}"
                )

    def measurement(self, number: int) -> Tuple[float, Tuple[float, ...]]:
        """Return ``(tx_elevation_deg, rx_elevations_deg)`` for one measurement."""
        for n, tx, rx in self.rows:
            if n == number:
                return tx, rx
        raise NotFoundError(f"RX{self.rx_id} has no measurement {number}")


def ground_bounce(geom: LinkGeometry) -> GroundBounce:
    """Specular ground reflection by the image method."""
    h_sum = geom.tx_height_m + geom.rx_height_m
    d = geom.separation_m
    grazing = math.degrees(math.atan2(h_sum, d))
    return GroundBounce(
        d_tot_m=math.hypot(d, h_sum),
        grazing_deg=grazing,
        incident_deg=90.0 - grazing,
        tx_downtilt_deg=-grazing,
        rx_downtilt_deg=-grazing,
        specular_x_m=d * geom.tx_height_m / h_sum,
    )


def _round_half_away(x: float) -> float:
    return math.copysign(math.floor(abs(x) + 0.5), x)


def downtilt_schedule(geom: LinkGeometry, rounding: str = "exact") -> Downtilt:
    """Initial TX/RX downtilt that points both boresights at the specular point.

    ``rounding`` is ``"exact"`` or ``"nearest_degree"``.
    """
    if rounding not in ("exact", "nearest_degree"):
        raise ValueError(f"unknown rounding mode {rounding!r}")
    bounce = ground_bounce(geom)
    tx, rx = bounce.tx_downtilt_deg, bounce.rx_downtilt_deg
    if rounding == "nearest_degree":
        tx, rx = _round_half_away(tx), _round_half_away(rx)
    return Downtilt(tx, rx)


def elevation_sweep_plan(rx_id: int) -> ElevationSweepPlan:
    """Bundled TX/RX elevation plan for RX location ``rx_id`` (1..4)."""
    from .dataset import load_reference

    plans = load_reference().table1
    try:
        return plans[rx_id]
    except KeyError:
        raise NotFoundError(f"no elevation plan for rx_id={rx_id!r}; known: {sorted(plans)}") from None


def _validate_intervals(intervals, separation_m) -> List[Tuple[float, float]]:
    spans = sorted((float(a), float(b)) for a, b in intervals)
    tol = 1e-9 * separation_m
    prev_end = -math.inf
    for start, end in spans:
        if not (math.isfinite(start) and math.isfinite(end)) or end < start:
            raise InvalidSceneError(f"bad canopy interval ({start}, {end})")
        if start < -tol or end > separation_m + tol:
            raise InvalidSceneError(
                f"canopy interval ({start}, {end}) outside ground track [0, {separation_m}]"
            )
        if start < prev_end - tol:
            raise InvalidSceneError(f"canopy interval ({start}, {end}) overlaps a previous one")
        prev_end = end
    return spans


def canopy_path_length(
    intervals: Sequence[Tuple[float, float]],
    geom: LinkGeometry,
    ray: str = "direct",
) -> float:
    """Length of a ray inside canopy spans laid out along the ground track.

    Each span ``(start_m, end_m)`` is a vertical slab measured from the TX
    foot point. Both the direct ray and the two legs of the ground bounce have
    a constant 3-D length per horizontal meter, so the result is the covered
    horizontal length scaled by ``ray_length / separation``.
    """
    spans = _validate_intervals(intervals, geom.separation_m)
    if ray == "direct":
        ray_length = geom.direct_length_m
    elif ray == "ground_bounce":
        ray_length = ground_bounce(geom).d_tot_m
    else:
        raise ValueError(f"unknown ray {ray!r}")
    covered = sum(min(end, geom.separation_m) - max(start, 0.0) for start, end in spans)
    return covered * ray_length / geom.separation_m

"""
Link-budget equations: Friis free-space power, the foliage-attenuated
ground-bounce power, the linear-in-distance foliage loss model and its
least-squares attenuation rate, and cross-polarization discrimination.

Power arithmetic is done in milliwatts; dB/dBm appear only at the edges.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0  # m/s
CARRIER_HZ = 73.5e9


class NearFieldWarning(UserWarning):
    """Distance is below 1 m, where the far-field Friis formula is doubtful."""


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class LinkBudgetParams:
    tx_power_dbm: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    frequency_hz: float = CARRIER_HZ

    def __post_init__(self):
        if not (math.isfinite(self.frequency_hz) and self.frequency_hz > 0):
            raise DomainError(f"frequency_hz must be finite and > 0, got {self.frequency_hz!r}")
        for name in ("tx_power_dbm", "tx_gain_dbi", "rx_gain_dbi"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz


def _check_distance(distance_m, name="distance_m"):
    if not (math.isfinite(distance_m) and distance_m > 0):
        raise DomainError(f"{name} must be finite and > 0, got {distance_m!r}")
    if distance_m < 1.0:
        warnings.warn(f"{name}={distance_m} m is inside the near field", NearFieldWarning, stacklevel=3)


def free_space_path_loss_db(distance_m: float, frequency_hz: float = CARRIER_HZ) -> float:
    """Isotropic free-space path loss ``20 log10(4 pi d / lambda)``."""
    _check_distance(distance_m)
    lam = SPEED_OF_LIGHT / frequency_hz
    return 20.0 * math.log10(4.0 * math.pi * distance_m / lam)


def _friis_mw(params: LinkBudgetParams, distance_m: float) -> float:
    spread = (params.wavelength_m / (4.0 * math.pi * distance_m)) ** 2
    gains = 10.0 ** ((params.tx_gain_dbi + params.rx_gain_dbi) / 10.0)
    return 10.0 ** (params.tx_power_dbm / 10.0) * gains * spread


def friis_received_power(params: LinkBudgetParams, distance_m: float) -> float:
    """Received power in dBm over a free-space path of ``distance_m``."""
    _check_distance(distance_m)
    return 10.0 * math.log10(_friis_mw(params, distance_m))


def ground_reflected_power(
    params: LinkBudgetParams,
    d_tot_m: float,
    d_foliage_m: float,
    alpha_db_per_m: float,
    gamma_mag: float,
    free_space_anchor: Optional[Tuple[float, float]] = None,
) -> float:
    """Power in dBm of the ground-reflected ray after canopy attenuation.

    Friis over the reflected path length, times ``10**(-d_foliage*alpha/10)``,
    times ``|gamma|**2``. Returns ``-inf`` when ``gamma_mag`` is zero.

    ``free_space_anchor=(d_i_m, pr_fs_dbm)`` replaces the computed Friis term
    with a measured free-space power at ``d_i_m`` scaled to ``d_tot_m`` by the
    inverse-square law, which is the exact inverse of
    :func:`mmwprop.reflection.recover_reflection_coefficient`.
    """
    _check_distance(d_tot_m, "d_tot_m")
    if not (math.isfinite(d_foliage_m) and d_foliage_m >= 0):
        raise DomainError(f"d_foliage_m must be >= 0, got {d_foliage_m!r}")
    if not (0.0 <= gamma_mag <= 1.0):
        raise DomainError(f"gamma_mag must lie in [0, 1], got {gamma_mag!r}")
    if gamma_mag == 0.0:
        return -math.inf
    if free_space_anchor is None:
        base_mw = _friis_mw(params, d_tot_m)
    else:
        d_i, pr_fs_dbm = free_space_anchor
        _check_distance(d_i, "anchor distance")
        base_mw = 10.0 ** (pr_fs_dbm / 10.0) * (d_i / d_tot_m) ** 2
    # summed in dB so tiny |gamma| cannot underflow
    return 10.0 * math.log10(base_mw) - d_foliage_m * alpha_db_per_m + 20.0 * math.log10(gamma_mag)


def foliage_path_loss(pl_free_space_db: float, alpha_db_per_m: float, distance_m: float) -> float:
    """Foliage path loss: free-space loss plus ``alpha * d``."""
    return pl_free_space_db + alpha_db_per_m * distance_m


@dataclass(frozen=True)
class FoliageObservation:
    """One distance with free-space and foliage path loss.

    ``reported_excess_db`` carries a separately published excess loss, which
    can differ from the difference of two rounded path losses by one unit in
    the last digit. When present it is used as the excess loss.
    """

    distance_m: float
    pl_free_space_db: float
    pl_foliage_db: float
    reported_excess_db: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.distance_m) and self.distance_m > 0):
            raise DomainError(f"distance_m must be > 0, got {self.distance_m!r}")
        if not (self.pl_free_space_db > 0 and self.pl_foliage_db > 0):
            raise DomainError("path losses must be positive")

    @property
    def excess_loss_db(self) -> float:
        if self.reported_excess_db is not None:
            return self.reported_excess_db
        return self.pl_foliage_db - self.pl_free_space_db


@dataclass(frozen=True)
class FoliageFit:
    alpha_db_per_m: float
    distances_m: Tuple[float, ...]
    excess_losses_db: Tuple[float, ...]
    residuals_db: Tuple[float, ...] = field(repr=False)

    @property
    def rms_residual_db(self) -> float:
        r = np.asarray(self.residuals_db)
        return float(np.sqrt(np.mean(r**2)))

    @property
    def has_negative_excess(self) -> bool:
        """True when some foliage loss is below free space (kept in the fit)."""
        return any(x < 0 for x in self.excess_losses_db)

    def model_db(self, distance_m):
        return self.alpha_db_per_m * np.asarray(distance_m, dtype=float)


def fit_foliage_attenuation(obs: Sequence[FoliageObservation]) -> FoliageFit:
    """Minimum mean-square-error attenuation rate through the origin.

    ``alpha = sum(PL_foliage - PL_fs) / sum(d)`` over the observations.
    """
    obs = list(obs)
    if not obs:
        raise DomainError("at least one observation is required")
    distances = [o.distance_m for o in obs]
    excess = [o.excess_loss_db for o in obs]
    alpha = math.fsum(excess) / math.fsum(distances)
    residuals = tuple(x - alpha * d for x, d in zip(excess, distances))
    fit = FoliageFit(alpha, tuple(distances), tuple(excess), residuals)
    if fit.has_negative_excess:
        warnings.warn("negative foliage excess loss retained in fit", RuntimeWarning, stacklevel=2)
    return fit


def xpd(pl_vh_db: Sequence[float], pl_vv_db: Sequence[float], method: str = "mean_difference") -> float:
    """Cross-polarization discrimination in dB from path-loss lists.

    ``mean_difference``: mean of index-aligned ``PL_VH - PL_VV``.
    ``total_power_difference``: path loss of the summed linear powers of the
    V-H list minus that of the V-V list (lists may differ in length).
    """
    vh = np.asarray(pl_vh_db, dtype=float)
    vv = np.asarray(pl_vv_db, dtype=float)
    if vh.size == 0 or vv.size == 0:
        raise DomainError("path-loss lists must be non-empty")
    if method == "mean_difference":
        if vh.shape != vv.shape:
            raise DomainError(f"length mismatch: {vh.size} V-H vs {vv.size} V-V")
        return float(np.mean(vh - vv))
    if method == "total_power_difference":
        def total_pl(pl):
            return -10.0 * math.log10(float(np.sum(10.0 ** (-pl / 10.0))))

        return total_pl(vh) - total_pl(vv)
    raise ValueError(f"unknown XPD method {method!r}")

"""Parallel-polarization Fresnel coefficients and measured |Gamma| recovery."""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

import numpy as np

from .errors import DomainError

FORMULAS = ("cos_transmitted", "textbook")
DEFAULT_PERMITTIVITIES = (1.0, 3.0, 5.0, 7.0, 9.0)


@dataclass(frozen=True)
class GroundMaterial:
    """Lossless ground described by a real relative permittivity."""

    relative_permittivity: float

    def __post_init__(self):
        eps = self.relative_permittivity
        if not (math.isfinite(eps) and eps >= 1.0):
            raise DomainError(f"relative permittivity must be >= 1, got {eps!r}")


@dataclass(frozen=True)
class ReflectionEstimate:
    gamma_mag: float
    incident_deg: float
    distance_m: float
    polarization: str
    reflection_loss_db: float

    @property
    def non_physical(self) -> bool:
        return self.gamma_mag > 1.0


def fresnel_parallel(material: GroundMaterial, incident_deg, formula: str = "cos_transmitted"):
    """Signed parallel-polarization reflection coefficient.

    ``cos_transmitted``::

        (cos t_t - sqrt(eps - sin^2 t_i)) / (cos t_t + sqrt(eps - sin^2 t_i))

    with ``sin t_t = sin t_i / sqrt(eps)``. Substituting Snell's law shows this
    equals ``(1 - sqrt(eps)) / (1 + sqrt(eps))`` at every angle.

    ``textbook``::

        (-eps cos t_i + sqrt(eps - sin^2 t_i)) / (eps cos t_i + sqrt(eps - sin^2 t_i))

    which vanishes at the Brewster angle ``tan t_B = sqrt(eps)``.

    Accepts a scalar or array of angles in ``[0, 90)`` degrees.
    """
    if formula not in FORMULAS:
        raise ValueError(f"formula must be one of {FORMULAS}, got {formula!r}")
    eps = material.relative_permittivity
    theta = np.asarray(incident_deg, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta >= 90):
        raise DomainError("incident angles must lie in [0, 90) degrees")
    cos_i = np.cos(np.radians(theta))
    # eps - sin^2 written as (eps - 1) + cos^2: exact at eps = 1, accurate near grazing
    root = np.sqrt((eps - 1.0) + cos_i**2)
    if formula == "cos_transmitted":
        cos_t = root / math.sqrt(eps)
        gamma = (cos_t - root) / (cos_t + root)
    else:
        gamma = (-eps * cos_i + root) / (eps * cos_i + root)
    return float(gamma) if gamma.ndim == 0 else gamma


def fresnel_curve(
    materials: Optional[Sequence[GroundMaterial]],
    theta_grid_deg: Sequence[float],
    formula: str = "cos_transmitted",
) -> np.ndarray:
    """Table of ``(eps_r, theta_deg, |gamma|)`` rows, materials outermost.

    ``materials=None`` uses eps_r in {1, 3, 5, 7, 9}.
    """
    if materials is None:
        materials = [GroundMaterial(e) for e in DEFAULT_PERMITTIVITIES]
    theta = np.asarray(theta_grid_deg, dtype=float).ravel()
    if theta.size == 0:
        raise DomainError("theta grid is empty")
    if not materials:
        raise DomainError("no materials given")
    blocks = []
    for m in materials:
        mag = np.abs(np.atleast_1d(fresnel_parallel(m, theta, formula)))
        blocks.append(np.column_stack([np.full(theta.size, m.relative_permittivity), theta, mag]))
    return np.vstack(blocks)


def write_curve_csv(table: np.ndarray, stream: TextIO) -> None:
    stream.write("eps_r,theta_deg,gamma_mag\n")
    for eps, theta, mag in table:
        stream.write(f"{eps:g},{theta:g},{mag:.10g}\n")


def reflection_loss_db(gamma_mag: float) -> float:
    """Loss of the reflection in dB, ``-20 log10 |gamma|``."""
    if not gamma_mag > 0:
        raise DomainError(f"gamma_mag must be > 0, got {gamma_mag!r}")
    return -20.0 * math.log10(gamma_mag)


def recover_reflection_coefficient(
    d_i_m: float,
    d_tot_m: float,
    d_foliage_m: float,
    alpha_db_per_m: float,
    pr_fs_dbm: float,
    pr_foliage_dbm: float,
    xpd_correction_db: float = 0.0,
    *,
    incident_deg: Optional[float] = None,
    polarization: str = "VV",
) -> ReflectionEstimate:
    """Measured |gamma| from a free-space and a ground-bounce received power.

    ``|gamma| = (d_tot/d_i) * sqrt(10**(d_fol*alpha/10))
    * sqrt(10**((Pr_fol - Pr_fs + xpd_correction)/10))``.

    When ``incident_deg`` is omitted it follows from the image geometry,
    ``sin(theta_i) = d_i / d_tot``. Values above 1 are returned, not rejected;
    check :attr:`ReflectionEstimate.non_physical`.
    """
    for name, value in (("d_i_m", d_i_m), ("d_tot_m", d_tot_m)):
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be > 0, got {value!r}")
    if not (math.isfinite(d_foliage_m) and d_foliage_m >= 0):
        raise DomainError(f"d_foliage_m must be >= 0, got {d_foliage_m!r}")
    if not alpha_db_per_m >= 0:
        raise DomainError(f"alpha must be >= 0, got {alpha_db_per_m!r}")
    foliage_db = d_foliage_m * alpha_db_per_m
    ratio_db = pr_foliage_dbm - pr_fs_dbm + xpd_correction_db
    gamma = (d_tot_m / d_i_m) * 10.0 ** (foliage_db / 20.0) * 10.0 ** (ratio_db / 20.0)
    if incident_deg is None:
        incident_deg = math.degrees(math.asin(min(1.0, d_i_m / d_tot_m)))
    loss = reflection_loss_db(gamma) if gamma > 0 else math.inf
    return ReflectionEstimate(gamma, incident_deg, d_i_m, polarization, loss)


def monotone_in_permittivity(table: np.ndarray) -> bool:
    """True when, at every angle, |gamma| is non-decreasing in eps_r."""
    eps_values = np.unique(table[:, 0])
    theta_values = np.unique(table[:, 1])
    grid = np.empty((eps_values.size, theta_values.size))
    for i, e in enumerate(eps_values):
        rows = table[table[:, 0] == e]
        grid[i] = rows[np.argsort(rows[:, 1]), 2]
    return bool(np.all(np.diff(grid, axis=0) >= 0))

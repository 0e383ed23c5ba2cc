"""
Scene files for the sounder simulator.

INI syntax with a ``[scene]`` section and an optional ``[sounder]`` section::

    [scene]
    tx_height_m = 4.06
    rx_height_m = 2.0
    separation_m = 10
    scenario = ground_reflection      ; free_space | foliage | ground_reflection
    polarization = VV
    canopy = 0-10, 12-15              ; horizontal intervals in meters
    alpha_db_per_m = 0.4
    gamma_mag = 0.1615                ; or: permittivity = 4
    bounce_foliage_m = 8              ; optional override of the canopy length
    sidelobe_db = none

    [sounder]
    noise_snr_db = 30
    rng_seed = 7
"""

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import InvalidSceneError
from .geometry import LinkGeometry
from .pdp import POLARIZATIONS, SCENARIOS, SweepSet
from .propagation import CARRIER_HZ, LinkBudgetParams
from .reflection import FORMULAS, GroundMaterial
from .sounder import SounderConfig, synthesize_sweep


@dataclass(frozen=True)
class Scene:
    geometry: LinkGeometry
    params: LinkBudgetParams
    scenario: str = "foliage"
    polarization: str = "VV"
    canopy: Tuple[Tuple[float, float], ...] = ()
    alpha_db_per_m: float = 0.0
    material: Optional[GroundMaterial] = None
    gamma_mag: Optional[float] = None
    fresnel_formula: str = "cos_transmitted"
    hpbw_deg: float = 7.0
    angular_step_deg: float = 10.0
    sidelobe_db: Optional[float] = -30.0
    direct_foliage_m: Optional[float] = None
    bounce_foliage_m: Optional[float] = None
    sounder: SounderConfig = field(default_factory=SounderConfig)

    def synthesize(self, threads: Optional[int] = None) -> SweepSet:
        return synthesize_sweep(
            self.geometry, self.canopy, self.material, self.alpha_db_per_m, self.params,
            self.hpbw_deg, self.angular_step_deg, self.sounder,
            scenario=self.scenario, polarization=self.polarization,
            sidelobe_db=self.sidelobe_db, gamma_mag=self.gamma_mag,
            fresnel_formula=self.fresnel_formula,
            direct_foliage_m=self.direct_foliage_m, bounce_foliage_m=self.bounce_foliage_m,
            threads=threads,
        )


def parse_intervals(text: str) -> Tuple[Tuple[float, float], ...]:
    """``"0-10, 12-15"`` -> ``((0, 10), (12, 15))``. Empty text gives no canopy."""
    out: List[Tuple[float, float]] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if not sep:
            raise InvalidSceneError(f"canopy interval {part!r} is not of the form start-end")
        try:
            out.append((float(lo), float(hi)))
        except ValueError:
            raise InvalidSceneError(f"canopy interval {part!r} is not numeric") from None
    return tuple(out)


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


def _take(section: Dict[str, str], key: str, convert, default: Any = None, required: bool = False):
    if key not in section:
        if required:
            raise InvalidSceneError(f"missing required key {key!r}")
        return default
    raw = section.pop(key)
    try:
        value = convert(raw)
    except (ValueError, TypeError):
        raise InvalidSceneError(f"bad value for {key!r}: {raw!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise InvalidSceneError(f"{key!r} must be finite")
    return value


def _choice(options):
    def convert(text):
        if text not in options:
            raise ValueError(text)
        return text
    return convert


def parse_scene(text: str, seed: Optional[int] = None) -> Scene:
    """Build a :class:`Scene` from INI text. ``seed`` overrides ``[sounder] rng_seed``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidSceneError(f"unreadable scene: {exc}") from None
    if not cp.has_section("scene"):
        raise InvalidSceneError("scene file needs a [scene] section")
    unknown_sections = set(cp.sections()) - {"scene", "sounder"}
    if unknown_sections:
        raise InvalidSceneError(f"unknown sections: {sorted(unknown_sections)}")

    s = dict(cp["scene"])
    geometry = LinkGeometry(
        _take(s, "tx_height_m", float, required=True),
        _take(s, "rx_height_m", float, required=True),
        _take(s, "separation_m", float, required=True),
    )
    params = LinkBudgetParams(
        _take(s, "tx_power_dbm", float, -7.9),
        _take(s, "tx_gain_dbi", float, 27.0),
        _take(s, "rx_gain_dbi", float, 27.0),
        _take(s, "frequency_hz", float, CARRIER_HZ),
    )
    permittivity = _take(s, "permittivity", float)
    gamma_mag = _take(s, "gamma_mag", float)
    if permittivity is not None and gamma_mag is not None:
        raise InvalidSceneError("give either permittivity or gamma_mag, not both")
    scene_kwargs = dict(
        scenario=_take(s, "scenario", _choice(SCENARIOS), "foliage"),
        polarization=_take(s, "polarization", _choice(POLARIZATIONS), "VV"),
        canopy=parse_intervals(s.pop("canopy", "")),
        alpha_db_per_m=_take(s, "alpha_db_per_m", float, 0.0),
        material=GroundMaterial(permittivity) if permittivity is not None else None,
        gamma_mag=gamma_mag,
        fresnel_formula=_take(s, "fresnel_formula", _choice(FORMULAS), "cos_transmitted"),
        hpbw_deg=_take(s, "hpbw_deg", float, 7.0),
        angular_step_deg=_take(s, "angular_step_deg", float, 10.0),
        sidelobe_db=_take(s, "sidelobe_db", _optional_float, -30.0),
        direct_foliage_m=_take(s, "direct_foliage_m", _optional_float),
        bounce_foliage_m=_take(s, "bounce_foliage_m", _optional_float),
    )
    if s:
        raise InvalidSceneError(f"unknown [scene] keys: {sorted(s)}")

    sounder_kwargs: Dict[str, Any] = {}
    if cp.has_section("sounder"):
        known = {f.name: f for f in fields(SounderConfig)}
        for key, raw in cp["sounder"].items():
            if key not in known:
                raise InvalidSceneError(f"unknown [sounder] key {key!r}")
            try:
                if key == "noise_snr_db":
                    value = _optional_float(raw)
                elif key == "pn_taps":
                    value = tuple(int(t) for t in raw.split(","))
                elif key in ("tx_chip_rate_hz", "rx_chip_rate_hz"):
                    value = float(raw)
                else:
                    value = int(raw)
            except ValueError:
                raise InvalidSceneError(f"bad value for [sounder] {key!r}: {raw!r}") from None
            sounder_kwargs[key] = value
    if seed is not None:
        sounder_kwargs["rng_seed"] = seed
    return Scene(geometry, params, sounder=SounderConfig(**sounder_kwargs), **scene_kwargs)


def load_scene(path: Union[str, Path], seed: Optional[int] = None) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read(), seed)

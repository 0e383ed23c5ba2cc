"""
Power delay profiles, directional sweep sets and omnidirectional synthesis.

Sweep file format (text, comma separated, ``#`` starts a comment)::

    # mmwprop-sweep v1
    S,<scenario>,<tx_power_dbm>,<tx_gain_dbi>,<rx_gain_dbi>
    R,<tx_az>,<tx_el>,<rx_az>,<rx_el>,<pol>,<distance_m>,<noise_floor_dbm>,<bin_spacing_ns>,<num_bins>,<response_area>
    P,<delay_ns>,<power_dbm>
    P,...
    R,...

One ``S`` line, then one ``R`` line per pointing angle followed by its ``P``
lines. Angles are degrees, delays nanoseconds, powers dBm. Delays must lie on
the uniform grid ``k * bin_spacing_ns`` for ``0 <= k < num_bins`` and be
strictly increasing. Grid bins without a ``P`` line hold zero power.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, TextIO, Tuple

import numpy as np

from .errors import DomainError, InvalidDataError, NoSignalError

POLARIZATIONS = ("VV", "VH")
SCENARIOS = ("free_space", "foliage", "ground_reflection")
DEFAULT_THRESHOLD_DB = 5.0
FORMAT_TAG = "# mmwprop-sweep v1"


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    """Received power per excess-delay bin.

    ``response_area`` is the summed bin power that a single unit-power path
    produces (1 for an ideal one-bin response). Correlator outputs spread a
    path over several bins; dividing by this calibration recovers path power.
    """

    delay_bins_ns: np.ndarray
    power_mw: np.ndarray
    noise_floor_dbm: float
    bin_spacing_ns: float
    response_area: float = 1.0

    def __post_init__(self):
        delays = np.asarray(self.delay_bins_ns, dtype=float)
        power = np.asarray(self.power_mw, dtype=float)
        object.__setattr__(self, "delay_bins_ns", delays)
        object.__setattr__(self, "power_mw", power)
        if delays.ndim != 1 or delays.shape != power.shape or delays.size == 0:
            raise InvalidDataError("delay and power arrays must be 1-D, non-empty and equal length")
        if not (self.bin_spacing_ns > 0):
            raise InvalidDataError("bin spacing must be positive")
        if np.any(~np.isfinite(power)) or np.any(power < 0):
            raise InvalidDataError("bin powers must be finite and non-negative")
        if delays.size > 1 and not np.allclose(np.diff(delays), self.bin_spacing_ns, rtol=1e-6, atol=1e-9):
            raise InvalidDataError("delay axis is not uniformly spaced at bin_spacing_ns")
        if not (self.response_area > 0):
            raise InvalidDataError("response_area must be positive")

    @property
    def peak_delay_ns(self) -> float:
        return float(self.delay_bins_ns[int(np.argmax(self.power_mw))])


@dataclass(frozen=True, eq=False)
class SweepRecord:
    tx_az_deg: float
    tx_el_deg: float
    rx_az_deg: float
    rx_el_deg: float
    polarization: str
    distance_m: float
    pdp: PowerDelayProfile

    def __post_init__(self):
        if self.polarization not in POLARIZATIONS:
            raise DomainError(f"polarization must be one of {POLARIZATIONS}")
        for name in ("tx_az_deg", "rx_az_deg"):
            if not (0.0 <= getattr(self, name) < 360.0):
                raise DomainError(f"{name} must lie in [0, 360)")
        for name in ("tx_el_deg", "rx_el_deg"):
            if not (-90.0 <= getattr(self, name) <= 90.0):
                raise DomainError(f"{name} must lie in [-90, 90]")
        if not (self.distance_m > 0):
            raise DomainError("distance must be positive")

    @property
    def pointing_key(self) -> Tuple[int, int, int, int]:
        """Pointing tuple rounded to whole degrees (azimuths folded into [0, 360))."""
        return (
            int(round(self.tx_az_deg)) % 360,
            int(round(self.tx_el_deg)),
            int(round(self.rx_az_deg)) % 360,
            int(round(self.rx_el_deg)),
        )


@dataclass(frozen=True, eq=False)
class SweepSet:
    records: Tuple[SweepRecord, ...]
    tx_gain_dbi: float
    rx_gain_dbi: float
    tx_power_dbm: float
    scenario: str

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.scenario not in SCENARIOS:
            raise DomainError(f"scenario must be one of {SCENARIOS}")
        seen = {}
        for i, rec in enumerate(self.records):
            key = rec.pointing_key
            if key in seen:
                raise DomainError(f"records {seen[key]} and {i} share pointing tuple {key}")
            seen[key] = i
        if self.records:
            first = self.records[0]
            for rec in self.records[1:]:
                if rec.distance_m != first.distance_m or rec.polarization != first.polarization:
                    raise DomainError("all records must share distance and polarization")

    @property
    def distance_m(self) -> float:
        return self.records[0].distance_m

    @property
    def polarization(self) -> str:
        return self.records[0].polarization


def pdp_total_power(pdp: PowerDelayProfile, threshold_db_above_noise: float = DEFAULT_THRESHOLD_DB) -> float:
    """Summed power (mW) of bins above ``noise_floor + threshold``, divided by
    the profile's response area. Returns 0 when no bin clears the threshold."""
    if not isinstance(pdp, PowerDelayProfile):
        raise InvalidDataError("expected a PowerDelayProfile")
    if not threshold_db_above_noise >= 0:
        raise DomainError("threshold must be >= 0 dB")
    level_mw = 10.0 ** ((pdp.noise_floor_dbm + threshold_db_above_noise) / 10.0)
    above = pdp.power_mw[pdp.power_mw > level_mw]
    return float(np.sum(above)) / pdp.response_area


def omni_received_power(sweeps: SweepSet, threshold_db_above_noise: float = DEFAULT_THRESHOLD_DB) -> float:
    """Omnidirectional received power in mW with TX and RX gains removed.

    Multipath powers from every unique pointing angle are summed linearly,
    i.e. phases are treated as random.
    """
    if not sweeps.records:
        raise DomainError("sweep set is empty")
    gain = 10.0 ** ((sweeps.tx_gain_dbi + sweeps.rx_gain_dbi) / 10.0)
    total = math.fsum(pdp_total_power(r.pdp, threshold_db_above_noise) for r in sweeps.records)
    return total / gain


def omni_path_loss(tx_power_dbm: float, pr_omni_mw: float) -> float:
    """``Pt[dBm] - 10 log10(Pr_omni[mW])``."""
    if not pr_omni_mw > 0:
        raise NoSignalError(f"omnidirectional power must be > 0 mW, got {pr_omni_mw!r}")
    return tx_power_dbm - 10.0 * math.log10(pr_omni_mw)


# --- sweep files -----------------------------------------------------------


class Diagnostic(NamedTuple):
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_sweep(sweeps: SweepSet, stream: TextIO, keep_db_above_noise: float = 0.0) -> None:
    """Write a sweep set; only bins above noise floor + ``keep_db_above_noise`` are listed.

    Bins left out read back as zero, so a file is only exact for analysis
    thresholds at or above the storage threshold.
    """
    stream.write(FORMAT_TAG + "\n")
    stream.write(
        f"S,{sweeps.scenario},{_fmt(sweeps.tx_power_dbm)},"
        f"{_fmt(sweeps.tx_gain_dbi)},{_fmt(sweeps.rx_gain_dbi)}\n"
    )
    for rec in sweeps.records:
        pdp = rec.pdp
        stream.write(
            f"R,{_fmt(rec.tx_az_deg)},{_fmt(rec.tx_el_deg)},{_fmt(rec.rx_az_deg)},"
            f"{_fmt(rec.rx_el_deg)},{rec.polarization},{_fmt(rec.distance_m)},"
            f"{_fmt(pdp.noise_floor_dbm)},{_fmt(pdp.bin_spacing_ns)},{pdp.delay_bins_ns.size},"
            f"{_fmt(pdp.response_area)}\n"
        )
        floor_mw = 10.0 ** ((pdp.noise_floor_dbm + keep_db_above_noise) / 10.0)
        for k in np.flatnonzero(pdp.power_mw > floor_mw):
            p_dbm = 10.0 * math.log10(pdp.power_mw[k])
            stream.write(f"P,{_fmt(pdp.delay_bins_ns[k])},{_fmt(p_dbm)}\n")


def parse_sweep(lines: Iterable[str]) -> Tuple[Optional[SweepSet], List[Diagnostic]]:
    """Parse sweep-file lines. Returns ``(sweep_set, [])`` or ``(None, diagnostics)``."""
    diags: List[Diagnostic] = []
    header = None
    header_line = 0
    records = []  # [line_no, fields, pdp_pairs]

    def floats(parts, lineno, names):
        out = []
        for name, text in zip(names, parts):
            try:
                out.append(float(text))
            except ValueError:
                diags.append(Diagnostic(lineno, f"{name} is not a number: {text!r}"))
                return None
        return out

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        kind = parts[0]
        if kind == "S":
            if header is not None:
                diags.append(Diagnostic(lineno, f"second S line (first at line {header_line})"))
                continue
            if len(parts) != 5:
                diags.append(Diagnostic(lineno, "S line needs 4 fields"))
                continue
            if parts[1] not in SCENARIOS:
                diags.append(Diagnostic(lineno, f"unknown scenario {parts[1]!r}"))
                continue
            vals = floats(parts[2:], lineno, ("tx_power_dbm", "tx_gain_dbi", "rx_gain_dbi"))
            if vals is not None:
                header = (parts[1], *vals)
                header_line = lineno
        elif kind == "R":
            if len(parts) != 11:
                diags.append(Diagnostic(lineno, "R line needs 10 fields"))
                records.append([lineno, None, []])
                continue
            names = ("tx_az_deg", "tx_el_deg", "rx_az_deg", "rx_el_deg")
            angles = floats(parts[1:5], lineno, names)
            rest = floats(
                parts[6:11], lineno,
                ("distance_m", "noise_floor_dbm", "bin_spacing_ns", "num_bins", "response_area"),
            )
            fields = None
            if angles is not None and rest is not None:
                ok = True
                for name, value in zip(names, angles):
                    lo, hi = (0.0, 360.0) if "az" in name else (-90.0, 90.0)
                    bad = not (lo <= value < hi) if "az" in name else not (lo <= value <= hi)
                    if bad:
                        diags.append(Diagnostic(lineno, f"{name}={value:g} out of range [{lo:g}, {hi:g}{')' if 'az' in name else ']'}"))
                        ok = False
                if parts[5] not in POLARIZATIONS:
                    diags.append(Diagnostic(lineno, f"unknown polarization {parts[5]!r}"))
                    ok = False
                distance, floor, spacing, nbins, area = rest
                if not distance > 0:
                    diags.append(Diagnostic(lineno, "distance_m must be > 0"))
                    ok = False
                if not spacing > 0 or nbins < 1 or nbins != int(nbins) or not area > 0:
                    diags.append(Diagnostic(lineno, "bad PDP grid (spacing, num_bins or response_area)"))
                    ok = False
                if ok:
                    fields = (*angles, parts[5], distance, floor, spacing, int(nbins), area)
            records.append([lineno, fields, []])
        elif kind == "P":
            if not records:
                diags.append(Diagnostic(lineno, "P line before any R line"))
                continue
            if len(parts) != 3:
                diags.append(Diagnostic(lineno, "P line needs 2 fields"))
                continue
            vals = floats(parts[1:], lineno, ("delay_ns", "power_dbm"))
            if vals is not None:
                records[-1][2].append((lineno, vals[0], vals[1]))
        else:
            diags.append(Diagnostic(lineno, f"unknown line type {kind!r}"))

    if header is None:
        diags.append(Diagnostic(0, "missing S header line"))

    built = []
    seen = {}
    for lineno, fields, pairs in records:
        if fields is None:
            continue
        tx_az, tx_el, rx_az, rx_el, pol, distance, floor, spacing, nbins, area = fields
        key = (int(round(tx_az)) % 360, int(round(tx_el)), int(round(rx_az)) % 360, int(round(rx_el)))
        if key in seen:
            diags.append(Diagnostic(lineno, f"duplicate pointing tuple {key} (also at line {seen[key]})"))
            continue
        seen[key] = lineno
        power = np.zeros(nbins)
        prev = -math.inf
        good = True
        for plineno, delay, p_dbm in pairs:
            if not delay > prev:
                diags.append(Diagnostic(plineno, f"delay {delay:g} ns is not increasing"))
                good = False
                break
            prev = delay
            k = delay / spacing
            kr = int(round(k))
            if abs(k - kr) > 1e-6 * max(1.0, abs(k)) or not (0 <= kr < nbins):
                diags.append(Diagnostic(plineno, f"delay {delay:g} ns is off the {spacing:g} ns grid"))
                good = False
                break
            if math.isnan(p_dbm) or p_dbm == math.inf:
                diags.append(Diagnostic(plineno, f"bad power {p_dbm!r}"))
                good = False
                break
            power[kr] = 10.0 ** (p_dbm / 10.0)
        if good:
            pdp = PowerDelayProfile(np.arange(nbins) * spacing, power, floor, spacing, area)
            built.append((lineno, SweepRecord(tx_az, tx_el, rx_az, rx_el, pol, distance, pdp)))

    if built:
        first = built[0][1]
        for rec_line, rec in built[1:]:
            if rec.distance_m != first.distance_m or rec.polarization != first.polarization:
                diags.append(Diagnostic(rec_line, "record distance/polarization differs from first record"))
    elif header is not None and not diags:
        diags.append(Diagnostic(0, "no records"))

    if diags:
        return None, sorted(diags)
    scenario, tx_power, tx_gain, rx_gain = header
    return SweepSet(tuple(rec for _, rec in built), tx_gain, rx_gain, tx_power, scenario), []

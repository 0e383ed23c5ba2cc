"""
Bundled 73 GHz reference measurements and ingestion of user data files.

The bundled tables are plain CSV with a ``# schema-version`` header and are
guarded by SHA-256 checksums. Cells printed as ``-`` are not-detected values
and load as ``None``, never as zero.
"""

import csv
import functools
import hashlib
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .errors import DomainError, IntegrityError, InvalidDataError
from .geometry import ElevationSweepPlan
from .pdp import Diagnostic, SweepSet, parse_sweep
from .propagation import FoliageObservation, LinkBudgetParams

SCHEMA_VERSION = "1"
MISSING = "-"

CHECKSUMS = {
    "scenario.csv": "de6859a012a174b4ba527cd4e8a6ce5991dd88fc985d2df21c5b9649e3f571e9",
    "table1_elevations.csv": "f11a32106f476f30d5059dd6937bfbb2ece65ff4703637f97fbd335f377d13ff",
    "table2_path_loss.csv": "1f313e57caf4213307d717c7d0c05cd0b595509c3b92129e3221f167ca528ba2",
    "table3_reflection.csv": "f864d33d5676e4fc2919fc90b99b37b33a8636e2e524b86e5c3bc6b17dcd28e6",
}


@dataclass(frozen=True)
class PathLossRow:
    distance_m: float
    polarization: str
    pl_free_space_db: float
    pl_foliage_db: Optional[float]
    delta_pl_db: Optional[float]


@dataclass(frozen=True)
class ReflectionRow:
    d_i_m: float
    d_tot_m: float
    d_foliage_m: float
    polarization: str
    pr_fs_dbm: Optional[float]
    pr_foliage_dbm: Optional[float]

    @property
    def complete(self) -> bool:
        return self.pr_fs_dbm is not None and self.pr_foliage_dbm is not None


@dataclass(frozen=True)
class Scenario:
    tx_height_m: float
    rx_height_m: float
    tx_power_dbm: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    hpbw_deg: float
    frequency_hz: float
    chip_rate_hz: float
    rx_chip_rate_hz: float
    pn_length: int
    alpha_db_per_m: float

    @property
    def link_params(self) -> LinkBudgetParams:
        return LinkBudgetParams(self.tx_power_dbm, self.tx_gain_dbi, self.rx_gain_dbi, self.frequency_hz)


@dataclass(frozen=True)
class ReferenceTables:
    table1: Dict[int, ElevationSweepPlan]
    table2: Tuple[PathLossRow, ...]
    table3: Tuple[ReflectionRow, ...]
    scenario: Scenario

    def path_loss(self, polarization: str, distance_m: float) -> PathLossRow:
        for row in self.table2:
            if row.polarization == polarization and row.distance_m == distance_m:
                return row
        raise KeyError((polarization, distance_m))

    def observations(self, polarization: str) -> List[FoliageObservation]:
        """Rows with a foliage loss present, carrying the printed excess loss."""
        return [
            FoliageObservation(r.distance_m, r.pl_free_space_db, r.pl_foliage_db, r.delta_pl_db)
            for r in self.table2
            if r.polarization == polarization and r.pl_foliage_db is not None
        ]

    def reflection(self, polarization: str, d_i_m: float) -> ReflectionRow:
        for row in self.table3:
            if row.polarization == polarization and row.d_i_m == d_i_m:
                return row
        raise KeyError((polarization, d_i_m))


def _cell(text: str) -> Optional[float]:
    text = text.strip()
    return None if text == MISSING else float(text)


def _read_bundled(name: str) -> List[Dict[str, str]]:
    raw = resources.files("mmwprop").joinpath("data").joinpath(name).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != CHECKSUMS[name]:
        raise IntegrityError(f"bundled file {name} failed its checksum ({digest})")
    text = raw.decode("utf-8")
    first = text.splitlines()[0] if text else ""
    if first.strip() != f"# schema-version: {SCHEMA_VERSION}":
        raise IntegrityError(f"bundled file {name} has unexpected schema header {first!r}")
    body = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(body))


@functools.lru_cache(maxsize=1)
def load_reference() -> ReferenceTables:
    """Published tables and scenario constants, exactly as printed."""
    plans: Dict[int, list] = {}
    for row in _read_bundled("table1_elevations.csv"):
        rx = tuple(float(x) for x in row["rx_elevations_deg"].split(";"))
        plans.setdefault(int(row["rx_id"]), []).append(
            (int(row["measurement"]), float(row["tx_elevation_deg"]), rx)
        )
    table1 = {rx_id: ElevationSweepPlan(rx_id, tuple(rows)) for rx_id, rows in plans.items()}

    table2 = tuple(
        PathLossRow(
            float(r["distance_m"]), r["polarization"], float(r["pl_free_space_db"]),
            _cell(r["pl_foliage_db"]), _cell(r["delta_pl_db"]),
        )
        for r in _read_bundled("table2_path_loss.csv")
    )
    for row in table2:
        if row.pl_foliage_db is not None:
            if abs(row.pl_foliage_db - row.pl_free_space_db - row.delta_pl_db) > 0.11:  # printed values are independently rounded
                raise IntegrityError(f"printed excess loss inconsistent with path losses at {row}")

    table3 = tuple(
        ReflectionRow(
            float(r["d_i_m"]), float(r["d_tot_m"]), float(r["d_foliage_m"]), r["polarization"],
            _cell(r["pr_fs_dbm"]), _cell(r["pr_foliage_dbm"]),
        )
        for r in _read_bundled("table3_reflection.csv")
    )

    values = {r["key"]: r["value"] for r in _read_bundled("scenario.csv")}
    scenario = Scenario(
        tx_height_m=float(values["tx_height"]),
        rx_height_m=float(values["rx_height"]),
        tx_power_dbm=float(values["tx_power"]),
        tx_gain_dbi=float(values["tx_gain"]),
        rx_gain_dbi=float(values["rx_gain"]),
        hpbw_deg=float(values["hpbw"]),
        frequency_hz=float(values["frequency"]),
        chip_rate_hz=float(values["chip_rate"]),
        rx_chip_rate_hz=float(values["rx_chip_rate"]),
        pn_length=int(values["pn_length"]),
        alpha_db_per_m=float(values["alpha"]),
    )
    return ReferenceTables(table1, table2, table3, scenario)


def read_observations(
    source: Union[str, Path, io.TextIOBase], polarization: Optional[str] = None
) -> List[FoliageObservation]:
    """Read ``distance_m,pl_fs_db,pl_foliage_db,polarization`` rows.

    Rows whose foliage loss is ``-`` are skipped. ``polarization`` filters
    rows (case-insensitive) when given.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_observations(fh, polarization)
    lines = [ln for ln in source if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    required = {"distance_m", "pl_fs_db", "pl_foliage_db", "polarization"}
    if reader.fieldnames is None or not required <= {f.strip() for f in reader.fieldnames}:
        raise InvalidDataError(f"observation file needs columns {sorted(required)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items()}
        if polarization and row["polarization"].upper() != polarization.upper():
            continue
        try:
            foliage = _cell(row["pl_foliage_db"])
            if foliage is None:
                continue
            out.append(FoliageObservation(float(row["distance_m"]), float(row["pl_fs_db"]), foliage))
        except (ValueError, DomainError) as exc:
            raise InvalidDataError(f"data row {lineno}: {exc}") from exc
    return out


@dataclass(frozen=True)
class SweepValidation:
    sweeps: Optional[SweepSet]
    diagnostics: Tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return self.sweeps is not None


def validate_sweep_file(path: Union[str, Path]) -> SweepValidation:
    """Parse a sweep file, collecting format problems as line-numbered diagnostics.

    Raises ``OSError`` only when the file cannot be read.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    sweeps, diags = parse_sweep(lines)
    return SweepValidation(sweeps, tuple(diags))


def read_sweep_file(path: Union[str, Path]) -> SweepSet:
    """Like :func:`validate_sweep_file` but raises on any diagnostic."""
    result = validate_sweep_file(path)
    if not result.ok:
        raise InvalidDataError(
            f"{path}: {len(result.diagnostics)} problem(s)", result.diagnostics
        )
    return result.sweeps

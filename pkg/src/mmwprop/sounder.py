"""
Sliding-correlator channel sounder simulation at complex baseband.

The transmitter repeats a maximal-length PN sequence at ``tx_chip_rate_hz``.
The receiver multiplies the incoming waveform by the same sequence clocked
slightly slower and integrates over one PN period. The relative lag between
the two then creeps forward by ``1/slide_factor`` of a sample per sample, so
the correlator output traces the channel impulse response stretched in time
by the slide factor. Dividing the observed time axis by the slide factor
gives excess delay.

Two correlator implementations are provided:

``dual_clock``
    Literal simulation: every sample of a full slide is generated with the
    RX replica indexed by the RX clock and integrated-and-dumped per PN
    period. Cost grows with ``slide_factor * period``.
``fast``
    Circular cross-correlation via FFT at integer sample lags, then the
    per-window lag average that the slowly drifting replica produces. It
    matches ``dual_clock`` to within the partial-period cross terms and is
    what the sweep synthesizer uses.
"""

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DomainError, InsufficientDataError
from .geometry import LinkGeometry, canopy_path_length, ground_bounce
from .pdp import PowerDelayProfile, SweepRecord, SweepSet, SCENARIOS
from .propagation import LinkBudgetParams, SPEED_OF_LIGHT, friis_received_power, ground_reflected_power
from .reflection import GroundMaterial, fresnel_parallel

DEFAULT_TAPS = (11, 2)

# Primitive feedback polynomials, one per degree, for tests and convenience.
PRIMITIVE_TAPS = {
    2: (2, 1), 3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6),
    8: (8, 6, 5, 4), 9: (9, 5), 10: (10, 7), 11: DEFAULT_TAPS,
}


@dataclass(frozen=True)
class PnSequence:
    chips: Tuple[int, ...]
    degree: int
    taps: Tuple[int, ...]
    seed: int

    @property
    def length(self) -> int:
        return len(self.chips)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.chips, dtype=float)


@dataclass(frozen=True)
class SounderConfig:
    tx_chip_rate_hz: float = 400e6
    rx_chip_rate_hz: float = 399.95e6
    samples_per_chip: int = 4
    noise_snr_db: Optional[float] = None
    rng_seed: int = 0
    pn_degree: int = 11
    pn_taps: Tuple[int, ...] = DEFAULT_TAPS
    pn_seed: int = 1
    bins_per_window: int = 4

    def __post_init__(self):
        if not (self.tx_chip_rate_hz > self.rx_chip_rate_hz > 0):
            raise ConfigurationError("need tx_chip_rate_hz > rx_chip_rate_hz > 0")
        for name in ("samples_per_chip", "bins_per_window"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError(f"{name} must be an integer >= 1")
        object.__setattr__(self, "pn_taps", tuple(self.pn_taps))

    @property
    def sample_period_ns(self) -> float:
        return 1e9 / (self.tx_chip_rate_hz * self.samples_per_chip)

    @property
    def slide_factor(self) -> float:
        return slide_factor(self.tx_chip_rate_hz, self.rx_chip_rate_hz)


@dataclass(frozen=True)
class ChannelTap:
    delay_ns: float
    gain_db: float
    phase_deg: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.delay_ns) and self.delay_ns >= 0):
            raise ConfigurationError(f"tap delay must be >= 0 ns, got {self.delay_ns!r}")


def generate_pn(degree: int = 11, taps: Sequence[int] = DEFAULT_TAPS, seed: int = 1) -> PnSequence:
    """Maximal-length sequence from a Fibonacci LFSR.

    ``taps`` are the exponents of the feedback polynomial, e.g. ``(11, 2)``
    for x^11 + x^2 + 1. The register must return to ``seed`` after exactly
    ``2**degree - 1`` steps, otherwise the polynomial is not primitive and a
    :class:`ConfigurationError` is raised. Bits map to chips as 0 -> +1,
    1 -> -1.
    """
    taps = tuple(int(t) for t in taps)
    if degree < 2 or not taps or max(taps) != degree or min(taps) < 1:
        raise ConfigurationError(f"taps {taps} do not describe a degree-{degree} polynomial")
    period = (1 << degree) - 1
    if not (0 < seed <= period):
        raise ConfigurationError(f"seed must be a non-zero {degree}-bit state, got {seed!r}")
    shifts = [degree - t for t in taps]
    state = seed
    bits = []
    for step in range(1, period + 1):
        bits.append(state & 1)
        fb = 0
        for s in shifts:
            fb ^= (state >> s) & 1
        state = (state >> 1) | (fb << (degree - 1))
        if state == seed and step < period:
            raise ConfigurationError(f"taps {taps} give period {step} < {period}: not primitive")
    if state != seed:
        raise ConfigurationError(f"taps {taps} do not give a maximal-length sequence")
    chips = tuple(1 - 2 * b for b in bits)
    return PnSequence(chips, degree, taps, seed)


def periodic_autocorrelation(chips) -> np.ndarray:
    """Circular autocorrelation at every lag, computed directly."""
    c = np.asarray(chips, dtype=np.int64)
    return np.array([int(np.dot(c, np.roll(c, -k))) for k in range(c.size)])


def slide_factor(tx_rate_hz: float, rx_rate_hz: float) -> float:
    """Time-dilation ratio ``tx / (tx - rx)`` of a sliding correlator."""
    if not (tx_rate_hz > rx_rate_hz > 0):
        raise DomainError("need tx_rate > rx_rate > 0")
    return tx_rate_hz / (tx_rate_hz - rx_rate_hz)


def pn_waveform(pn: PnSequence, config: SounderConfig) -> np.ndarray:
    """One period of the rectangular-chip baseband waveform."""
    return np.repeat(pn.as_array(), config.samples_per_chip)


def apply_channel(
    tx_waveform,
    taps: Sequence[ChannelTap],
    config: SounderConfig,
    stream: int = 0,
) -> np.ndarray:
    """Pass one period of a continuously repeated waveform through a tapped channel.

    Each tap is a circular shift by the nearest whole sample, scaled by
    ``10**(gain_db/20)`` and rotated by ``phase_deg``. With
    ``config.noise_snr_db`` set, complex white Gaussian noise is added at
    that SNR relative to a 0 dB tap; the generator is seeded from
    ``(config.rng_seed, stream)``.
    """
    x = np.asarray(tx_waveform)
    if x.ndim != 1 or x.size == 0:
        raise InsufficientDataError("waveform must be a non-empty 1-D array")
    ts = config.sample_period_ns
    out = np.zeros(x.size, dtype=complex)
    for tap in taps:
        shift = int(round(tap.delay_ns / ts))
        if shift >= x.size:
            raise ConfigurationError(
                f"tap delay {tap.delay_ns} ns exceeds one PN period ({x.size * ts:g} ns)"
            )
        amp = 10.0 ** (tap.gain_db / 20.0) * np.exp(1j * np.radians(tap.phase_deg))
        out += amp * np.roll(x, shift)
    if config.noise_snr_db is not None:
        rng = np.random.default_rng([int(config.rng_seed), int(stream)])
        sigma = math.sqrt(10.0 ** (-config.noise_snr_db / 10.0) / 2.0)
        out += sigma * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    return out


def _window_count(gamma: float) -> int:
    m = int(round(gamma))
    if m < 2:
        raise ConfigurationError(f"slide factor {gamma:g} too small for a sliding correlator")
    return m


def _window_starts(n: int, config: SounderConfig) -> np.ndarray:
    """First sample of each integrate-and-dump window over one full slide.

    Windows are one PN period long and start every ``n / bins_per_window``
    samples. A tap at whole-sample lag k is seen by the replica over lags
    (k-1, k], so the grid is offset by half a sample of lag to center the
    first window on zero delay.
    """
    gamma = config.slide_factor
    os_ = config.bins_per_window
    count = _window_count(gamma) * os_
    offset = -(n // 2) - int(round(gamma / 2.0))
    return offset + np.round(np.arange(count) * (n / os_)).astype(np.int64)


def _correlate_fast(r: np.ndarray, replica: np.ndarray, config: SounderConfig) -> np.ndarray:
    n = r.size
    gamma = config.slide_factor
    # corr[k] = mean_m r[m] * replica[m - k]
    corr = np.fft.ifft(np.fft.fft(r) * np.conj(np.fft.fft(replica))) / n
    starts = _window_starts(n, config)
    lo = starts / gamma
    hi = (starts + n) / gamma
    # Within a window the replica lag sweeps [lo, hi); at a fractional lag x
    # the RX-clocked replica equals the TX replica shifted by ceil(x), so the
    # output is the mean of that staircase over the window.
    csum = np.concatenate([[0.0], np.cumsum(np.roll(corr, -1))])  # csum[k] = sum corr[1..k]
    total = csum[-1]

    def integral(x):
        k = np.floor(x).astype(np.int64)
        q, rem = np.divmod(k, n)
        return q * total + csum[rem] + (x - k) * corr[(rem + 1) % n]

    return (integral(hi) - integral(lo)) / (hi - lo)


def _correlate_dual_clock(r: np.ndarray, chips: np.ndarray, config: SounderConfig, chunk: int = 2048) -> np.ndarray:
    n = r.size
    npn = chips.size
    spc = config.samples_per_chip
    ratio = Fraction(config.rx_chip_rate_hz / config.tx_chip_rate_hz).limit_denominator(10**7)
    p, q = ratio.numerator, ratio.denominator
    starts = _window_starts(n, config)
    out = np.empty(starts.size, dtype=complex)
    for j0 in range(0, starts.size, chunk):
        j1 = min(starts.size, j0 + chunk)
        s0 = starts[j0]
        idx = np.arange(s0, starts[j1 - 1] + n, dtype=np.int64)
        # RX replica chip index runs on the RX clock: floor(t * f_rx) per sample.
        rx_chip = np.floor_divide(idx * p, q * spc) % npn
        prod = r[idx % n] * chips[rx_chip]
        cs = np.concatenate([[0.0], np.cumsum(prod)])
        offs = starts[j0:j1] - s0
        out[j0:j1] = (cs[offs + n] - cs[offs]) / n
    return out


def _raw_correlation(r: np.ndarray, pn: PnSequence, config: SounderConfig, method: str) -> np.ndarray:
    if method == "fast":
        return _correlate_fast(r, pn_waveform(pn, config), config)
    if method == "dual_clock":
        return _correlate_dual_clock(r, pn.as_array(), config)
    raise ValueError(f"unknown correlator method {method!r}")


@functools.lru_cache(maxsize=16)
def _calibration(pn: PnSequence, config: SounderConfig, method: str) -> Tuple[float, float]:
    """Back-to-back response: (peak amplitude, summed power / peak power)."""
    quiet = replace(config, noise_snr_db=None)
    y = _raw_correlation(pn_waveform(pn, quiet).astype(complex), pn, quiet, method)
    power = np.abs(y) ** 2
    peak = float(power.max())
    return math.sqrt(peak), float(power.sum() / peak)


def sliding_correlate(
    rx_waveform,
    pn: PnSequence,
    config: SounderConfig,
    rx_power_dbm: float = 0.0,
    method: str = "fast",
) -> PowerDelayProfile:
    """Recover a power delay profile from one PN period of received samples.

    Output is calibrated against a back-to-back (unit single path) run, so a
    0 dB tap at zero delay yields a peak of exactly ``rx_power_dbm``. The
    PDP's ``response_area`` records the summed power of that back-to-back
    response so :func:`mmwprop.pdp.pdp_total_power` returns path power.
    Integrate-and-dump windows are one PN period long and overlap;
    ``config.bins_per_window`` output bins are taken per window length, so
    bins are spaced ``period / (slide_factor * chip_rate * bins_per_window)``.
    """
    r = np.asarray(rx_waveform, dtype=complex)
    period = pn.length * config.samples_per_chip
    if r.ndim != 1 or r.size < period:
        raise InsufficientDataError(
            f"need at least one PN period ({period} samples) of received waveform, got {r.size}"
        )
    r = r[:period]
    peak_amp, area = _calibration(pn, config, method)
    gamma = config.slide_factor
    nbins = _window_count(gamma) * config.bins_per_window
    if np.any(r):
        y = _raw_correlation(r, pn, config, method) / peak_amp
        power = 10.0 ** (rx_power_dbm / 10.0) * np.abs(y) ** 2
    else:
        power = np.zeros(nbins)
    spacing_ns = period * config.sample_period_ns / (gamma * config.bins_per_window)
    delays = np.arange(nbins) * spacing_ns
    if config.noise_snr_db is None:
        # Noise-free floor: the sequence's off-peak correlation level.
        floor_dbm = rx_power_dbm - 20.0 * math.log10(pn.length)
    else:
        med = float(np.median(power))
        floor_dbm = 10.0 * math.log10(med / math.log(2.0)) if med > 0 else rx_power_dbm - 20.0 * math.log10(pn.length)
    return PowerDelayProfile(delays, power, floor_dbm, spacing_ns, area)


# --- sweep synthesis ---------------------------------------------------------


@dataclass(frozen=True)
class _Path:
    length_m: float
    departure: Tuple[float, float]  # (az, el) seen from TX
    arrival: Tuple[float, float]  # (az, el) seen from RX, pointing back along the ray
    power_dbm: float  # with boresight gains on both ends
    phase_deg: float


def _unit(az_deg: float, el_deg: float) -> np.ndarray:
    az, el = math.radians(az_deg), math.radians(el_deg)
    return np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])


def cone_gain_db(pointing: Tuple[float, float], direction: Tuple[float, float], hpbw_deg: float, sidelobe_db: Optional[float]) -> float:
    """Rectangular-cone pattern relative to boresight gain.

    0 dB within ``hpbw/2`` of boresight, ``sidelobe_db`` elsewhere (or
    ``-inf`` when ``sidelobe_db`` is None).
    """
    cosang = float(np.clip(np.dot(_unit(*pointing), _unit(*direction)), -1.0, 1.0))
    if math.degrees(math.acos(cosang)) <= hpbw_deg / 2.0 + 1e-9:
        return 0.0
    return -math.inf if sidelobe_db is None else float(sidelobe_db)


def _azimuths(step_deg: float, start: float) -> List[float]:
    count = 360.0 / step_deg
    if abs(count - round(count)) > 1e-9:
        raise ConfigurationError(f"angular step {step_deg} does not divide 360")
    return [(start + k * step_deg) % 360.0 for k in range(int(round(count)))]


def _pointing_plan(geom: LinkGeometry, scenario: str, hpbw_deg: float, step_deg: float):
    tx_el = geom.direct_elevation_deg
    rx_el = -tx_el
    plan = []
    if scenario == "ground_reflection":
        tilt = ground_bounce(geom).tx_downtilt_deg
        plan += [((0.0, tilt), (az, tilt)) for az in _azimuths(step_deg, 180.0)]
        return plan
    plan += [((0.0, tx_el), (az, rx_el)) for az in _azimuths(step_deg, 180.0)]
    if scenario == "foliage":
        plan += [((az, tx_el), (180.0, rx_el)) for az in _azimuths(step_deg, 0.0)]
        for dt in (hpbw_deg, -hpbw_deg):
            for dr in (hpbw_deg, -hpbw_deg):
                plan += [((0.0, tx_el + dt), (az, rx_el + dr)) for az in _azimuths(step_deg, 180.0)]
    unique = {}
    for tx, rx in plan:
        key = (round(tx[0]) % 360, round(tx[1]), round(rx[0]) % 360, round(rx[1]))
        unique.setdefault(key, (tx, rx))
    return list(unique.values())


def synthesize_sweep(
    geom: LinkGeometry,
    canopy: Sequence[Tuple[float, float]] = (),
    material: Optional[GroundMaterial] = None,
    alpha_db_per_m: float = 0.0,
    params: Optional[LinkBudgetParams] = None,
    hpbw_deg: float = 7.0,
    angular_step_deg: float = 10.0,
    config: Optional[SounderConfig] = None,
    *,
    scenario: str = "foliage",
    polarization: str = "VV",
    sidelobe_db: Optional[float] = -30.0,
    gamma_mag: Optional[float] = None,
    fresnel_formula: str = "cos_transmitted",
    direct_foliage_m: Optional[float] = None,
    bounce_foliage_m: Optional[float] = None,
    threads: Optional[int] = None,
) -> SweepSet:
    """Generate a directional sweep set for a direct plus ground-bounce scene.

    Pointing plans follow the measurement procedure:

    * ``free_space``: TX fixed on boresight, RX rotated in azimuth.
    * ``foliage``: the above, a TX azimuth sweep, and four RX sweeps with
      the TX and RX elevations each offset by +/- one HPBW.
    * ``ground_reflection``: both antennas downtilted to the specular point,
      RX rotated in azimuth.

    Canopy attenuation (``alpha * length inside canopy``) applies outside the
    free-space scenario. Canopy lengths come from ``canopy`` intervals unless
    ``direct_foliage_m``/``bounce_foliage_m`` are given. The reflection
    magnitude is ``gamma_mag`` if given, else ``|fresnel_parallel(material)|``
    at the specular incident angle, else zero (no bounce).

    Every record's PDP comes from :func:`apply_channel` followed by
    :func:`sliding_correlate`, scaled so that 0 dB taps equal the strongest
    boresight path. Record ``i`` draws noise from stream ``i``, so threaded
    and serial runs are identical.
    """
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"scenario must be one of {SCENARIOS}")
    if params is None:
        params = LinkBudgetParams(-7.9, 27.0, 27.0)
    config = config or SounderConfig()
    if not (hpbw_deg > 0):
        raise ConfigurationError("hpbw_deg must be positive")
    if gamma_mag is not None and not (0.0 <= gamma_mag <= 1.0):
        raise DomainError("gamma_mag must lie in [0, 1]")

    bounce = ground_bounce(geom)
    foliage_on = scenario != "free_space"
    alpha = alpha_db_per_m if foliage_on else 0.0
    if direct_foliage_m is None:
        direct_foliage_m = canopy_path_length(canopy, geom, "direct") if foliage_on else 0.0
    if bounce_foliage_m is None:
        bounce_foliage_m = canopy_path_length(canopy, geom, "ground_bounce") if foliage_on else 0.0

    if gamma_mag is not None:
        gamma = float(gamma_mag)
    elif material is not None:
        gamma = fresnel_parallel(material, bounce.incident_deg, fresnel_formula)
    else:
        gamma = 0.0

    lam = params.wavelength_m
    d_dir = geom.direct_length_m
    paths = [
        _Path(
            d_dir,
            (0.0, geom.direct_elevation_deg),
            (180.0, -geom.direct_elevation_deg),
            friis_received_power(params, d_dir) - alpha * direct_foliage_m,
            (-360.0 * d_dir / lam) % 360.0,
        )
    ]
    if gamma != 0.0:
        paths.append(
            _Path(
                bounce.d_tot_m,
                (0.0, bounce.tx_downtilt_deg),
                (180.0, bounce.rx_downtilt_deg),
                ground_reflected_power(params, bounce.d_tot_m, bounce_foliage_m, alpha, abs(gamma)),
                (-360.0 * bounce.d_tot_m / lam + (180.0 if gamma < 0 else 0.0)) % 360.0,
            )
        )
    ref_dbm = max(p.power_dbm for p in paths)
    first_len = min(p.length_m for p in paths)

    plan = _pointing_plan(geom, scenario, hpbw_deg, angular_step_deg)
    pn = generate_pn(config.pn_degree, config.pn_taps, config.pn_seed)
    tx_wave = pn_waveform(pn, config)

    def build(item):
        index, (tx_point, rx_point) = item
        taps = []
        for path in paths:
            rel = cone_gain_db(tx_point, path.departure, hpbw_deg, sidelobe_db) + cone_gain_db(
                rx_point, path.arrival, hpbw_deg, sidelobe_db
            )
            if rel == -math.inf:
                continue
            delay_ns = (path.length_m - first_len) / SPEED_OF_LIGHT * 1e9
            taps.append(ChannelTap(delay_ns, path.power_dbm + rel - ref_dbm, path.phase_deg))
        rx_wave = apply_channel(tx_wave, taps, config, stream=index)
        pdp = sliding_correlate(rx_wave, pn, config, rx_power_dbm=ref_dbm)
        return SweepRecord(
            tx_point[0] % 360.0, tx_point[1], rx_point[0] % 360.0, rx_point[1],
            polarization, geom.separation_m, pdp,
        )

    items = list(enumerate(plan))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(build, items))
    else:
        records = [build(it) for it in items]
    return SweepSet(tuple(records), params.tx_gain_dbi, params.rx_gain_dbi, params.tx_power_dbm, scenario)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwprop import ConfigurationError, DomainError, InsufficientDataError
from mmwprop.geometry import LinkGeometry, ground_bounce
from mmwprop.pdp import omni_path_loss, omni_received_power, pdp_total_power
from mmwprop.propagation import LinkBudgetParams, free_space_path_loss_db
from mmwprop.reflection import GroundMaterial, recover_reflection_coefficient
from mmwprop.sounder import (
    PRIMITIVE_TAPS,
    ChannelTap,
    SounderConfig,
    apply_channel,
    generate_pn,
    periodic_autocorrelation,
    pn_waveform,
    slide_factor,
    sliding_correlate,
    synthesize_sweep,
)

DEFAULT_CFG = SounderConfig()
PN11 = generate_pn()
TX11 = pn_waveform(PN11, DEFAULT_CFG)

# small sounder (31 chips, slide factor 1000) for the literal dual-clock route
SMALL = SounderConfig(tx_chip_rate_hz=400e6, rx_chip_rate_hz=399.6e6, pn_degree=5, pn_taps=(5, 3))
PN5 = generate_pn(5, (5, 3))


def _fft_autocorrelation(chips):
    c = np.asarray(chips, dtype=float)
    return np.rint(np.fft.ifft(np.abs(np.fft.fft(c)) ** 2).real).astype(int)


def _db(x):
    return 10 * np.log10(np.maximum(x, 1e-300))


def _local_maxima(power, floor_db=-6.0):
    """Circular local maxima within ``floor_db`` of the global peak."""
    p = _db(power)
    left, right = np.roll(p, 1), np.roll(p, -1)
    return np.flatnonzero((p >= left) & (p > right) & (p > p.max() + floor_db))


def _resolved(pdp, dip_db=1.0):
    """True when the two strongest maxima are separated by a dip of at least ``dip_db``."""
    p = _db(pdp.power_mw)
    peaks = _local_maxima(pdp.power_mw)
    if peaks.size < 2:
        return False
    a, b = sorted(peaks[np.argsort(p[peaks])[-2:]])
    weaker = min(p[a], p[b])
    inner = p[a : b + 1].min()
    outer = np.concatenate([p[b:], p[: a + 1]]).min()
    return weaker - max(inner, outer) >= dip_db


def test_slide_factor_examples():
    assert slide_factor(400e6, 399.95e6) == pytest.approx(8000, rel=1e-9)
    assert slide_factor(2.0, 1.0) == 2.0
    assert slide_factor(400e6, 399.9e6) == pytest.approx(4000, rel=1e-9)
    with pytest.raises(DomainError):
        slide_factor(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        SounderConfig(tx_chip_rate_hz=1e6, rx_chip_rate_hz=2e6)


def test_pn_degree3_brute_force():
    pn = generate_pn(3, (3, 2))
    assert pn.length == 7
    c = pn.chips
    acf = [sum(c[i] * c[(i + k) % 7] for i in range(7)) for k in range(7)]
    assert acf == [7, -1, -1, -1, -1, -1, -1]


@pytest.mark.parametrize("degree", sorted(PRIMITIVE_TAPS))
def test_pn_properties_all_degrees(degree):
    pn = generate_pn(degree, PRIMITIVE_TAPS[degree])
    n = (1 << degree) - 1
    assert pn.length == n
    assert abs(sum(pn.chips)) == 1
    acf = _fft_autocorrelation(pn.chips)
    assert acf[0] == n and np.all(acf[1:] == -1)
    assert np.array_equal(periodic_autocorrelation(pn.chips), acf)


def test_pn_errors():
    with pytest.raises(ConfigurationError, match="not primitive"):
        generate_pn(11, (11, 1))
    with pytest.raises(ConfigurationError):
        generate_pn(11, (11, 2), seed=0)
    with pytest.raises(ConfigurationError):
        generate_pn(5, (4, 2))


@given(st.integers(1, 31))
def test_pn_any_seed_is_a_rotation(seed):
    base = generate_pn(5, (5, 3), 1).chips
    other = generate_pn(5, (5, 3), seed).chips
    doubled = base + base
    assert any(doubled[k : k + 31] == other for k in range(31))


def test_apply_channel_identity_and_scaling():
    assert np.array_equal(apply_channel(TX11, [ChannelTap(0, 0)], DEFAULT_CFG), TX11)
    half = apply_channel(TX11, [ChannelTap(0, -6.0206)], DEFAULT_CFG)
    assert np.allclose(np.abs(half), 0.5, atol=1e-5)
    shifted = apply_channel(TX11, [ChannelTap(2.5, 0)], DEFAULT_CFG)
    assert np.array_equal(shifted.real, np.roll(TX11, 4))
    with pytest.raises(ConfigurationError):
        apply_channel(TX11, [ChannelTap(2047 * 2.5, 0)], DEFAULT_CFG)
    with pytest.raises(ConfigurationError):
        ChannelTap(-1.0, 0.0)


def test_noise_is_seeded_per_stream():
    noisy = SounderConfig(noise_snr_db=10.0, rng_seed=4)
    a = apply_channel(TX11, [ChannelTap(0, 0)], noisy, stream=3)
    b = apply_channel(TX11, [ChannelTap(0, 0)], noisy, stream=3)
    c = apply_channel(TX11, [ChannelTap(0, 0)], noisy, stream=4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    snr = 10 * math.log10(1.0 / np.mean(np.abs(a - TX11) ** 2))
    assert snr == pytest.approx(10.0, abs=0.2)


def test_identity_channel_peak_at_zero():
    pdp = sliding_correlate(TX11.astype(complex), PN11, DEFAULT_CFG, rx_power_dbm=-40.0)
    assert pdp.peak_delay_ns == 0.0
    assert _db(pdp.power_mw.max()) == pytest.approx(-40.0, abs=1e-9)
    assert 10 * math.log10(pdp_total_power(pdp, 0.0)) == pytest.approx(-40.0, abs=1e-9)
    # the default threshold clips the far tails of the response
    assert 10 * math.log10(pdp_total_power(pdp)) == pytest.approx(-40.0, abs=0.01)
    assert pdp.bin_spacing_ns == pytest.approx(2047 * 2.5 / 32000)


def test_short_waveform_rejected():
    with pytest.raises(InsufficientDataError):
        sliding_correlate(TX11[:-1], PN11, DEFAULT_CFG)


def _two_tap(delay_ns, gain_db, method="fast", cfg=DEFAULT_CFG, pn=PN11, phase=0.0):
    r = apply_channel(pn_waveform(pn, cfg), [ChannelTap(0, 0), ChannelTap(delay_ns, gain_db, phase)], cfg)
    return sliding_correlate(r, pn, cfg, method=method)


def _two_peaks(pdp):
    peaks = _local_maxima(pdp.power_mw, floor_db=-20.0)
    top = peaks[np.argsort(pdp.power_mw[peaks])[-2:]]
    first, second = sorted(top, key=lambda k: pdp.delay_bins_ns[k])
    return first, second


def test_two_equal_taps_equal_heights():
    pdp = _two_tap(50.0, 0.0)
    a, b = _two_peaks(pdp)
    assert pdp.delay_bins_ns[a] == pytest.approx(0.0, abs=1.25)
    assert pdp.delay_bins_ns[b] == pytest.approx(50.0, abs=1.25)
    # nearest-bin peaks: the bin grid samples each response at a different phase
    assert _db(pdp.power_mw[a]) - _db(pdp.power_mw[b]) == pytest.approx(0.0, abs=0.25)
    assert pdp_total_power(pdp, 0.0) == pytest.approx(2.0, rel=2e-3)


def test_delay_resolution_one_chip():
    assert _resolved(_two_tap(2.5, 0.0, phase=90.0))
    assert not _resolved(_two_tap(1.0, 0.0, phase=90.0))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2000.0))
def test_time_dilation_recovers_delay(tau):
    r = apply_channel(TX11, [ChannelTap(tau, 0.0)], DEFAULT_CFG)
    pdp = sliding_correlate(r, PN11, DEFAULT_CFG)
    assert pdp.peak_delay_ns == pytest.approx(tau, abs=1.25)


@settings(max_examples=15, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 200), st.floats(-20, 0), st.floats(0, 360)), min_size=1, max_size=4),
    st.integers(0, 200), st.floats(-20, 0), st.floats(0, 360),
)
def test_adding_a_resolvable_tap_never_lowers_energy(base, extra_slot, extra_gain, extra_phase):
    # taps sit on a 3-chip grid so every pair is resolvable
    slots = {}
    for slot, gain, phase in base:
        slots.setdefault(slot, (gain, phase))
    taps = [ChannelTap(7.5 * s, g, p) for s, (g, p) in slots.items()]
    if extra_slot in slots:
        return
    total = lambda ts: pdp_total_power(sliding_correlate(apply_channel(TX11, ts, DEFAULT_CFG), PN11, DEFAULT_CFG), 0.0)
    before = total(taps)
    after = total(taps + [ChannelTap(7.5 * extra_slot, extra_gain, extra_phase)])
    # PN sidelobe cross terms are at the 1/2047 amplitude level
    assert after >= before * (1 - 2e-3)


def test_fast_matches_dual_clock_small():
    r = apply_channel(pn_waveform(PN5, SMALL), [ChannelTap(0, 0), ChannelTap(10.0, -6.0, 40.0)], SMALL)
    fast = sliding_correlate(r, PN5, SMALL, method="fast")
    slow = sliding_correlate(r, PN5, SMALL, method="dual_clock")
    peak = fast.power_mw.max()
    # the routes differ on the response slopes, where the literal replica
    # changes lag inside a window; peaks and totals agree closely
    assert np.max(np.abs(fast.power_mw - slow.power_mw)) / peak < 0.1
    assert pdp_total_power(fast, 0.0) == pytest.approx(pdp_total_power(slow, 0.0), rel=0.01)
    span = fast.delay_bins_ns.size * fast.bin_spacing_ns
    lag = (fast.peak_delay_ns - slow.peak_delay_ns + span / 2) % span - span / 2
    assert abs(lag) < 0.625


def test_unknown_method():
    with pytest.raises(ValueError):
        sliding_correlate(TX11, PN11, DEFAULT_CFG, method="matched")


# --- sweep synthesis ---------------------------------------------------------

LINK = LinkBudgetParams(-7.9, 27.0, 27.0)


@pytest.mark.parametrize("d", [10.0, 40.0])
def test_free_space_sweep_recovers_friis(d):
    geom = LinkGeometry(4.06, 2.0, d)
    sweeps = synthesize_sweep(geom, params=LINK, scenario="free_space", sidelobe_db=None)
    powered = [r for r in sweeps.records if r.pdp.power_mw.any()]
    assert [r.pointing_key[2] for r in powered] == [180]
    pl = omni_path_loss(sweeps.tx_power_dbm, omni_received_power(sweeps))
    assert pl == pytest.approx(free_space_path_loss_db(geom.direct_length_m), abs=0.05)


def test_unit_permittivity_has_no_bounce():
    geom = LinkGeometry(4.06, 2.0, 10.0)
    sweeps = synthesize_sweep(geom, material=GroundMaterial(1.0), scenario="ground_reflection", sidelobe_db=None)
    assert all(not r.pdp.power_mw.any() for r in sweeps.records)


def test_ground_reflection_round_trip():
    geom = LinkGeometry(4.06, 2.0, 10.0)
    bounce = ground_bounce(geom)
    fs = synthesize_sweep(geom, params=LINK, scenario="free_space", sidelobe_db=None)
    gr = synthesize_sweep(
        geom, alpha_db_per_m=0.4, params=LINK, scenario="ground_reflection",
        sidelobe_db=None, gamma_mag=0.1615, bounce_foliage_m=8.0,
    )
    pr_fs = 10 * math.log10(omni_received_power(fs))
    pr_gr = 10 * math.log10(omni_received_power(gr))
    est = recover_reflection_coefficient(geom.direct_length_m, bounce.d_tot_m, 8.0, 0.4, pr_fs, pr_gr)
    assert est.gamma_mag == pytest.approx(0.1615, abs=1e-3)


def test_sweep_deterministic_serial_vs_threads():
    geom = LinkGeometry(4.06, 2.0, 20.0)
    cfg = SounderConfig(noise_snr_db=20.0, rng_seed=11)
    kw = dict(canopy=[(0, 20)], alpha_db_per_m=0.4, params=LINK, config=cfg, angular_step_deg=30.0)
    serial = synthesize_sweep(geom, **kw)
    threaded = synthesize_sweep(geom, threads=4, **kw)
    assert len(serial.records) == len(threaded.records)
    for a, b in zip(serial.records, threaded.records):
        assert a.pointing_key == b.pointing_key
        assert np.array_equal(a.pdp.power_mw, b.pdp.power_mw)
        assert a.pdp.noise_floor_dbm == b.pdp.noise_floor_dbm


def test_foliage_plan_has_six_sweeps():
    geom = LinkGeometry(4.06, 2.0, 30.0)
    sweeps = synthesize_sweep(geom, canopy=[(0, 30)], alpha_db_per_m=0.4, angular_step_deg=30.0, sidelobe_db=None)
    # 12 azimuths per sweep; the RX and TX sweeps share their boresight pair
    assert len(sweeps.records) == 6 * 12 - 1


def test_step_must_divide_circle():
    with pytest.raises(ConfigurationError):
        synthesize_sweep(LinkGeometry(4.06, 2.0, 10.0), angular_step_deg=7.0, scenario="free_space")

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmwprop import DomainError
from mmwprop.propagation import (
    SPEED_OF_LIGHT,
    FoliageObservation,
    LinkBudgetParams,
    NearFieldWarning,
    fit_foliage_attenuation,
    foliage_path_loss,
    free_space_path_loss_db,
    friis_received_power,
    ground_reflected_power,
    xpd,
)

CAMPAIGN_LINK = LinkBudgetParams(-7.9, 27.0, 27.0)


def _friis_oracle(pt_dbm, gt, gr, f, d):
    lam = SPEED_OF_LIGHT / f
    return pt_dbm + gt + gr + 20 * math.log10(lam) - 20 * math.log10(4 * math.pi) - 20 * math.log10(d)


@pytest.mark.parametrize("d", [1.0, 10.0, 20.0, 123.4])
def test_friis_against_log_form(d):
    assert friis_received_power(CAMPAIGN_LINK, d) == pytest.approx(
        _friis_oracle(-7.9, 27, 27, 73.5e9, d), abs=1e-9
    )


def test_fspl_at_10m():
    assert free_space_path_loss_db(10.0) == pytest.approx(89.77, abs=0.01)


@given(st.floats(1.0, 1e4), st.floats(1.0, 1e4))
def test_friis_inverse_square(d1, d2):
    diff = friis_received_power(CAMPAIGN_LINK, d1) - friis_received_power(CAMPAIGN_LINK, d2)
    assert diff == pytest.approx(20 * math.log10(d2 / d1), abs=1e-9)


def test_near_field_and_domain():
    with pytest.warns(NearFieldWarning):
        friis_received_power(CAMPAIGN_LINK, 0.5)
    for bad in (0.0, -3.0, float("nan")):
        with pytest.raises(DomainError):
            friis_received_power(CAMPAIGN_LINK, bad)
    with pytest.raises(DomainError):
        LinkBudgetParams(0, 0, 0, frequency_hz=0)


def test_ground_reflected_power_anchor_example():
    pr = ground_reflected_power(CAMPAIGN_LINK, 11.7, 8.0, 0.4, 0.1615, free_space_anchor=(10.0, -44.2))
    assert pr == pytest.approx(-64.6, abs=0.1)
    friis_based = ground_reflected_power(CAMPAIGN_LINK, 11.7, 8.0, 0.4, 0.1615)
    expected = friis_received_power(CAMPAIGN_LINK, 11.7) - 3.2 + 20 * math.log10(0.1615)
    assert friis_based == pytest.approx(expected, abs=1e-9)


def test_ground_reflected_power_edges():
    assert ground_reflected_power(CAMPAIGN_LINK, 11.7, 8.0, 0.4, 0.0) == -math.inf
    unit = ground_reflected_power(CAMPAIGN_LINK, 11.7, 0.0, 0.4, 1.0)
    assert unit == pytest.approx(friis_received_power(CAMPAIGN_LINK, 11.7))
    with pytest.raises(DomainError):
        ground_reflected_power(CAMPAIGN_LINK, 11.7, 8.0, 0.4, 1.2)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 50))
def test_reflected_power_monotone_in_gamma(g1, g2, d_fol):
    lo, hi = sorted((g1, g2))
    assert ground_reflected_power(CAMPAIGN_LINK, 20, d_fol, 0.4, lo) <= ground_reflected_power(
        CAMPAIGN_LINK, 20, d_fol, 0.4, hi
    )


def test_foliage_path_loss():
    assert foliage_path_loss(89.6, 0.4, 10.0) == pytest.approx(93.6)


def test_fit_exact_line():
    obs = [FoliageObservation(d, 80.0 + d, 80.0 + d + 0.37 * d) for d in (5.0, 12.0, 30.0)]
    fit = fit_foliage_attenuation(obs)
    assert fit.alpha_db_per_m == pytest.approx(0.37, abs=1e-12)
    assert fit.rms_residual_db == pytest.approx(0.0, abs=1e-9)


@given(st.lists(st.tuples(st.floats(1, 100), st.floats(0, 30)), min_size=1, max_size=10))
def test_fit_is_ratio_of_sums(pairs):
    obs = [FoliageObservation(d, 90.0, 90.0 + x) for d, x in pairs]
    fit = fit_foliage_attenuation(obs)
    excess = [o.excess_loss_db for o in obs]
    oracle = math.fsum(excess) / math.fsum(d for d, _ in pairs)
    assert fit.alpha_db_per_m == pytest.approx(oracle, rel=1e-12, abs=1e-12)
    # the weighted residual sum vanishes for the ratio-of-sums estimate
    assert math.fsum(fit.residuals_db) == pytest.approx(0.0, abs=1e-8 * max(1.0, sum(excess)))


def test_fit_rejects_empty_and_flags_negative_excess():
    with pytest.raises(DomainError):
        fit_foliage_attenuation([])
    with pytest.warns(RuntimeWarning):
        fit = fit_foliage_attenuation([FoliageObservation(10, 90, 89), FoliageObservation(20, 95, 99)])
    assert fit.has_negative_excess


def test_reported_excess_takes_priority():
    o = FoliageObservation(10.0, 116.9, 123.3, reported_excess_db=6.3)
    assert o.excess_loss_db == 6.3
    assert FoliageObservation(10.0, 116.9, 123.3).excess_loss_db == pytest.approx(6.4)


def test_xpd_methods():
    assert xpd([120, 130], [90, 96]) == pytest.approx(32.0)
    assert xpd([100.0], [90.0], "total_power_difference") == pytest.approx(10.0)
    with pytest.raises(DomainError):
        xpd([1, 2], [1])
    with pytest.raises(DomainError):
        xpd([], [])
    with pytest.raises(ValueError):
        xpd([1], [1], "median")


@given(st.lists(st.floats(60, 140), min_size=1, max_size=6), st.floats(-20, 40))
def test_xpd_constant_offset(vv, offset):
    vh = [x + offset for x in vv]
    assert xpd(vh, vv) == pytest.approx(offset, abs=1e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert xpd(vh, vv, "total_power_difference") == pytest.approx(offset, abs=1e-6)


def test_db_helpers_roundtrip():
    from mmwprop.propagation import db_to_linear, linear_to_db

    x = np.array([-30.0, 0.0, 17.5])
    assert np.allclose(linear_to_db(db_to_linear(x)), x)

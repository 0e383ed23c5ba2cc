import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmwprop import InvalidGeometryError, InvalidSceneError, NotFoundError
from mmwprop.geometry import (
    ElevationSweepPlan,
    LinkGeometry,
    canopy_path_length,
    downtilt_schedule,
    elevation_sweep_plan,
    ground_bounce,
)

heights = st.floats(0.1, 50.0)
distances = st.floats(0.5, 2000.0)


def _brute_force_bounce(ht, hr, d, n=200001):
    # shortest TX -> ground -> RX route over a dense grid of ground points
    x = np.linspace(0.0, d, n)
    length = np.hypot(x, ht) + np.hypot(d - x, hr)
    k = int(np.argmin(length))
    return length[k], x[k]


def test_ground_bounce_10m():
    b = ground_bounce(LinkGeometry(4.06, 2.0, 10.0))
    assert b.d_tot_m == pytest.approx(math.sqrt(100 + 6.06**2), rel=1e-12)
    assert b.grazing_deg == pytest.approx(31.22, abs=0.01)
    assert b.incident_deg == pytest.approx(58.78, abs=0.01)
    assert b.tx_downtilt_deg == b.rx_downtilt_deg == -b.grazing_deg


@pytest.mark.parametrize("d", [10.0, 20.0, 30.0, 40.0])
def test_ground_bounce_matches_brute_force(d):
    b = ground_bounce(LinkGeometry(4.06, 2.0, d))
    length, x = _brute_force_bounce(4.06, 2.0, d)
    assert b.d_tot_m == pytest.approx(length, abs=1e-6)
    assert b.specular_x_m == pytest.approx(x, abs=d / 1e5)


@given(heights, heights, distances)
def test_bounce_properties(ht, hr, d):
    geom = LinkGeometry(ht, hr, d)
    b = ground_bounce(geom)
    assert b.d_tot_m >= geom.direct_length_m - 1e-9
    assert b.grazing_deg + b.incident_deg == pytest.approx(90.0)
    assert 0 < b.grazing_deg < 90
    # equal angles on both legs of the specular reflection
    left = math.degrees(math.atan2(ht, b.specular_x_m))
    right = math.degrees(math.atan2(hr, d - b.specular_x_m))
    assert left == pytest.approx(right, abs=1e-7)


@given(heights, heights, distances, distances)
def test_incident_angle_grows_with_distance(ht, hr, d1, d2):
    lo, hi = sorted((d1, d2))
    a = ground_bounce(LinkGeometry(ht, hr, lo)).incident_deg
    b = ground_bounce(LinkGeometry(ht, hr, hi)).incident_deg
    assert b >= a - 1e-12


def test_downtilt_rounding_modes():
    geom = LinkGeometry(4.06, 2.0, 20.0)
    exact = downtilt_schedule(geom)
    assert exact.tx_deg == pytest.approx(-16.86, abs=0.01)
    assert downtilt_schedule(geom, "nearest_degree") == (-17.0, -17.0)
    with pytest.raises(ValueError):
        downtilt_schedule(geom, "floor")


@pytest.mark.parametrize("field", ["tx_height_m", "rx_height_m", "separation_m"])
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_geometry_rejects_bad_values(field, bad):
    kwargs = dict(tx_height_m=4.06, rx_height_m=2.0, separation_m=10.0)
    kwargs[field] = bad
    with pytest.raises(InvalidGeometryError):
        LinkGeometry(**kwargs)


def test_elevation_plan_lookup():
    plan = elevation_sweep_plan(1)
    tx, rx = plan.measurement(2)
    assert tx == -30 and rx == (-30, -23, -16, -9, -2)
    assert elevation_sweep_plan(4).measurement(2) == (-9, (-9, -2))
    with pytest.raises(NotFoundError):
        elevation_sweep_plan(5)
    with pytest.raises(NotFoundError):
        plan.measurement(9)


def test_elevation_plans_step_by_hpbw():
    for rx_id in (1, 2, 3, 4):
        for _n, _tx, rx in elevation_sweep_plan(rx_id).rows:
            assert all(b - a == 7 for a, b in zip(rx, rx[1:]))
    with pytest.raises(ValueError):
        ElevationSweepPlan(9, ((1, -10.0, (-10.0, -4.0)),))


def test_canopy_lengths():
    geom = LinkGeometry(4.06, 2.0, 10.0)
    assert canopy_path_length([], geom) == 0.0
    assert canopy_path_length([(0, 10)], geom) == pytest.approx(geom.direct_length_m)
    assert canopy_path_length([(0, 10)], geom, "ground_bounce") == pytest.approx(
        ground_bounce(geom).d_tot_m
    )
    half = canopy_path_length([(0, 2.5), (7.5, 10)], geom)
    assert half == pytest.approx(geom.direct_length_m / 2)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=8), distances)
def test_canopy_length_bounded_by_ray(cuts, d):
    geom = LinkGeometry(3.0, 1.5, d)
    edges = sorted(c * d for c in cuts)
    spans = list(zip(edges[::2], edges[1::2]))
    for ray, full in (("direct", geom.direct_length_m), ("ground_bounce", ground_bounce(geom).d_tot_m)):
        length = canopy_path_length(spans, geom, ray)
        assert 0 <= length <= full * (1 + 1e-9)


@pytest.mark.parametrize("spans", [[(-1, 3)], [(0, 11)], [(0, 5), (4, 6)], [(5, 3)]])
def test_canopy_rejects_bad_spans(spans):
    with pytest.raises(InvalidSceneError):
        canopy_path_length(spans, LinkGeometry(4.06, 2.0, 10.0))

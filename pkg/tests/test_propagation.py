import math

import numpy as np
import pytest

from beamloc.propagation import (
    LinkGeometry,
    PropagationConfig,
    antenna_gain,
    beam_rsrp,
    line_of_sight,
    link_geometry,
    los_fraction,
    path_loss,
    rsrp_grid,
    shadow_fading,
)
from beamloc.scenario import Beam, Building, Scenario, ScenarioConfig, Sector, build_scenario

from oracles import dense_los_oracle

SPEED_OF_LIGHT = 299_792_458.0


def _geom(distance, los=True):
    return LinkGeometry(distance_3d=distance, azimuth_to_ue=0.0, elevation_to_ue=0.0, los=los)


def test_free_space_reference_value():
    # independent evaluation of 20*log10(4*pi*d*f/c) at d=1m, f=28GHz
    expected = 20.0 * math.log10(4.0 * math.pi * 1.0 * 28e9 / SPEED_OF_LIGHT)
    got = path_loss(_geom(1.0), 28.0, PropagationConfig())
    assert got == pytest.approx(expected, abs=0.05)
    assert got == pytest.approx(61.4, abs=0.05)


def test_free_space_doubling_distance():
    cfg = PropagationConfig()
    for d in (2.0, 17.0, 333.0):
        delta = path_loss(_geom(2 * d), 28.0, cfg) - path_loss(_geom(d), 28.0, cfg)
        assert delta == pytest.approx(20.0 * math.log10(2.0), abs=1e-9)


def test_distance_clamped_below_one_meter():
    cfg = PropagationConfig()
    assert path_loss(_geom(0.2), 28.0, cfg) == path_loss(_geom(1.0), 28.0, cfg)


def test_nlos_never_cheaper_than_los():
    cfg = PropagationConfig(model="umi_los_nlos", nlos_extra_loss_exponent=2.0)
    rng = np.random.default_rng(1)
    for d in rng.uniform(0.5, 2000.0, size=200):
        los = path_loss(_geom(d, los=True), 28.0, cfg)
        nlos = path_loss(_geom(d, los=False), 28.0, cfg)
        assert nlos >= los


def test_free_space_model_ignores_los_flag():
    cfg = PropagationConfig(model="free_space")
    assert path_loss(_geom(50.0, True), 28.0, cfg) == path_loss(_geom(50.0, False), 28.0, cfg)


def test_propagation_config_validation():
    with pytest.raises(ValueError):
        PropagationConfig(model="raytrace")
    with pytest.raises(ValueError):
        PropagationConfig(shadow_fading_sigma=-1.0)


def _beam(**kwargs):
    defaults = dict(beam_id=0, steer_azimuth=0.0, steer_elevation=0.0, array_gain=10.0)
    defaults.update(kwargs)
    return Beam(**defaults)


def test_antenna_gain_boresight_is_peak():
    beam = _beam()
    assert antenna_gain(beam, 0.0, 0.0) == beam.peak_gain == 18.0


def test_antenna_gain_half_beamwidth_is_3db_down():
    beam = _beam()
    assert antenna_gain(beam, beam.azimuth_beamwidth / 2, 0.0) == pytest.approx(beam.peak_gain - 3.0)
    assert antenna_gain(beam, 0.0, beam.elevation_beamwidth / 2) == pytest.approx(beam.peak_gain - 3.0)


def test_antenna_gain_back_lobe_floor():
    beam = _beam()
    assert antenna_gain(beam, 180.0, 0.0) == pytest.approx(beam.peak_gain - beam.front_to_back)


def test_antenna_gain_bounded():
    beam = _beam()
    rng = np.random.default_rng(2)
    az = rng.uniform(-400, 400, size=1000)
    el = rng.uniform(-400, 400, size=1000)
    g = antenna_gain(beam, az, el)
    assert np.all(g <= beam.peak_gain + 1e-12)
    assert np.all(g >= beam.peak_gain - beam.front_to_back - 1e-12)


def test_los_empty_scene():
    assert line_of_sight((0.0, 0.0, 10.0), (50.0, 0.0, 1.5), ())


def test_los_blocked_by_interior_crossing():
    b = Building((10.0, -5.0), (20.0, 5.0), 25.0)
    assert not line_of_sight((0.0, 0.0, 10.0), (50.0, 0.0, 1.5), (b,))


def test_los_height_interpolation():
    # segment z runs 10 -> 1.5 over x in [0, 20]; over the crossing x in [1, 3]
    # it stays above 8.7, so only buildings taller than that block
    p, q = (0.0, 0.0, 10.0), (20.0, 0.0, 1.5)
    tall = Building((1.0, -1.0), (3.0, 1.0), 9.0)
    short = Building((1.0, -1.0), (3.0, 1.0), 8.0)
    assert not line_of_sight(p, q, (tall,))
    assert line_of_sight(p, q, (short,))


def test_los_is_symmetric():
    rng = np.random.default_rng(3)
    buildings = tuple(
        Building((x, y), (x + w, y + h), height)
        for x, y, w, h, height in zip(
            rng.uniform(0, 80, 8),
            rng.uniform(0, 80, 8),
            rng.uniform(2, 15, 8),
            rng.uniform(2, 15, 8),
            rng.uniform(3, 30, 8),
        )
    )
    for _ in range(100):
        p = (rng.uniform(-10, 110), rng.uniform(-10, 110), rng.uniform(1, 12))
        q = (rng.uniform(-10, 110), rng.uniform(-10, 110), rng.uniform(1, 12))
        assert line_of_sight(p, q, buildings) == line_of_sight(q, p, buildings)


def test_los_matches_dense_sampling_oracle():
    rng = np.random.default_rng(4)
    buildings = tuple(
        Building((x, y), (x + w, y + h), height)
        for x, y, w, h, height in zip(
            rng.uniform(0, 90, 10),
            rng.uniform(0, 90, 10),
            rng.uniform(3, 20, 10),
            rng.uniform(3, 20, 10),
            rng.uniform(3, 30, 10),
        )
    )
    for _ in range(200):
        p = (rng.uniform(-20, 120), rng.uniform(-20, 120), rng.uniform(1, 15))
        q = (rng.uniform(-20, 120), rng.uniform(-20, 120), rng.uniform(1, 15))
        assert line_of_sight(p, q, buildings) == dense_los_oracle(p, q, buildings)


def _one_site_scenario(with_building=False, tx_power=30.0, seed=0, sigma=0.0):
    sector = Sector(cell_id=0, boresight_azimuth=0.0, tx_power=tx_power, beams=(_beam(),))
    site_cfg = ScenarioConfig(site_rows=1, site_cols=1, with_buildings=False)
    site = build_scenario(site_cfg).sites[0]
    site = type(site)(id=0, position=(0.0, 0.0), height=10.0, sectors=(sector,))
    buildings = (Building((30.0, -5.0), (40.0, 5.0), 25.0),) if with_building else ()
    return Scenario(
        buildings=buildings,
        sites=(site,),
        carrier_frequency=28.0,
        area=(200.0, 200.0),
        grid_resolution=1.0,
        rng_seed=seed,
    )


def test_beam_rsrp_composition():
    scenario = _one_site_scenario()
    cfg = PropagationConfig()
    sector = scenario.sites[0].sectors[0]
    beam = sector.beams[0]
    location = (80.0, 15.0)
    geom = link_geometry(location, scenario.sites[0], scenario, cfg)
    expected = (
        sector.tx_power
        + antenna_gain(beam, geom.azimuth_to_ue - sector.boresight_azimuth - beam.steer_azimuth,
                       geom.elevation_to_ue - beam.steer_elevation)
        - path_loss(geom, scenario.carrier_frequency, cfg)
    )
    assert beam_rsrp(location, beam, sector, scenario, cfg) == pytest.approx(expected, abs=1e-9)


def test_rsrp_decreases_along_boresight():
    # site and UE at equal height so the link stays exactly on boresight
    sector = Sector(cell_id=0, boresight_azimuth=0.0, beams=(_beam(),))
    site = type(build_scenario(ScenarioConfig(site_rows=1, site_cols=1, with_buildings=False)).sites[0])(
        id=0, position=(0.0, 0.0), height=1.5, sectors=(sector,)
    )
    scenario = Scenario(buildings=(), sites=(site,), carrier_frequency=28.0, area=(2000.0, 10.0),
                        grid_resolution=1.0, rng_seed=0)
    cfg = PropagationConfig()
    values = [beam_rsrp((d, 0.0), sector.beams[0], sector, scenario, cfg) for d in (2, 5, 20, 100, 700)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_tx_power_shift_is_exact():
    base = _one_site_scenario(tx_power=30.0)
    boosted = _one_site_scenario(tx_power=33.0)
    cfg = PropagationConfig(noise_floor=-500.0)
    locations = np.array([[50.0, 10.0], [120.0, -40.0], [15.0, 90.0]])
    a = rsrp_grid(base, locations, cfg).rsrp
    b = rsrp_grid(boosted, locations, cfg).rsrp
    assert np.allclose(b - a, 3.0, atol=1e-12)


def test_rsrp_grid_deterministic():
    scenario = build_scenario(ScenarioConfig(site_rows=1, site_cols=2, grid_resolution_m=20.0))
    cfg = PropagationConfig(shadow_fading_sigma=4.0)
    locations = np.array([[12.0, 34.0], [200.0, 41.0], [77.0, 8.0]])
    a = rsrp_grid(scenario, locations, cfg)
    b = rsrp_grid(scenario, locations, cfg)
    assert np.array_equal(a.rsrp, b.rsrp)
    assert a.beams == b.beams
    assert np.array_equal(a.site_los, b.site_los)


def test_rsrp_grid_subset_invariance():
    # stateless shadow fading: evaluating a subset must reproduce the same rows
    scenario = build_scenario(ScenarioConfig(site_rows=1, site_cols=2, grid_resolution_m=20.0))
    cfg = PropagationConfig(shadow_fading_sigma=6.0)
    locations = np.array([[12.0, 34.0], [200.0, 41.0], [77.0, 8.0], [140.0, 60.0]])
    full = rsrp_grid(scenario, locations, cfg).rsrp
    subset = rsrp_grid(scenario, locations[[2, 0]], cfg).rsrp
    assert np.array_equal(subset[0], full[2])
    assert np.array_equal(subset[1], full[0])


def test_shadow_shared_within_site_preserves_beam_differences():
    scenario = build_scenario(ScenarioConfig(site_rows=1, site_cols=1, with_buildings=False))
    locations = np.array([[55.0, 21.0], [30.0, 70.0]])
    clean = rsrp_grid(scenario, locations, PropagationConfig(noise_floor=-500.0)).rsrp
    noisy = rsrp_grid(scenario, locations, PropagationConfig(noise_floor=-500.0, shadow_fading_sigma=8.0)).rsrp
    offset = noisy - clean
    # one shadow draw per (location, site): every beam column shifts equally
    assert np.allclose(offset, offset[:, :1], atol=1e-9)
    assert not np.allclose(offset, 0.0)


def test_shadow_differs_across_sites_and_locations():
    draws_a = shadow_fading(1, 0, np.array([[1.0, 2.0], [3.0, 4.0]]), 4.0)
    draws_b = shadow_fading(1, 1, np.array([[1.0, 2.0], [3.0, 4.0]]), 4.0)
    assert draws_a[0] != draws_a[1]
    assert draws_a[0] != draws_b[0]


def test_shadow_moments():
    rng = np.random.default_rng(5)
    locations = rng.uniform(0, 1000, size=(20000, 2))
    draws = shadow_fading(42, 3, locations, 4.0)
    assert abs(float(np.mean(draws))) < 0.15
    assert float(np.std(draws)) == pytest.approx(4.0, abs=0.15)


def test_noise_floor_clamp():
    scenario = _one_site_scenario()
    cfg = PropagationConfig(noise_floor=-60.0)
    value = beam_rsrp((190.0, 170.0), scenario.sites[0].sectors[0].beams[0], scenario.sites[0].sectors[0], scenario, cfg)
    assert value == -60.0


def test_beam_rsrp_rejects_location_inside_building():
    scenario = _one_site_scenario(with_building=True)
    sector = scenario.sites[0].sectors[0]
    with pytest.raises(ValueError, match="inside a building"):
        beam_rsrp((35.0, 0.0), sector.beams[0], sector, scenario, PropagationConfig())


def test_scalar_matches_grid_column():
    scenario = build_scenario(ScenarioConfig(site_rows=1, site_cols=2, grid_resolution_m=20.0))
    cfg = PropagationConfig(shadow_fading_sigma=3.0)
    locations = np.array([[40.0, 60.0], [150.0, 35.0]])  # on street corridors
    grid = rsrp_grid(scenario, locations, cfg)
    for col, ref in enumerate(grid.beams):
        if col % 37 != 0:  # spot-check a spread of columns
            continue
        site = scenario.sites[ref.site_id]
        sector = next(s for s in site.sectors if s.cell_id == ref.cell_id)
        beam = next(b for b in sector.beams if b.beam_id == ref.beam_id)
        for row in range(len(locations)):
            scalar = beam_rsrp(locations[row], beam, sector, scenario, cfg)
            assert scalar == grid.rsrp[row, col]


def test_link_geometry_angles_normalized():
    scenario = _one_site_scenario()
    geom = link_geometry((-30.0, -30.0), scenario.sites[0], scenario, PropagationConfig())
    assert -180.0 < geom.azimuth_to_ue <= 180.0
    assert -180.0 < geom.elevation_to_ue <= 180.0
    assert geom.distance_3d > 0


def test_los_fraction_reportable():
    scenario = build_scenario(ScenarioConfig(grid_resolution_m=30.0))
    from beamloc.scenario import enumerate_locations

    locations = enumerate_locations(scenario)
    grid = rsrp_grid(scenario, locations, PropagationConfig())
    serving_col = np.argmax(grid.rsrp, axis=1)
    serving_site = np.array([grid.beams[c].site_id for c in serving_col])
    frac = los_fraction(grid, serving_site)
    assert 0.0 <= frac <= 1.0

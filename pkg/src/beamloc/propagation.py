"""Per-beam received power over the scenario grid.

Direct-ray analytic model: geometric line-of-sight against building
footprints, log-distance path loss at the carrier frequency, and a parabolic
(in dB) directional beam pattern. Optional lognormal shadow fading is drawn
from a stateless per-(location, site) hash so results never depend on
evaluation order or parallelism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import points_in_rect, segment_rect_crossing, wrap_deg
from .scenario import Beam, Scenario, Sector, Site
from .seeds import derive_seed

DEFAULT_UE_HEIGHT = 1.5
FREE_SPACE_CONST_DB = -147.55  # 20*log10(4*pi/c)

PROPAGATION_MODELS = ("free_space", "umi_los_nlos")


@dataclass(frozen=True)
class LinkGeometry:
    """Direct-path geometry from a site to a UE location."""

    distance_3d: float
    azimuth_to_ue: float
    elevation_to_ue: float
    los: bool

    def __post_init__(self):
        if self.distance_3d <= 0:
            raise ValueError("distance_3d must be > 0")


@dataclass(frozen=True)
class PropagationConfig:
    model: str = "free_space"
    nlos_extra_loss_exponent: float = 2.0
    shadow_fading_sigma: float = 0.0
    noise_floor: float = -140.0
    ue_height: float = DEFAULT_UE_HEIGHT

    def __post_init__(self):
        if self.model not in PROPAGATION_MODELS:
            raise ValueError(f"unknown propagation model {self.model!r}, expected one of {PROPAGATION_MODELS}")
        if self.shadow_fading_sigma < 0:
            raise ValueError("shadow_fading_sigma must be >= 0")


def _blocked_mask(p: tuple[float, float, float], targets: np.ndarray, target_height: float, buildings) -> np.ndarray:
    """True where the 3-D segment from p to (targets[i], target_height) is blocked.

    A building blocks a segment iff the 2-D footprint crossing is non-empty
    (open interior, so edge grazing does not block) and the building height
    exceeds the segment's lowest interpolated height over the crossing.
    """
    targets = np.asarray(targets, dtype=float)
    n = len(targets)
    blocked = np.zeros(n, dtype=bool)
    z0, z1 = p[2], target_height
    for b in buildings:
        hit, t_enter, t_exit = segment_rect_crossing(p[:2], targets, b.min_corner, b.max_corner)
        if not np.any(hit):
            continue
        z_enter = z0 + t_enter * (z1 - z0)
        z_exit = z0 + t_exit * (z1 - z0)
        min_z = np.minimum(z_enter, z_exit)
        blocked |= hit & (b.height > min_z)
    return blocked


def line_of_sight(p: tuple[float, float, float], q: tuple[float, float, float], buildings) -> bool:
    """True iff no building blocks the direct segment between two 3-D points."""
    if p[:2] == q[:2] and p[2] == q[2]:
        raise ValueError("line_of_sight requires distinct endpoints")
    mask = _blocked_mask(p, np.array([q[:2]]), q[2], buildings)
    return not bool(mask[0])


def _site_link_arrays(site: Site, locations: np.ndarray, scenario: Scenario, config: PropagationConfig):
    """Vectorized direct-path geometry from one site to every location."""
    locations = np.asarray(locations, dtype=float)
    sx, sy = site.position
    dx = locations[:, 0] - sx
    dy = locations[:, 1] - sy
    dz = config.ue_height - site.height
    d2d = np.hypot(dx, dy)
    d3d = np.sqrt(d2d * d2d + dz * dz)
    azimuth = np.degrees(np.arctan2(dy, dx))
    elevation = np.degrees(np.arctan2(dz, d2d))
    los = ~_blocked_mask((sx, sy, site.height), locations, config.ue_height, scenario.buildings)
    return d3d, azimuth, elevation, los


def link_geometry(location, site: Site, scenario: Scenario, config: PropagationConfig | None = None) -> LinkGeometry:
    """Direct-path geometry from `site` to a single 2-D `location`."""
    config = config or PropagationConfig()
    d3d, az, el, los = _site_link_arrays(site, np.atleast_2d(np.asarray(location, dtype=float)), scenario, config)
    return LinkGeometry(
        distance_3d=float(d3d[0]),
        azimuth_to_ue=float(wrap_deg(az[0])),
        elevation_to_ue=float(wrap_deg(el[0])),
        los=bool(los[0]),
    )


def _path_loss_arrays(d3d: np.ndarray, los: np.ndarray, freq_ghz: float, config: PropagationConfig) -> np.ndarray:
    d = np.maximum(np.asarray(d3d, dtype=float), 1.0)
    loss = 20.0 * np.log10(d) + 20.0 * np.log10(freq_ghz * 1e9) + FREE_SPACE_CONST_DB
    if config.model == "umi_los_nlos":
        extra = 10.0 * config.nlos_extra_loss_exponent * np.log10(d)
        loss = loss + np.where(los, 0.0, extra)
    return loss


def path_loss(geometry: LinkGeometry, freq_ghz: float, config: PropagationConfig) -> float:
    """Log-distance path loss in dB for the given link (distance clamped at 1 m)."""
    return float(_path_loss_arrays(np.array([geometry.distance_3d]), np.array([geometry.los]), freq_ghz, config)[0])


def antenna_gain(beam: Beam, azimuth_off, elevation_off):
    """Parabolic-in-dB pattern: peak gain minus a quadratic rolloff, floored
    at front_to_back below the peak. Offsets are degrees from the steering
    direction; scalars or arrays."""
    az = np.abs(wrap_deg(np.asarray(azimuth_off, dtype=float)))
    el = np.abs(wrap_deg(np.asarray(elevation_off, dtype=float)))
    rolloff = 12.0 * (az / beam.azimuth_beamwidth) ** 2 + 12.0 * (el / beam.elevation_beamwidth) ** 2
    gain = beam.peak_gain - np.minimum(rolloff, beam.front_to_back)
    if np.isscalar(azimuth_off) and np.isscalar(elevation_off):
        return float(gain)
    return gain


_MIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x) -> np.ndarray:
    # wrapping uint64 arithmetic is intended here
    with np.errstate(over="ignore"):
        z = (np.asarray(x, dtype=np.uint64) + _MIX_GAMMA).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _MIX_M1
        z = (z ^ (z >> np.uint64(27))) * _MIX_M2
        return z ^ (z >> np.uint64(31))


def _hash_uniform(key: np.ndarray, salt: int) -> np.ndarray:
    """Map uint64 keys to uniforms in (0, 1)."""
    h = _mix64(key ^ np.uint64(salt))
    u = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.maximum(u, 2.0**-53)


def shadow_fading(seed: int, site_id: int, locations: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian shadow fading in dB, one draw per (location, site).

    Stateless: the draw is a pure hash of (seed, site_id, exact coordinates),
    so any subset of locations evaluated in any order or process yields the
    same values. Shared across all beams of the site, which preserves
    relative beam rankings while perturbing absolute levels.
    """
    locations = np.asarray(locations, dtype=float)
    if sigma == 0.0:
        return np.zeros(len(locations))
    xb = np.ascontiguousarray(locations[:, 0]).view(np.uint64)
    yb = np.ascontiguousarray(locations[:, 1]).view(np.uint64)
    key = _mix64(np.uint64(seed))
    key = _mix64(key ^ np.uint64(site_id))
    key = _mix64(key ^ xb)
    key = _mix64(key ^ yb)
    u1 = _hash_uniform(key, 0x5EED)
    u2 = _hash_uniform(key, 0xFACE)
    normal = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return sigma * normal


@dataclass(frozen=True)
class BeamRef:
    """Global identity of one matrix column."""

    site_id: int
    cell_id: int
    beam_id: int


@dataclass(frozen=True)
class RsrpGrid:
    """Per-location, per-beam RSRP with the column identities and LoS map.

    rsrp has shape (n_locations, n_beams); site_los has shape
    (n_locations, n_sites) with columns ordered like scenario.sites.
    """

    rsrp: np.ndarray
    beams: tuple[BeamRef, ...]
    site_los: np.ndarray


def _beam_columns(site: Site, sector: Sector, d3d, azimuth, elevation, loss, shadow, config: PropagationConfig):
    columns, refs = [], []
    for beam in sector.beams:
        beam_azimuth = wrap_deg(sector.boresight_azimuth + beam.steer_azimuth)
        az_off = wrap_deg(azimuth - beam_azimuth)
        el_off = elevation - beam.steer_elevation
        gain = antenna_gain(beam, az_off, el_off)
        rsrp = sector.tx_power + gain - loss + shadow
        columns.append(np.maximum(rsrp, config.noise_floor))
        refs.append(BeamRef(site_id=site.id, cell_id=sector.cell_id, beam_id=beam.beam_id))
    return columns, refs


def rsrp_grid(scenario: Scenario, locations: np.ndarray, config: PropagationConfig | None = None) -> RsrpGrid:
    """Evaluate every beam at every location.

    Column order is sites in scenario order, sectors in site order, beams in
    sector order. Deterministic for a fixed (scenario, locations, config).
    """
    config = config or PropagationConfig()
    locations = np.asarray(locations, dtype=float)
    shadow_seed = derive_seed(scenario.rng_seed, "shadow")
    all_columns, all_refs = [], []
    site_los = np.zeros((len(locations), len(scenario.sites)), dtype=bool)
    for si, site in enumerate(scenario.sites):
        d3d, azimuth, elevation, los = _site_link_arrays(site, locations, scenario, config)
        site_los[:, si] = los
        loss = _path_loss_arrays(d3d, los, scenario.carrier_frequency, config)
        shadow = shadow_fading(shadow_seed, site.id, locations, config.shadow_fading_sigma)
        for sector in site.sectors:
            columns, refs = _beam_columns(site, sector, d3d, azimuth, elevation, loss, shadow, config)
            all_columns.extend(columns)
            all_refs.extend(refs)
    return RsrpGrid(rsrp=np.column_stack(all_columns), beams=tuple(all_refs), site_los=site_los)


def beam_rsrp(location, beam: Beam, sector: Sector, scenario: Scenario, config: PropagationConfig | None = None) -> float:
    """RSRP of one beam at one location, via the same path as rsrp_grid."""
    config = config or PropagationConfig()
    point = np.atleast_2d(np.asarray(location, dtype=float))
    for b in scenario.buildings:
        if points_in_rect(point, b.min_corner, b.max_corner)[0]:
            raise ValueError(f"location {tuple(point[0])} is inside a building")
    site = next(s for s in scenario.sites if any(sec.cell_id == sector.cell_id for sec in s.sectors))
    d3d, azimuth, elevation, los = _site_link_arrays(site, point, scenario, config)
    loss = _path_loss_arrays(d3d, los, scenario.carrier_frequency, config)
    shadow_seed = derive_seed(scenario.rng_seed, "shadow")
    shadow = shadow_fading(shadow_seed, site.id, point, config.shadow_fading_sigma)
    only = Sector(
        cell_id=sector.cell_id,
        boresight_azimuth=sector.boresight_azimuth,
        mechanical_downtilt=sector.mechanical_downtilt,
        tx_power=sector.tx_power,
        beams=(beam,),
    )
    columns, _ = _beam_columns(site, only, d3d, azimuth, elevation, loss, shadow, config)
    return float(columns[0][0])


def los_fraction(grid: RsrpGrid, serving_site_index: np.ndarray) -> float:
    """Fraction of locations with line of sight to their serving site."""
    rows = np.arange(len(serving_site_index))
    return float(np.mean(grid.site_los[rows, serving_site_index]))

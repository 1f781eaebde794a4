"""Synthetic urban deployment: city blocks, street-corner sites, grid-of-beams.

The world is a rectangular area covered by a street grid. Sites sit at street
intersections, each with three 120-degree sectors, and every sector carries a
fixed grid-of-beams tiling its azimuth span. Buildings fill the blocks between
streets, so line of sight exists along street corridors only.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import points_in_rect, wrap_deg

DEFAULT_ELEVATION_STEERS = (-3.0, -12.0)
SECTOR_AZIMUTH_SPAN_DEG = 120.0


@dataclass(frozen=True)
class Building:
    """Axis-aligned rectangular footprint with a flat roof height in meters."""

    min_corner: tuple[float, float]
    max_corner: tuple[float, float]
    height: float

    def __post_init__(self):
        if not (self.min_corner[0] < self.max_corner[0] and self.min_corner[1] < self.max_corner[1]):
            raise ValueError(f"building min_corner {self.min_corner} must be < max_corner {self.max_corner}")
        if self.height <= 0:
            raise ValueError(f"building height must be > 0, got {self.height}")

    def contains(self, x: float, y: float) -> bool:
        return bool(points_in_rect(np.array([[x, y]]), self.min_corner, self.max_corner)[0])


@dataclass(frozen=True)
class Beam:
    """One member of a sector grid-of-beams.

    steer_azimuth is relative to the sector boresight; steer_elevation is the
    absolute pointing elevation (negative = below horizon, downtilt included).
    """

    beam_id: int
    steer_azimuth: float
    steer_elevation: float
    azimuth_beamwidth: float = 65.0
    elevation_beamwidth: float = 65.0
    element_gain: float = 8.0
    front_to_back: float = 30.0
    array_gain: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.azimuth_beamwidth < 180.0 and 0.0 < self.elevation_beamwidth < 180.0):
            raise ValueError("beamwidths must lie in (0, 180) degrees")

    @property
    def peak_gain(self) -> float:
        return self.element_gain + self.array_gain


@dataclass(frozen=True)
class Sector:
    cell_id: int
    boresight_azimuth: float
    mechanical_downtilt: float = 5.0
    tx_power: float = 30.0
    beams: tuple[Beam, ...] = ()


@dataclass(frozen=True)
class Site:
    id: int
    position: tuple[float, float]
    height: float = 10.0
    sectors: tuple[Sector, ...] = ()

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError(f"site height must be > 0, got {self.height}")


@dataclass(frozen=True)
class Scenario:
    """Immutable world description. `area` is (width, height) with origin (0, 0)."""

    buildings: tuple[Building, ...]
    sites: tuple[Site, ...]
    carrier_frequency: float
    area: tuple[float, float]
    grid_resolution: float
    rng_seed: int

    @property
    def cells(self) -> tuple[Sector, ...]:
        return tuple(sector for site in self.sites for sector in site.sectors)

    def site_of_cell(self, cell_id: int) -> Site:
        for site in self.sites:
            for sector in site.sectors:
                if sector.cell_id == cell_id:
                    return site
        raise KeyError(f"no cell with id {cell_id}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Parametric street-grid layout; defaults mirror the 8-site deployment."""

    site_rows: int = 2
    site_cols: int = 4
    row_spacing_m: float = 110.0
    col_spacing_m: float = 200.0
    margin_m: float = 40.0
    street_width_m: float = 20.0
    site_height_m: float = 10.0
    with_buildings: bool = True
    building_height_m: float = 25.0
    sectors_per_site: int = 3
    beams_per_sector: int = 32
    elevation_steers_deg: tuple[float, ...] = DEFAULT_ELEVATION_STEERS
    mechanical_downtilt_deg: float = 5.0
    tx_power_dbm: float = 30.0
    azimuth_beamwidth_deg: float = 65.0
    elevation_beamwidth_deg: float = 65.0
    element_gain_dbi: float = 8.0
    front_to_back_db: float = 30.0
    carrier_frequency_ghz: float = 28.0
    grid_resolution_m: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.site_rows < 1 or self.site_cols < 1:
            raise ValueError("site grid must have at least one row and one column")
        if self.grid_resolution_m <= 0:
            raise ValueError("grid_resolution_m must be > 0")
        if self.street_width_m <= 0:
            raise ValueError("street_width_m must be > 0")
        if isinstance(self.elevation_steers_deg, list):
            object.__setattr__(self, "elevation_steers_deg", tuple(self.elevation_steers_deg))


def synthesize_beam_grid(
    sector: Sector,
    count: int,
    elevation_steers: tuple[float, ...] = DEFAULT_ELEVATION_STEERS,
    azimuth_span_deg: float = SECTOR_AZIMUTH_SPAN_DEG,
    azimuth_beamwidth_deg: float = 65.0,
    elevation_beamwidth_deg: float = 65.0,
    element_gain_dbi: float = 8.0,
    front_to_back_db: float = 30.0,
) -> list[Beam]:
    """Tile the sector azimuth span with `count` beams.

    The grid is rows-of-azimuth-steers, one row per elevation steer; azimuth
    centers are evenly spaced so the steers cover the span with half a
    beam-spacing of slack at the edges. count=1 yields a single boresight beam
    pointing along the mechanical downtilt. Array gain is 10*log10(count) on
    top of the element gain.
    """
    if count < 1:
        raise ValueError("beam count must be >= 1")
    array_gain = 10.0 * math.log10(count)
    common = dict(
        azimuth_beamwidth=azimuth_beamwidth_deg,
        elevation_beamwidth=elevation_beamwidth_deg,
        element_gain=element_gain_dbi,
        front_to_back=front_to_back_db,
        array_gain=array_gain,
    )
    if count == 1:
        return [Beam(beam_id=0, steer_azimuth=0.0, steer_elevation=-sector.mechanical_downtilt, **common)]

    n_rows = len(elevation_steers)
    if n_rows < 1 or count % n_rows != 0:
        raise ValueError(
            f"beam count {count} is not factorable into {n_rows} elevation rows"
        )
    n_az = count // n_rows
    spacing = azimuth_span_deg / n_az
    az_steers = [-azimuth_span_deg / 2.0 + spacing * (k + 0.5) for k in range(n_az)]
    beams = []
    for row, el in enumerate(elevation_steers):
        for k, az in enumerate(az_steers):
            beams.append(Beam(beam_id=row * n_az + k, steer_azimuth=az, steer_elevation=el, **common))
    return beams


def _street_block_intervals(centers: list[float], half_width: float, limit: float) -> list[tuple[float, float]]:
    """1-D block intervals left between street bands centered on `centers`."""
    edges = [0.0]
    for c in centers:
        edges.extend((c - half_width, c + half_width))
    edges.append(limit)
    intervals = []
    for lo, hi in zip(edges[::2], edges[1::2]):
        lo, hi = max(lo, 0.0), min(hi, limit)
        if hi - lo > 0:
            intervals.append((lo, hi))
    return intervals


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Deterministically construct the scenario described by `config`.

    Sites sit on the intersections of a street grid; buildings fill every
    rectangular block between streets (and between the outer streets and the
    area border).
    """
    width = (config.site_cols - 1) * config.col_spacing_m + 2 * config.margin_m
    height = (config.site_rows - 1) * config.row_spacing_m + 2 * config.margin_m
    xs = [config.margin_m + c * config.col_spacing_m for c in range(config.site_cols)]
    ys = [config.margin_m + r * config.row_spacing_m for r in range(config.site_rows)]

    buildings: list[Building] = []
    if config.with_buildings:
        half = config.street_width_m / 2.0
        for x_lo, x_hi in _street_block_intervals(xs, half, width):
            for y_lo, y_hi in _street_block_intervals(ys, half, height):
                buildings.append(Building((x_lo, y_lo), (x_hi, y_hi), config.building_height_m))

    sites: list[Site] = []
    for r, y in enumerate(ys):
        for c, x in enumerate(xs):
            site_id = r * config.site_cols + c
            sectors = []
            for s in range(config.sectors_per_site):
                cell_id = site_id * config.sectors_per_site + s
                boresight = wrap_deg(s * 360.0 / config.sectors_per_site)
                sector = Sector(
                    cell_id=cell_id,
                    boresight_azimuth=boresight,
                    mechanical_downtilt=config.mechanical_downtilt_deg,
                    tx_power=config.tx_power_dbm,
                )
                beams = synthesize_beam_grid(
                    sector,
                    config.beams_per_sector,
                    elevation_steers=config.elevation_steers_deg,
                    azimuth_beamwidth_deg=config.azimuth_beamwidth_deg,
                    elevation_beamwidth_deg=config.elevation_beamwidth_deg,
                    element_gain_dbi=config.element_gain_dbi,
                    front_to_back_db=config.front_to_back_db,
                )
                sectors.append(dataclasses.replace(sector, beams=tuple(beams)))
            sites.append(Site(id=site_id, position=(x, y), height=config.site_height_m, sectors=tuple(sectors)))

    scenario = Scenario(
        buildings=tuple(buildings),
        sites=tuple(sites),
        carrier_frequency=config.carrier_frequency_ghz,
        area=(width, height),
        grid_resolution=config.grid_resolution_m,
        rng_seed=config.seed,
    )
    validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: Scenario) -> None:
    """Reject geometrically inconsistent scenarios."""
    if not scenario.sites:
        raise ValueError("scenario has zero sites")
    width, height = scenario.area
    for site in scenario.sites:
        x, y = site.position
        if not (0 <= x <= width and 0 <= y <= height):
            raise ValueError(f"site {site.id} at {site.position} lies outside the area")
        for b in scenario.buildings:
            if b.min_corner[0] < x < b.max_corner[0] and b.min_corner[1] < y < b.max_corner[1]:
                raise ValueError(f"site {site.id} at {site.position} is inside a building")
    for i, a in enumerate(scenario.buildings):
        for b in scenario.buildings[i + 1 :]:
            overlap_x = min(a.max_corner[0], b.max_corner[0]) > max(a.min_corner[0], b.min_corner[0])
            overlap_y = min(a.max_corner[1], b.max_corner[1]) > max(a.min_corner[1], b.min_corner[1])
            if overlap_x and overlap_y:
                raise ValueError(f"buildings {a} and {b} overlap")
    cell_ids = [sector.cell_id for site in scenario.sites for sector in site.sectors]
    if len(cell_ids) != len(set(cell_ids)):
        raise ValueError("cell ids are not globally unique")


def enumerate_locations(scenario: Scenario) -> np.ndarray:
    """All lattice points at grid_resolution spacing strictly outside buildings.

    Returns an (N, 2) float array in row-major order (y outer, x inner),
    boundary points included.
    """
    width, height = scenario.area
    res = scenario.grid_resolution
    nx = int(math.floor(width / res + 1e-9)) + 1
    ny = int(math.floor(height / res + 1e-9)) + 1
    xs = np.arange(nx) * res
    ys = np.arange(ny) * res
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    keep = np.ones(len(points), dtype=bool)
    for b in scenario.buildings:
        keep &= ~points_in_rect(points, b.min_corner, b.max_corner)
    return points[keep]


def scenario_to_dict(scenario: Scenario) -> dict:
    """JSON-ready export of the full scenario for inspection or plotting."""
    return {
        "area": list(scenario.area),
        "carrier_frequency_ghz": scenario.carrier_frequency,
        "grid_resolution_m": scenario.grid_resolution,
        "rng_seed": scenario.rng_seed,
        "buildings": [
            {"min_corner": list(b.min_corner), "max_corner": list(b.max_corner), "height": b.height}
            for b in scenario.buildings
        ],
        "sites": [
            {
                "id": site.id,
                "position": list(site.position),
                "height": site.height,
                "sectors": [
                    {
                        "cell_id": sec.cell_id,
                        "boresight_azimuth": sec.boresight_azimuth,
                        "mechanical_downtilt": sec.mechanical_downtilt,
                        "tx_power": sec.tx_power,
                        "beams": [
                            {
                                "beam_id": beam.beam_id,
                                "steer_azimuth": beam.steer_azimuth,
                                "steer_elevation": beam.steer_elevation,
                                "azimuth_beamwidth": beam.azimuth_beamwidth,
                                "elevation_beamwidth": beam.elevation_beamwidth,
                                "element_gain": beam.element_gain,
                                "front_to_back": beam.front_to_back,
                                "array_gain": beam.array_gain,
                            }
                            for beam in sec.beams
                        ],
                    }
                    for sec in site.sectors
                ],
            }
            for site in scenario.sites
        ],
    }


def scenario_summary(scenario: Scenario) -> dict:
    n_cells = sum(len(site.sectors) for site in scenario.sites)
    n_beams = sum(len(sec.beams) for site in scenario.sites for sec in site.sectors)
    return {
        "sites": len(scenario.sites),
        "cells": n_cells,
        "beams": n_beams,
        "buildings": len(scenario.buildings),
        "area_m": list(scenario.area),
        "grid_resolution_m": scenario.grid_resolution,
    }

"""Synthetic urban canyon scenes: buildings, a drifting GPS-like sky,
ray-traced LOS/NLOS ground truth, and pseudorange / C/N0 synthesis.

A scene is a straight street flanked by two rows of box buildings. The
receiver drives the centerline, one epoch per step; the leading section of
the trajectory is training ground and the trailing contiguous section is the
evaluation ("target road") segment. Everything is reproducible bit-for-bit
from the configured seed.

Frame: x east along the street, y north across it, z up; angles in degrees,
lengths in meters. Satellite azimuth is measured clockwise from +y.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geom import (
    ConstrainedZonotope,
    ConvexPolygon,
    GeometryError,
    RegionSet,
    cz_to_polygon,
    region_subtract,
)

__all__ = [
    "LOS",
    "NLOS",
    "Building",
    "SatelliteView",
    "SatelliteTrack",
    "RawObservation",
    "EpochObservation",
    "Scene",
    "SceneConfig",
    "NoiseConfig",
    "SceneConfigError",
    "generate_scene",
    "build_epochs",
    "los_ray_test",
    "label_epoch",
    "synthesize_measurements",
    "simulate",
    "scene_to_json",
    "scene_from_json",
    "epochs_to_jsonl",
    "epochs_from_jsonl",
]

LOS = "LOS"
NLOS = "NLOS"

_SAT_ALTITUDE_M = 20_200e3  # constant-altitude sky model


class SceneConfigError(ValueError):
    """Infeasible or inconsistent scene configuration."""


@dataclass(frozen=True)
class SceneConfig:
    """Knobs for the synthetic canyon. Defaults give a 30 m street with
    20-80 m buildings and a 146-epoch target road, plus a leading training
    stretch of the same street.
    """

    seed: int = 1
    street_width: float = 30.0
    epoch_count: int = 146          # target-road (evaluation) epochs
    train_epoch_count: int = 292    # leading training epochs
    epoch_spacing: float = 2.0      # receiver step per epoch (m)
    end_margin: float = 20.0        # dead space at both street ends (m)
    building_count: int = 64        # cap on placed buildings (both sides)
    height_range: tuple[float, float] = (20.0, 80.0)
    width_range: tuple[float, float] = (15.0, 30.0)    # along-street footprint
    depth_range: tuple[float, float] = (10.0, 25.0)    # across-street footprint
    gap_range: tuple[float, float] = (25.0, 55.0)      # spacing between buildings
    antenna_height: float = 1.8
    sat_count: int = 10
    elevation_mask: float = 10.0
    elevation_range: tuple[float, float] = (15.0, 85.0)
    visible_fraction_range: tuple[float, float] = (0.30, 0.70)
    min_visible: int = 5
    bounds_pad: float = 25.0        # scene bounding box padding (m)
    aoi_mode: str = "street"        # "street" corridor or full "bounds"

    def validate(self) -> None:
        if self.street_width <= 2.0 * 1.0:
            raise SceneConfigError("street narrower than twice the lane margin")
        if self.epoch_count < 1 or self.train_epoch_count < 0:
            raise SceneConfigError("epoch counts must be positive")
        if self.epoch_spacing <= 0:
            raise SceneConfigError("epoch spacing must be positive")
        if self.sat_count < self.min_visible:
            raise SceneConfigError("satellite count below the visibility floor")
        if self.aoi_mode not in ("street", "bounds"):
            raise SceneConfigError(f"unknown aoi_mode {self.aoi_mode!r}")


@dataclass(frozen=True)
class NoiseConfig:
    """Measurement-error model. C/N0 baseline rises with elevation; NLOS
    signals pick up a uniform excess delay and a fixed C/N0 penalty.
    """

    sigma_los: float = 1.0          # LOS pseudorange noise (m, 1-sigma)
    sigma_nlos: float = 3.0         # NLOS pseudorange noise (m, 1-sigma)
    nlos_delay_range: tuple[float, float] = (5.0, 50.0)  # extra path (m)
    nlos_cn0_loss: float = 8.0      # dB-Hz penalty for NLOS
    sigma_cn0: float = 2.0          # dB-Hz
    cn0_base_offset: float = 35.0
    cn0_base_gain: float = 10.0
    cn0_clip: tuple[float, float] = (10.0, 55.0)

    def cn0_base(self, elevation_deg: float) -> float:
        return self.cn0_base_offset + self.cn0_base_gain * math.sin(math.radians(elevation_deg))

    @classmethod
    def noiseless(cls) -> "NoiseConfig":
        return cls(sigma_los=0.0, sigma_nlos=0.0, nlos_delay_range=(0.0, 0.0),
                   nlos_cn0_loss=0.0, sigma_cn0=0.0)


@dataclass(frozen=True)
class Building:
    footprint: ConvexPolygon
    height: float

    def __post_init__(self):
        if self.height <= 0:
            raise GeometryError("building height must be positive")


@dataclass(frozen=True)
class SatelliteView:
    sat_id: str
    azimuth_deg: float
    elevation_deg: float
    true_range_m: float


@dataclass(frozen=True)
class SatelliteTrack:
    """One satellite's slow drift across the sky plus its visibility window."""

    sat_id: str
    azimuth0_deg: float
    elevation0_deg: float
    azimuth_rate: float    # deg per epoch
    elevation_rate: float  # deg per epoch
    window: tuple[int, int]  # visible for epochs in [start, stop)

    def azimuth_at(self, epoch: int) -> float:
        return (self.azimuth0_deg + self.azimuth_rate * epoch) % 360.0

    def elevation_at(self, epoch: int) -> float:
        # Fold drifting elevation back below the zenith and keep it above
        # the horizon so the geometry stays physical.
        raw = self.elevation0_deg + self.elevation_rate * epoch
        return max(1.0, 90.0 - abs(90.0 - raw))


@dataclass
class RawObservation:
    sat_id: str
    pseudorange_m: float
    cn0_dbhz: float
    elevation_deg: float
    azimuth_deg: float
    truth_label: str
    sat_position: tuple[float, float, float]

    def validate(self) -> None:
        if not 10.0 <= self.cn0_dbhz <= 55.0:
            raise ValueError(f"cn0 {self.cn0_dbhz} outside [10, 55] dB-Hz")
        if self.pseudorange_m <= 0:
            raise ValueError("pseudorange must be positive")


@dataclass
class EpochObservation:
    epoch_index: int
    true_position: tuple[float, float]
    antenna_height: float
    true_clock_bias_m: float
    observations: list[RawObservation]

    @property
    def true_position_3d(self) -> tuple[float, float, float]:
        return (self.true_position[0], self.true_position[1], self.antenna_height)

    def validate(self) -> None:
        if len(self.observations) < 4:
            raise ValueError(f"epoch {self.epoch_index} has {len(self.observations)} < 4 observations")
        for obs in self.observations:
            obs.validate()


@dataclass(frozen=True)
class Scene:
    buildings: tuple[Building, ...]
    street_direction: tuple[float, float]
    trajectory: tuple[tuple[float, float], ...]
    initial_aoi: RegionSet
    rng_seed: int
    street_width: float
    street_length: float
    antenna_height: float
    bounds: tuple[float, float, float, float]     # (xmin, ymin, xmax, ymax)
    target_start: int                              # first target-road epoch index
    satellites: tuple[SatelliteTrack, ...]

    @property
    def epoch_count(self) -> int:
        return len(self.trajectory)

    @property
    def target_epoch_count(self) -> int:
        return len(self.trajectory) - self.target_start

    @property
    def cross_direction(self) -> tuple[float, float]:
        dx, dy = self.street_direction
        return (-dy, dx)


def _street_corridor(length: float, width: float) -> ConvexPolygon:
    # The corridor is kept as the planar image of a box zonotope so the rest
    # of the pipeline starts from the same set representation it refines.
    box = ConstrainedZonotope.box((length / 2.0, 0.0), (length / 2.0, width / 2.0))
    return cz_to_polygon(box)


def _place_building_row(rng: np.random.Generator, cfg: SceneConfig, length: float,
                        side: int, count: int) -> list[Building]:
    """Fill one side of the street left-to-right until length or count runs out."""
    y_edge = side * cfg.street_width / 2.0
    buildings: list[Building] = []
    x = float(rng.uniform(0.0, cfg.gap_range[0]))
    while len(buildings) < count:
        width = float(rng.uniform(*cfg.width_range))
        if x + width > length:
            break
        depth = float(rng.uniform(*cfg.depth_range))
        height = float(rng.uniform(*cfg.height_range))
        y0, y1 = (y_edge, y_edge + side * depth)
        lo, hi = (y0, y1) if y0 < y1 else (y1, y0)
        footprint = ConvexPolygon.rectangle(x, lo, x + width, hi)
        buildings.append(Building(footprint=footprint, height=height))
        x += width + float(rng.uniform(*cfg.gap_range))
    return buildings


def _draw_sky(rng: np.random.Generator, cfg: SceneConfig, total_epochs: int) -> list[SatelliteTrack]:
    """Slowly drifting constellation with stratified, high-skewed elevations.

    Elevation and azimuth are drawn from jittered strata (pairing permuted per
    seed) so every seed sees a comparable low/high mix instead of the huge
    across-seed variance a plain 10-draw sample would give. The sqrt skew
    favors higher elevations, which is what a receiver that actually tracks
    signals in a canyon tends to retain.
    """
    el_lo, el_hi = cfg.elevation_range
    fr_lo, fr_hi = cfg.visible_fraction_range
    n = cfg.sat_count
    el_perm = rng.permutation(n)
    fr_perm = rng.permutation(n)
    az_offset = float(rng.uniform(0.0, 360.0))
    tracks: list[SatelliteTrack] = []
    for k in range(n):
        u_fr = (float(fr_perm[k]) + float(rng.uniform())) / n
        frac = fr_lo + (fr_hi - fr_lo) * u_fr
        span = max(1, int(round(frac * total_epochs)))
        start = int(rng.integers(0, max(1, total_epochs - span + 1)))
        u_el = (float(el_perm[k]) + float(rng.uniform())) / n
        u_az = (float(k) + float(rng.uniform())) / n
        tracks.append(SatelliteTrack(
            sat_id=f"G{k + 1:02d}",
            azimuth0_deg=(az_offset + 360.0 * u_az) % 360.0,
            elevation0_deg=el_lo + (el_hi - el_lo) * math.sqrt(u_el),
            azimuth_rate=float(rng.uniform(-0.05, 0.05)),
            elevation_rate=float(rng.uniform(-0.03, 0.03)),
            window=(start, start + span),
        ))
    return tracks


def _visible_sats(tracks: Sequence[SatelliteTrack], cfg: SceneConfig, epoch: int) -> list[SatelliteTrack]:
    vis = [t for t in tracks
           if t.window[0] <= epoch < t.window[1] and t.elevation_at(epoch) > cfg.elevation_mask]
    if len(vis) < cfg.min_visible:
        # Deterministic fix-up: pull in the highest hidden satellites so every
        # epoch stays solvable.
        hidden = sorted((t for t in tracks if t not in vis),
                        key=lambda t: (-t.elevation_at(epoch), t.sat_id))
        vis.extend(hidden[: cfg.min_visible - len(vis)])
    return sorted(vis, key=lambda t: t.sat_id)


def generate_scene(config: SceneConfig) -> Scene:
    """Build a reproducible scene: same config and seed, identical scene."""
    config.validate()
    seq = np.random.SeedSequence([int(config.seed), 0xC17])
    rng_layout, rng_sky = (np.random.default_rng(s) for s in seq.spawn(2))

    total = config.train_epoch_count + config.epoch_count
    length = 2.0 * config.end_margin + config.epoch_spacing * max(total - 1, 0)

    per_side = config.building_count // 2
    south = _place_building_row(rng_layout, config, length, -1, per_side)
    north = _place_building_row(rng_layout, config, length, +1, config.building_count - per_side)
    buildings = tuple(south + north)

    trajectory = tuple(
        (config.end_margin + i * config.epoch_spacing, 0.0) for i in range(total)
    )

    depth_max = max([b.footprint.bbox[3] - b.footprint.bbox[1] for b in buildings], default=0.0)
    pad = config.bounds_pad
    bounds = (-pad, -(config.street_width / 2.0 + depth_max + pad),
              length + pad, config.street_width / 2.0 + depth_max + pad)

    if config.aoi_mode == "bounds":
        aoi = RegionSet.from_polygon(ConvexPolygon.rectangle(*bounds))
    else:
        aoi = RegionSet.from_polygon(_street_corridor(length, config.street_width))
    aoi = region_subtract(aoi, RegionSet(b.footprint for b in buildings))

    for pos in trajectory:
        if not aoi.contains(pos):
            raise SceneConfigError("trajectory point fell outside the initial AOI")

    tracks = tuple(_draw_sky(rng_sky, config, total))
    return Scene(
        buildings=buildings,
        street_direction=(1.0, 0.0),
        trajectory=trajectory,
        initial_aoi=aoi,
        rng_seed=config.seed,
        street_width=config.street_width,
        street_length=length,
        antenna_height=config.antenna_height,
        bounds=bounds,
        target_start=config.train_epoch_count,
        satellites=tracks,
    )


def _direction_to(azimuth_deg: float, elevation_deg: float) -> tuple[float, float, float]:
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return (math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el))


def los_ray_test(building: Building, receiver: Sequence[float], direction: Sequence[float]) -> bool:
    """True iff the upward ray from ``receiver`` hits the building's prism.

    Slab test on height plus a 2D interval clip of the ray against the
    convex footprint; closed boundaries, so a grazing ray counts as blocked.
    """
    dx, dy, dz = (float(v) for v in direction)
    if dz <= 0.0:
        raise GeometryError("ray must point above the horizon (direction z > 0)")
    px, py, pz = (float(v) for v in receiver)
    t_hi = (building.height - pz) / dz
    if t_hi < 0.0:
        return False
    t_lo = max(0.0, -pz / dz)
    for a, b, c in building.footprint.halfplanes():
        num = c - a * px - b * py
        den = a * dx + b * dy
        if abs(den) <= 1e-15:
            if num < -1e-12:
                return False
            continue
        t = num / den
        if den > 0.0:
            t_hi = min(t_hi, t)
        else:
            t_lo = max(t_lo, t)
        if t_lo > t_hi + 1e-12:
            return False
    return t_lo <= t_hi + 1e-12


def _blocked_by_any(scene: Scene, receiver: tuple[float, float, float],
                    azimuth_deg: float, elevation_deg: float) -> bool:
    dx, dy, dz = _direction_to(azimuth_deg, elevation_deg)
    px, py, _ = receiver
    reach = (max(b.height for b in scene.buildings) - receiver[2]) / dz if scene.buildings else 0.0
    reach = max(reach, 0.0)
    qx, qy = px + dx * reach, py + dy * reach
    seg = (min(px, qx), min(py, qy), max(px, qx), max(py, qy))
    for b in scene.buildings:
        bb = b.footprint.bbox
        if seg[2] < bb[0] or bb[2] < seg[0] or seg[3] < bb[1] or bb[3] < seg[1]:
            continue
        if los_ray_test(b, receiver, (dx, dy, dz)):
            return True
    return False


def build_epochs(scene: Scene, config: SceneConfig) -> list[EpochObservation]:
    """Raw epochs with exact geometry: ranges and satellite positions, no
    noise and no labels yet (labels default LOS until `label_epoch` runs).
    """
    rng_clock = np.random.default_rng(np.random.SeedSequence([int(scene.rng_seed), 0xB1A5]))
    bias = float(rng_clock.uniform(-30.0, 30.0))
    epochs: list[EpochObservation] = []
    for i, (x, y) in enumerate(scene.trajectory):
        bias += float(rng_clock.normal(0.0, 0.3))
        rx = (x, y, scene.antenna_height)
        observations: list[RawObservation] = []
        for track in _visible_sats(scene.satellites, config, i):
            el = track.elevation_at(i)
            az = track.azimuth_at(i)
            rng_m = _SAT_ALTITUDE_M / math.sin(math.radians(el))
            d = _direction_to(az, el)
            sat_pos = (rx[0] + rng_m * d[0], rx[1] + rng_m * d[1], rx[2] + rng_m * d[2])
            observations.append(RawObservation(
                sat_id=track.sat_id,
                pseudorange_m=rng_m,  # placeholder until synthesis
                cn0_dbhz=40.0,
                elevation_deg=el,
                azimuth_deg=az,
                truth_label=LOS,
                sat_position=sat_pos,
            ))
        epochs.append(EpochObservation(
            epoch_index=i,
            true_position=(x, y),
            antenna_height=scene.antenna_height,
            true_clock_bias_m=bias,
            observations=observations,
        ))
    return epochs


def label_epoch(scene: Scene, epoch: EpochObservation) -> EpochObservation:
    """Set each observation's truth label by ray tracing against all buildings."""
    rx = epoch.true_position_3d
    for obs in epoch.observations:
        blocked = _blocked_by_any(scene, rx, obs.azimuth_deg, obs.elevation_deg)
        obs.truth_label = NLOS if blocked else LOS
    return epoch


def synthesize_measurements(scene: Scene, epoch: EpochObservation,
                            noise: NoiseConfig) -> EpochObservation:
    """Fill pseudorange and C/N0 from truth labels and the noise model."""
    rng = np.random.default_rng(
        np.random.SeedSequence([int(scene.rng_seed), 0x5E5, int(epoch.epoch_index)]))
    rx = np.asarray(epoch.true_position_3d)
    for obs in epoch.observations:
        true_range = float(np.linalg.norm(np.asarray(obs.sat_position) - rx))
        rho = true_range + epoch.true_clock_bias_m
        cn0 = noise.cn0_base(obs.elevation_deg)
        if obs.truth_label == NLOS:
            rho += float(rng.uniform(*noise.nlos_delay_range))
            rho += float(rng.normal(0.0, noise.sigma_nlos)) if noise.sigma_nlos > 0 else 0.0
            cn0 -= noise.nlos_cn0_loss
        else:
            rho += float(rng.normal(0.0, noise.sigma_los)) if noise.sigma_los > 0 else 0.0
        if noise.sigma_cn0 > 0:
            cn0 += float(rng.normal(0.0, noise.sigma_cn0))
        obs.pseudorange_m = rho
        obs.cn0_dbhz = float(min(max(cn0, noise.cn0_clip[0]), noise.cn0_clip[1]))
    return epoch


def simulate(config: SceneConfig, noise: NoiseConfig | None = None) -> tuple[Scene, list[EpochObservation]]:
    """Full deterministic generation: scene, labeled epochs, measurements."""
    noise = NoiseConfig() if noise is None else noise
    scene = generate_scene(config)
    epochs = build_epochs(scene, config)
    for epoch in epochs:
        label_epoch(scene, epoch)
        synthesize_measurements(scene, epoch, noise)
        epoch.validate()
    return scene, epochs


# --------------------------------------------------------------------------
# Serialization (schemas documented in docs/formats.md)

def scene_to_json(scene: Scene) -> str:
    payload = {
        "format_version": 1,
        "rng_seed": scene.rng_seed,
        "street": {
            "direction": list(scene.street_direction),
            "width_m": scene.street_width,
            "length_m": scene.street_length,
        },
        "antenna_height_m": scene.antenna_height,
        "bounds": list(scene.bounds),
        "target_start": scene.target_start,
        "buildings": [
            {"footprint": [list(v) for v in b.footprint.vertices], "height_m": b.height}
            for b in scene.buildings
        ],
        "trajectory": [list(p) for p in scene.trajectory],
        "initial_aoi": [[list(v) for v in part.vertices] for part in scene.initial_aoi.parts],
        "satellites": [
            {
                "sat_id": t.sat_id,
                "azimuth0_deg": t.azimuth0_deg,
                "elevation0_deg": t.elevation0_deg,
                "azimuth_rate_deg_per_epoch": t.azimuth_rate,
                "elevation_rate_deg_per_epoch": t.elevation_rate,
                "window": list(t.window),
            }
            for t in scene.satellites
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def scene_from_json(text: str) -> Scene:
    data = json.loads(text)
    buildings = tuple(
        Building(ConvexPolygon(b["footprint"]), float(b["height_m"]))
        for b in data["buildings"]
    )
    tracks = tuple(
        SatelliteTrack(
            sat_id=t["sat_id"],
            azimuth0_deg=float(t["azimuth0_deg"]),
            elevation0_deg=float(t["elevation0_deg"]),
            azimuth_rate=float(t["azimuth_rate_deg_per_epoch"]),
            elevation_rate=float(t["elevation_rate_deg_per_epoch"]),
            window=(int(t["window"][0]), int(t["window"][1])),
        )
        for t in data["satellites"]
    )
    return Scene(
        buildings=buildings,
        street_direction=tuple(data["street"]["direction"]),
        trajectory=tuple((float(p[0]), float(p[1])) for p in data["trajectory"]),
        initial_aoi=RegionSet(ConvexPolygon(part) for part in data["initial_aoi"]),
        rng_seed=int(data["rng_seed"]),
        street_width=float(data["street"]["width_m"]),
        street_length=float(data["street"]["length_m"]),
        antenna_height=float(data["antenna_height_m"]),
        bounds=tuple(float(v) for v in data["bounds"]),
        target_start=int(data["target_start"]),
        satellites=tracks,
    )


def epochs_to_jsonl(epochs: Iterable[EpochObservation]) -> str:
    lines = []
    for e in epochs:
        lines.append(json.dumps({
            "epoch_index": e.epoch_index,
            "true_position": list(e.true_position),
            "antenna_height_m": e.antenna_height,
            "true_clock_bias_m": e.true_clock_bias_m,
            "observations": [
                {
                    "sat_id": o.sat_id,
                    "pseudorange_m": o.pseudorange_m,
                    "cn0_dbhz": o.cn0_dbhz,
                    "elevation_deg": o.elevation_deg,
                    "azimuth_deg": o.azimuth_deg,
                    "truth_label": o.truth_label,
                    "sat_position": list(o.sat_position),
                }
                for o in e.observations
            ],
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


def epochs_from_jsonl(text: str) -> list[EpochObservation]:
    epochs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        epochs.append(EpochObservation(
            epoch_index=int(d["epoch_index"]),
            true_position=(float(d["true_position"][0]), float(d["true_position"][1])),
            antenna_height=float(d["antenna_height_m"]),
            true_clock_bias_m=float(d["true_clock_bias_m"]),
            observations=[
                RawObservation(
                    sat_id=o["sat_id"],
                    pseudorange_m=float(o["pseudorange_m"]),
                    cn0_dbhz=float(o["cn0_dbhz"]),
                    elevation_deg=float(o["elevation_deg"]),
                    azimuth_deg=float(o["azimuth_deg"]),
                    truth_label=o["truth_label"],
                    sat_position=tuple(float(v) for v in o["sat_position"]),
                )
                for o in d["observations"]
            ],
        ))
    return epochs

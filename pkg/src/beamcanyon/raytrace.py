"""Image-method multipath synthesis between the RSU and a receiving vehicle.

Candidate paths are the direct line of sight plus every specular bounce
sequence off the two canyon wall planes and the ground plane, up to a
configurable bounce count. Each candidate is validated for geometric
feasibility and blockage before it becomes a ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scenario import Box, Scenario, Scene, Vec3, Vehicle, vehicle_bounding_box

SPEED_OF_LIGHT = 299792458.0

_FACE_TOL = 1e-9  # tolerance for "point lies on a reflector face" checks


@dataclass(frozen=True)
class Ray:
    """One propagation path: complex amplitude, delay, and its four angles.

    Azimuths lie in (-pi, pi] measured from +x; elevations in [0, pi] measured
    from the +z zenith. Departure angles point from the transmitter along the
    first segment, arrival angles point from the receiver back along the last.
    ``interactions`` is "LOS" for the direct path, otherwise hyphen-joined
    bounce tokens: "R" for a wall bounce, "RG" for a ground bounce.
    """

    gain: complex
    delay: float
    dep_azimuth: float
    dep_elevation: float
    arr_azimuth: float
    arr_elevation: float
    interactions: str


@dataclass(frozen=True)
class PairRecord:
    """All rays kept for one transmitter/receiver pair, strongest first."""

    tx_id: int
    rx_id: int
    rays: tuple[Ray, ...]
    mean_toa: float | None  # power-weighted mean delay, None when no path exists
    p_tx_dbm: float
    p_rx_dbm: float | None


@dataclass(frozen=True)
class TraceConfig:
    carrier_hz: float = 6.0e10
    max_reflections: int = 2
    max_rays: int = 25
    wall_reflection: complex = -0.5 + 0.0j
    ground_reflection: complex = -0.6 + 0.0j
    tx_power_dbm: float = 0.0

    def __post_init__(self) -> None:
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.max_rays < 1:
            raise ValueError("max_rays must be at least 1")
        if self.max_reflections < 0:
            raise ValueError("max_reflections must be non-negative")
        if abs(self.wall_reflection) > 1 or abs(self.ground_reflection) > 1:
            raise ValueError("reflection coefficient magnitudes must not exceed 1")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


class LosStatus(str, Enum):
    LOS = "LOS"
    NLOS = "NLOS"
    NO_PATH = "NoPath"


@dataclass(frozen=True)
class ReflectorPlane:
    """Axis-aligned reflector: the plane ``coordinate[axis] == offset``."""

    axis: int  # 0 = x, 1 = y, 2 = z
    offset: float
    kind: str  # "wall" or "ground"


def segment_intersects_box(p0, p1, box: Box) -> bool:
    """True iff the open segment passes through the box interior.

    Touching a face, edge or corner does not count: only an overlap of
    positive length with the strict interior intersects.
    """
    a = p0.to_array() if isinstance(p0, Vec3) else np.asarray(p0, float)
    b = p1.to_array() if isinstance(p1, Vec3) else np.asarray(p1, float)
    lo = box.min.to_array()[None, :]
    hi = box.max.to_array()[None, :]
    return bool(_segments_hit_boxes(a, b, lo, hi)[0])


def _segments_hit_boxes(p0: np.ndarray, p1: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Strict-interior slab test of one segment against n boxes (lo/hi: (n, 3))."""
    d = p1 - p0
    n = lo.shape[0]
    enter = np.zeros(n)
    leave = np.ones(n)
    ok = np.ones(n, dtype=bool)
    for ax in range(3):
        if d[ax] == 0.0:
            ok &= (p0[ax] > lo[:, ax]) & (p0[ax] < hi[:, ax])
        else:
            t1 = (lo[:, ax] - p0[ax]) / d[ax]
            t2 = (hi[:, ax] - p0[ax]) / d[ax]
            enter = np.maximum(enter, np.minimum(t1, t2))
            leave = np.minimum(leave, np.maximum(t1, t2))
    return ok & (leave > enter)


def free_space_gain(distance: float, wavelength: float) -> complex:
    """Friis amplitude with propagation phase: (lambda / 4 pi d) e^{-j 2 pi d / lambda}."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    magnitude = wavelength / (4.0 * math.pi * distance)
    phase = -2.0 * math.pi * distance / wavelength
    return magnitude * complex(math.cos(phase), math.sin(phase))


def _mirror(point: np.ndarray, plane: ReflectorPlane) -> np.ndarray:
    out = point.copy()
    out[plane.axis] = 2.0 * plane.offset - out[plane.axis]
    return out


def specular_paths(
    tx: np.ndarray,
    rx: np.ndarray,
    planes: tuple[ReflectorPlane, ...],
    max_reflections: int,
) -> list[tuple[np.ndarray, tuple[ReflectorPlane, ...]]]:
    """Enumerate geometrically valid mirror paths from tx to rx.

    Returns (points, bounce_planes) per candidate, where points has shape
    (bounces + 2, 3) including both endpoints. The direct path comes first.
    Candidates whose bounce points fall outside a reflecting segment
    (intersection parameter not strictly inside) are dropped; blockage and
    reflector-extent checks are the caller's job.
    """
    candidates: list[tuple[np.ndarray, tuple[ReflectorPlane, ...]]] = [
        (np.stack([tx, rx]), ())
    ]
    sequences: list[tuple[ReflectorPlane, ...]] = [()]
    for _ in range(max_reflections):
        # extend by one bounce, never repeating the plane just left
        sequences = [
            seq + (p,) for seq in sequences for p in planes if not seq or seq[-1] != p
        ]
        for seq in sequences:
            points = _bounce_points(tx, rx, seq)
            if points is not None:
                candidates.append((points, seq))
    return candidates


def _bounce_points(
    tx: np.ndarray, rx: np.ndarray, seq: tuple[ReflectorPlane, ...]
) -> np.ndarray | None:
    images = [tx]
    for plane in seq:
        images.append(_mirror(images[-1], plane))
    points = [rx]
    current = rx
    for j in range(len(seq), 0, -1):
        target = images[j]
        plane = seq[j - 1]
        denom = target[plane.axis] - current[plane.axis]
        if denom == 0.0:
            return None
        t = (plane.offset - current[plane.axis]) / denom
        if not 0.0 < t < 1.0:
            return None
        current = current + t * (target - current)
        points.append(current)
    points.append(tx)
    return np.stack(points[::-1])


def _azimuth_elevation(direction: np.ndarray) -> tuple[float, float]:
    norm = float(np.linalg.norm(direction))
    u = direction / norm
    azimuth = math.atan2(u[1], u[0])
    if azimuth <= -math.pi:
        azimuth += 2.0 * math.pi
    elevation = math.acos(max(-1.0, min(1.0, float(u[2]))))
    return azimuth, elevation


def _wall_planes(scenario: Scenario) -> list[ReflectorPlane]:
    """Inner building faces, i.e. the faces adjacent to the street."""
    center = (scenario.v2i_area.ymin + scenario.v2i_area.ymax) / 2.0
    offsets: list[float] = []
    for box in scenario.buildings:
        face = box.max.y if box.max.y <= center else box.min.y
        if not any(abs(face - o) < _FACE_TOL for o in offsets):
            offsets.append(face)
    return [ReflectorPlane(1, o, "wall") for o in sorted(offsets)]


def _on_wall_face(point: np.ndarray, plane: ReflectorPlane, buildings: tuple[Box, ...]) -> bool:
    for box in buildings:
        if abs(box.min.y - plane.offset) > _FACE_TOL and abs(box.max.y - plane.offset) > _FACE_TOL:
            continue
        if (
            box.min.x - _FACE_TOL <= point[0] <= box.max.x + _FACE_TOL
            and box.min.z - _FACE_TOL <= point[2] <= box.max.z + _FACE_TOL
        ):
            return True
    return False


def trace_paths(scenario: Scenario, scene: Scene, rx: Vehicle, cfg: TraceConfig) -> PairRecord:
    """Synthesize the multipath set from the RSU to a receiving vehicle's roof.

    Every sub-segment of a candidate path must clear all building boxes and
    all vehicle boxes except the receiver's own; full blockage yields a
    record with an empty ray tuple rather than an error.
    """
    if rx.receiver_index is None:
        raise ValueError("rx vehicle carries no receiver_index")

    tx = scenario.rsu_position.to_array()
    rx_point = np.array(
        [rx.position.x, rx.position.y, scenario.ground_z + rx.type.height], dtype=float
    )

    planes = tuple(_wall_planes(scenario) + [ReflectorPlane(2, scenario.ground_z, "ground")])

    blockers = list(scenario.buildings) + [
        vehicle_bounding_box(v, scenario.ground_z)
        for v in scene.vehicles
        if v.id != rx.id
    ]
    lo = np.array([[b.min.x, b.min.y, b.min.z] for b in blockers])
    hi = np.array([[b.max.x, b.max.y, b.max.z] for b in blockers])

    rays: list[Ray] = []
    for points, seq in specular_paths(tx, rx_point, planes, cfg.max_reflections):
        valid = True
        for plane, bounce in zip(seq, points[1:-1]):
            if plane.kind == "wall":
                valid = _on_wall_face(bounce, plane, scenario.buildings)
            else:
                valid = scenario.rt_area.contains(float(bounce[0]), float(bounce[1]))
            if not valid:
                break
        if not valid:
            continue
        if any(
            bool(_segments_hit_boxes(points[i], points[i + 1], lo, hi).any())
            for i in range(len(points) - 1)
        ):
            continue

        lengths = np.linalg.norm(np.diff(points, axis=0), axis=1)
        total = float(lengths.sum())
        gain = free_space_gain(total, cfg.wavelength)
        for plane in seq:
            gain *= cfg.wall_reflection if plane.kind == "wall" else cfg.ground_reflection
        dep_az, dep_el = _azimuth_elevation(points[1] - points[0])
        arr_az, arr_el = _azimuth_elevation(points[-2] - points[-1])
        interactions = (
            "LOS"
            if not seq
            else "-".join("R" if p.kind == "wall" else "RG" for p in seq)
        )
        rays.append(
            Ray(
                gain=gain,
                delay=total / SPEED_OF_LIGHT,
                dep_azimuth=dep_az,
                dep_elevation=dep_el,
                arr_azimuth=arr_az,
                arr_elevation=arr_el,
                interactions=interactions,
            )
        )

    rays.sort(key=lambda r: (-abs(r.gain), r.delay))
    rays = rays[: cfg.max_rays]

    if rays:
        powers = np.array([abs(r.gain) ** 2 for r in rays])
        delays = np.array([r.delay for r in rays])
        mean_toa = float((powers * delays).sum() / powers.sum())
        p_rx = cfg.tx_power_dbm + 10.0 * math.log10(float(powers.sum()))
    else:
        mean_toa = None
        p_rx = None
    return PairRecord(
        tx_id=0,
        rx_id=rx.receiver_index,
        rays=tuple(rays),
        mean_toa=mean_toa,
        p_tx_dbm=cfg.tx_power_dbm,
        p_rx_dbm=p_rx,
    )


def classify_los(record: PairRecord) -> LosStatus:
    """LOS if any ray is the direct path, NoPath if the pair has no rays at all."""
    if not record.rays:
        return LosStatus.NO_PATH
    if any(r.interactions == "LOS" for r in record.rays):
        return LosStatus.LOS
    return LosStatus.NLOS

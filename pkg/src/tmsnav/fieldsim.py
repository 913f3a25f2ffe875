"""Quasi-static magnetic model of a figure-8 coil and inductive sensors.

The coil is discretized into straight wire segments per wing and fields
come from the Biot-Savart line sum. Sensor flux is a polar quadrature of
B over the winding disc, and induced EMF follows from the flux
coefficient times dI/dt of a one-cycle biphasic pulse. Everything is
linear in current and turns by construction; geometry is in millimeters,
fields in tesla.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import SingularEvaluation
from .transforms import RigidTransform

MU0 = 4e-7 * np.pi  # T*m/A
WIRE_CLEARANCE_MM = 0.1
MIN_SEGMENTS_PER_LOOP = 64


@dataclass(frozen=True)
class CoilModel:
    loop_radius_mm: float = 35.0
    loop_turns: int = 9  # per wing
    wing_center_offset_mm: float = 35.0  # wings at +/- offset along coil x
    segments_per_loop: int = 256
    peak_current_a: float = 5000.0
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    # winding sense per wing; two opposed wings make the figure-8
    wing_senses: tuple[float, ...] = (1.0, -1.0)

    def __post_init__(self):
        if self.segments_per_loop < MIN_SEGMENTS_PER_LOOP:
            raise ValueError(f"segments_per_loop must be >= {MIN_SEGMENTS_PER_LOOP}")
        if not self.wing_senses:
            raise ValueError("at least one wing is required")

    @classmethod
    def single_loop(cls, loop_radius_mm: float = 35.0, loop_turns: int = 1,
                    segments_per_loop: int = 256, peak_current_a: float = 5000.0,
                    pose: RigidTransform | None = None) -> "CoilModel":
        """One centered wing; the axisymmetric reference configuration."""
        return cls(
            loop_radius_mm=loop_radius_mm,
            loop_turns=loop_turns,
            wing_center_offset_mm=0.0,
            segments_per_loop=segments_per_loop,
            peak_current_a=peak_current_a,
            pose=pose if pose is not None else RigidTransform.identity(),
            wing_senses=(1.0,),
        )

    def wing_offsets(self) -> tuple[float, ...]:
        # single-wing models sit on the pose origin
        if len(self.wing_senses) == 1:
            return (0.0,)
        return (-self.wing_center_offset_mm, self.wing_center_offset_mm)

    def wing(self, index: int) -> "CoilModel":
        """Sub-model containing a single wing, in place."""
        offset = self.wing_offsets()[index]
        shifted = self.pose.apply(np.array([offset, 0.0, 0.0]))
        centered = RigidTransform(self.pose.rotation, shifted)
        return replace(self, wing_center_offset_mm=0.0, pose=centered,
                       wing_senses=(self.wing_senses[index],))

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment midpoints and direction vectors (dl), world frame, mm.

        Each wing is a closed regular polygon in the coil's z=0 plane;
        a negative sense reverses the traversal direction.
        """
        mids = []
        dls = []
        theta = np.linspace(0.0, 2.0 * np.pi, self.segments_per_loop + 1)
        ring = np.stack(
            [self.loop_radius_mm * np.cos(theta),
             self.loop_radius_mm * np.sin(theta),
             np.zeros_like(theta)],
            axis=1,
        )
        for offset, sense in zip(self.wing_offsets(), self.wing_senses):
            pts = ring + np.array([offset, 0.0, 0.0])
            if sense < 0:
                pts = pts[::-1]
            world = self.pose.apply(pts)
            mids.append(0.5 * (world[:-1] + world[1:]))
            dls.append(world[1:] - world[:-1])
        return np.concatenate(mids), np.concatenate(dls)

    def to_dict(self) -> dict:
        return {
            "loop_radius_mm": self.loop_radius_mm,
            "loop_turns": self.loop_turns,
            "wing_center_offset_mm": self.wing_center_offset_mm,
            "segments_per_loop": self.segments_per_loop,
            "peak_current_a": self.peak_current_a,
            "matrix": [float(x) for x in self.pose.to_matrix().reshape(16)],
            "wing_senses": list(self.wing_senses),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoilModel":
        return cls(
            loop_radius_mm=float(d.get("loop_radius_mm", 35.0)),
            loop_turns=int(d.get("loop_turns", 9)),
            wing_center_offset_mm=float(d.get("wing_center_offset_mm", 35.0)),
            segments_per_loop=int(d.get("segments_per_loop", 256)),
            peak_current_a=float(d.get("peak_current_a", 5000.0)),
            pose=RigidTransform.from_matrix(
                np.asarray(d["matrix"], dtype=float).reshape(4, 4)
            ) if "matrix" in d else RigidTransform.identity(),
            wing_senses=tuple(d.get("wing_senses", (1.0, -1.0))),
        )


class SensorKind(str, Enum):
    SENSOR_2D = "sensor_2d"
    SENSOR_3D = "sensor_3d"


@dataclass(frozen=True)
class SensorModel:
    kind: SensorKind = SensorKind.SENSOR_3D
    loop_radius_mm: float = 7.5
    turns_per_axis: int = 10
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    @property
    def n_axes(self) -> int:
        return 1 if self.kind is SensorKind.SENSOR_2D else 3

    def axis_direction(self, axis: int) -> np.ndarray:
        """Unit normal of the winding for one axis (0 = primary = local z)."""
        if not (0 <= axis < self.n_axes):
            raise ValueError(f"axis {axis} out of range for {self.kind.value}")
        local = ((2, 0, 1))[axis]  # primary z, then the two orthogonal windings
        return self.pose.rotation[:, local]

    def displaced(self, offset_vector) -> "SensorModel":
        moved = RigidTransform(
            self.pose.rotation, self.pose.translation + np.asarray(offset_vector, float)
        )
        return replace(self, pose=moved)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "loop_radius_mm": self.loop_radius_mm,
            "turns_per_axis": self.turns_per_axis,
            "matrix": [float(x) for x in self.pose.to_matrix().reshape(16)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorModel":
        return cls(
            kind=SensorKind(d.get("kind", "sensor_3d")),
            loop_radius_mm=float(d.get("loop_radius_mm", 7.5)),
            turns_per_axis=int(d.get("turns_per_axis", 10)),
            pose=RigidTransform.from_matrix(
                np.asarray(d["matrix"], dtype=float).reshape(4, 4)
            ) if "matrix" in d else RigidTransform.identity(),
        )


@dataclass(frozen=True)
class PulseTrain:
    pulses_per_train: int = 25
    train_rate_hz: float = 5.0
    intensity_fraction: float = 0.30  # fraction of maximum system output
    trains: int = 20
    inter_train_wait_s: float = 10.0
    pulse_frequency_hz: float = 4000.0  # biphasic carrier

    def __post_init__(self):
        for name in ("pulses_per_train", "train_rate_hz", "trains",
                     "inter_train_wait_s", "pulse_frequency_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.intensity_fraction < 0:
            raise ValueError("intensity_fraction must be >= 0")

    @property
    def train_duration_s(self) -> float:
        return self.pulses_per_train / self.train_rate_hz

    def to_dict(self) -> dict:
        return {
            "pulses_per_train": self.pulses_per_train,
            "train_rate_hz": self.train_rate_hz,
            "intensity_fraction": self.intensity_fraction,
            "trains": self.trains,
            "inter_train_wait_s": self.inter_train_wait_s,
            "pulse_frequency_hz": self.pulse_frequency_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseTrain":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


def b_field(coil: CoilModel, points, current_a: float | None = None) -> np.ndarray:
    """Magnetic field at one point (3,) or a batch (N, 3), in tesla.

    Discretized Biot-Savart line sum over both wings at the given current
    (peak current by default). Points closer than 0.1 mm to any wire
    segment raise SingularEvaluation.
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    current = coil.peak_current_a if current_a is None else current_a
    mids, dls = coil.segments()
    # clearance check against the actual segments
    w = p[:, None, :] - (mids - 0.5 * dls)[None, :, :]
    seg_len2 = (dls * dls).sum(-1)
    t = np.clip((w * dls[None, :, :]).sum(-1) / seg_len2, 0.0, 1.0)
    nearest = w - t[:, :, None] * dls[None, :, :]
    if ((nearest * nearest).sum(-1) < WIRE_CLEARANCE_MM**2).any():
        raise SingularEvaluation("evaluation point within 0.1 mm of a wire segment")
    r = (p[:, None, :] - mids[None, :, :]) * 1e-3  # meters
    norm3 = ((r * r).sum(-1)) ** 1.5
    contrib = np.cross(np.broadcast_to(dls[None, :, :] * 1e-3, r.shape), r)
    out = MU0 * current * coil.loop_turns / (4.0 * np.pi) * (
        contrib / norm3[:, :, None]
    ).sum(axis=1)
    return out[0] if single else out


def _disc_nodes(center, normal_u, normal_v, radius_mm, n_radial, n_angular):
    """Equal-area polar quadrature nodes and the common weight (mm^2)."""
    rj = radius_mm * np.sqrt((np.arange(n_radial) + 0.5) / n_radial)
    tk = 2.0 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    rr, tt = np.meshgrid(rj, tk, indexing="ij")
    flat_r = rr.ravel()[:, None]
    flat_t = tt.ravel()[:, None]
    pts = center + flat_r * (np.cos(flat_t) * normal_u + np.sin(flat_t) * normal_v)
    weight = np.pi * radius_mm**2 / (n_radial * n_angular)
    return pts, weight


def flux_coefficient(coil: CoilModel, sensor: SensorModel, axis: int,
                     n_radial: int = 8, n_angular: int = 16) -> float:
    """Webers per ampere through one sensor winding (turns included)."""
    n = sensor.axis_direction(axis)
    # the other two sensor axes span the winding disc
    cols = sensor.pose.rotation
    local = ((2, 0, 1))[axis]
    u = cols[:, (local + 1) % 3]
    v = cols[:, (local + 2) % 3]
    pts, weight_mm2 = _disc_nodes(
        sensor.pose.translation, u, v, sensor.loop_radius_mm, n_radial, n_angular
    )
    b = b_field(coil, pts, current_a=1.0)
    flux_wb = (b @ n).sum() * weight_mm2 * 1e-6  # mm^2 -> m^2
    return float(flux_wb * sensor.turns_per_axis)


@dataclass(frozen=True)
class VoltageTrace:
    peak_to_peak_v: np.ndarray  # per axis
    times_s: np.ndarray
    emf_v: np.ndarray  # (axes, samples)

    def __post_init__(self):
        object.__setattr__(self, "peak_to_peak_v",
                           np.asarray(self.peak_to_peak_v, dtype=float))
        object.__setattr__(self, "times_s", np.asarray(self.times_s, dtype=float))
        object.__setattr__(self, "emf_v", np.asarray(self.emf_v, dtype=float))


def induced_voltage(coil: CoilModel, sensor: SensorModel, train: PulseTrain,
                    samples_per_cycle: int = 64,
                    n_radial: int = 8, n_angular: int = 16) -> VoltageTrace:
    """Per-axis EMF for one biphasic pulse cycle.

    I(t) = intensity * peak * sin(2 pi f t) over one cycle; EMF is
    -k dI/dt per axis, so the analytic peak-to-peak is
    2 * |k| * intensity * peak * 2 pi f.
    """
    omega = 2.0 * np.pi * train.pulse_frequency_hz
    amp = train.intensity_fraction * coil.peak_current_a
    ks = np.array([
        flux_coefficient(coil, sensor, axis, n_radial, n_angular)
        for axis in range(sensor.n_axes)
    ])
    times = np.arange(samples_per_cycle + 1) / (
        samples_per_cycle * train.pulse_frequency_hz
    )
    emf = -ks[:, None] * amp * omega * np.cos(omega * times)[None, :]
    return VoltageTrace(2.0 * np.abs(ks) * amp * omega, times, emf)


def displacement_sweep(coil: CoilModel, sensor: SensorModel, direction,
                       offsets_mm, train: PulseTrain | None = None,
                       n_radial: int = 8, n_angular: int = 16) -> dict:
    """Per-axis peak-to-peak voltage at each lateral sensor offset.

    Returns a CSV-ready table: one row per offset with primary and the
    two secondary axes (zeros for axes a 2D sensor does not have).
    """
    d = np.asarray(direction, dtype=float).reshape(3)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("sweep direction must be nonzero")
    d = d / norm
    offs = [float(x) for x in offsets_mm]
    if offs[0] != 0.0 or any(b <= a for a, b in zip(offs, offs[1:])):
        raise ValueError("offsets must be sorted ascending starting at 0")
    train = train or PulseTrain()
    rows = []
    for off in offs:
        trace = induced_voltage(
            coil, sensor.displaced(off * d), train,
            n_radial=n_radial, n_angular=n_angular,
        )
        vpp = list(trace.peak_to_peak_v) + [0.0, 0.0]
        rows.append((off, float(vpp[0]), float(vpp[1]), float(vpp[2])))
    return {
        "header": ["offset_mm", "primary_vpp", "secondary1_vpp", "secondary2_vpp"],
        "rows": rows,
    }


def on_axis_loop_field(radius_mm: float, z_mm: float, current_a: float,
                       turns: int = 1) -> float:
    """Closed-form |B| on the axis of one circular loop, tesla."""
    r = radius_mm * 1e-3
    z = z_mm * 1e-3
    return MU0 * current_a * turns * r**2 / (2.0 * (r**2 + z**2) ** 1.5)

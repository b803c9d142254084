"""3D kinematics of the UAV and angular geometry between the UAV and ground stations.

Positions are plain numpy arrays of shape (3,) in meters; velocities and
accelerations use the same layout in m/s and m/s^2. All functions here are
pure and safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np

from uavthz.errors import GeometryDegenerateError, InvalidInputError

Vec3 = np.ndarray


def vec3(x: float, y: float, z: float) -> Vec3:
    """Build a finite 3-vector, rejecting NaN/Inf components."""
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"non-finite vector components: {v}")
    return v


def as_vec3(v) -> Vec3:
    """Coerce to a finite (3,) float array."""
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise InvalidInputError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"non-finite vector components: {a}")
    return a


@dataclass
class KinematicLimits:
    """Speed, acceleration and altitude envelope of the vehicle."""

    v_max: float = 8.0    # m/s
    a_max: float = 4.0    # m/s^2
    h_min: float = 30.0   # m
    h_max: float = 130.0  # m

    def __post_init__(self):
        if self.v_max <= 0 or self.a_max <= 0:
            raise InvalidInputError("v_max and a_max must be positive")
        if not 0 < self.h_min < self.h_max:
            raise InvalidInputError("need 0 < h_min < h_max")


@dataclass
class UavKinematicState:
    """Instantaneous position (m), velocity (m/s) and acceleration (m/s^2)."""

    position: Vec3
    velocity: Vec3
    acceleration: Vec3

    def __post_init__(self):
        self.position = as_vec3(self.position)
        self.velocity = as_vec3(self.velocity)
        self.acceleration = as_vec3(self.acceleration)


def update_position(state: UavKinematicState, dt: float) -> Vec3:
    """Advance the position by dt under constant acceleration.

    Returns p + v*dt + 0.5*a*dt**2 componentwise. Altitude clamping is the
    caller's responsibility.
    """
    if not np.isfinite(dt) or dt <= 0:
        raise InvalidInputError(f"dt must be positive and finite, got {dt}")
    return state.position + state.velocity * dt + 0.5 * state.acceleration * dt * dt


def _axis_angle(u: float, a: float, b: float, z: float) -> float:
    # Angle between the (a - u, -z) and (b - u, -z) directions in one
    # vertical plane, written in the law-of-cosines form with the acos
    # argument clamped against floating-point overshoot.
    da, db = u - a, u - b
    num = da * da + db * db + 2.0 * z * z - (a - b) ** 2
    den = 2.0 * np.sqrt((da * da + z * z) * (db * db + z * z))
    return float(np.arccos(np.clip(num / den, -1.0, 1.0)))


def spatial_angles(uav: Vec3, s_i: Vec3, s_j: Vec3) -> tuple[float, float]:
    """Per-axis angular separation between the links to two ground stations.

    Returns (theta_x, theta_y), each in [0, pi]: the angles between the two
    link directions projected onto the x-z and y-z vertical planes.
    """
    uav, s_i, s_j = as_vec3(uav), as_vec3(s_i), as_vec3(s_j)
    if uav[2] <= 0:
        raise GeometryDegenerateError(f"UAV altitude must be positive, got {uav[2]}")
    tx = _axis_angle(uav[0], s_i[0], s_j[0], uav[2])
    ty = _axis_angle(uav[1], s_i[1], s_j[1], uav[2])
    return tx, ty


def elevation_angle(uav: Vec3, sbs: Vec3) -> float:
    """Elevation of the UAV as seen from a ground station, in (0, pi/2].

    Directly overhead (zero horizontal offset) returns exactly pi/2.
    """
    uav, sbs = as_vec3(uav), as_vec3(sbs)
    if uav[2] <= 0:
        raise GeometryDegenerateError(f"UAV altitude must be positive, got {uav[2]}")
    horiz = float(np.hypot(uav[0] - sbs[0], uav[1] - sbs[1]))
    return float(np.arctan2(uav[2], horiz))


def link_length(uav: Vec3, sbs: Vec3) -> float:
    """Euclidean distance between the two endpoints."""
    return float(np.linalg.norm(as_vec3(uav) - as_vec3(sbs)))


def min_pair_separation(uav: Vec3, sbs_positions) -> float:
    """Smallest pairwise link separation over all station pairs.

    Each pair is scored by the larger of its two per-axis angles (a beam
    suppresses an interferer once either axis offset leaves the main lobe),
    and the minimum over pairs is returned. Requires at least two stations.
    """
    positions = [as_vec3(p) for p in sbs_positions]
    if len(positions) < 2:
        raise InvalidInputError("need at least two stations for pairwise separation")
    best = np.inf
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            tx, ty = spatial_angles(uav, positions[i], positions[j])
            best = min(best, max(tx, ty))
    return float(best)


def trajectory_time(waypoints, speeds) -> float:
    """Total travel time along a piecewise-linear path, one speed per segment."""
    pts = [as_vec3(w) for w in waypoints]
    spd = [float(s) for s in speeds]
    if len(pts) != len(spd) + 1:
        raise InvalidInputError(
            f"{len(pts)} waypoints need {max(len(pts) - 1, 0)} speeds, got {len(spd)}"
        )
    if any(not np.isfinite(s) or s <= 0 for s in spd):
        raise InvalidInputError("segment speeds must be positive and finite")
    total = 0.0
    for k, v in enumerate(spd):
        total += float(np.linalg.norm(pts[k + 1] - pts[k])) / v
    return total

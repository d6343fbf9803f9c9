"""Kinematic bicycle ego vehicle with first-order actuator lag."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EGO_LENGTH = 4.0
EGO_WIDTH = 1.8
EGO_REAR_OVERHANG = 0.5      # body extent behind the rear axle
STEER_MAX_RAD = 0.7


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = np.arctan2(np.sin(theta), np.cos(theta))
    if w <= -np.pi:
        w = np.pi
    return float(w)


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    steer: float = 0.0            # current steering angle, rad
    wheelbase: float = 2.5

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def heading_vec(self) -> np.ndarray:
        return np.array([np.cos(self.heading), np.sin(self.heading)])

    def body_corners(self) -> np.ndarray:
        """Footprint rectangle; rear axle sits EGO_REAR_OVERHANG from the back."""
        u = self.heading_vec()
        n = np.array([-u[1], u[0]])
        rear = self.position - EGO_REAR_OVERHANG * u
        front = rear + EGO_LENGTH * u
        hw = EGO_WIDTH / 2
        return np.array([front + hw * n, front - hw * n, rear - hw * n, rear + hw * n])

    def front_bumper(self) -> np.ndarray:
        return self.position + (EGO_LENGTH - EGO_REAR_OVERHANG) * self.heading_vec()


def step_dynamics(state: VehicleState, steering_norm: float, speed_cmd: float,
                  dt: float, tau_steer: float = 0.15, tau_speed: float = 0.6) -> VehicleState:
    """Advance one tick: actuators lag toward setpoints, then bicycle update.

    ``steering_norm`` is in [-1, 1] (scaled by STEER_MAX_RAD); non-positive
    time constants disable the corresponding lag."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta_cmd = float(np.clip(steering_norm, -1.0, 1.0)) * STEER_MAX_RAD
    v_cmd = max(0.0, float(speed_cmd))

    if tau_steer > 0:
        steer = state.steer + (delta_cmd - state.steer) * (1.0 - np.exp(-dt / tau_steer))
    else:
        steer = delta_cmd
    if tau_speed > 0:
        speed = state.speed + (v_cmd - state.speed) * (1.0 - np.exp(-dt / tau_speed))
    else:
        speed = v_cmd
    speed = max(0.0, speed)

    x = state.x + speed * np.cos(state.heading) * dt
    y = state.y + speed * np.sin(state.heading) * dt
    heading = wrap_angle(state.heading + (speed / state.wheelbase) * np.tan(steer) * dt)
    return replace(state, x=float(x), y=float(y), heading=heading,
                   speed=float(speed), steer=float(steer))


def rects_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Separating-axis test for two convex quads."""
    for quad in (corners_a, corners_b):
        for i in range(4):
            edge = quad[(i + 1) % 4] - quad[i]
            axis = np.array([-edge[1], edge[0]])
            pa = corners_a @ axis
            pb = corners_b @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True

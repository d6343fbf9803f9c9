"""Ego-centric raster sensors: per-view semantic channels, depth, and
analytic rigid-motion optical flow for the front view."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vehicle import VehicleState

VIEW_FRONT, VIEW_LEFT, VIEW_RIGHT = 0, 1, 2
VIEW_NAMES = ("front", "left", "right")
CH_DRIVABLE, CH_MARKING, CH_OCCUPANCY = 0, 1, 2


@dataclass
class CameraRig:
    """Three top-down view boxes fixed to the ego frame.

    Each view is H rows of forward distance (row 0 nearest) by W columns of
    lateral position (column 0 leftmost), cell_m metres per cell, rotated by
    its yaw offset. Frustum depth is H*cell_m; half-width is W*cell_m/2."""
    h: int = 32
    w: int = 32
    cell_m: float = 0.5
    side_yaw_deg: float = 75.0

    def __post_init__(self):
        if self.h < 8 or self.w < 8:
            raise ValueError("raster resolution must be at least 8x8")
        self._offsets = {}
        rows = (np.arange(self.h) + 0.5) * self.cell_m
        cols = self.half_width_m - (np.arange(self.w) + 0.5) * self.cell_m
        f, lat = np.meshgrid(rows, cols, indexing="ij")
        base = np.stack([f.ravel(), lat.ravel()], axis=1)  # view frame: x fwd, y left
        for view, yaw in zip((VIEW_FRONT, VIEW_LEFT, VIEW_RIGHT), self.view_yaws_rad):
            c, s = np.cos(yaw), np.sin(yaw)
            rot = np.array([[c, -s], [s, c]])
            self._offsets[view] = base @ rot.T  # ego-frame offsets
        self._base_depth = np.minimum(
            np.hypot(base[:, 0], base[:, 1]), self.depth_m
        ).reshape(self.h, self.w).astype(np.float32)

    @property
    def depth_m(self) -> float:
        return self.h * self.cell_m

    @property
    def half_width_m(self) -> float:
        return self.w * self.cell_m / 2

    @property
    def view_yaws_rad(self):
        yaw = np.deg2rad(self.side_yaw_deg)
        return (0.0, yaw, -yaw)

    def world_points(self, view: int, ego: VehicleState) -> np.ndarray:
        c, s = np.cos(ego.heading), np.sin(ego.heading)
        rot = np.array([[c, -s], [s, c]])
        return ego.position + self._offsets[view] @ rot.T

    def raster_coords(self, view: int, ego: VehicleState, pts: np.ndarray) -> np.ndarray:
        """Continuous (row, col) coordinates of world points in a view."""
        yaw = self.view_yaws_rad[view]
        ang = ego.heading + yaw
        c, s = np.cos(ang), np.sin(ang)
        rel = pts - ego.position
        f = rel[:, 0] * c + rel[:, 1] * s
        lat = -rel[:, 0] * s + rel[:, 1] * c
        row = f / self.cell_m - 0.5
        col = (self.half_width_m - lat) / self.cell_m - 0.5
        return np.stack([row, col], axis=1)

    def rig_dict(self) -> dict:
        return {"h": self.h, "w": self.w, "cell_m": self.cell_m,
                "side_yaw_deg": self.side_yaw_deg}


@dataclass
class SensorBundle:
    """Per-tick observation: semantics (view, channel, H, W) in [0,1], depth
    (view, H, W) metres, front-view flow (2, H, W) in cells/tick, ego speed,
    tick index, active command."""
    semantics: np.ndarray
    depth: np.ndarray
    flow: np.ndarray
    ego_speed: float
    tick: int
    command: int


def _agent_corner_list(agents) -> list[np.ndarray]:
    out = []
    for a in agents:
        out.append(a.body_corners() if hasattr(a, "body_corners") else np.asarray(a))
    return out


def _points_in_quad(pts: np.ndarray, quad: np.ndarray) -> np.ndarray:
    # winding-agnostic: inside iff all edge cross products share a sign
    neg = np.ones(len(pts), dtype=bool)
    pos = np.ones(len(pts), dtype=bool)
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        edge = b - a
        rel = pts - a
        cross = edge[0] * rel[:, 1] - edge[1] * rel[:, 0]
        neg &= cross <= 1e-12
        pos &= cross >= -1e-12
    return neg | pos


def render_views(network, ego: VehicleState, agents, rig: CameraRig,
                 tick: int = 0, command: int = 0,
                 flow: np.ndarray | None = None) -> SensorBundle:
    """Rasterize semantics and depth for all three views.

    Depth carries the clamped Euclidean distance from the ego origin for
    surface cells (off-road or occupied) and the frustum depth for free
    drivable cells."""
    n_views = 3
    sem = np.zeros((n_views, 3, rig.h, rig.w), dtype=np.float32)
    depth = np.zeros((n_views, rig.h, rig.w), dtype=np.float32)
    agent_quads = _agent_corner_list(agents)
    for view in range(n_views):
        pts = rig.world_points(view, ego)
        drivable = network.on_road_mask(pts)
        marking = network.marking_mask(pts)
        occupied = network.obstacle_mask(pts)
        for quad in agent_quads:
            occupied |= _points_in_quad(pts, quad)
        shape = (rig.h, rig.w)
        sem[view, CH_DRIVABLE] = drivable.reshape(shape)
        sem[view, CH_MARKING] = marking.reshape(shape)
        sem[view, CH_OCCUPANCY] = occupied.reshape(shape)
        surface = (~drivable | occupied).reshape(shape)
        depth[view] = np.where(surface, rig._base_depth, np.float32(rig.depth_m))
    if flow is None:
        flow = np.zeros((2, rig.h, rig.w), dtype=np.float32)
    return SensorBundle(semantics=sem, depth=depth, flow=flow,
                        ego_speed=float(ego.speed), tick=tick, command=command)


def compute_flow(prev_ego: VehicleState, curr_ego: VehicleState,
                 prev_agents, curr_agents, rig: CameraRig) -> np.ndarray:
    """Front-view displacement, in raster cells per tick, of the world point
    under each cell between consecutive ticks. Cells covered by a moving
    agent displace with that agent (translation)."""
    pts = rig.world_points(VIEW_FRONT, curr_ego)
    prev_pts = pts.copy()
    prev_quads = _agent_corner_list(prev_agents)
    for prev_state, curr_state, quad in zip(prev_agents, curr_agents, prev_quads):
        curr_quad = (curr_state.body_corners()
                     if hasattr(curr_state, "body_corners") else np.asarray(curr_state))
        delta = curr_quad.mean(axis=0) - quad.mean(axis=0)
        covered = _points_in_quad(pts, curr_quad)
        prev_pts[covered] = pts[covered] - delta
    now_rc = rig.raster_coords(VIEW_FRONT, curr_ego, pts)
    prev_rc = rig.raster_coords(VIEW_FRONT, prev_ego, prev_pts)
    flow = (now_rc - prev_rc).astype(np.float32)
    return flow.T.reshape(2, rig.h, rig.w)

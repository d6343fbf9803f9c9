"""Drivable reference paths: lane centerlines joined by fillet arcs at
intersections, with arclength lookup and monotone progress tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLE_STEP_M = 0.25
DEFAULT_FILLET_RADIUS_M = 4.0

GO_STRAIGHT, TURN_LEFT, TURN_RIGHT = 0, 1, 2
COMMAND_NAMES = ("go-straight", "turn-left", "turn-right")


def classify_turn(u_in: np.ndarray, u_out: np.ndarray) -> int:
    """Signed angle between directions: straight within +/-30 deg, left
    beyond +30 deg, right below -30 deg."""
    ang = np.arctan2(u_in[0] * u_out[1] - u_in[1] * u_out[0],
                     u_in[0] * u_out[0] + u_in[1] * u_out[1])
    if ang > np.deg2rad(30):
        return TURN_LEFT
    if ang < -np.deg2rad(30):
        return TURN_RIGHT
    return GO_STRAIGHT


@dataclass
class NodeMark:
    """One intersection traversal along a route."""
    node: int
    command: int
    s_center: float          # arclength nearest the node center
    s_enter: float           # fillet start
    s_exit: float            # fillet end
    position: np.ndarray
    exit_edge: tuple         # (node, next_node)


@dataclass
class RoutePath:
    points: np.ndarray                  # (M, 2)
    cum_s: np.ndarray                   # (M,)
    marks: list[NodeMark] = field(default_factory=list)

    def __post_init__(self):
        seg = np.diff(self.points, axis=0)
        ln = np.linalg.norm(seg, axis=1)
        ln[ln == 0] = 1e-9
        self._dirs = seg / ln[:, None]

    @property
    def length(self) -> float:
        return float(self.cum_s[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = float(np.clip(s, 0.0, self.length))
        i = int(np.searchsorted(self.cum_s, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        t = s - self.cum_s[i]
        return self.points[i] + t * self._dirs[i]

    def tangent_at(self, s: float) -> np.ndarray:
        s = float(np.clip(s, 0.0, self.length))
        i = int(np.searchsorted(self.cum_s, s, side="right")) - 1
        i = min(max(i, 0), len(self._dirs) - 1)
        return self._dirs[i]

    def heading_at(self, s: float) -> float:
        u = self.tangent_at(s)
        return float(np.arctan2(u[1], u[0]))

    def curvature_in(self, s0: float, s1: float) -> float:
        """Max |curvature| over [s0, s1], from direction deltas."""
        i0 = max(int(np.searchsorted(self.cum_s, s0)) - 1, 0)
        i1 = min(int(np.searchsorted(self.cum_s, s1)) + 1, len(self._dirs) - 1)
        if i1 <= i0:
            return 0.0
        d = self._dirs[i0:i1 + 1]
        cross = np.abs(d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0])
        ds = np.diff(self.cum_s[i0:i1 + 2])[: len(cross)]
        ds[ds == 0] = 1e-9
        return float((cross / ds).max()) if len(cross) else 0.0


class RouteTracker:
    """Monotone projection of a vehicle onto a RoutePath."""

    SEARCH_AHEAD_M = 40.0
    SEARCH_BACK_M = 6.0

    def __init__(self, path: RoutePath):
        self.path = path
        self.idx = 0

    @property
    def s(self) -> float:
        return float(self.path.cum_s[self.idx])

    def set_s(self, s: float):
        self.idx = int(np.clip(np.searchsorted(self.path.cum_s, s), 0,
                               len(self.path.points) - 1))

    def update(self, position: np.ndarray) -> float:
        step = SAMPLE_STEP_M
        back = int(self.SEARCH_BACK_M / step)
        ahead = int(self.SEARCH_AHEAD_M / step)
        lo = max(0, self.idx - back)
        hi = min(len(self.path.points), self.idx + ahead)
        window = self.path.points[lo:hi]
        d = np.linalg.norm(window - position, axis=1)
        best = lo + int(np.argmin(d))
        if best > self.idx:
            self.idx = best
        elif best >= lo:
            self.idx = best  # allow small backward correction within window
        return self.s

    def lateral_offset(self, position: np.ndarray) -> float:
        """Signed offset from the path (positive = left of travel)."""
        p0 = self.path.points[self.idx]
        u = self.path.tangent_at(self.s)
        rel = position - p0
        return float(u[0] * rel[1] - u[1] * rel[0])

    def distance_to_end(self) -> float:
        return self.path.length - self.s


def _line_intersection(p1, u1, p2, u2):
    det = u1[0] * (-u2[1]) - u1[1] * (-u2[0])
    if abs(det) < 1e-9:
        return None
    rhs = p2 - p1
    t = (rhs[0] * (-u2[1]) - rhs[1] * (-u2[0])) / det
    return p1 + t * u1


def _sample_segment(a, b, step=SAMPLE_STEP_M):
    d = np.linalg.norm(b - a)
    n = max(int(np.ceil(d / step)), 1)
    ts = np.linspace(0.0, 1.0, n, endpoint=False)
    return a[None, :] + ts[:, None] * (b - a)[None, :]


def _sample_arc(center, radius, a0, a1, step=SAMPLE_STEP_M):
    sweep = a1 - a0
    n = max(int(np.ceil(abs(sweep) * radius / step)), 2)
    angs = a0 + np.linspace(0.0, 1.0, n, endpoint=False) * sweep
    return center[None, :] + radius * np.stack([np.cos(angs), np.sin(angs)], axis=1)


def build_route_path(network, node_seq: list[int],
                     fillet_radius: float = DEFAULT_FILLET_RADIUS_M) -> RoutePath:
    """Lane-centerline path through ``node_seq`` with fillet arcs at interior
    nodes. Right-hand traffic: each directed edge's centerline is offset half
    a lane width to the right of the road axis."""
    legs = []  # per directed edge: (origin pt, unit dir, end pt)
    for i in range(len(node_seq) - 1):
        a, b = node_seq[i], node_seq[i + 1]
        ei = network.edge_between(a, b)
        if ei is None:
            raise ValueError(f"route nodes {a}->{b} share no edge")
        origin, u, length, lane_w = network.edge_frame(ei, a)
        n_right = np.array([u[1], -u[0]])
        off = (lane_w / 2) * n_right
        legs.append((origin + off, u, origin + off + u * length, a, b))

    pieces = []
    marks = []
    cursor = legs[0][0]
    for i in range(len(legs) - 1):
        p_in, u_in, q_in, _, node = legs[i]
        p_out, u_out, q_out, _, nxt = legs[i + 1]
        command = classify_turn(u_in, u_out)
        corner = _line_intersection(p_in, u_in, p_out, u_out)
        turn_ang = np.arctan2(u_in[0] * u_out[1] - u_in[1] * u_out[0],
                              float(np.dot(u_in, u_out)))
        if corner is None or abs(turn_ang) < np.deg2rad(8):
            # effectively straight: join directly (handles width changes)
            join_a = q_in
            join_b = p_out
            pieces.append(_sample_segment(cursor, join_a))
            enter_pt = join_a
            if np.linalg.norm(join_b - join_a) > 1e-6:
                pieces.append(_sample_segment(join_a, join_b))
            cursor = join_b
            exit_pt = join_b
        else:
            avail_in = float(np.dot(corner - cursor, u_in))
            avail_out = float(np.dot(q_out - corner, u_out))
            half = abs(turn_ang) / 2
            r = min(fillet_radius, 0.45 * min(avail_in, avail_out) / np.tan(half))
            r = max(r, 1.0)
            t = r * np.tan(half)
            t_in = corner - u_in * t
            t_out = corner + u_out * t
            sgn = 1.0 if turn_ang > 0 else -1.0
            n_in = sgn * np.array([-u_in[1], u_in[0]])
            center = t_in + r * n_in
            a0 = np.arctan2(*(t_in - center)[::-1])
            a1_raw = np.arctan2(*(t_out - center)[::-1])
            sweep = np.arctan2(np.sin(a1_raw - a0), np.cos(a1_raw - a0))
            pieces.append(_sample_segment(cursor, t_in))
            pieces.append(_sample_arc(center, r, a0, a0 + sweep))
            cursor = t_out
            enter_pt, exit_pt = t_in, t_out
        marks.append((node, command, enter_pt, exit_pt, nxt))
    pieces.append(_sample_segment(cursor, legs[-1][2]))
    pieces.append(legs[-1][2][None, :])

    points = np.concatenate(pieces, axis=0)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum_s = np.concatenate([[0.0], np.cumsum(seg)])

    path = RoutePath(points=points, cum_s=cum_s)
    node_marks = []
    for node, command, enter_pt, exit_pt, nxt in marks:
        d_enter = np.linalg.norm(points - enter_pt, axis=1)
        d_exit = np.linalg.norm(points - exit_pt, axis=1)
        d_node = np.linalg.norm(points - network.nodes[node], axis=1)
        node_marks.append(NodeMark(
            node=node, command=command,
            s_center=float(cum_s[int(np.argmin(d_node))]),
            s_enter=float(cum_s[int(np.argmin(d_enter))]),
            s_exit=float(cum_s[int(np.argmin(d_exit))]),
            position=network.nodes[node].copy(),
            exit_edge=(node, nxt)))
    path.marks = node_marks
    return path

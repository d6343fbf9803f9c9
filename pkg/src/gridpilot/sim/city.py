"""Grid-city road network: jittered lattice of straight two-way roads with
mixed lane widths, intersection pads, and kerbside parked obstacles."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CILM"
VERSION = 1

NARROW_LANE_M = 2.5
WIDE_LANE_M = 4.0
OBSTACLE_HALF_LEN = 2.25
OBSTACLE_HALF_WID = 0.9
MARKING_HALF_WIDTH = 0.22


class GenerationError(ValueError):
    """Degenerate geometry (overlapping roads / too-short edges)."""


class WorldFormatError(ValueError):
    pass


@dataclass
class Edge:
    a: int
    b: int
    lane_width: float

    @property
    def half_width(self) -> float:
        # two-way road, one lane per direction
        return self.lane_width


@dataclass
class Obstacle:
    center: tuple
    half_len: float
    half_wid: float
    heading: float

    def corners(self) -> np.ndarray:
        c, s = np.cos(self.heading), np.sin(self.heading)
        u = np.array([c, s])
        n = np.array([-s, c])
        p = np.asarray(self.center)
        hl, hw = self.half_len, self.half_wid
        return np.array([p + hl * u + hw * n, p + hl * u - hw * n,
                         p - hl * u - hw * n, p - hl * u + hw * n])


@dataclass
class RoadNetwork:
    nodes: np.ndarray                 # (N, 2) positions, m
    edges: list[Edge]
    obstacles: list[Obstacle]
    node_radius: np.ndarray           # (N,) intersection pad radius, m
    meta: dict = field(default_factory=dict)

    # -- derived geometry, cached ----------------------------------------------

    def __post_init__(self):
        self._edge_a = np.array([self.nodes[e.a] for e in self.edges], dtype=np.float64)
        self._edge_b = np.array([self.nodes[e.b] for e in self.edges], dtype=np.float64)
        d = self._edge_b - self._edge_a
        self._edge_len = np.linalg.norm(d, axis=1)
        self._edge_u = d / self._edge_len[:, None]
        self._edge_hw = np.array([e.half_width for e in self.edges])
        self._node_adj = [[] for _ in range(len(self.nodes))]
        for i, e in enumerate(self.edges):
            self._node_adj[e.a].append(i)
            self._node_adj[e.b].append(i)

    def incident_edges(self, node: int) -> list[int]:
        return self._node_adj[node]

    def edge_between(self, a: int, b: int) -> int | None:
        for i in self._node_adj[a]:
            e = self.edges[i]
            if {e.a, e.b} == {a, b}:
                return i
        return None

    def edge_frame(self, idx: int, start_node: int):
        """(origin, unit direction, length, lane width) of edge idx directed
        away from start_node."""
        e = self.edges[idx]
        if start_node == e.a:
            return self._edge_a[idx], self._edge_u[idx], self._edge_len[idx], e.lane_width
        return self._edge_b[idx], -self._edge_u[idx], self._edge_len[idx], e.lane_width

    # -- vectorized point queries ------------------------------------------------

    def _edge_coords(self, pts: np.ndarray):
        """Per-edge (along, lateral) coordinates for pts (n, 2)."""
        rel = pts[None, :, :] - self._edge_a[:, None, :]           # e, n, 2
        along = np.einsum("enk,ek->en", rel, self._edge_u)
        lateral = rel[:, :, 1] * self._edge_u[:, 0][:, None] - rel[:, :, 0] * self._edge_u[:, 1][:, None]
        return along, lateral

    def on_road_mask(self, pts: np.ndarray) -> np.ndarray:
        along, lateral = self._edge_coords(pts)
        hw = self._edge_hw[:, None]
        on_edge = (along >= 0) & (along <= self._edge_len[:, None]) & (np.abs(lateral) <= hw)
        mask = on_edge.any(axis=0)
        dn = np.linalg.norm(pts[None, :, :] - self.nodes[:, None, :], axis=2)
        mask |= (dn <= self.node_radius[:, None]).any(axis=0)
        return mask

    def marking_mask(self, pts: np.ndarray) -> np.ndarray:
        along, lateral = self._edge_coords(pts)
        on_line = ((along >= 0) & (along <= self._edge_len[:, None])
                   & (np.abs(lateral) <= MARKING_HALF_WIDTH))
        mask = on_line.any(axis=0)
        dn = np.linalg.norm(pts[None, :, :] - self.nodes[:, None, :], axis=2)
        mask &= ~(dn <= self.node_radius[:, None]).any(axis=0)
        return mask

    def obstacle_mask(self, pts: np.ndarray) -> np.ndarray:
        mask = np.zeros(len(pts), dtype=bool)
        for ob in self.obstacles:
            c, s = np.cos(ob.heading), np.sin(ob.heading)
            rel = pts - np.asarray(ob.center)
            x = rel[:, 0] * c + rel[:, 1] * s
            y = -rel[:, 0] * s + rel[:, 1] * c
            mask |= (np.abs(x) <= ob.half_len) & (np.abs(y) <= ob.half_wid)
        return mask

    def in_node_pad(self, p: np.ndarray) -> bool:
        return bool((np.linalg.norm(self.nodes - p, axis=1) <= self.node_radius).any())

    def locate(self, p: np.ndarray):
        """Nearest edge corridor: (edge index, along, signed lateral)."""
        pts = np.asarray(p, dtype=np.float64).reshape(1, 2)
        along, lateral = self._edge_coords(pts)
        along = along[:, 0]
        lateral = lateral[:, 0]
        clamped = np.clip(along, 0.0, self._edge_len)
        foot = self._edge_a + clamped[:, None] * self._edge_u
        dist = np.linalg.norm(pts[0] - foot, axis=1)
        # prefer edges whose corridor actually contains the point
        inside = (along >= 0) & (along <= self._edge_len)
        score = np.where(inside, np.abs(lateral), dist + 100.0)
        idx = int(np.argmin(score))
        return idx, float(along[idx]), float(lateral[idx])

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "meta": self.meta,
            "nodes": [[float(x), float(y)] for x, y in self.nodes],
            "edges": [[e.a, e.b, float(e.lane_width)] for e in self.edges],
            "obstacles": [[float(o.center[0]), float(o.center[1]),
                           float(o.half_len), float(o.half_wid), float(o.heading)]
                          for o in self.obstacles],
            "node_radius": [float(r) for r in self.node_radius],
        }

    def to_bytes(self) -> bytes:
        payload = json.dumps(self.to_json_dict(), sort_keys=True).encode("utf-8")
        return MAGIC + struct.pack("<II", VERSION, len(payload)) + payload

    @staticmethod
    def from_bytes(raw: bytes) -> "RoadNetwork":
        if raw[:4] != MAGIC:
            raise WorldFormatError(f"bad magic {raw[:4]!r}")
        version, n = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise WorldFormatError(f"unsupported version {version}")
        if len(raw) < 12 + n:
            raise WorldFormatError("truncated world file")
        doc = json.loads(raw[12:12 + n].decode("utf-8"))
        return RoadNetwork(
            nodes=np.array(doc["nodes"], dtype=np.float64),
            edges=[Edge(a, b, w) for a, b, w in doc["edges"]],
            obstacles=[Obstacle((x, y), hl, hw, th)
                       for x, y, hl, hw, th in doc["obstacles"]],
            node_radius=np.array(doc["node_radius"], dtype=np.float64),
            meta=doc["meta"],
        )

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @staticmethod
    def load(path) -> "RoadNetwork":
        with open(path, "rb") as f:
            return RoadNetwork.from_bytes(f.read())


def generate_grid_city(seed: int, rows: int, cols: int, spacing: float = 50.0,
                       jitter: float = 0.1, obstacle_density: float = 0.5,
                       narrow_fraction: float = 0.35) -> RoadNetwork:
    """Connected lattice city. ``jitter`` displaces nodes by up to that
    fraction of the spacing per axis; ``obstacle_density`` is the expected
    number of kerbside obstacles per 100 m of road."""
    if rows < 2 or cols < 2:
        raise GenerationError("rows and cols must be >= 2")
    if not (0.0 <= jitter < 0.4):
        raise GenerationError("jitter must be in [0, 0.4)")
    rng = np.random.default_rng(seed)

    nodes = np.zeros((rows * cols, 2))
    for r in range(rows):
        for c in range(cols):
            off = rng.uniform(-jitter * spacing, jitter * spacing, size=2) if jitter > 0 else np.zeros(2)
            nodes[r * cols + c] = (c * spacing + off[0], r * spacing + off[1])

    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    edge_objs = [Edge(a, b, NARROW_LANE_M if rng.random() < narrow_fraction else WIDE_LANE_M)
                 for a, b in edges]

    node_radius = np.zeros(len(nodes))
    for i in range(len(nodes)):
        hw = [edge_objs[k].half_width for k, e in enumerate(edge_objs)
              if e.a == i or e.b == i]
        node_radius[i] = max(6.5, max(hw) + 4.5)

    # geometry sanity: pads must not swallow whole edges or each other
    for e in edge_objs:
        ln = np.linalg.norm(nodes[e.a] - nodes[e.b])
        if ln < node_radius[e.a] + node_radius[e.b] + 8.0:
            raise GenerationError(
                f"edge {e.a}-{e.b} too short ({ln:.1f} m) for its intersection pads")

    obstacles = []
    for e in edge_objs:
        pa, pb = nodes[e.a], nodes[e.b]
        d = pb - pa
        length = float(np.linalg.norm(d))
        u = d / length
        heading = float(np.arctan2(u[1], u[0]))
        n_right = np.array([u[1], -u[0]])
        lo = node_radius[e.a] + 10.0
        hi = length - node_radius[e.b] - 10.0
        count = rng.poisson(obstacle_density * length / 100.0) if obstacle_density > 0 else 0
        for _ in range(count):
            if hi <= lo:
                break
            s = rng.uniform(lo, hi)
            side = 1.0 if rng.random() < 0.5 else -1.0
            # keep the lane centreline corridor clear for an ego half-width
            max_intr = max(0.0, e.half_width - e.lane_width / 2 - 0.9 - 0.25)
            intrusion = min(rng.uniform(0.15, 0.9), max_intr)
            lat = e.half_width + OBSTACLE_HALF_WID - intrusion
            center = pa + s * u + side * lat * n_right
            obstacles.append(Obstacle((float(center[0]), float(center[1])),
                                      OBSTACLE_HALF_LEN, OBSTACLE_HALF_WID, heading))

    meta = {"seed": seed, "rows": rows, "cols": cols, "spacing": spacing,
            "jitter": jitter, "obstacle_density": obstacle_density,
            "narrow_fraction": narrow_fraction}
    return RoadNetwork(nodes=nodes, edges=edge_objs, obstacles=obstacles,
                       node_radius=node_radius, meta=meta)

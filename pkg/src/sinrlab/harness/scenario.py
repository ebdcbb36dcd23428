"""Scenario generation and JSON persistence."""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..sinr import SinrParams, Station, build_comm_graph, pivotal_cell, transmission_range
from ..ssf import DilutionConfig

KINDS = ("random_geometric", "line", "snowball", "two_box", "grid")
CONNECT_RETRIES = 500
BOUNDARY_MARGIN = 1e-6
FORMAT_VERSION = 1


class Unsatisfiable(ValueError):
    pass


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    params: SinrParams
    n: int
    n_labels: int
    stations: tuple[Station, ...]
    seed: int = 0
    dilution: DilutionConfig = field(default_factory=DilutionConfig)
    ssf_strategy: str = "greedy"
    kind: str = "custom"

    @property
    def labels(self) -> list[int]:
        return [s.label for s in self.stations]

    @property
    def awake(self) -> list[int]:
        return sorted(s.label for s in self.stations if s.awake)

    def graph(self):
        return build_comm_graph(self.stations, self.params)

    def validate(self, require_connected: bool = True) -> None:
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise ScenarioError("duplicate labels")
        if any(not 1 <= u <= self.n_labels for u in labels):
            raise ScenarioError(f"labels must lie in [1, {self.n_labels}]")
        if len(self.stations) > self.n:
            raise ScenarioError(f"{len(self.stations)} stations exceed n = {self.n}")
        if len({s.pos for s in self.stations}) != len(self.stations):
            raise ScenarioError("two stations share a position")
        if require_connected and not self.graph().connected:
            raise ScenarioError("communication graph is disconnected")

    def to_dict(self) -> dict:
        p = self.params
        return {
            "format": FORMAT_VERSION, "id": self.id, "kind": self.kind,
            "alpha": p.alpha, "beta": p.beta, "noise": p.noise, "epsilon": p.epsilon, "power": p.power,
            "n": self.n, "N": self.n_labels, "seed": self.seed,
            "k_density": self.dilution.k_density, "d_silence": self.dilution.d_silence,
            "ssf": self.ssf_strategy,
            "stations": [{"label": s.label, "x": s.x, "y": s.y, "awake": s.awake} for s in self.stations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            params = SinrParams(alpha=d["alpha"], beta=d["beta"], noise=d["noise"],
                                epsilon=d["epsilon"], power=d["power"])
            stations = tuple(Station(int(s["label"]), float(s["x"]), float(s["y"]), bool(s.get("awake", True)))
                             for s in d["stations"])
            return cls(id=str(d.get("id", "scenario")), params=params, n=int(d["n"]), n_labels=int(d["N"]),
                       stations=stations, seed=int(d.get("seed", 0)),
                       dilution=DilutionConfig(int(d.get("k_density", 1000)), int(d.get("d_silence", 2))),
                       ssf_strategy=d.get("ssf", "greedy"), kind=d.get("kind", "custom"))
        except KeyError as e:
            raise ScenarioError(f"missing field {e.args[0]!r}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def config_hash(self, **extra) -> str:
        blob = json.dumps({"scenario": self.to_dict(), "run": extra}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def loads(text: str) -> Scenario:
    return Scenario.from_dict(json.loads(text))


def save(scenario: Scenario, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scenario.dumps())
    return path


def load(path) -> Scenario:
    return loads(Path(path).read_text())


def _snap(points: list[tuple[float, float]], cell: float) -> list[tuple[float, float]]:
    """Translate the whole configuration so no coordinate sits on a grid line.

    Only the translation changes, so pairwise distances are preserved up to
    floating-point rounding.
    """
    margin = BOUNDARY_MARGIN * cell
    lo_x = min(p[0] for p in points)
    lo_y = min(p[1] for p in points)
    # Whole-cell shifts keep every station in the same relative box.
    dx = (1 - math.floor(lo_x / cell)) * cell
    dy = (1 - math.floor(lo_y / cell)) * cell
    moved = [(x + dx, y + dy) for x, y in points]
    if all(margin <= (c / cell) % 1.0 * cell <= cell - margin for p in moved for c in p):
        return moved
    for attempt in range(1000):
        shift = cell * (0.5 + 0.37 * attempt % 1.0) if attempt else cell * 0.5
        dx = -lo_x + cell + shift
        dy = -lo_y + cell + (shift * 1.618) % cell
        moved = [(x + dx, y + dy) for x, y in points]
        if all(margin <= (c / cell) % 1.0 * cell <= cell - margin for p in moved for c in p):
            return moved
    raise Unsatisfiable("could not place the configuration away from grid lines")


def _labels(n: int, n_labels: int, rng: random.Random) -> list[int]:
    return sorted(rng.sample(range(1, n_labels + 1), n))


def _build(kind: str, points, params: SinrParams, n: int, n_labels: int | None, seed: int,
           awake: set[int] | None, rng: random.Random, scenario_id: str | None, **cfg) -> Scenario:
    n_labels = n_labels or 2 * max(1, n)
    if n_labels < len(points):
        raise Unsatisfiable(f"N = {n_labels} cannot label {len(points)} stations")
    points = _snap(points, pivotal_cell(params))
    labels = _labels(len(points), n_labels, rng)
    awake_idx = {0} if awake is None else awake
    stations = tuple(Station(labels[i], x, y, i in awake_idx) for i, (x, y) in enumerate(points))
    sid = scenario_id or f"{kind}-n{len(points)}-s{seed}"
    return Scenario(sid, params, max(n, len(points)), n_labels, stations, seed, kind=kind, **cfg)


def generate(kind: str, params: SinrParams | None = None, seed: int = 0, n: int = 8,
             n_labels: int | None = None, *, scenario_id: str | None = None, all_awake: bool = False,
             side: float | None = None, k: int = 3, slots: int = 3, max_per_box: int | None = None,
             **cfg) -> Scenario:
    """Build a connected scenario. The first placed station is the only awake one unless `all_awake`.

    `max_per_box` caps how many random_geometric stations share a pivotal box.
    """
    params = params or SinrParams.with_unit_range()
    r = transmission_range(params)
    cell = pivotal_cell(params)
    rng = random.Random(seed)
    if kind not in KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}")

    def finish(points, awake=None):
        if all_awake:
            awake = set(range(len(points)))
        sc = _build(kind, points, params, len(points), n_labels, seed, awake, rng, scenario_id, **cfg)
        if not sc.graph().connected:
            raise Unsatisfiable(f"{kind} placement is disconnected")
        return sc

    if kind == "line":
        return finish([(i * r, 0.0) for i in range(n)])
    if kind == "grid":
        cols = max(1, math.ceil(math.sqrt(n)))
        return finish([((i % cols) * 0.7 * r, (i // cols) * 0.7 * r) for i in range(n)])
    if kind == "snowball":
        # Clusters of 1, 2, 4, ... stations, consecutive clusters within range.
        points = []
        for j in range(slots):
            cx = j * 0.8 * r
            for _ in range(2 ** j):
                ang, rad = rng.uniform(0, 2 * math.pi), 0.05 * r * math.sqrt(rng.random())
                points.append((cx + rad * math.cos(ang), rad * math.sin(ang)))
        return finish(points)
    if kind == "two_box":
        # k stations in each of two side-by-side pivotal boxes.
        for _ in range(CONNECT_RETRIES):
            points = [((b + rng.uniform(0.05, 0.95)) * cell, rng.uniform(0.05, 0.95) * cell)
                      for b in range(2) for _ in range(k)]
            if build_comm_graph([Station(i + 1, x, y) for i, (x, y) in enumerate(points)], params).connected:
                return finish(points)
        raise Unsatisfiable("no connected two-box placement")

    # random_geometric: uniform in a square sized for moderate density.
    side = side if side is not None else r * max(1.0, 0.55 * math.sqrt(n))
    for _ in range(CONNECT_RETRIES):
        points = _capped_points(rng, n, side, cell, max_per_box)
        if build_comm_graph([Station(i + 1, x, y) for i, (x, y) in enumerate(points)], params).connected:
            if len({p for p in points}) == len(points):
                return finish(points)
    raise Unsatisfiable(f"no connected placement of {n} stations in side {side:.3f} after {CONNECT_RETRIES} tries")


def _capped_points(rng: random.Random, n: int, side: float, cell: float, cap: int | None):
    points, per_box = [], {}
    while len(points) < n:
        x, y = rng.uniform(0, side), rng.uniform(0, side)
        if cap is not None:
            box = (math.floor(x / cell), math.floor(y / cell))
            if per_box.get(box, 0) >= cap:
                continue
            per_box[box] = per_box.get(box, 0) + 1
        points.append((x, y))
    return points


def with_awake(scenario: Scenario, awake) -> Scenario:
    awake = set(awake)
    return replace(scenario, stations=tuple(replace(s, awake=s.label in awake) for s in scenario.stations))
